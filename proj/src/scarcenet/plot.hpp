#pragma once

#include <filesystem>
#include <string>

namespace scarcenet {

/// Line charts of every numeric column of a CSV against its first column,
/// one panel per column. Empty cells are gaps. Throws DataError when the CSV
/// has no data rows or no numeric column.
std::string render_svg(const std::string& csv_text, const std::string& title = "");

void plot_metrics(const std::filesystem::path& csv, const std::filesystem::path& svg);

}  // namespace scarcenet
