#include "scarcenet/plot.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <vector>

#include "scarcenet/errors.hpp"

namespace scarcenet {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
  std::vector<bool> gap_before;
};

}  // namespace

std::string render_svg(const std::string& csv_text, const std::string& title) {
  std::stringstream ss(csv_text);
  std::string line;
  if (!std::getline(ss, line)) throw DataError("plot: empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header.size() < 2) throw DataError("plot: need at least two columns");

  std::vector<std::vector<std::string>> rows;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw DataError("plot: CSV has no data rows");

  std::vector<Series> series;
  for (std::size_t c = 1; c < header.size(); ++c) {
    Series s{header[c], {}, {}};
    bool gap = false;
    for (const auto& r : rows) {
      const auto x = r.empty() ? std::nullopt : number(r[0]);
      const auto y = c < r.size() ? number(r[c]) : std::nullopt;
      if (!x || !y) {
        gap = !s.points.empty();
        continue;
      }
      s.points.emplace_back(*x, *y);
      s.gap_before.push_back(gap);
      gap = false;
    }
    if (!s.points.empty()) series.push_back(std::move(s));
  }
  if (series.empty()) throw DataError("plot: no numeric columns");

  constexpr int kPanelW = 360, kPanelH = 200, kCols = 2, kMargin = 48, kTop = 36;
  const int panel_rows = static_cast<int>((series.size() + kCols - 1) / kCols);
  const int width = kCols * (kPanelW + kMargin) + kMargin;
  const int height = kTop + panel_rows * (kPanelH + kMargin) + kMargin / 2;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    svg += "<text x=\"" + std::to_string(width / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" +
           escape(title) + "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const Series& s = series[i];
    const int px = kMargin + static_cast<int>(i % kCols) * (kPanelW + kMargin);
    const int py = kTop + static_cast<int>(i / kCols) * (kPanelH + kMargin);
    double x0 = s.points.front().first, x1 = x0, y0 = s.points.front().second, y1 = y0;
    for (const auto& [x, y] : s.points) {
      x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
    if (x1 == x0) x1 = x0 + 1.0;
    if (y1 == y0) {
      y0 -= 0.5;
      y1 += 0.5;
    }
    const auto sx = [&](double x) { return px + (x - x0) / (x1 - x0) * kPanelW; };
    const auto sy = [&](double y) { return py + kPanelH - (y - y0) / (y1 - y0) * kPanelH; };

    svg += "<g>\n<rect x=\"" + std::to_string(px) + "\" y=\"" + std::to_string(py) + "\" width=\"" +
           std::to_string(kPanelW) + "\" height=\"" + std::to_string(kPanelH) +
           "\" fill=\"none\" stroke=\"#999\"/>\n";
    svg += "<text x=\"" + std::to_string(px + kPanelW / 2) + "\" y=\"" + std::to_string(py - 6) +
           "\" text-anchor=\"middle\">" + escape(s.name) + "</text>\n";
    svg += "<text x=\"" + std::to_string(px - 4) + "\" y=\"" + std::to_string(py + 10) +
           "\" text-anchor=\"end\">" + fmt("%.4g", y1) + "</text>\n";
    svg += "<text x=\"" + std::to_string(px - 4) + "\" y=\"" + std::to_string(py + kPanelH) +
           "\" text-anchor=\"end\">" + fmt("%.4g", y0) + "</text>\n";
    svg += "<text x=\"" + std::to_string(px) + "\" y=\"" + std::to_string(py + kPanelH + 14) + "\">" +
           fmt("%.4g", x0) + "</text>\n";
    svg += "<text x=\"" + std::to_string(px + kPanelW) + "\" y=\"" + std::to_string(py + kPanelH + 14) +
           "\" text-anchor=\"end\">" + fmt("%.4g", x1) + "</text>\n";
    std::string path;
    for (std::size_t k = 0; k < s.points.size(); ++k) {
      path += (k == 0 || s.gap_before[k]) ? "M" : "L";
      path += fmt("%.2f", sx(s.points[k].first)) + "," + fmt("%.2f", sy(s.points[k].second)) + " ";
    }
    svg += "<path d=\"" + path + "\" fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.5\"/>\n";
    if (s.points.size() == 1)
      svg += "<circle cx=\"" + fmt("%.2f", sx(s.points[0].first)) + "\" cy=\"" +
             fmt("%.2f", sy(s.points[0].second)) + "\" r=\"2.5\" fill=\"#1f5fa8\"/>\n";
    svg += "</g>\n";
  }
  svg += "</svg>\n";
  return svg;
}

void plot_metrics(const std::filesystem::path& csv, const std::filesystem::path& svg) {
  std::ifstream is(csv);
  if (!is) throw DataError("plot: cannot read " + csv.string());
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string out = render_svg(ss.str(), csv.filename().string());
  std::ofstream os(svg);
  if (!os) throw DataError("plot: cannot write " + svg.string());
  os << out;
}

}  // namespace scarcenet
