/* scarcenet: semi-supervised keypoint estimation for scarce annotations. */
#ifndef SCARCENET_SCARCENET_H
#define SCARCENET_SCARCENET_H

#include <stddef.h>
#include <stdint.h>

#if defined(SCARCENET_BUILDING_LIBRARY)
#define SN_API __attribute__((visibility("default")))
#else
#define SN_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes double as CLI exit codes. */
typedef enum sn_status {
  SN_OK = 0,
  SN_ERR_INTERNAL = 1,
  SN_ERR_CONFIG = 2,  /* bad configuration or argument */
  SN_ERR_DATA = 3,    /* missing/corrupt files, format errors */
  SN_ERR_NUMERIC = 4  /* NaN or infinity during training */
} sn_status;

typedef struct sn_config sn_config;
typedef struct sn_model sn_model;

typedef void (*sn_log_fn)(const char* message, void* user);

SN_API const char* sn_version(void);

/* Message of the last failed call on this thread; "" if none. */
SN_API const char* sn_last_error(void);

/* Progress messages of long-running calls. NULL disables logging. */
SN_API void sn_set_log_callback(sn_log_fn fn, void* user);

/* Worker threads for per-sample work; 0 means all cores. Results do not
 * depend on this setting. */
SN_API void sn_set_num_threads(int n);

/* ---- configuration ---------------------------------------------------- */

SN_API sn_status sn_config_new(sn_config** out);
SN_API sn_status sn_config_load(const char* path, sn_config** out);
SN_API sn_status sn_config_parse(const char* text, sn_config** out);
SN_API sn_status sn_config_set(sn_config* cfg, const char* key, const char* value);
/* Copies the value, NUL-terminated, into buf when it fits; *needed (optional)
 * receives the required size including the terminator. */
SN_API sn_status sn_config_get(const sn_config* cfg, const char* key, char* buf, size_t buflen,
                               size_t* needed);
SN_API sn_status sn_config_save(const sn_config* cfg, const char* path);
SN_API void sn_config_free(sn_config* cfg);

/* ---- datasets --------------------------------------------------------- */

SN_API sn_status sn_dataset_generate(int species, int per_species, uint64_t seed, const char* out_dir);

/* Re-tags training records as labeled/unlabeled. With family_group == NULL,
 * labels_per_species random images of every species are labeled; otherwise
 * every training image of the listed species is labeled and the rest are
 * not. out_manifest may be NULL to rewrite `manifest` in place. */
SN_API sn_status sn_dataset_split(const char* manifest, int labels_per_species, const int* family_group,
                                  size_t group_len, uint64_t seed, const char* out_manifest);

/* ---- training --------------------------------------------------------- */

/* Writes stage1.ckpt (best validation PCK), stage1_final.ckpt,
 * stage1_log.csv and config.txt into out_dir. */
SN_API sn_status sn_train_stage1(const sn_config* cfg, const char* data_dir, const char* out_dir);

SN_API sn_status sn_pseudo_label(const char* checkpoint, const char* data_dir, double tau_conf,
                                 const char* out_path);

/* Writes student.ckpt, teacher.ckpt (with a mean teacher), stage2_log.csv,
 * masks.jsonl and config.txt into out_dir. */
SN_API sn_status sn_train_stage2(const sn_config* cfg, const char* data_dir, const char* stage1_checkpoint,
                                 const char* pseudo_labels, const char* out_dir);

/* ---- evaluation ------------------------------------------------------- */

/* `checkpoint` is a checkpoint file or a stage-2 output directory. With
 * use_teacher set, teacher.ckpt next to (or inside) it is preferred when it
 * exists. split is "val" or "test". csv_out may be NULL; pck05/pck10 may be
 * NULL. */
SN_API sn_status sn_evaluate(const char* checkpoint, const char* data_dir, const char* split, int use_teacher,
                             const char* csv_out, double* pck05, double* pck10);

/* toggles: comma-separated subset of rsr, mt, mb, aug, ssl. Writes
 * ablation.csv, ablation.txt and per-run logs into out_dir. */
SN_API sn_status sn_ablate(const sn_config* cfg, const char* toggles, const uint64_t* seeds, size_t n_seeds,
                           const char* data_dir, const char* out_dir);

SN_API sn_status sn_plot(const char* metrics_csv, const char* svg_out);

/* ---- models ----------------------------------------------------------- */

SN_API sn_status sn_model_init(int joints, int shared_head, uint64_t seed, sn_model** out);
SN_API sn_status sn_model_load(const char* path, sn_model** out);
SN_API sn_status sn_model_save(const sn_model* model, const char* path);
SN_API int sn_model_joints(const sn_model* model);
SN_API size_t sn_model_parameter_count(const sn_model* model);

/* image: 3 x height x width floats in [0, 1], channel-major. xy receives
 * 2 * joints image-pixel coordinates, scores receives joints channel maxima
 * (a score <= 0 means the joint was not found). */
SN_API sn_status sn_model_predict(const sn_model* model, const float* image, int height, int width, float* xy,
                                  float* scores);
SN_API void sn_model_free(sn_model* model);

#ifdef __cplusplus
}
#endif

#endif /* SCARCENET_SCARCENET_H */
