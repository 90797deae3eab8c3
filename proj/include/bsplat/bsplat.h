#ifndef BSPLAT_BSPLAT_H
#define BSPLAT_BSPLAT_H

/* C interface to the bsplat library. Every call returns a bsplat_status;
 * on failure bsplat_last_error() holds a one-line message for the calling
 * thread. Strings returned through char** are owned by the caller and must
 * be released with bsplat_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define BSPLAT_API __declspec(dllexport)
#else
#define BSPLAT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bsplat_status {
  BSPLAT_OK = 0,
  BSPLAT_ERR_CONFIG = 1,
  BSPLAT_ERR_DATA = 2,
  BSPLAT_ERR_DIVERGENCE = 3,
  BSPLAT_ERR_IO = 4,
  BSPLAT_ERR_INVALID_ARGUMENT = 5,
  BSPLAT_ERR_INTERNAL = 6
} bsplat_status;

typedef struct bsplat_config bsplat_config;
typedef struct bsplat_dataset bsplat_dataset;
typedef struct bsplat_scene bsplat_scene;

BSPLAT_API const char* bsplat_version(void);
BSPLAT_API const char* bsplat_last_error(void);
BSPLAT_API const char* bsplat_status_name(bsplat_status status);
BSPLAT_API void bsplat_string_free(char* s);

/* Training configuration (JSON). Unknown keys are a config error. */
BSPLAT_API bsplat_status bsplat_config_default(bsplat_config** out);
BSPLAT_API bsplat_status bsplat_config_load(const char* path, bsplat_config** out);
BSPLAT_API bsplat_status bsplat_config_parse(const char* json, bsplat_config** out);
BSPLAT_API bsplat_status bsplat_config_to_json(const bsplat_config* config, char** out_json);
BSPLAT_API bsplat_status bsplat_config_set_seed(bsplat_config* config, uint64_t seed);
BSPLAT_API bsplat_status bsplat_config_set_workers(bsplat_config* config, int workers);
BSPLAT_API bsplat_status bsplat_config_set_tau(bsplat_config* config, double tau);
BSPLAT_API bsplat_status bsplat_config_get_tau(const bsplat_config* config, double* out);
/* `id:count,...` (optionally prefixed `region=`); id 0 is the background. */
BSPLAT_API bsplat_status bsplat_config_set_budget(bsplat_config* config, const char* spec);
BSPLAT_API void bsplat_config_free(bsplat_config* config);

/* Dataset directory: poses.txt + images/, optional aux_poses.txt +
 * aux_images/, heldout_poses.txt + heldout_images/, points.ply,
 * partition.json. */
BSPLAT_API bsplat_status bsplat_dataset_load(const char* dir, bsplat_dataset** out);
BSPLAT_API bsplat_status bsplat_dataset_view_counts(const bsplat_dataset* data, size_t* primary, size_t* aux,
                                                    size_t* heldout);
BSPLAT_API void bsplat_dataset_free(bsplat_dataset* data);

BSPLAT_API bsplat_status bsplat_scene_load(const char* ply_path, bsplat_scene** out);
BSPLAT_API bsplat_status bsplat_scene_save(const bsplat_scene* scene, const char* ply_path);
BSPLAT_API bsplat_status bsplat_scene_count(const bsplat_scene* scene, size_t* out);
/* Primitives whose mean lies in region `region` of `partition_path`
 * (a partition JSON file); region 0 is the background. */
BSPLAT_API bsplat_status bsplat_scene_region_count(const bsplat_scene* scene, const char* partition_path, int region,
                                                   size_t* out);
BSPLAT_API void bsplat_scene_free(bsplat_scene* scene);

/* Densification plan for the config and dataset, as text: K and the
 * per-event, per-region quota assuming no pruning and full growth. */
BSPLAT_API bsplat_status bsplat_plan(const bsplat_config* config, const bsplat_dataset* data, char** out_text);

/* Trains on the primary views and writes into out_dir: final.ply,
 * metrics.csv, ledger.csv, evaluation.json (when held-out views exist) and
 * checkpoints/event_<k>.ply every checkpoint_every events. */
BSPLAT_API bsplat_status bsplat_train(const bsplat_config* config, const bsplat_dataset* data, const char* out_dir);

/* Registers the dataset's aux views against the frozen anchor at the
 * config's tau, then continues training on primary + accepted views.
 * Writes availability.json, hybrid.ply, metrics.csv and ledger.csv. */
BSPLAT_API bsplat_status bsplat_fuse(const bsplat_config* config, const bsplat_dataset* data, const char* anchor_ply,
                                     const char* out_dir);

/* Renders every pose of a pose file to out_dir/<id>.png. */
BSPLAT_API bsplat_status bsplat_render(const char* scene_ply, const char* poses_path, const char* out_dir,
                                       const double background[3], int workers);

/* Coverage and IDSM of a trajectory. envelope is {x0, y0, x1, y1} or NULL
 * for the pose bounding box. image_count < 0 uses the number of poses.
 * Writes metrics.csv and histogram.csv. */
BSPLAT_API bsplat_status bsplat_metrics(const char* trajectory_path, const double* envelope, double cell,
                                        int64_t min_poses, int64_t image_count, const char* out_dir,
                                        double* out_coverage, double* out_idsm);

/* kind "suite" (16 rows) or "fusion" (6 rows); writes the CSV table to
 * out_csv. */
BSPLAT_API bsplat_status bsplat_ablate(const bsplat_config* config, const bsplat_dataset* data, const char* kind,
                                       const char* out_csv);

/* Regenerates the bundled synthetic fixtures under out_dir. */
BSPLAT_API bsplat_status bsplat_synth(const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif
