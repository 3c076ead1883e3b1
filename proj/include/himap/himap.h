/* Public C API of the himap shared library.
 *
 * The library trains and evaluates a hybrid vectorized-map decoder on
 * synthetic bird's-eye-view scenes. All state lives behind opaque handles;
 * every function returns a himap_status, and himap_last_error() describes
 * the most recent failure on the calling thread.
 */
#ifndef HIMAP_H
#define HIMAP_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum himap_status {
  HIMAP_OK = 0,
  HIMAP_ERR_USAGE = 1,    /* bad arguments or configuration */
  HIMAP_ERR_DATA = 2,     /* unreadable or inconsistent data */
  HIMAP_ERR_CHECK = 3,    /* a verification suite reported failures */
  HIMAP_ERR_INTERNAL = 4, /* unexpected internal failure */
} himap_status;

typedef struct himap_config himap_config;

/* Message describing the last error on this thread; empty string if none. */
const char* himap_last_error(void);

/* Frees strings returned through out-parameters. */
void himap_string_free(char* s);

/* Builds a config from a JSON document; NULL or "" yields the defaults.
 * Unknown fields are ignored; missing fields take their default values. */
himap_status himap_config_create(const char* json_or_null, himap_config** out);
himap_status himap_config_load_file(const char* path, himap_config** out);
void himap_config_destroy(himap_config* cfg);

/* Resolved configuration as a JSON document. */
himap_status himap_config_to_json(const himap_config* cfg, char** out_json);

/* Overrides the run seed in-place. */
himap_status himap_config_set_seed(himap_config* cfg, uint64_t seed);

/* Writes n_scenes deterministic synthetic scenes plus a manifest under
 * out_dir. Refuses to overwrite an existing manifest unless force != 0. */
himap_status himap_generate(const himap_config* cfg, int n_scenes, const char* out_dir,
                            int force);

/* Trains on the scenes listed by the manifest under data_dir; writes the
 * resolved config, a metrics stream (metrics.jsonl), and checkpoints under
 * out_dir. */
himap_status himap_train(const himap_config* cfg, const char* data_dir, const char* out_dir);

/* Evaluates a checkpoint on a dataset under the "easy" or "hard" threshold
 * setting; the report (one structured record per line) is returned through
 * out_report. workers > 1 parallelizes the chamfer computations. */
himap_status himap_eval(const char* checkpoint, const char* data_dir, const char* setting,
                        int workers, char** out_report);

/* Runs the full gradient-check suite (per-op and end-to-end, 64-bit central
 * differences). Returns HIMAP_ERR_CHECK if any check exceeds tolerance; the
 * per-op report is always returned. */
himap_status himap_gradcheck(const himap_config* cfg, char** out_report);

/* Dumps per-layer anchor tables, anchor masks, and attention maps for one
 * element of one scene to out_dir. */
himap_status himap_inspect(const char* checkpoint, const char* scene_file, int element_index,
                           const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* HIMAP_H */
