/* diffanon C API: controllable prosody-preserving anonymization of
 * synthetic codec embeddings with a conditional diffusion model.
 *
 * All functions are synchronous. Handles are opaque and single-owner;
 * destroy functions accept NULL. On failure a function returns a nonzero
 * status and da_last_error() carries a thread-local message.
 */
#ifndef DIFFANON_H
#define DIFFANON_H

#include <stddef.h>
#include <stdint.h>

#ifndef DA_API
#  if defined(_WIN32)
#    define DA_API
#  else
#    define DA_API __attribute__((visibility("default")))
#  endif
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum da_status {
  DA_OK = 0,
  DA_ERR_ARG = 1,     /* invalid argument / configuration */
  DA_ERR_RUNTIME = 2  /* numeric or I/O failure */
} da_status;

DA_API const char* da_version(void);
/* Message for the most recent failure on this thread; empty on success. */
DA_API const char* da_last_error(void);

typedef struct da_world da_world;
typedef struct da_model da_model;

/* config_text is sectioned key=value text; every key has a default, so ""
 * is valid. NULL is treated as "". */
DA_API da_status da_world_create(const char* config_text, da_world** out_world);
DA_API void da_world_destroy(da_world* world);

/* Writes one raw little-endian f32 file per utterance plus index.jsonl.
 * Per-utterance seeds derive from the config's global seed. */
DA_API da_status da_world_dump(const da_world* world, const char* out_dir,
                               int32_t utt_per_speaker);

/* Generates the world, trains per config, writes loss.csv, interval
 * checkpoints and model.danon into out_dir. */
DA_API da_status da_train(const char* config_text, const char* out_dir,
                          double* out_final_loss);

DA_API da_status da_model_load(const char* checkpoint_path, da_model** out_model);
DA_API void da_model_destroy(da_model* model);

/* Copies the checkpoint's config text into buf (NUL-terminated,
 * truncated to buf_len). out_len, when non-NULL, receives the full
 * length. */
DA_API da_status da_model_config(const da_model* model, char* buf, size_t buf_len,
                                 size_t* out_len);

typedef enum da_guidance_mode {
  DA_MODE_PLAIN = 0,
  DA_MODE_PROSODY_CFG = 1,
  DA_MODE_SPEAKER_CFG = 2
} da_guidance_mode;

typedef struct da_guidance_opts {
  int32_t mode;             /* da_guidance_mode */
  double w_pro;             /* prosody guidance weight, [0, 2] */
  double w_spk;             /* speaker guidance weight, >= 0 */
  int32_t plain_use_prosody; /* plain mode: condition on source prosody */
  int32_t pseudo_speaker;   /* pool index; -1 = seeded random draw; -2 = null */
  double pitch_shift;       /* mean shift of the prosody condition, channel-std units */
  int32_t n_infer_steps;    /* 0 = config default */
} da_guidance_opts;

/* Anonymizes the deterministic source utterance (source_speaker,
 * source_utt) of the model's world. Writes the embedding in the dataset
 * dump format to out_path and, when report_json_path is non-NULL, a
 * one-line JSON report. */
DA_API da_status da_anonymize(const da_model* model, int32_t source_speaker,
                              int32_t source_utt, const da_guidance_opts* opts,
                              uint64_t seed, const char* out_path,
                              const char* report_json_path);

typedef struct da_eval_opts {
  int32_t n_utt;          /* evaluation utterances (0 = 200) */
  int32_t n_infer_steps;  /* 0 = config default */
  int32_t threads;        /* 0 = hardware concurrency */
  uint64_t seed;
} da_eval_opts;

/* Prosody-weight sweep plus the extra operating points; writes the
 * metrics CSV and the two-column trade-off CSV. weights may be NULL to
 * use {1, 0.8, 0.5, 0.2, 0}. */
DA_API da_status da_sweep(const da_model* model, const double* weights, int32_t n_weights,
                          const da_eval_opts* opts, const char* metrics_csv_path,
                          const char* tradeoff_csv_path);

/* Metrics for a single operating point; either output path may be NULL. */
DA_API da_status da_eval_point(const da_model* model, const da_guidance_opts* guidance,
                               const da_eval_opts* opts, const char* csv_path,
                               const char* json_path);

/* Runs the built-in oracle/invariant checks, printing one line per check
 * to stdout. Returns DA_OK when every check passes. */
DA_API da_status da_selftest(void);

#ifdef __cplusplus
}
#endif

#endif /* DIFFANON_H */
