/* C interface of the mmk motion library.
 *
 * Every fallible call returns an mmk_status; on failure the message is
 * available from mmk_last_error() on the same thread until the next call.
 * Strings returned through char** are owned by the caller and released with
 * mmk_string_free. Run configurations are passed as JSON objects; missing
 * keys take their defaults and the normalized form is echoed into outputs.
 */
#ifndef MMK_H
#define MMK_H

#include <stddef.h>

#if defined(MMK_BUILDING_LIBRARY)
#define MMK_API __attribute__((visibility("default")))
#else
#define MMK_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mmk_status {
  MMK_OK = 0,
  MMK_ERR_USAGE = 2,
  MMK_ERR_DATA = 3,
  MMK_ERR_NUMERIC = 4,
  MMK_ERR_INTERNAL = 5
} mmk_status;

typedef struct mmk_corpus mmk_corpus;
typedef struct mmk_tokenizer mmk_tokenizer;
typedef struct mmk_generator mmk_generator;

MMK_API const char* mmk_version(void);
MMK_API const char* mmk_last_error(void);
MMK_API void mmk_string_free(char* s);

/* Validates a run config and fills in defaults. */
MMK_API mmk_status mmk_run_config_normalize(const char* run_config, char** normalized);

/* Corpora */
MMK_API mmk_status mmk_corpus_synth(const char* run_config, mmk_corpus** out);
MMK_API mmk_status mmk_corpus_load(const char* path, mmk_corpus** out);
MMK_API mmk_status mmk_corpus_save(const mmk_corpus* corpus, const char* path, const char* run_config);
MMK_API size_t mmk_corpus_size(const mmk_corpus* corpus);
MMK_API void mmk_corpus_free(mmk_corpus* corpus);

/* Tokenizer (VQ-VAE). `log` receives a JSON array of training steps. */
MMK_API mmk_status mmk_tokenizer_train(const mmk_corpus* corpus, const char* run_config, mmk_tokenizer** out,
                                       char** log);
MMK_API mmk_status mmk_tokenizer_load(const char* path, mmk_tokenizer** out);
MMK_API mmk_status mmk_tokenizer_save(const mmk_tokenizer* tokenizer, const char* path, const char* run_config);
MMK_API void mmk_tokenizer_free(mmk_tokenizer* tokenizer);

/* Masked-restoration generator over the tokenizer's grids. */
MMK_API mmk_status mmk_generator_train(const mmk_corpus* corpus, const mmk_tokenizer* tokenizer,
                                       const char* run_config, mmk_generator** out, char** log);
MMK_API mmk_status mmk_generator_load(const char* path, mmk_generator** out);
MMK_API mmk_status mmk_generator_save(const mmk_generator* generator, const char* path, const char* run_config);
MMK_API void mmk_generator_free(mmk_generator* generator);

/* One generated motion per record of `conditions`, same length and condition. */
MMK_API mmk_status mmk_generate(mmk_generator* generator, const mmk_tokenizer* tokenizer,
                                const mmk_corpus* conditions, const char* run_config, mmk_corpus** out);

/* Metric report of `generated` against `real`. */
MMK_API mmk_status mmk_evaluate(const mmk_corpus* real, const mmk_corpus* generated, const char* run_config,
                                char** report);

/* Attention-based mask plans, with raw attention maps, for every record. */
MMK_API mmk_status mmk_mask_inspect(const mmk_corpus* corpus, const char* run_config, char** report);

/* Trains one generator per (alpha_t, alpha_s) in alphas x alphas. */
MMK_API mmk_status mmk_ratio_grid(const mmk_corpus* corpus, const mmk_tokenizer* tokenizer, const char* run_config,
                                  const double* alphas, size_t n_alphas, char** report);

/* Rigged candidates: selection over a directory of .rig files, and a writer. */
MMK_API mmk_status mmk_select_rig(const char* directory, const char* run_config, char** report);
MMK_API mmk_status mmk_rig_write(const char* path, const char* id, const float* points, size_t n_points,
                                 const float* weights, size_t n_joints);

#ifdef __cplusplus
}
#endif

#endif /* MMK_H */
