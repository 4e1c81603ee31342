/* C interface to the lexicon-induction core. All strings are UTF-8. */

#ifndef BLI_H
#define BLI_H

/* Generated by cbindgen from crates/ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code for every fallible call. Config/data/backend match the CLI
 * exit codes for the same failure classes.
 */
typedef enum BliStatus {
  BLI_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  BLI_STATUS_NULL_ARG = 1,
  /**
   * Invalid configuration or arguments.
   */
  BLI_STATUS_CONFIG = 2,
  /**
   * Unusable input data (file contents, lookups, counts).
   */
  BLI_STATUS_DATA = 3,
  /**
   * Generation backend failure.
   */
  BLI_STATUS_BACKEND = 4,
  /**
   * A string argument was not valid UTF-8.
   */
  BLI_STATUS_UTF8 = 5,
  /**
   * Token or template id not present.
   */
  BLI_STATUS_NOT_FOUND = 6,
  /**
   * Internal panic was caught at the boundary.
   */
  BLI_STATUS_PANIC = 7,
} BliStatus;

/**
 * Loaded embedding store (opaque).
 */
typedef struct BliEmbeddings BliEmbeddings;

/**
 * Loaded translation lexicon (opaque).
 */
typedef struct BliLexicon BliLexicon;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Crate version as a static string; never freed.
 */
const char *bli_version(void);

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * is invalidated by the next failing call on the same thread.
 */
const char *bli_last_error(void);

/**
 * Free a string returned through a `char **` out-parameter. Null is a no-op.
 *
 * # Safety
 * `s` must have come from this library and not be freed twice.
 */
void bli_string_free(char *s);

/**
 * Load a word-embedding file (`.vec`, optionally gzipped). `trim` caps the
 * store to the first (most frequent) entries; 0 applies the default cap of
 * 200000. Rows are L2-normalized unless `normalize` is false.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum BliStatus bli_embeddings_load(const char *path,
                                   size_t trim,
                                   bool normalize,
                                   struct BliEmbeddings **out);

/**
 * # Safety
 * `store` must be null or a pointer from [`bli_embeddings_load`].
 */
void bli_embeddings_free(struct BliEmbeddings *store);

/**
 * Number of words, or 0 for a null handle.
 *
 * # Safety
 * `store` must be null or a valid handle.
 */
size_t bli_embeddings_len(const struct BliEmbeddings *store);

/**
 * Vector dimensionality, or 0 for a null handle.
 *
 * # Safety
 * `store` must be null or a valid handle.
 */
size_t bli_embeddings_dim(const struct BliEmbeddings *store);

/**
 * Frequency rank (0 = most frequent) of `token`, matching verbatim first and
 * then by lowercase.
 *
 * # Safety
 * Pointer arguments must be valid; strings NUL-terminated.
 */
enum BliStatus bli_embeddings_rank(const struct BliEmbeddings *store,
                                   const char *token,
                                   size_t *out_rank);

/**
 * Exact top-k cosine neighbours of `query` within `store`. The caller
 * provides `out_indices` and `out_scores` arrays of capacity `k`;
 * `out_count` receives how many entries were written (less than `k` when the
 * vocabulary is small). Ties break toward the more frequent word.
 *
 * # Safety
 * Array arguments must point to at least `k` writable elements.
 */
enum BliStatus bli_top_k_cosine(const struct BliEmbeddings *store,
                                const char *query,
                                size_t k,
                                bool exclude_self,
                                size_t *out_indices,
                                float *out_scores,
                                size_t *out_count);

/**
 * Copy the token at `index` into the caller-owned `out` string.
 *
 * # Safety
 * Pointer arguments must be valid.
 */
enum BliStatus bli_embeddings_token(const struct BliEmbeddings *store, size_t index, char **out);

/**
 * Load a tab-separated translation lexicon. `role` is 0 for a seed
 * dictionary, 1 for a test dictionary. Language arguments are ISO codes.
 *
 * # Safety
 * Pointer arguments must be valid; strings NUL-terminated.
 */
enum BliStatus bli_lexicon_load(const char *path,
                                const char *src_lang,
                                const char *tgt_lang,
                                uint32_t role,
                                struct BliLexicon **out);

/**
 * # Safety
 * `lexicon` must be null or a pointer from [`bli_lexicon_load`].
 */
void bli_lexicon_free(struct BliLexicon *lexicon);

/**
 * Number of translation pairs, or 0 for a null handle.
 *
 * # Safety
 * `lexicon` must be null or a valid handle.
 */
size_t bli_lexicon_len(const struct BliLexicon *lexicon);

/**
 * Number of templates in the built-in catalog.
 */
uint32_t bli_template_count(void);

/**
 * Recorded best template id for a model family. `few_shot` false selects the
 * zero-shot table.
 *
 * # Safety
 * Pointer arguments must be valid; `model` NUL-terminated.
 */
enum BliStatus bli_best_template(const char *model, bool few_shot, uint32_t *out_id);

/**
 * Whether template `id` takes in-context examples.
 *
 * # Safety
 * `out_few_shot` must be a valid pointer.
 */
enum BliStatus bli_template_is_few_shot(uint32_t id, bool *out_few_shot);

/**
 * Render one prompt. `example_sources`/`example_targets` are parallel arrays
 * of `n_examples` strings (both may be null when `n_examples` is 0; zero-shot
 * templates require 0 examples, few-shot templates at least 1). `mask_token`
 * null selects the default `<extra_id_0>`. The prompt text is returned
 * through `out_prompt`.
 *
 * # Safety
 * Array arguments must hold `n_examples` valid NUL-terminated strings.
 */
enum BliStatus bli_render_prompt(uint32_t template_id,
                                 const char *src_lang,
                                 const char *tgt_lang,
                                 const char *query,
                                 const char *const *example_sources,
                                 const char *const *example_targets,
                                 size_t n_examples,
                                 const char *mask_token,
                                 char **out_prompt);

/**
 * Pick in-context examples for `query` from a seed lexicon. `mode` is
 * 0 nearest-neighbour, 1 random (seeded by `random_seed`), 2 none.
 * `tgt` may be null; when present it breaks multi-translation ties toward
 * the more frequent target word. The result is JSON:
 * `{"examples":[{"source","target","source_rank"}...],"oov_fallback":bool,"shortfall":bool}`.
 *
 * # Safety
 * Pointer arguments must be valid; strings NUL-terminated.
 */
enum BliStatus bli_select_examples(const struct BliLexicon *seed,
                                   const struct BliEmbeddings *aux,
                                   const struct BliEmbeddings *tgt,
                                   const char *query,
                                   size_t n_shots,
                                   uint32_t mode,
                                   uint64_t random_seed,
                                   bool exclude_self,
                                   char **out_json);

/**
 * Extract a prediction from ranked beam texts. `beam_texts` holds `n_beams`
 * candidate continuations, best first. `prompt_rendered` non-null means the
 * generator echoed the prompt, and that prefix is stripped. `mask_token`
 * non-null is removed from outputs alongside the `model_family` special
 * tokens (null family uses the generic profile). The result is the
 * prediction as JSON: `{"query","predicted","beam_rank_used","candidates_ranked"}`.
 *
 * # Safety
 * `beam_texts` must hold `n_beams` valid NUL-terminated strings.
 */
enum BliStatus bli_extract(const char *const *beam_texts,
                           size_t n_beams,
                           const char *query,
                           const char *prompt_rendered,
                           const char *mask_token,
                           const char *model_family,
                           const struct BliEmbeddings *tgt,
                           char **out_json);

/**
 * Score predictions against a test lexicon. `predictions_json` is a JSON
 * array in the shape [`bli_extract`] returns (also the pipeline's
 * predictions.jsonl records). `ks`/`n_ks` select the precision cutoffs;
 * null/0 uses [1, 5]. The evaluation report is returned as JSON.
 *
 * # Safety
 * Pointer arguments must be valid; `ks` must hold `n_ks` elements.
 */
enum BliStatus bli_score(const char *predictions_json,
                         const struct BliLexicon *test,
                         const size_t *ks,
                         size_t n_ks,
                         char **out_report_json);

/**
 * Chi-square test (1 degree of freedom, no continuity correction) comparing
 * two correct/total systems. Writes the statistic and p-value.
 *
 * # Safety
 * `out_chi2` and `out_p` must be valid pointers.
 */
enum BliStatus bli_chi_square(uint64_t correct_a,
                              uint64_t total_a,
                              uint64_t correct_b,
                              uint64_t total_b,
                              double *out_chi2,
                              double *out_p);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BLI_H */
