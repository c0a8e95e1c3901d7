/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef KGFORGE_H
#define KGFORGE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every `kgf_*` call.
 */
typedef enum KgfStatus {
  KGF_STATUS_OK = 0,
  KGF_STATUS_NULL_ARGUMENT = 1,
  KGF_STATUS_INVALID_UTF8 = 2,
  KGF_STATUS_BAD_REQUEST = 3,
  KGF_STATUS_NOT_FOUND = 4,
  KGF_STATUS_CONFLICT = 5,
  KGF_STATUS_CONFIG = 6,
  KGF_STATUS_IO = 7,
  KGF_STATUS_INTERNAL = 8,
  KGF_STATUS_PANIC = 9,
} KgfStatus;

/*
 Opaque engine handle.
 */
typedef struct KgfEngine KgfEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Opens an engine. `config_toml` may be null for defaults; graph and other
 files are named in its `[paths]` table.

 # Safety
 `config_toml` must be null or a NUL-terminated string; `out` must be a
 valid pointer.
 */
enum KgfStatus kgf_engine_open(const char *config_toml, struct KgfEngine **out);

/*
 # Safety
 `engine` must come from [`kgf_engine_open`] and not be used afterwards.
 */
void kgf_engine_free(struct KgfEngine *engine);

/*
 # Safety
 `engine` must be live; `out` valid.
 */
enum KgfStatus kgf_revision(const struct KgfEngine *engine, uint64_t *out);

/*
 Fuzzy entity search; `k` of 0 uses the configured default.
 Writes `{"hits":[..],"revision":n}`.

 # Safety
 Pointers must be valid; `query` NUL-terminated.
 */
enum KgfStatus kgf_search(const struct KgfEngine *engine,
                          const char *query,
                          uint32_t k,
                          char **out);

/*
 Links one record given as JSON; with `store` non-zero the record and
 its links are added to the graph.

 # Safety
 Pointers must be valid; `record_json` NUL-terminated.
 */
enum KgfStatus kgf_link(const struct KgfEngine *engine,
                        const char *record_json,
                        int32_t store,
                        char **out);

/*
 # Safety
 Pointers must be valid; `question` NUL-terminated.
 */
enum KgfStatus kgf_answer(const struct KgfEngine *engine, const char *question, char **out);

/*
 Creates an annotation session from `{"docId","text","sessionId"?}`.

 # Safety
 Pointers must be valid; strings NUL-terminated.
 */
enum KgfStatus kgf_session_create(const struct KgfEngine *engine,
                                  const char *request_json,
                                  char **out);

/*
 Labels a candidate: `{"candidateId","verdict":"accept"|"reject"|"edit",..}`.

 # Safety
 Pointers must be valid; strings NUL-terminated.
 */
enum KgfStatus kgf_session_label(const struct KgfEngine *engine,
                                 const char *session_id,
                                 const char *request_json,
                                 char **out);

/*
 Adds a missed span: `{"start","end","classIri"?}`.

 # Safety
 Pointers must be valid; strings NUL-terminated.
 */
enum KgfStatus kgf_session_add_candidate(const struct KgfEngine *engine,
                                         const char *session_id,
                                         const char *request_json,
                                         char **out);

/*
 # Safety
 Pointers must be valid; `session_id` NUL-terminated.
 */
enum KgfStatus kgf_session_advance(const struct KgfEngine *engine,
                                   const char *session_id,
                                   char **out);

/*
 # Safety
 Pointers must be valid; `session_id` NUL-terminated.
 */
enum KgfStatus kgf_session_commit(const struct KgfEngine *engine,
                                  const char *session_id,
                                  char **out);

/*
 Writes the graph as N-Triples text (not JSON).

 # Safety
 `engine` must be live; `out` valid.
 */
enum KgfStatus kgf_export_ntriples(const struct KgfEngine *engine, char **out);

/*
 Candidate confidence after `pos` accepts and `neg` rejects. `signed`
 non-zero subtracts rejections; zero adds them.

 # Safety
 `out` must be valid.
 */
enum KgfStatus kgf_confidence(double base,
                              uint32_t pos,
                              uint32_t neg,
                              double alpha,
                              int32_t signed_,
                              double *out);

/*
 Message of the last failed call on this thread, or null. Valid until
 the next `kgf_*` call on the same thread.
 */
const char *kgf_last_error_message(void);

/*
 # Safety
 `s` must be null or a string returned by this library, freed once.
 */
void kgf_string_free(char *s);

/*
 Library version, static storage.
 */
const char *kgf_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KGFORGE_H */
