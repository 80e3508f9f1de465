#ifndef CHORPRISM_H
#define CHORPRISM_H

#include <stddef.h>
#include <stdint.h>

// Formal projection: one counter value per interaction node.
#define CP_MODE_FORMAL 0

// Compact projection: calls jump straight to the callee's first value.
#define CP_MODE_COMPACT 1

// Chain of the choreography.
#define CP_SIDE_CHOR 0

// Chain of the projected PRISM network.
#define CP_SIDE_PRISM 1

typedef enum CpStatus {
  CP_STATUS_OK = 0,
  // A required pointer was null.
  CP_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not UTF-8, or an enum argument was out of range.
  CP_STATUS_INVALID_ARGUMENT = 2,
  // The source text does not parse.
  CP_STATUS_PARSE = 3,
  // The program parsed but was rejected.
  CP_STATUS_SEMANTIC = 4,
  // The reachable state space exceeded the bound.
  CP_STATUS_BUDGET = 5,
  // A panic was caught at the boundary.
  CP_STATUS_INTERNAL = 6,
} CpStatus;

// A parsed, desugared and annotated choreography.
typedef struct CpProgram CpProgram;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parse, desugar and annotate `source`. On success `*out` holds a handle
// to release with [`cp_program_free`].
//
// # Safety
//
// `source` must be a valid NUL-terminated string and `out` a valid pointer
// to writable storage for one handle pointer.
enum CpStatus cp_program_parse(const char *source, struct CpProgram **out);

// Release a handle. Null is ignored.
//
// # Safety
//
// `program` must be null or a handle from [`cp_program_parse`] that has
// not been freed.
void cp_program_free(struct CpProgram *program);

// Run the static checks: well-formedness, annotation uniqueness and strong
// connectedness of every definition.
//
// # Safety
//
// `program` must be a live handle from [`cp_program_parse`].
enum CpStatus cp_program_check(const struct CpProgram *program);

// Project the program and write PRISM source to `*out`.
//
// # Safety
//
// `program` must be a live handle and `out` a valid pointer. The string
// stored in `*out` must be released with [`cp_string_free`].
enum CpStatus cp_compile(const struct CpProgram *program, uint32_t projection_mode, char **out);

// Build a Markov chain and write it in text form to `*out`. `side` is
// [`CP_SIDE_CHOR`] or [`CP_SIDE_PRISM`]; `max_states` of 0 selects the
// default bound.
//
// # Safety
//
// `program` must be a live handle and `out` a valid pointer. The string
// stored in `*out` must be released with [`cp_string_free`].
enum CpStatus cp_chain(const struct CpProgram *program,
                       uint32_t side,
                       uint32_t projection_mode,
                       size_t max_states,
                       char **out);

// Check that the projection behaves like the choreography. Sets
// `*equivalent` to 1 or 0 and, when `report` is not null, stores the
// `key=value` summary followed by any counterexample.
//
// # Safety
//
// `program` must be a live handle, `equivalent` a valid pointer, and
// `report` null or a valid pointer. A string stored in `*report` must be
// released with [`cp_string_free`].
enum CpStatus cp_verify(const struct CpProgram *program,
                        uint32_t projection_mode,
                        size_t max_states,
                        int32_t *equivalent,
                        char **report);

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next fallible call on the same thread.
const char *cp_last_error(void);

// Release a string returned by the library. Null is ignored.
//
// # Safety
//
// `s` must be null or a string from this library that has not been freed.
void cp_string_free(char *s);

// Library version as a static NUL-terminated string.
const char *cp_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHORPRISM_H */
