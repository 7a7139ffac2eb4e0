#ifndef LAYOUT_WORKBENCH_H
#define LAYOUT_WORKBENCH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum LwStatus {
  LW_STATUS_OK = 0,
  LW_STATUS_NULL_ARGUMENT = 1,
  LW_STATUS_INVALID_UTF8 = 2,
  LW_STATUS_INVALID_LAYOUT = 3,
  LW_STATUS_INVALID_RELATIONS = 4,
  LW_STATUS_CONFLICTS = 5,
  LW_STATUS_INFEASIBLE = 6,
  LW_STATUS_INVALID_REQUEST = 7,
  LW_STATUS_PANIC = 8,
} LwStatus;

// A layout graph together with its relation matrix.
typedef struct LwLayout LwLayout;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call on the same thread.
const char *lw_last_error(void);

// Parses a Listing document drawn on a `width` x `height` canvas.
//
// # Safety
// `json` must be a nul-terminated string and `out` a writable pointer.
enum LwStatus lw_layout_parse(const char *json,
                              uint32_t width,
                              uint32_t height,
                              struct LwLayout **out);

// Ingests one RICO screen; relations are derived from its geometry.
//
// # Safety
// `json` must be a nul-terminated string and `out` a writable pointer.
enum LwStatus lw_layout_from_rico(const char *json,
                                  uint32_t width,
                                  uint32_t height,
                                  struct LwLayout **out);

// Writes the layout as a Listing document into `*out`.
//
// # Safety
// `layout` must be a live handle and `out` a writable pointer.
enum LwStatus lw_layout_serialize(const struct LwLayout *layout, char **out);

// Writes the relation matrix as JSON into `*out`.
//
// # Safety
// `layout` must be a live handle and `out` a writable pointer.
enum LwStatus lw_layout_relations(const struct LwLayout *layout, char **out);

// Number of nodes in the layout.
//
// # Safety
// `layout` must be a live handle and `out` a writable pointer.
enum LwStatus lw_layout_node_count(const struct LwLayout *layout, size_t *out);

// Replaces the layout's relations with the ones its geometry implies.
//
// # Safety
// `layout` must be a live handle.
enum LwStatus lw_layout_derive(struct LwLayout *layout);

// Counts the conflicts in the layout's relation matrix.
//
// # Safety
// `layout` must be a live handle and `out` a writable pointer.
enum LwStatus lw_layout_conflicts(const struct LwLayout *layout, size_t *out);

// Generates a layout for a relation matrix given as JSON. `asserted`
// selects asserted mode; otherwise every entry binds.
//
// # Safety
// `relations_json` must be a nul-terminated string and `out` a writable
// pointer.
enum LwStatus lw_generate(const char *relations_json,
                          uint32_t width,
                          uint32_t height,
                          uint64_t seed,
                          bool asserted,
                          struct LwLayout **out);

// Masks `ratio` of the layout's nodes and fills them back in against its
// relations.
//
// # Safety
// `layout` must be a live handle and `out` a writable pointer.
enum LwStatus lw_complete(const struct LwLayout *layout,
                          double ratio,
                          uint64_t seed,
                          struct LwLayout **out);

// Relation error between the geometry-derived relations of two layouts.
//
// # Safety
// Both handles must be live and `out` a writable pointer.
enum LwStatus lw_relation_error(const struct LwLayout *a, const struct LwLayout *b, double *out);

// Maximum-matching mean IoU of `generated` against `reference`.
//
// # Safety
// Both handles must be live and `out` a writable pointer.
enum LwStatus lw_max_iou(const struct LwLayout *generated,
                         const struct LwLayout *reference,
                         double *out);

// Overlap score of one layout.
//
// # Safety
// `layout` must be a live handle and `out` a writable pointer.
enum LwStatus lw_overlap(const struct LwLayout *layout, double *out);

// Releases a handle. Null is ignored.
//
// # Safety
// `layout` must come from this library and not be used afterwards.
void lw_layout_free(struct LwLayout *layout);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be used afterwards.
void lw_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LAYOUT_WORKBENCH_H */
