#ifndef COALMUX_H
#define COALMUX_H

/* Generated by cbindgen from the coalmux-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes mirroring the CLI exit codes.
typedef enum CoalStatus {
  COAL_STATUS_OK = 0,
  // Invalid arguments (null pointers, bad UTF-8, domain violations).
  COAL_STATUS_USAGE = 2,
  // Malformed or inconsistent data.
  COAL_STATUS_DATA = 3,
  // Numeric degeneracy.
  COAL_STATUS_NUMERIC = 4,
} CoalStatus;

// Opaque multilayer network handle.
typedef struct CoalNetwork CoalNetwork;

// Opaque partition handle: assignment plus the parameters it was produced
// under.
typedef struct CoalPartition CoalPartition;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *coal_version(void);

// Message of the most recent failure on this thread; empty after a success.
// The pointer stays valid until the next coalmux call on the same thread.
const char *coal_last_error(void);

// Load a network from its CSV file set; `participation` may be null.
//
// # Safety
// Path arguments must be NUL-terminated strings; `out` must be a valid
// pointer to receive the handle.
enum CoalStatus coal_network_load(const char *vertices,
                                  const char *layers,
                                  const char *edges,
                                  const char *participation,
                                  struct CoalNetwork **out);

// Load a network from a directory holding the conventional file names.
//
// # Safety
// See [`coal_network_load`].
enum CoalStatus coal_network_from_dir(const char *dir, struct CoalNetwork **out);

// Generate a planted benchmark network from a recipe JSON (see the synth
// subcommand); returns the network and its ground-truth partition.
//
// # Safety
// `spec_json` must be a NUL-terminated string; out-pointers must be valid.
enum CoalStatus coal_synth_generate(const char *spec_json,
                                    uint64_t seed,
                                    struct CoalNetwork **out_net,
                                    struct CoalPartition **out_truth);

// # Safety
// `net` must be a handle produced by this library, or null.
void coal_network_free(struct CoalNetwork *net);

// # Safety
// `partition` must be a handle produced by this library, or null.
void coal_partition_free(struct CoalPartition *partition);

// # Safety
// `net` must be a live handle; `out` a valid pointer.
enum CoalStatus coal_network_layer_count(const struct CoalNetwork *net, size_t *out);

// # Safety
// `net` must be a live handle; `out` a valid pointer.
enum CoalStatus coal_network_vertex_count(const struct CoalNetwork *net, size_t *out);

// Keep only edges significant at `alpha` under the weight-redistribution
// null; the result is a new network handle.
//
// # Safety
// `net` must be a live handle; `out` a valid pointer.
enum CoalStatus coal_backbone(const struct CoalNetwork *net,
                              double alpha,
                              struct CoalNetwork **out);

// Maximise at uniform parameters with `runs` consensus-reconciled seeded
// runs. `k_max` of zero means unbounded.
//
// # Safety
// `net` must be a live handle; `out` a valid pointer.
enum CoalStatus coal_infer(const struct CoalNetwork *net,
                           double gamma,
                           double omega,
                           uint32_t k_max,
                           uint32_t runs,
                           uint64_t seed,
                           struct CoalPartition **out);

// Profile log-likelihood of a partition: intra and inter sums plus the
// total.
//
// # Safety
// Handles must be live; out-pointers valid.
enum CoalStatus coal_score(const struct CoalNetwork *net,
                           const struct CoalPartition *partition,
                           double *out_intra,
                           double *out_inter,
                           double *out_total);

// Multilayer modularity of a partition under its stored parameters.
//
// # Safety
// Handles must be live; `out` valid.
enum CoalStatus coal_modularity(const struct CoalNetwork *net,
                                const struct CoalPartition *partition,
                                double *out);

// Community label of one (vertex, layer) pair: -1 when the vertex does not
// participate in the layer.
//
// # Safety
// Handles must be live; strings NUL-terminated; `out` valid.
enum CoalStatus coal_partition_label(const struct CoalNetwork *net,
                                     const struct CoalPartition *partition,
                                     const char *layer_token,
                                     const char *vertex_id,
                                     int64_t *out);

// Write the versioned partition document.
//
// # Safety
// Handles must be live; `path` NUL-terminated.
enum CoalStatus coal_partition_save(const struct CoalNetwork *net,
                                    const struct CoalPartition *partition,
                                    const char *path);

// Load a partition document and bind it to a network.
//
// # Safety
// `net` must be a live handle; `path` NUL-terminated; `out` valid.
enum CoalStatus coal_partition_load(const struct CoalNetwork *net,
                                    const char *path,
                                    struct CoalPartition **out);

// Reduced mutual information between two partitions over their common
// domain; set `normalized` for the self-similarity-normalized variant.
//
// # Safety
// Handles must be live; `out` valid.
enum CoalStatus coal_rmi(const struct CoalNetwork *net,
                         const struct CoalPartition *a,
                         const struct CoalPartition *b,
                         bool normalized,
                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COALMUX_H */
