/*
 * Copyright 2026 The Hierflow Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface of libhierflow. Objects are opaque handles released with the
 * matching *_free function (which accept NULL). Functions that can fail
 * return an hf_status; on failure hf_last_error() describes the problem
 * for the calling thread. Strings returned by accessors stay valid until
 * the owning handle is freed.
 */

#ifndef HIERFLOW_H
#define HIERFLOW_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(HIERFLOW_BUILDING)
#    define HF_API __declspec(dllexport)
#  else
#    define HF_API __declspec(dllimport)
#  endif
#else
#  define HF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hf_status {
  HF_OK = 0,
  HF_ERR_ARGUMENT = 1,    /* null handle, index out of range, bad option */
  HF_ERR_PARSE = 2,       /* malformed input text */
  HF_ERR_VALIDATION = 3,  /* well-formed input violating an invariant */
  HF_ERR_DEGENERATE = 4,  /* numerically undefined fit or objective */
  HF_ERR_UNSUPPORTED = 5,
  HF_ERR_IO = 6,
  HF_ERR_INTERNAL = 7
} hf_status;

typedef struct hf_network hf_network;
typedef struct hf_distances hf_distances;
typedef struct hf_hierarchy hf_hierarchy;
typedef struct hf_partition hf_partition;
typedef struct hf_model hf_model;
typedef struct hf_fit_result hf_fit_result;

HF_API const char* hf_version(void);
/* Message of the last failed call on this thread; "" if none. */
HF_API const char* hf_last_error(void);
HF_API const char* hf_status_name(hf_status status);

/* ---- networks ---- */

/* Edge CSV (origin,destination,weight with header); optional node CSV
 * (id[,label[,lat,lon]]) fixes the node order and coordinates. */
HF_API hf_status hf_network_load(const char* edges_path, const char* nodes_path,
                                 hf_network** out);
/* Nodes only, all flows zero. */
HF_API hf_status hf_network_load_nodes(const char* nodes_path, hf_network** out);
HF_API void hf_network_free(hf_network* net);
HF_API size_t hf_network_size(const hf_network* net);
HF_API const char* hf_network_node_id(const hf_network* net, size_t index);
HF_API hf_status hf_network_flow(const hf_network* net, size_t origin,
                                 size_t destination, double* out);
HF_API int hf_network_has_coordinates(const hf_network* net);
HF_API hf_status hf_network_write_edges(const hf_network* net, const char* path,
                                        int include_zeros);

/* ---- distances ---- */

typedef enum hf_bin_mode {
  HF_BINS_LOG = 0,
  HF_BINS_LINEAR = 1,
  HF_BINS_EDGES = 2
} hf_bin_mode;

typedef struct hf_bin_spec {
  hf_bin_mode mode;
  size_t count;          /* LOG and LINEAR */
  const double* edges;   /* EDGES: ascending upper bin edges in km */
  size_t edge_count;
  int has_range;         /* LINEAR/LOG: use lo/hi instead of the data range */
  double lo;
  double hi;
} hf_bin_spec;

HF_API hf_bin_spec hf_bin_spec_default(void);
/* Distances from node coordinates, or from a CSV of (id_a,id_b,km) rows
 * when distance_csv is not NULL. */
HF_API hf_status hf_distances_build(const hf_network* net, const hf_bin_spec* bins,
                                    const char* distance_csv, hf_distances** out);
/* d = 1 for every pair, a single bin. */
HF_API hf_status hf_distances_unit(size_t n, hf_distances** out);
HF_API void hf_distances_free(hf_distances* dist);
HF_API size_t hf_distances_bin_count(const hf_distances* dist);
HF_API hf_status hf_distances_get(const hf_distances* dist, size_t a, size_t b,
                                  double* km, int* bin);

/* ---- fitting ---- */

typedef enum hf_objective {
  HF_OBJECTIVE_POISSON = 0,
  HF_OBJECTIVE_LEAST_SQUARES = 1
} hf_objective;

typedef enum hf_mode {
  HF_MODE_SPATIAL = 0,
  HF_MODE_GENERIC = 1,
  HF_MODE_PREFIT = 2
} hf_mode;

typedef struct hf_fit_config {
  hf_objective objective;
  hf_mode mode;
  const double* ladder;   /* NULL: evenly spaced ladder of ladder_levels */
  size_t ladder_size;
  size_t ladder_levels;
  double weight_loop_tol;
  size_t weight_loop_max_iter;
  size_t outer_max_sweeps;
  double min_move_gain;
  uint64_t seed;
  unsigned threads;       /* 0: hardware concurrency */
} hf_fit_config;

HF_API hf_fit_config hf_fit_config_default(void);
/* dist may be NULL in generic mode. */
HF_API hf_status hf_fit(const hf_network* net, const hf_distances* dist,
                        const hf_fit_config* config, hf_fit_result** out);
HF_API void hf_fit_result_free(hf_fit_result* result);
HF_API double hf_fit_result_objective(const hf_fit_result* result);
HF_API int hf_fit_result_converged(const hf_fit_result* result);
HF_API size_t hf_fit_result_sweeps(const hf_fit_result* result);
HF_API size_t hf_fit_result_move_count(const hf_fit_result* result);
/* Returns 1 and stores the value in prefit mode, 0 otherwise. */
HF_API int hf_fit_result_gravity_objective(const hf_fit_result* result, double* out);
/* Objective after the start and after every accepted move. Copies up to
 * capacity values and returns the full length. */
HF_API size_t hf_fit_result_trajectory(const hf_fit_result* result, double* buffer,
                                       size_t capacity);
HF_API hf_status hf_fit_result_write_model(const hf_fit_result* result, const char* path);
HF_API hf_status hf_fit_result_write_report(const hf_fit_result* result, const char* path);
HF_API hf_status hf_fit_result_write_moves(const hf_fit_result* result, const char* path);
HF_API hf_status hf_fit_result_write_newick(const hf_fit_result* result, const char* path);
HF_API hf_status hf_fit_result_hierarchy(const hf_fit_result* result, hf_hierarchy** out);
HF_API hf_status hf_fit_result_model(const hf_fit_result* result, hf_model** out);

/* ---- hierarchies ---- */

/* With order != NULL the leaves must be exactly its nodes and take its
 * node order. */
HF_API hf_status hf_hierarchy_read_newick(const char* path, const hf_network* order,
                                          hf_hierarchy** out);
HF_API hf_status hf_hierarchy_parse_newick(const char* text, const hf_network* order,
                                           hf_hierarchy** out);
HF_API void hf_hierarchy_free(hf_hierarchy* hier);
HF_API size_t hf_hierarchy_leaf_count(const hf_hierarchy* hier);
HF_API const char* hf_hierarchy_leaf_id(const hf_hierarchy* hier, size_t index);
HF_API hf_status hf_hierarchy_level(const hf_hierarchy* hier, size_t a, size_t b,
                                    double* out);
HF_API hf_status hf_hierarchy_write_newick(const hf_hierarchy* hier, const char* path);
HF_API hf_status hf_hierarchy_write_dot(const hf_hierarchy* hier, const char* path);
HF_API hf_status hf_hierarchy_cut_level(const hf_hierarchy* hier, double level,
                                        hf_partition** out);
/* *exact is set to 0 when no section has exactly k communities; the
 * coarsest section with more than k is returned instead. */
HF_API hf_status hf_hierarchy_cut_k(const hf_hierarchy* hier, size_t k,
                                    hf_partition** out, int* exact);

/* ---- partitions ---- */

HF_API void hf_partition_free(hf_partition* part);
HF_API size_t hf_partition_size(const hf_partition* part);
HF_API size_t hf_partition_community_count(const hf_partition* part);
HF_API const char* hf_partition_node_id(const hf_partition* part, size_t index);
HF_API size_t hf_partition_label(const hf_partition* part, size_t index);
HF_API double hf_partition_level(const hf_partition* part);
HF_API hf_status hf_partition_read_json(const char* path, hf_partition** out);
HF_API hf_status hf_partition_write_json(const hf_partition* part, const char* path);
HF_API hf_status hf_partition_write_csv(const hf_partition* part, const char* path);
/* Nodes without coordinates (or nodes == NULL) get null geometry. */
HF_API hf_status hf_partition_write_geojson(const hf_partition* part,
                                            const hf_network* nodes, const char* path);
/* Adjusted Rand index; nodes are matched by id. */
HF_API hf_status hf_partition_agreement(const hf_partition* p, const hf_partition* q,
                                        double* out);

/* ---- models ---- */

HF_API hf_status hf_model_read_json(const char* path, hf_model** out);
/* Nodes n0..n{n-1}; node i belongs to community floor(i*k/n). Communities
 * merge internally at `within` and with each other at `between`; every
 * weight equals `weight`, unit distances, g = 1. */
HF_API hf_status hf_model_planted(size_t n, size_t k, double within, double between,
                                  double weight, hf_model** out);
HF_API void hf_model_free(hf_model* model);
HF_API size_t hf_model_size(const hf_model* model);
HF_API const char* hf_model_node_id(const hf_model* model, size_t index);
/* Replaces the model's hierarchy; leaves are matched to nodes by id. */
HF_API hf_status hf_model_set_hierarchy(hf_model* model, const hf_hierarchy* hier);
/* Finest non-trivial section of the model's hierarchy. */
HF_API hf_status hf_model_truth(const hf_model* model, hf_partition** out);
/* The network is matched to the model's nodes by id. */
HF_API hf_status hf_model_objective(const hf_model* model, const hf_network* net,
                                    double* out);
HF_API hf_status hf_model_sample(const hf_model* model, uint64_t seed, hf_network** out);
HF_API hf_status hf_model_write_json(const hf_model* model, const char* path);

#ifdef __cplusplus
}
#endif

#endif /* HIERFLOW_H */
