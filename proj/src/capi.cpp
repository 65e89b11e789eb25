// Copyright 2026 The Hierflow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hierflow/hierflow.h"

#include <algorithm>
#include <fstream>
#include <new>
#include <sstream>
#include <string>
#include <unordered_map>

#include "hierflow/error.hpp"
#include "hierflow/fit.hpp"
#include "hierflow/io.hpp"

#ifndef HIERFLOW_VERSION
#define HIERFLOW_VERSION "0.0.0"
#endif

using namespace hierflow;

struct hf_network {
  FlowNetwork net;
};

struct hf_distances {
  DistanceMatrix dist;
  std::optional<BinSpec> bins;
};

struct hf_hierarchy {
  Hierarchy hier;
  std::vector<std::string> ids;
};

struct hf_partition {
  io::PartitionDocument doc;
};

struct hf_model {
  io::ModelDocument doc;
};

struct hf_fit_result {
  FitReport report;
  FitConfig config;
  std::vector<std::string> ids;
  std::optional<BinSpec> bins;
};

namespace {

thread_local std::string last_error;

// Thrown for caller mistakes detected in this layer.
struct ArgumentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

hf_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return HF_ERR_PARSE;
    case ErrorKind::Validation: return HF_ERR_VALIDATION;
    case ErrorKind::Degenerate: return HF_ERR_DEGENERATE;
    case ErrorKind::Unsupported: return HF_ERR_UNSUPPORTED;
    case ErrorKind::Io: return HF_ERR_IO;
  }
  return HF_ERR_INTERNAL;
}

template <class F>
hf_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return HF_OK;
  } catch (const ArgumentError& e) {
    last_error = e.what();
    return HF_ERR_ARGUMENT;
  } catch (const Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return HF_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return HF_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return HF_ERR_INTERNAL;
  }
}

template <class T>
const T& need(const T* p, const char* what) {
  if (!p) throw ArgumentError(std::string(what) + " is null");
  return *p;
}

template <class T>
T** need_out(T** out) {
  if (!out) throw ArgumentError("output pointer is null");
  *out = nullptr;
  return out;
}

const char* need_path(const char* path) {
  if (!path || !*path) throw ArgumentError("path is null or empty");
  return path;
}

void check_index(std::size_t index, std::size_t size) {
  if (index >= size) {
    throw ArgumentError("index " + std::to_string(index) + " out of range (size " +
                        std::to_string(size) + ")");
  }
}

BinSpec to_bins(const hf_bin_spec& spec) {
  BinSpec bins;
  switch (spec.mode) {
    case HF_BINS_LOG: bins = BinSpec::logarithmic(spec.count); break;
    case HF_BINS_LINEAR: bins = BinSpec::linear(spec.count); break;
    case HF_BINS_EDGES:
      if (!spec.edges && spec.edge_count) throw ArgumentError("bin edges are null");
      bins = BinSpec::explicit_edges(
          std::vector<double>(spec.edges, spec.edges + spec.edge_count));
      break;
    default: throw ArgumentError("unknown bin mode");
  }
  if (spec.has_range && spec.mode != HF_BINS_EDGES) {
    bins.lo = spec.lo;
    bins.hi = spec.hi;
  }
  bins.validate();
  return bins;
}

FitConfig to_config(const hf_fit_config& c) {
  FitConfig cfg;
  switch (c.objective) {
    case HF_OBJECTIVE_POISSON: cfg.objective.kind = ObjectiveKind::PoissonNormal; break;
    case HF_OBJECTIVE_LEAST_SQUARES: cfg.objective.kind = ObjectiveKind::LeastSquares; break;
    default: throw ArgumentError("unknown objective");
  }
  switch (c.mode) {
    case HF_MODE_SPATIAL: cfg.mode = FitMode::Spatial; break;
    case HF_MODE_GENERIC: cfg.mode = FitMode::Generic; break;
    case HF_MODE_PREFIT: cfg.mode = FitMode::PrefitThenHierarchy; break;
    default: throw ArgumentError("unknown fit mode");
  }
  if (c.ladder) {
    cfg.ladder.assign(c.ladder, c.ladder + c.ladder_size);
  } else {
    if (c.ladder_levels == 0) throw ArgumentError("ladder needs at least one level");
    cfg.ladder = default_ladder(c.ladder_levels);
  }
  cfg.weight_loop_tol = c.weight_loop_tol;
  cfg.weight_loop_max_iter = c.weight_loop_max_iter;
  cfg.outer_max_sweeps = c.outer_max_sweeps;
  cfg.min_move_gain = c.min_move_gain;
  cfg.seed = c.seed;
  cfg.threads = c.threads;
  return cfg;
}

io::ModelDocument model_of(const hf_fit_result& r) {
  io::ModelDocument doc;
  doc.ids = r.ids;
  doc.params = r.report.params;
  doc.hierarchy = r.report.hierarchy;
  doc.distances = r.report.distances;
  if (r.config.mode != FitMode::Generic) doc.bins = r.bins;
  doc.ladder = r.config.ladder;
  doc.objective = r.config.objective;
  doc.mode = r.config.mode;
  doc.objective_value = r.report.objective;
  return doc;
}

hf_partition* make_partition(Partition p, std::vector<std::string> ids, bool exact) {
  auto* out = new hf_partition;
  out->doc.partition = std::move(p);
  out->doc.ids = std::move(ids);
  out->doc.exact = exact;
  return out;
}

void write_file(const char* path, const std::string& text) {
  io::write_text(need_path(path), text);
}

}  // namespace

extern "C" {

const char* hf_version(void) { return HIERFLOW_VERSION; }

const char* hf_last_error(void) { return last_error.c_str(); }

const char* hf_status_name(hf_status status) {
  switch (status) {
    case HF_OK: return "ok";
    case HF_ERR_ARGUMENT: return "argument";
    case HF_ERR_PARSE: return "parse";
    case HF_ERR_VALIDATION: return "validation";
    case HF_ERR_DEGENERATE: return "degenerate";
    case HF_ERR_UNSUPPORTED: return "unsupported";
    case HF_ERR_IO: return "io";
    case HF_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

// ---- networks ----

hf_status hf_network_load(const char* edges_path, const char* nodes_path,
                          hf_network** out) {
  return guarded([&] {
    need_out(out);
    std::optional<std::vector<NodeRecord>> nodes;
    if (nodes_path) nodes = parse_nodes_csv(nodes_path);
    auto* h = new hf_network{
        parse_edge_csv(need_path(edges_path), {}, nodes ? &*nodes : nullptr)};
    *out = h;
  });
}

hf_status hf_network_load_nodes(const char* nodes_path, hf_network** out) {
  return guarded([&] {
    need_out(out);
    *out = new hf_network{FlowNetwork::without_flows(parse_nodes_csv(need_path(nodes_path)))};
  });
}

void hf_network_free(hf_network* net) { delete net; }

size_t hf_network_size(const hf_network* net) { return net ? net->net.size() : 0; }

const char* hf_network_node_id(const hf_network* net, size_t index) {
  if (!net || index >= net->net.size()) return nullptr;
  return net->net.node(index).id.c_str();
}

hf_status hf_network_flow(const hf_network* net, size_t origin, size_t destination,
                          double* out) {
  return guarded([&] {
    const auto& n = need(net, "network").net;
    if (!out) throw ArgumentError("output pointer is null");
    check_index(origin, n.size());
    check_index(destination, n.size());
    *out = n.flow(origin, destination);
  });
}

int hf_network_has_coordinates(const hf_network* net) {
  return net && net->net.has_coordinates() ? 1 : 0;
}

hf_status hf_network_write_edges(const hf_network* net, const char* path,
                                 int include_zeros) {
  return guarded([&] {
    std::ostringstream text;
    write_edge_csv(text, need(net, "network").net, include_zeros != 0);
    write_file(path, text.str());
  });
}

// ---- distances ----

hf_bin_spec hf_bin_spec_default(void) {
  return hf_bin_spec{HF_BINS_LOG, 12, nullptr, 0, 0, 0.0, 0.0};
}

hf_status hf_distances_build(const hf_network* net, const hf_bin_spec* bins,
                             const char* distance_csv, hf_distances** out) {
  return guarded([&] {
    need_out(out);
    const auto& n = need(net, "network").net;
    const BinSpec spec = to_bins(bins ? *bins : hf_bin_spec_default());
    DistanceMatrix dist = distance_csv
                              ? build_distance_matrix(n, parse_distance_csv(distance_csv, n),
                                                      spec)
                              : build_distance_matrix(n, spec);
    *out = new hf_distances{std::move(dist), spec};
  });
}

hf_status hf_distances_unit(size_t n, hf_distances** out) {
  return guarded([&] {
    need_out(out);
    *out = new hf_distances{unit_distance_matrix(n), std::nullopt};
  });
}

void hf_distances_free(hf_distances* dist) { delete dist; }

size_t hf_distances_bin_count(const hf_distances* dist) {
  return dist ? dist->dist.bin_count() : 0;
}

hf_status hf_distances_get(const hf_distances* dist, size_t a, size_t b, double* km,
                           int* bin) {
  return guarded([&] {
    const auto& d = need(dist, "distances").dist;
    check_index(a, d.size());
    check_index(b, d.size());
    if (km) *km = d.values(a, b);
    if (bin) *bin = d.bin(a, b);
  });
}

// ---- fitting ----

hf_fit_config hf_fit_config_default(void) {
  const FitConfig cfg;
  return hf_fit_config{HF_OBJECTIVE_POISSON,
                       HF_MODE_SPATIAL,
                       nullptr,
                       0,
                       cfg.ladder.size(),
                       cfg.weight_loop_tol,
                       cfg.weight_loop_max_iter,
                       cfg.outer_max_sweeps,
                       cfg.min_move_gain,
                       cfg.seed,
                       cfg.threads};
}

hf_status hf_fit(const hf_network* net, const hf_distances* dist,
                 const hf_fit_config* config, hf_fit_result** out) {
  return guarded([&] {
    need_out(out);
    const auto& n = need(net, "network").net;
    FitConfig cfg = to_config(config ? *config : hf_fit_config_default());
    std::optional<BinSpec> bins;
    if (dist && dist->bins) {
      cfg.bins = *dist->bins;
      bins = dist->bins;
    }
    DistanceMatrix unit;
    const DistanceMatrix* d = dist ? &dist->dist : nullptr;
    if (!d) {
      if (cfg.mode != FitMode::Generic) {
        throw ArgumentError("spatial and prefit modes need a distance matrix");
      }
      unit = unit_distance_matrix(n.size());
      d = &unit;
    }
    auto result = std::make_unique<hf_fit_result>();
    result->report = fit(n, *d, cfg);
    result->config = std::move(cfg);
    result->ids = n.ids();
    result->bins = std::move(bins);
    *out = result.release();
  });
}

void hf_fit_result_free(hf_fit_result* result) { delete result; }

double hf_fit_result_objective(const hf_fit_result* result) {
  return result ? result->report.objective : 0.0;
}

int hf_fit_result_converged(const hf_fit_result* result) {
  return result && result->report.converged ? 1 : 0;
}

size_t hf_fit_result_sweeps(const hf_fit_result* result) {
  return result ? result->report.sweeps : 0;
}

size_t hf_fit_result_move_count(const hf_fit_result* result) {
  return result ? result->report.moves.size() : 0;
}

int hf_fit_result_gravity_objective(const hf_fit_result* result, double* out) {
  if (!result || !result->report.gravity_objective) return 0;
  if (out) *out = *result->report.gravity_objective;
  return 1;
}

size_t hf_fit_result_trajectory(const hf_fit_result* result, double* buffer,
                                size_t capacity) {
  if (!result) return 0;
  const auto& t = result->report.step_objectives;
  if (buffer) std::copy_n(t.begin(), std::min(capacity, t.size()), buffer);
  return t.size();
}

hf_status hf_fit_result_write_model(const hf_fit_result* result, const char* path) {
  return guarded([&] {
    write_file(path, io::model_to_json(model_of(need(result, "fit result"))));
  });
}

hf_status hf_fit_result_write_report(const hf_fit_result* result, const char* path) {
  return guarded([&] {
    const auto& r = need(result, "fit result");
    write_file(path, io::report_to_json(r.report, r.config, r.ids));
  });
}

hf_status hf_fit_result_write_moves(const hf_fit_result* result, const char* path) {
  return guarded([&] {
    const auto& r = need(result, "fit result");
    write_file(path, io::moves_to_csv(r.report, r.ids));
  });
}

hf_status hf_fit_result_write_newick(const hf_fit_result* result, const char* path) {
  return guarded([&] {
    const auto& r = need(result, "fit result");
    write_file(path, io::to_newick(r.report.hierarchy, r.ids) + "\n");
  });
}

hf_status hf_fit_result_hierarchy(const hf_fit_result* result, hf_hierarchy** out) {
  return guarded([&] {
    need_out(out);
    const auto& r = need(result, "fit result");
    *out = new hf_hierarchy{r.report.hierarchy, r.ids};
  });
}

hf_status hf_fit_result_model(const hf_fit_result* result, hf_model** out) {
  return guarded([&] {
    need_out(out);
    *out = new hf_model{model_of(need(result, "fit result"))};
  });
}

// ---- hierarchies ----

hf_status hf_hierarchy_parse_newick(const char* text, const hf_network* order,
                                    hf_hierarchy** out) {
  return guarded([&] {
    need_out(out);
    if (!text) throw ArgumentError("newick text is null");
    const std::vector<std::string> ids = order ? order->net.ids() : std::vector<std::string>{};
    auto tree = io::parse_newick(text, ids);
    *out = new hf_hierarchy{std::move(tree.hierarchy), std::move(tree.ids)};
  });
}

hf_status hf_hierarchy_read_newick(const char* path, const hf_network* order,
                                   hf_hierarchy** out) {
  return guarded([&] {
    need_out(out);
    const std::string text = io::read_text(need_path(path));
    const std::vector<std::string> ids = order ? order->net.ids() : std::vector<std::string>{};
    auto tree = io::parse_newick(text, ids);
    *out = new hf_hierarchy{std::move(tree.hierarchy), std::move(tree.ids)};
  });
}

void hf_hierarchy_free(hf_hierarchy* hier) { delete hier; }

size_t hf_hierarchy_leaf_count(const hf_hierarchy* hier) {
  return hier ? hier->hier.leaf_count() : 0;
}

const char* hf_hierarchy_leaf_id(const hf_hierarchy* hier, size_t index) {
  if (!hier || index >= hier->ids.size()) return nullptr;
  return hier->ids[index].c_str();
}

hf_status hf_hierarchy_level(const hf_hierarchy* hier, size_t a, size_t b, double* out) {
  return guarded([&] {
    const auto& h = need(hier, "hierarchy").hier;
    if (!out) throw ArgumentError("output pointer is null");
    check_index(a, h.leaf_count());
    check_index(b, h.leaf_count());
    *out = h.level(a, b);
  });
}

hf_status hf_hierarchy_write_newick(const hf_hierarchy* hier, const char* path) {
  return guarded([&] {
    const auto& h = need(hier, "hierarchy");
    write_file(path, io::to_newick(h.hier, h.ids) + "\n");
  });
}

hf_status hf_hierarchy_write_dot(const hf_hierarchy* hier, const char* path) {
  return guarded([&] {
    const auto& h = need(hier, "hierarchy");
    write_file(path, io::to_dot(h.hier, h.ids));
  });
}

hf_status hf_hierarchy_cut_level(const hf_hierarchy* hier, double level,
                                 hf_partition** out) {
  return guarded([&] {
    need_out(out);
    const auto& h = need(hier, "hierarchy");
    *out = make_partition(cut_at_level(h.hier, level), h.ids, true);
  });
}

hf_status hf_hierarchy_cut_k(const hf_hierarchy* hier, size_t k, hf_partition** out,
                             int* exact) {
  return guarded([&] {
    need_out(out);
    const auto& h = need(hier, "hierarchy");
    Section s = cut_to_k(h.hier, k);
    if (exact) *exact = s.exact ? 1 : 0;
    *out = make_partition(std::move(s.partition), h.ids, s.exact);
  });
}

// ---- partitions ----

void hf_partition_free(hf_partition* part) { delete part; }

size_t hf_partition_size(const hf_partition* part) {
  return part ? part->doc.partition.size() : 0;
}

size_t hf_partition_community_count(const hf_partition* part) {
  return part ? part->doc.partition.community_count() : 0;
}

const char* hf_partition_node_id(const hf_partition* part, size_t index) {
  if (!part || index >= part->doc.ids.size()) return nullptr;
  return part->doc.ids[index].c_str();
}

size_t hf_partition_label(const hf_partition* part, size_t index) {
  if (!part || index >= part->doc.partition.size()) return static_cast<size_t>(-1);
  return part->doc.partition.labels[index];
}

double hf_partition_level(const hf_partition* part) {
  return part ? part->doc.partition.level : 0.0;
}

hf_status hf_partition_read_json(const char* path, hf_partition** out) {
  return guarded([&] {
    need_out(out);
    *out = new hf_partition{io::partition_from_json(io::read_text(need_path(path)))};
  });
}

hf_status hf_partition_write_json(const hf_partition* part, const char* path) {
  return guarded([&] {
    write_file(path, io::partition_to_json(need(part, "partition").doc));
  });
}

hf_status hf_partition_write_csv(const hf_partition* part, const char* path) {
  return guarded([&] {
    write_file(path, io::partition_to_csv(need(part, "partition").doc));
  });
}

hf_status hf_partition_write_geojson(const hf_partition* part, const hf_network* nodes,
                                     const char* path) {
  return guarded([&] {
    const std::vector<NodeRecord> records =
        nodes ? nodes->net.nodes() : std::vector<NodeRecord>{};
    write_file(path, io::partition_to_geojson(need(part, "partition").doc, records));
  });
}

hf_status hf_partition_agreement(const hf_partition* p, const hf_partition* q,
                                 double* out) {
  return guarded([&] {
    const auto& a = need(p, "partition").doc;
    const auto& b = need(q, "partition").doc;
    if (!out) throw ArgumentError("output pointer is null");
    if (a.ids.size() != b.ids.size()) {
      throw ValidationError("partitions cover different node counts (" +
                            std::to_string(a.ids.size()) + " vs " +
                            std::to_string(b.ids.size()) + ")");
    }
    std::unordered_map<std::string, std::size_t> where;
    for (std::size_t i = 0; i < b.ids.size(); ++i) where.emplace(b.ids[i], i);
    Partition aligned;
    aligned.level = b.partition.level;
    for (const auto& id : a.ids) {
      const auto it = where.find(id);
      if (it == where.end()) {
        throw ValidationError("node '" + id + "' is missing from the second partition");
      }
      aligned.labels.push_back(b.partition.labels[it->second]);
    }
    *out = partition_agreement(a.partition, aligned);
  });
}

// ---- models ----

hf_status hf_model_read_json(const char* path, hf_model** out) {
  return guarded([&] {
    need_out(out);
    *out = new hf_model{io::model_from_json(io::read_text(need_path(path)))};
  });
}

hf_status hf_model_planted(size_t n, size_t k, double within, double between,
                           double weight, hf_model** out) {
  return guarded([&] {
    need_out(out);
    if (n == 0 || k == 0 || k > n) {
      throw ValidationError("planted model needs 1 <= k <= n");
    }
    if (!(weight >= 0.0)) throw ValidationError("planted weight must be non-negative");
    std::vector<double> ladder{within, between};
    validate_ladder(ladder);

    std::vector<Hierarchy::Vertex> parents(n + k + 1);
    std::vector<double> heights(n + k + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) parents[i] = n + i * k / n;
    for (std::size_t c = 0; c < k; ++c) {
      parents[n + c] = n + k;
      heights[n + c] = within;
    }
    parents[n + k] = Hierarchy::npos;
    heights[n + k] = between;

    io::ModelDocument doc;
    for (std::size_t i = 0; i < n; ++i) doc.ids.push_back("n" + std::to_string(i));
    doc.hierarchy = Hierarchy::from_parents(n, parents, heights, ladder);
    doc.distances = unit_distance_matrix(n);
    doc.params = ModelParams{std::vector<double>(n, weight), std::vector<double>(n, weight),
                             {1.0}};
    doc.ladder = std::move(ladder);
    doc.mode = FitMode::Generic;
    *out = new hf_model{std::move(doc)};
  });
}

void hf_model_free(hf_model* model) { delete model; }

size_t hf_model_size(const hf_model* model) { return model ? model->doc.ids.size() : 0; }

const char* hf_model_node_id(const hf_model* model, size_t index) {
  if (!model || index >= model->doc.ids.size()) return nullptr;
  return model->doc.ids[index].c_str();
}

hf_status hf_model_set_hierarchy(hf_model* model, const hf_hierarchy* hier) {
  return guarded([&] {
    if (!model) throw ArgumentError("model is null");
    const auto& h = need(hier, "hierarchy");
    // Round-trip through Newick to re-index the leaves in model order.
    auto tree = io::parse_newick(io::to_newick(h.hier, h.ids), model->doc.ids,
                                 h.hier.ladder());
    model->doc.hierarchy = std::move(tree.hierarchy);
  });
}

hf_status hf_model_truth(const hf_model* model, hf_partition** out) {
  return guarded([&] {
    need_out(out);
    const auto& doc = need(model, "model").doc;
    if (!doc.hierarchy) throw ValidationError("model has no hierarchy");
    const auto heights = doc.hierarchy->merge_heights();
    const double level = heights.empty() ? 0.0 : heights.front();
    *out = make_partition(cut_at_level(*doc.hierarchy, level), doc.ids, true);
  });
}

hf_status hf_model_objective(const hf_model* model, const hf_network* net, double* out) {
  return guarded([&] {
    const auto& doc = need(model, "model").doc;
    const auto& n = need(net, "network").net;
    if (!out) throw ArgumentError("output pointer is null");
    if (!doc.hierarchy) throw ValidationError("model has no hierarchy");
    const FlowNetwork aligned = n.reordered(doc.ids);
    *out = objective(aligned, doc.params, *doc.hierarchy, doc.distances, doc.objective);
  });
}

hf_status hf_model_sample(const hf_model* model, uint64_t seed, hf_network** out) {
  return guarded([&] {
    need_out(out);
    const auto& doc = need(model, "model").doc;
    if (!doc.hierarchy) throw ValidationError("model has no hierarchy");
    std::vector<NodeRecord> nodes;
    for (const auto& id : doc.ids) nodes.push_back({id, id, std::nullopt});
    *out = new hf_network{
        sample_poisson_network(doc.params, *doc.hierarchy, doc.distances, seed, nodes)};
  });
}

hf_status hf_model_write_json(const hf_model* model, const char* path) {
  return guarded([&] { write_file(path, io::model_to_json(need(model, "model").doc)); });
}

}  // extern "C"
