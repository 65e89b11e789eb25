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

// hierflow: fit, cut, synth and eval on flow networks.
//
// Exit codes: 0 ok, 2 usage or input error, 3 numerical degeneracy,
// 1 anything else. The tool only talks to libhierflow through its C API.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hierflow/hierflow.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;
constexpr int kExitDegenerate = 3;

// Carries a library failure (or a usage problem) up to main.
struct Failure {
  int code;
  std::string message;
};

int exit_code(hf_status s) {
  switch (s) {
    case HF_OK: return kExitOk;
    case HF_ERR_DEGENERATE: return kExitDegenerate;
    case HF_ERR_INTERNAL: return kExitInternal;
    default: return kExitInput;
  }
}

void check(hf_status s, const std::string& context) {
  if (s != HF_OK) {
    throw Failure{exit_code(s), context + ": " + hf_last_error()};
  }
}

[[noreturn]] void usage(const std::string& message) { throw Failure{kExitInput, message}; }

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Network = std::unique_ptr<hf_network, Deleter<hf_network, hf_network_free>>;
using Distances = std::unique_ptr<hf_distances, Deleter<hf_distances, hf_distances_free>>;
using Hier = std::unique_ptr<hf_hierarchy, Deleter<hf_hierarchy, hf_hierarchy_free>>;
using Part = std::unique_ptr<hf_partition, Deleter<hf_partition, hf_partition_free>>;
using Model = std::unique_ptr<hf_model, Deleter<hf_model, hf_model_free>>;
using Result = std::unique_ptr<hf_fit_result, Deleter<hf_fit_result, hf_fit_result_free>>;

double to_double(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  usage("invalid number '" + text + "' in " + what);
}

std::size_t to_size(const std::string& text, const std::string& what) {
  const double v = to_double(text, what);
  if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
    usage("expected a non-negative integer in " + what + ", got '" + text + "'");
  }
  return static_cast<std::size_t>(v);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

std::vector<double> number_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) out.push_back(to_double(part, what));
  return out;
}

// "log:12", "linear:8" or "linear:8:10:3000", "edges:100,500,2000".
struct BinOption {
  hf_bin_spec spec = hf_bin_spec_default();
  std::vector<double> edges;
};

BinOption parse_bins(const std::string& text) {
  BinOption out;
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (kind == "edges") {
    out.edges = number_list(rest, "--bins");
    out.spec.mode = HF_BINS_EDGES;
    out.spec.edges = out.edges.data();
    out.spec.edge_count = out.edges.size();
    return out;
  }
  if (kind != "log" && kind != "linear") usage("unknown bin mode '" + kind + "'");
  out.spec.mode = kind == "log" ? HF_BINS_LOG : HF_BINS_LINEAR;
  const auto fields = split(rest, ':');
  if (!fields.empty()) out.spec.count = to_size(fields[0], "--bins");
  if (fields.size() == 3) {
    out.spec.has_range = 1;
    out.spec.lo = to_double(fields[1], "--bins");
    out.spec.hi = to_double(fields[2], "--bins");
  } else if (fields.size() > 1) {
    usage("--bins range needs both lo and hi");
  }
  return out;
}

unsigned env_threads() {
  const char* value = std::getenv("HIERFLOW_THREADS");
  if (!value || !*value) return 1;
  return static_cast<unsigned>(to_size(value, "HIERFLOW_THREADS"));
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Failure{kExitInput, "cannot write '" + path.string() + "'"};
  out << j.dump(2) << "\n";
}

json config_echo(const hf_fit_config& c, const std::vector<double>& ladder,
                 const std::string& bins, std::size_t restarts) {
  json j{{"objective", c.objective == HF_OBJECTIVE_POISSON ? "poisson-normal" : "least-squares"},
         {"mode", c.mode == HF_MODE_SPATIAL   ? "spatial"
                  : c.mode == HF_MODE_GENERIC ? "generic"
                                              : "prefit"},
         {"weight_loop_tol", c.weight_loop_tol},
         {"weight_loop_max_iter", c.weight_loop_max_iter},
         {"outer_max_sweeps", c.outer_max_sweeps},
         {"min_move_gain", c.min_move_gain},
         {"seed", c.seed},
         {"threads", c.threads},
         {"restarts", restarts},
         {"bins", bins}};
  if (ladder.empty()) {
    j["ladder_levels"] = c.ladder_levels;
  } else {
    j["ladder"] = ladder;
  }
  return j;
}

// ---- fit ----

struct FitArgs {
  std::string edges, nodes, distances, out_dir;
  std::string mode = "generic";
  std::string objective = "poisson";
  std::size_t levels = 10;
  std::string ladder;
  std::string bins = "log:12";
  std::uint64_t seed = 0;
  std::size_t max_sweeps = 100;
  double tol = 1e-8;
  std::size_t max_weight_iter = 200;
  double min_gain = 1e-10;
  std::optional<unsigned> threads;
  std::size_t restarts = 1;
};

int run_fit(const FitArgs& a) {
  const auto start = std::chrono::steady_clock::now();
  hf_fit_config cfg = hf_fit_config_default();
  if (a.mode == "spatial") cfg.mode = HF_MODE_SPATIAL;
  else if (a.mode == "generic") cfg.mode = HF_MODE_GENERIC;
  else if (a.mode == "prefit") cfg.mode = HF_MODE_PREFIT;
  else usage("unknown --mode '" + a.mode + "'");
  if (a.objective == "poisson" || a.objective == "poisson-normal") {
    cfg.objective = HF_OBJECTIVE_POISSON;
  } else if (a.objective == "ls" || a.objective == "least-squares") {
    cfg.objective = HF_OBJECTIVE_LEAST_SQUARES;
  } else {
    usage("unknown --objective '" + a.objective + "'");
  }
  std::vector<double> ladder;
  if (!a.ladder.empty()) {
    ladder = number_list(a.ladder, "--ladder");
    cfg.ladder = ladder.data();
    cfg.ladder_size = ladder.size();
  }
  cfg.ladder_levels = a.levels;
  cfg.seed = a.seed;
  cfg.outer_max_sweeps = a.max_sweeps;
  cfg.weight_loop_tol = a.tol;
  cfg.weight_loop_max_iter = a.max_weight_iter;
  cfg.min_move_gain = a.min_gain;
  cfg.threads = a.threads ? *a.threads : env_threads();
  if (a.restarts == 0) usage("--restarts must be at least 1");
  const BinOption bins = parse_bins(a.bins);

  hf_network* raw_net = nullptr;
  check(hf_network_load(a.edges.c_str(), a.nodes.empty() ? nullptr : a.nodes.c_str(),
                        &raw_net),
        "loading network");
  Network net(raw_net);

  Distances dist;
  const bool have_geometry = !a.distances.empty() || hf_network_has_coordinates(net.get());
  if (cfg.mode == HF_MODE_SPATIAL && !have_geometry) {
    usage("spatial mode needs node coordinates (--nodes with lat/lon) or --distances");
  }
  if (cfg.mode != HF_MODE_GENERIC) {
    hf_distances* raw = nullptr;
    if (have_geometry) {
      check(hf_distances_build(net.get(), &bins.spec,
                               a.distances.empty() ? nullptr : a.distances.c_str(), &raw),
            "building distances");
    } else {
      check(hf_distances_unit(hf_network_size(net.get()), &raw), "building distances");
    }
    dist.reset(raw);
  }

  // Seeded restarts: keep the lowest objective, earliest seed on ties.
  Result best;
  std::uint64_t best_seed = cfg.seed;
  for (std::size_t r = 0; r < a.restarts; ++r) {
    hf_fit_config run = cfg;
    run.seed = cfg.seed + r;
    hf_fit_result* raw = nullptr;
    check(hf_fit(net.get(), dist.get(), &run, &raw), "fitting");
    Result result(raw);
    if (!best || hf_fit_result_objective(result.get()) < hf_fit_result_objective(best.get())) {
      best = std::move(result);
      best_seed = run.seed;
    }
  }

  const fs::path dir = a.out_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) usage("cannot create output directory '" + a.out_dir + "': " + ec.message());
  const fs::path model = dir / "model.json", newick = dir / "hierarchy.nwk",
                 report = dir / "report.json", moves = dir / "moves.csv",
                 manifest = dir / "manifest.json";
  check(hf_fit_result_write_model(best.get(), model.string().c_str()), "writing model");
  check(hf_fit_result_write_newick(best.get(), newick.string().c_str()), "writing hierarchy");
  check(hf_fit_result_write_report(best.get(), report.string().c_str()), "writing report");
  check(hf_fit_result_write_moves(best.get(), moves.string().c_str()), "writing moves");

  json inputs{{"edges", a.edges}};
  if (!a.nodes.empty()) inputs["nodes"] = a.nodes;
  if (!a.distances.empty()) inputs["distances"] = a.distances;
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json m{{"schema", 1},
         {"tool", "hierflow"},
         {"version", hf_version()},
         {"command", "fit"},
         {"inputs", inputs},
         {"config", config_echo(cfg, ladder, a.bins, a.restarts)},
         {"best_seed", best_seed},
         {"objective", hf_fit_result_objective(best.get())},
         {"converged", hf_fit_result_converged(best.get()) != 0},
         {"outputs",
          {model.string(), newick.string(), report.string(), moves.string(),
           manifest.string()}},
         {"wall_clock_seconds", seconds}};
  write_json_file(manifest, m);
  std::cerr << "fit: objective " << hf_fit_result_objective(best.get()) << ", "
            << hf_fit_result_move_count(best.get()) << " moves, "
            << (hf_fit_result_converged(best.get()) ? "converged" : "not converged") << "\n";
  return kExitOk;
}

// ---- cut ----

struct CutArgs {
  std::string hierarchy, nodes, out;
  std::optional<double> level;
  std::optional<std::size_t> k;
  std::string format = "json";
};

int run_cut(const CutArgs& a) {
  if (a.level.has_value() == a.k.has_value()) usage("give exactly one of --level or --k");
  if (a.format != "json" && a.format != "geojson" && a.format != "csv") {
    usage("unknown --format '" + a.format + "'");
  }
  hf_hierarchy* raw_h = nullptr;
  check(hf_hierarchy_read_newick(a.hierarchy.c_str(), nullptr, &raw_h), "reading hierarchy");
  Hier hier(raw_h);

  hf_partition* raw_p = nullptr;
  int exact = 1;
  if (a.level) {
    check(hf_hierarchy_cut_level(hier.get(), *a.level, &raw_p), "cutting");
  } else {
    check(hf_hierarchy_cut_k(hier.get(), *a.k, &raw_p, &exact), "cutting");
  }
  Part part(raw_p);
  if (!exact) {
    std::cerr << "warning: no section has exactly " << *a.k << " communities; wrote the "
              << "coarsest finer one with " << hf_partition_community_count(part.get())
              << "\n";
  }

  if (a.format == "json") {
    check(hf_partition_write_json(part.get(), a.out.c_str()), "writing partition");
  } else if (a.format == "csv") {
    check(hf_partition_write_csv(part.get(), a.out.c_str()), "writing partition");
  } else {
    Network nodes;
    if (!a.nodes.empty()) {
      hf_network* raw = nullptr;
      check(hf_network_load_nodes(a.nodes.c_str(), &raw), "loading nodes");
      nodes.reset(raw);
    }
    check(hf_partition_write_geojson(part.get(), nodes.get(), a.out.c_str()),
          "writing partition");
  }
  return kExitOk;
}

// ---- synth ----

struct SynthArgs {
  std::string params, hierarchy, planted, out_dir;
  std::uint64_t seed = 0;
};

Model planted_model(const std::string& spec) {
  std::optional<std::size_t> n, k;
  std::optional<double> within, between;
  double weight = 10.0;
  for (const auto& field : split(spec, ',')) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) usage("--planted expects key=value pairs");
    const std::string key = field.substr(0, eq), value = field.substr(eq + 1);
    if (key == "n") n = to_size(value, "--planted");
    else if (key == "k") k = to_size(value, "--planted");
    else if (key == "within") within = to_double(value, "--planted");
    else if (key == "between") between = to_double(value, "--planted");
    else if (key == "weight") weight = to_double(value, "--planted");
    else usage("unknown --planted key '" + key + "'");
  }
  if (!n || !k) usage("--planted needs n and k");
  hf_model* raw = nullptr;
  check(hf_model_planted(*n, *k, within.value_or(2.0 / 11.0), between.value_or(9.0 / 11.0),
                         weight, &raw),
        "building planted model");
  return Model(raw);
}

int run_synth(const SynthArgs& a) {
  if (a.params.empty() == a.planted.empty()) usage("give exactly one of --params or --planted");
  Model model;
  if (!a.planted.empty()) {
    if (!a.hierarchy.empty()) usage("--hierarchy only applies with --params");
    model = planted_model(a.planted);
  } else {
    hf_model* raw = nullptr;
    check(hf_model_read_json(a.params.c_str(), &raw), "reading params");
    model.reset(raw);
    if (!a.hierarchy.empty()) {
      hf_hierarchy* raw_h = nullptr;
      check(hf_hierarchy_read_newick(a.hierarchy.c_str(), nullptr, &raw_h),
            "reading hierarchy");
      Hier hier(raw_h);
      check(hf_model_set_hierarchy(model.get(), hier.get()), "matching hierarchy to params");
    }
  }

  hf_network* raw_net = nullptr;
  check(hf_model_sample(model.get(), a.seed, &raw_net), "sampling");
  Network net(raw_net);
  hf_partition* raw_truth = nullptr;
  check(hf_model_truth(model.get(), &raw_truth), "deriving ground truth");
  Part truth(raw_truth);

  const fs::path dir = a.out_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) usage("cannot create output directory '" + a.out_dir + "': " + ec.message());
  const fs::path edges = dir / "edges.csv", truth_path = dir / "truth.json",
                 model_path = dir / "model.json", manifest = dir / "manifest.json";
  check(hf_network_write_edges(net.get(), edges.string().c_str(), 1), "writing edges");
  check(hf_partition_write_json(truth.get(), truth_path.string().c_str()), "writing truth");
  check(hf_model_write_json(model.get(), model_path.string().c_str()), "writing model");

  json inputs = json::object();
  if (!a.params.empty()) inputs["params"] = a.params;
  if (!a.hierarchy.empty()) inputs["hierarchy"] = a.hierarchy;
  if (!a.planted.empty()) inputs["planted"] = a.planted;
  json m{{"schema", 1},
         {"tool", "hierflow"},
         {"version", hf_version()},
         {"command", "synth"},
         {"inputs", inputs},
         {"config", {{"seed", a.seed}}},
         {"outputs",
          {edges.string(), truth_path.string(), model_path.string(), manifest.string()}}};
  write_json_file(manifest, m);
  return kExitOk;
}

// ---- eval ----

struct EvalArgs {
  std::string partition, truth, model, edges, nodes;
};

int run_eval(const EvalArgs& a) {
  const bool scoring = !a.partition.empty() || !a.truth.empty();
  const bool objective = !a.model.empty() || !a.edges.empty();
  if (!scoring && !objective) usage("give --partition/--truth and/or --model/--edges");
  if (scoring && (a.partition.empty() || a.truth.empty())) {
    usage("--partition and --truth go together");
  }
  if (objective && (a.model.empty() || a.edges.empty())) {
    usage("--model and --edges go together");
  }

  json out{{"schema", 1}};
  if (scoring) {
    hf_partition* raw = nullptr;
    check(hf_partition_read_json(a.partition.c_str(), &raw), "reading partition");
    Part p(raw);
    check(hf_partition_read_json(a.truth.c_str(), &raw), "reading truth");
    Part q(raw);
    double agreement = 0.0;
    check(hf_partition_agreement(p.get(), q.get(), &agreement), "comparing partitions");
    out["agreement"] = agreement;
  }
  if (objective) {
    hf_model* raw_m = nullptr;
    check(hf_model_read_json(a.model.c_str(), &raw_m), "reading model");
    Model model(raw_m);
    hf_network* raw_n = nullptr;
    check(hf_network_load(a.edges.c_str(), a.nodes.empty() ? nullptr : a.nodes.c_str(),
                          &raw_n),
          "loading network");
    Network net(raw_n);
    double value = 0.0;
    check(hf_model_objective(model.get(), net.get(), &value), "evaluating objective");
    out["objective"] = value;
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical community structure of flow networks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(hf_version()));

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit weights, deterrence and a hierarchy");
  fit_cmd->add_option("--edges", fit.edges, "Edge CSV (origin,destination,weight)")->required();
  fit_cmd->add_option("--nodes", fit.nodes, "Node CSV (id,label,lat,lon)");
  fit_cmd->add_option("--distances", fit.distances, "Pairwise distance CSV (id_a,id_b,km)");
  fit_cmd->add_option("--mode", fit.mode, "spatial, generic or prefit")
      ->check(CLI::IsMember({"spatial", "generic", "prefit"}));
  fit_cmd->add_option("--objective", fit.objective, "poisson or ls")
      ->check(CLI::IsMember({"poisson", "ls", "poisson-normal", "least-squares"}));
  auto* levels = fit_cmd->add_option("--levels", fit.levels, "Evenly spaced ladder size");
  fit_cmd->add_option("--ladder", fit.ladder, "Explicit ladder, e.g. 0.2,0.5,0.8")
      ->excludes(levels);
  fit_cmd->add_option("--bins", fit.bins, "log:N, linear:N[:lo:hi] or edges:a,b,...");
  fit_cmd->add_option("--seed", fit.seed, "Random seed");
  fit_cmd->add_option("--max-sweeps", fit.max_sweeps, "Outer sweep cap");
  fit_cmd->add_option("--tol", fit.tol, "Weight loop relative tolerance");
  fit_cmd->add_option("--max-weight-iter", fit.max_weight_iter, "Weight loop round cap");
  fit_cmd->add_option("--min-gain", fit.min_gain, "Smallest move gain worth applying");
  fit_cmd->add_option("--threads", fit.threads, "Worker threads (0 = all cores)");
  fit_cmd->add_option("--restarts", fit.restarts, "Seeded restarts, best objective kept");
  fit_cmd->add_option("--out-dir", fit.out_dir, "Output directory")->required();

  CutArgs cut;
  auto* cut_cmd = app.add_subcommand("cut", "Section a hierarchy into communities");
  cut_cmd->add_option("--hierarchy", cut.hierarchy, "Newick file")->required();
  cut_cmd->add_option("--level", cut.level, "Cut level t");
  cut_cmd->add_option("--k", cut.k, "Number of communities");
  cut_cmd->add_option("--format", cut.format, "json, geojson or csv");
  cut_cmd->add_option("--nodes", cut.nodes, "Node CSV with coordinates (geojson)");
  cut_cmd->add_option("--out", cut.out, "Output file")->required();

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Sample a network from a model");
  synth_cmd->add_option("--params", synth.params, "Model JSON");
  synth_cmd->add_option("--hierarchy", synth.hierarchy, "Newick file overriding the model's");
  synth_cmd->add_option("--planted", synth.planted,
                        "n=8,k=2[,within=0.18,between=0.82,weight=10]");
  synth_cmd->add_option("--seed", synth.seed, "Random seed");
  synth_cmd->add_option("--out-dir", synth.out_dir, "Output directory")->required();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score partitions or recompute objectives");
  eval_cmd->add_option("--partition", eval.partition, "Partition JSON");
  eval_cmd->add_option("--truth", eval.truth, "Reference partition JSON");
  eval_cmd->add_option("--model", eval.model, "Model JSON");
  eval_cmd->add_option("--edges", eval.edges, "Edge CSV");
  eval_cmd->add_option("--nodes", eval.nodes, "Node CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*fit_cmd) return run_fit(fit);
    if (*cut_cmd) return run_cut(cut);
    if (*synth_cmd) return run_synth(synth);
    if (*eval_cmd) return run_eval(eval);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
