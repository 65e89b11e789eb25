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

#include "hierflow/model.hpp"

#include <cmath>

#include "hierflow/error.hpp"
#include "hierflow/random.hpp"

namespace hierflow {

std::string to_string(ObjectiveKind kind) {
  return kind == ObjectiveKind::LeastSquares ? "least-squares" : "poisson-normal";
}

ObjectiveKind objective_kind_from_string(const std::string& text) {
  if (text == "least-squares" || text == "ls") return ObjectiveKind::LeastSquares;
  if (text == "poisson-normal" || text == "poisson") return ObjectiveKind::PoissonNormal;
  throw ValidationError("unknown objective '" + text + "'");
}

void ModelParams::validate(std::size_t nodes, std::size_t bins,
                           bool strictly_positive) const {
  if (w_out.size() != nodes || w_in.size() != nodes) {
    throw ValidationError("weight vectors must have one entry per node");
  }
  if (g.size() != bins) {
    throw ValidationError("deterrence needs one value per distance bin (" +
                          std::to_string(bins) + "), got " +
                          std::to_string(g.size()));
  }
  auto check = [&](const std::vector<double>& values, const char* what) {
    for (double v : values) {
      if (!std::isfinite(v) || v < 0.0 || (strictly_positive && v == 0.0)) {
        throw ValidationError(std::string(what) + " values must be finite and " +
                              (strictly_positive ? "positive" : "non-negative"));
      }
    }
  };
  check(w_out, "w_out");
  check(w_in, "w_in");
  check(g, "g");
}

double deterrence_f(double h) {
  if (!(h > 0.0 && h <= 1.0)) {
    throw ValidationError("deterrence f(h) needs h in (0, 1], got " +
                          std::to_string(h));
  }
  return 1.0 / h - 1.0;
}

double model_value(const ModelParams& params, const Hierarchy& hier,
                   const DistanceMatrix& dist, std::size_t a, std::size_t b) {
  if (a == b) throw ValidationError("model value is undefined for loops");
  const int bin = dist.bin(a, b);
  return params.w_out.at(a) * params.w_in.at(b) * deterrence_f(h_of(hier, a, b)) *
         params.g.at(static_cast<std::size_t>(bin));
}

SquareMatrix<double> gravity_matrix(const ModelParams& params,
                                    const DistanceMatrix& dist) {
  const std::size_t n = dist.size();
  SquareMatrix<double> out(n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      out(a, b) = params.w_out[a] * params.w_in[b] *
                  params.g[static_cast<std::size_t>(dist.bin(a, b))];
    }
  }
  return out;
}

SquareMatrix<double> deterrence_matrix(const Hierarchy& hier) {
  const auto levels = hier.level_matrix();
  const std::size_t n = levels.size();
  SquareMatrix<double> out(n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a != b) out(a, b) = deterrence_f(levels(a, b));
    }
  }
  return out;
}

double objective_from(const FlowNetwork& net,
                      const SquareMatrix<double>& gravity,
                      const SquareMatrix<double>& deterrence,
                      ObjectiveKind kind) {
  const std::size_t n = net.size();
  if (gravity.size() != n || deterrence.size() != n) {
    throw ValidationError("model matrices do not match the network size");
  }
  double total = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      const double m = gravity(a, b) * deterrence(a, b);
      if (kind == ObjectiveKind::PoissonNormal && !(m > 0.0)) {
        throw DegenerateError("model value is zero for pair " + net.node(a).id +
                              " -> " + net.node(b).id +
                              "; poisson-normal objective undefined");
      }
      total += objective_term(kind, net.flow(a, b), m);
    }
  }
  return total;
}

double objective(const FlowNetwork& net, const ModelParams& params,
                 const Hierarchy& hier, const DistanceMatrix& dist,
                 const ObjectiveSpec& spec) {
  if (spec.include_loops) {
    throw UnsupportedError(
        "loop terms need f(h(a, a)) = f(0), which is infinite under the "
        "ladder; loop-including objectives are unsupported");
  }
  const std::size_t n = net.size();
  if (hier.leaf_count() != n || dist.size() != n) {
    throw ValidationError("network, hierarchy and distances disagree on node count");
  }
  params.validate(n, dist.bin_count(), false);
  return objective_from(net, gravity_matrix(params, dist), deterrence_matrix(hier),
                        spec.kind);
}

FlowNetwork sample_poisson_network(const ModelParams& params,
                                   const Hierarchy& hier,
                                   const DistanceMatrix& dist,
                                   std::uint64_t seed,
                                   std::vector<NodeRecord> nodes) {
  const std::size_t n = hier.leaf_count();
  if (dist.size() != n) {
    throw ValidationError("hierarchy and distances disagree on node count");
  }
  params.validate(n, dist.bin_count(), false);
  if (nodes.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      nodes.push_back({"n" + std::to_string(i), "n" + std::to_string(i), {}});
    }
  } else if (nodes.size() != n) {
    throw ValidationError("node list does not match the hierarchy size");
  }

  const auto gravity = gravity_matrix(params, dist);
  const auto levels = hier.level_matrix();
  Rng rng(seed);
  SquareMatrix<double> flows(n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      const double mean = gravity(a, b) * deterrence_f(levels(a, b));
      if (!std::isfinite(mean)) {
        throw ValidationError("model mean is not finite for pair " +
                              nodes[a].id + " -> " + nodes[b].id);
      }
      flows(a, b) = static_cast<double>(rng.poisson(mean));
    }
  }
  return FlowNetwork(std::move(nodes), std::move(flows));
}

}  // namespace hierflow
