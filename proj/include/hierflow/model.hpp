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

// Multiplicative hierarchy + gravity flow model
//
//   m(a, b) = w_out(a) * w_in(b) * f(h(a, b)) * g(bin(a, b)),
//   f(h)    = 1/h - 1,
//
// and the two fit criteria over ordered pairs a != b:
//
//   least-squares   sum (e - m)^2
//   poisson-normal  sum (e - m)^2 / m   (normal approximation N(m, m))
//
// Generic networks use a single distance bin with g = 1.

#ifndef HIERFLOW_MODEL_HPP
#define HIERFLOW_MODEL_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hierflow/graph.hpp"
#include "hierflow/hierarchy.hpp"
#include "hierflow/matrix.hpp"

namespace hierflow {

enum class ObjectiveKind { LeastSquares, PoissonNormal };

std::string to_string(ObjectiveKind kind);
ObjectiveKind objective_kind_from_string(const std::string& text);

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::PoissonNormal;
  /// Loop terms need f(h(a, a)) = f(0), which is infinite; accepted here
  /// but rejected at evaluation time.
  bool include_loops = false;
};

struct ModelParams {
  std::vector<double> w_out;
  std::vector<double> w_in;
  std::vector<double> g;  // one value per distance bin

  /// Sizes must match `nodes` and `bins`; values finite and >= 0
  /// (> 0 when `strictly_positive`).
  void validate(std::size_t nodes, std::size_t bins,
                bool strictly_positive = true) const;
};

/// f(h) = 1/h - 1 on (0, 1]; throws ValidationError otherwise.
double deterrence_f(double h);

/// m(a, b) for a != b; throws ValidationError for a loop.
double model_value(const ModelParams& params, const Hierarchy& hier,
                   const DistanceMatrix& dist, std::size_t a, std::size_t b);

/// w_out(a) * w_in(b) * g(bin(a, b)) for every ordered pair; zero diagonal.
SquareMatrix<double> gravity_matrix(const ModelParams& params,
                                    const DistanceMatrix& dist);

/// f(h(a, b)) for every ordered pair; zero diagonal.
SquareMatrix<double> deterrence_matrix(const Hierarchy& hier);

/// One residual term of the chosen criterion. A non-positive model value
/// under poisson-normal makes the term undefined; callers check first.
inline double objective_term(ObjectiveKind kind, double observed, double model) {
  const double r = observed - model;
  return kind == ObjectiveKind::LeastSquares ? r * r : r * r / model;
}

/// Criterion summed over ordered pairs a != b in row-major order, with
/// m = gravity * deterrence. Throws DegenerateError naming the first pair
/// whose model value is zero under poisson-normal.
double objective_from(const FlowNetwork& net,
                      const SquareMatrix<double>& gravity,
                      const SquareMatrix<double>& deterrence,
                      ObjectiveKind kind);

double objective(const FlowNetwork& net, const ModelParams& params,
                 const Hierarchy& hier, const DistanceMatrix& dist,
                 const ObjectiveSpec& spec);

/// Independent Poisson draw with mean m(a, b) per ordered pair a != b,
/// loops zero. Pairs are drawn in row-major order from one seeded stream.
/// Nodes default to ids n0, n1, ... when `nodes` is empty.
FlowNetwork sample_poisson_network(const ModelParams& params,
                                   const Hierarchy& hier,
                                   const DistanceMatrix& dist,
                                   std::uint64_t seed,
                                   std::vector<NodeRecord> nodes = {});

}  // namespace hierflow

#endif  // HIERFLOW_MODEL_HPP
