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

// Parameter estimation and greedy hierarchy search.
//
// Weights and per-bin deterrence are fitted by exact coordinate updates.
// Under poisson-normal each scalar x multiplying a set of pairs with
// coefficients c minimizes  sum e^2/(c x) + c x, giving
//
//   x = sqrt( sum e^2 / c  /  sum c ),
//
// and under least-squares  x = sum e c / sum c^2.  The hierarchy is
// searched by moves that keep it a valid dendrogram: relocating a subtree
// next to another cluster, or re-optimizing one merge height. Each move's
// new level comes from the same closed form applied to f.

#ifndef HIERFLOW_FIT_HPP
#define HIERFLOW_FIT_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hierflow/graph.hpp"
#include "hierflow/hierarchy.hpp"
#include "hierflow/model.hpp"

namespace hierflow {

/// Lower clamp for weights and deterrence values. Zero-flow nodes would
/// otherwise reach exactly zero and make the poisson-normal criterion
/// undefined.
inline constexpr double kWeightFloor = 1e-12;

enum class FitMode {
  Spatial,              // weights, binned g and hierarchy fitted jointly
  Generic,              // unit distances, single bin, g = 1
  PrefitThenHierarchy,  // gravity-only fit with h = 0.5 first
};

std::string to_string(FitMode mode);
FitMode fit_mode_from_string(const std::string& text);

struct FitConfig {
  ObjectiveSpec objective;
  std::vector<double> ladder = default_ladder();
  BinSpec bins;
  double weight_loop_tol = 1e-8;
  std::size_t weight_loop_max_iter = 200;
  std::size_t outer_max_sweeps = 100;
  double min_move_gain = 1e-10;
  std::uint64_t seed = 0;
  FitMode mode = FitMode::Spatial;
  /// Worker threads for move evaluation; 0 picks the hardware count.
  unsigned threads = 1;

  void validate() const;
};

std::vector<double> update_w_out(const FlowNetwork& net, const ModelParams& params,
                                 const Hierarchy& hier, const DistanceMatrix& dist,
                                 ObjectiveKind kind = ObjectiveKind::PoissonNormal);

std::vector<double> update_w_in(const FlowNetwork& net, const ModelParams& params,
                                const Hierarchy& hier, const DistanceMatrix& dist,
                                ObjectiveKind kind = ObjectiveKind::PoissonNormal);

struct DeterrenceUpdate {
  std::vector<double> g;
  /// Bins left at their previous value: no pairs, or no pair with a
  /// positive coefficient.
  std::vector<std::size_t> flagged;
};

DeterrenceUpdate update_g(const FlowNetwork& net, const ModelParams& params,
                          const Hierarchy& hier, const DistanceMatrix& dist,
                          ObjectiveKind kind = ObjectiveKind::PoissonNormal);

struct WeightFit {
  ModelParams params;
  double objective = 0.0;
  std::size_t rounds = 0;
  bool converged = false;
  /// Inner updates that raised the objective (rounding); logged, not fatal.
  std::size_t nonmonotone_steps = 0;
};

/// Rounds of [all w_in; all w_out; each g bin; rebalance sum w_out =
/// sum w_in] until the relative round improvement drops below
/// cfg.weight_loop_tol. The first populated bin keeps g fixed since it
/// only trades scale with the weights. A round that would raise the
/// objective is discarded and the loop stops.
WeightFit fit_weights(const FlowNetwork& net, const ModelParams& params,
                      const Hierarchy& hier, const DistanceMatrix& dist,
                      const FitConfig& cfg);

/// Gravity-only fit with h = 0.5 for every pair (f = 1); no hierarchy.
WeightFit fit_gravity(const FlowNetwork& net, const DistanceMatrix& dist,
                      const FitConfig& cfg);

/// Starting weights w_out(a) = out(a)/sqrt(total), w_in(b) = in(b)/sqrt(total),
/// g = 1, all floored.
ModelParams initial_params(const FlowNetwork& net, const DistanceMatrix& dist);

/// Rescales w_out and w_in so that their sums agree; model values are
/// unchanged up to rounding.
void rebalance(ModelParams& params);

using NodePair = std::pair<std::size_t, std::size_t>;

struct LevelBounds {
  double lo = 0.0;
  double hi = 1.0;
};

/// Best ladder level for a set of ordered pairs sharing one h, holding
/// weights and g fixed: closed-form f*, h* = 1/(1 + f*) clamped into
/// `bounds`, then the better of the two ladder levels bracketing h*
/// inside the bounds. Nullopt when no ladder level lies in the bounds.
std::optional<double> optimal_level_value(const FlowNetwork& net,
                                          const ModelParams& params,
                                          const DistanceMatrix& dist,
                                          std::span<const NodePair> pairs,
                                          LevelBounds bounds,
                                          std::span<const double> ladder,
                                          ObjectiveKind kind = ObjectiveKind::PoissonNormal);

enum class MoveKind { Relocate, Reheight };

std::string to_string(MoveKind kind);

struct Move {
  MoveKind kind = MoveKind::Reheight;
  /// Relocate: the detached subtree. Reheight: the vertex re-leveled.
  Hierarchy::Vertex source = Hierarchy::npos;
  /// Relocate only: the cluster the subtree is merged with.
  Hierarchy::Vertex target = Hierarchy::npos;
  /// Level the move belongs to: height of the source's parent (Relocate)
  /// or of the vertex itself (Reheight).
  double level = 0.0;
  /// Admissible new levels; a new level equal to a bound contracts.
  LevelBounds bounds;
};

/// Candidate moves at level `level`: every relocation of a child of a
/// vertex at that height onto any cluster of the pruned tree, and the
/// re-leveling of each vertex at that height. Sorted by (smallest leaf of
/// the source, kind, smallest leaf of the target).
std::vector<Move> enumerate_moves(const Hierarchy& hier, double level);

/// Ordered pairs whose shared level the move re-optimizes.
std::vector<NodePair> move_level_pairs(const Hierarchy& hier, const Move& move);

Hierarchy apply_move(const Hierarchy& hier, const Move& move, double new_level);

struct AcceptedMove {
  std::size_t sweep = 0;
  MoveKind kind = MoveKind::Reheight;
  std::vector<std::size_t> source_leaves;
  std::vector<std::size_t> target_leaves;
  double old_level = 0.0;
  double new_level = 0.0;
  double gain = 0.0;       // scored objective decrease before the refit
  double objective = 0.0;  // after the weight refit
};

struct FitState {
  ModelParams params;
  Hierarchy hierarchy;
  double objective = 0.0;
};

struct StepResult {
  FitState state;
  double gain = 0.0;  // 0 when no move was applied
  std::optional<AcceptedMove> move;
};

/// Evaluates candidate moves at `level` (every level when nullopt) at
/// fixed parameters, applies the largest gain if it reaches
/// cfg.min_move_gain, then refits weights. When no move reaches it, moves
/// are scored again with the moved leaves' weights and the affected g
/// re-solved. The move is kept only if the refitted objective is strictly
/// lower than before.
StepResult greedy_step(const FlowNetwork& net, const FitState& state,
                       const DistanceMatrix& dist, const FitConfig& cfg,
                       std::optional<double> level = std::nullopt);

struct FitReport {
  /// Objective at the start and after every sweep.
  std::vector<double> sweep_objectives;
  /// Objective at the start and after every accepted move.
  std::vector<double> step_objectives;
  std::vector<AcceptedMove> moves;
  ModelParams params;
  Hierarchy hierarchy;
  DistanceMatrix distances;  // as used by the fit (unit matrix in generic mode)
  double objective = 0.0;
  std::optional<double> gravity_objective;  // prefit mode only
  bool converged = false;
  std::size_t sweeps = 0;
  std::size_t nonmonotone_inner_steps = 0;
};

/// Called after every accepted move.
using MoveObserver = std::function<void(const FitState&, const AcceptedMove&)>;

/// Full search: random start (flat start after the gravity prefit in
/// prefit mode), weight fit, then sweeps over the ladder from low to high
/// levels with one greedy step per occupied level, until a sweep accepts
/// no move or cfg.outer_max_sweeps is reached.
FitReport fit(const FlowNetwork& net, const DistanceMatrix& dist,
              const FitConfig& cfg, const MoveObserver& observer = {});

}  // namespace hierflow

#endif  // HIERFLOW_FIT_HPP
