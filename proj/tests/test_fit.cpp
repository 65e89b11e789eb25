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

#include <cmath>
#include <limits>

#include "doctest.h"
#include "hierflow/error.hpp"
#include "hierflow/fit.hpp"
#include "hierflow/random.hpp"
#include "oracles.hpp"

using namespace hierflow;

namespace {

FlowNetwork network(const SquareMatrix<double>& flows) {
  std::vector<NodeRecord> nodes;
  for (std::size_t i = 0; i < flows.size(); ++i) {
    nodes.push_back({"n" + std::to_string(i), "", std::nullopt});
  }
  return FlowNetwork(nodes, flows);
}

// Flows equal to the model means, so the generating parameters fit exactly.
FlowNetwork noiseless(const ModelParams& p, const Hierarchy& hier, const DistanceMatrix& dist) {
  const std::size_t n = hier.leaf_count();
  SquareMatrix<double> flows(n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a != b) flows(a, b) = model_value(p, hier, dist, a, b);
    }
  }
  return network(flows);
}

// Two communities {0..n/2-1} and the rest.
Hierarchy planted(std::size_t n, std::size_t k, double within, double between) {
  std::vector<Hierarchy::Vertex> parents(n + k + 1);
  std::vector<double> heights(n + k + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) parents[i] = n + i * k / n;
  for (std::size_t c = 0; c < k; ++c) {
    parents[n + c] = n + k;
    heights[n + c] = within;
  }
  parents[n + k] = Hierarchy::npos;
  heights[n + k] = between;
  return Hierarchy::from_parents(n, parents, heights, default_ladder());
}

struct Instance {
  FlowNetwork net;
  ModelParams params;
  Hierarchy hier;
  DistanceMatrix dist;
};

Instance random_instance(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = 3 + rng.below(8), bins = 1 + rng.below(3);
  ModelParams truth, guess;
  for (std::size_t i = 0; i < n; ++i) {
    truth.w_out.push_back(1.0 + 9.0 * rng.uniform());
    truth.w_in.push_back(1.0 + 9.0 * rng.uniform());
    guess.w_out.push_back(0.5 + 5.0 * rng.uniform());
    guess.w_in.push_back(0.5 + 5.0 * rng.uniform());
  }
  SquareMatrix<double> km(n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) km(a, b) = km(b, a) = 1.0 + 99.0 * rng.uniform();
  }
  auto dist = bin_distances(km, BinSpec::linear(bins, 0.0, 100.0));
  for (std::size_t b = 0; b < bins; ++b) {
    truth.g.push_back(0.5 + rng.uniform());
    guess.g.push_back(0.5 + rng.uniform());
  }
  auto hier = random_hierarchy(n, default_ladder(), rng.below(1u << 20));
  auto net = sample_poisson_network(truth, hier, dist, rng.below(1u << 20));
  return {std::move(net), std::move(guess), std::move(hier), std::move(dist)};
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("closed form weight examples") {
  SquareMatrix<double> flows(2, 0.0);
  flows(0, 1) = 6.0;
  flows(1, 0) = 6.0;
  const auto net = network(flows);
  const auto hier = Hierarchy::flat(2, 0.5);
  const auto dist = unit_distance_matrix(2);

  const ModelParams p{{1.0, 1.0}, {3.0, 3.0}, {1.0}};
  const auto w_out = update_w_out(net, p, hier, dist);
  CHECK(w_out[0] == doctest::Approx(2.0));
  const ModelParams q{{2.0, 2.0}, {1.0, 1.0}, {1.0}};
  CHECK(update_w_in(net, q, hier, dist)[1] == doctest::Approx(3.0));
  const ModelParams r{{2.0, 2.0}, {3.0, 3.0}, {5.0}};
  CHECK(update_g(net, r, hier, dist).g[0] == doctest::Approx(1.0));

  SquareMatrix<double> quiet(2, 0.0);
  quiet(1, 0) = 4.0;
  const auto zero_row = network(quiet);
  CHECK(update_w_out(zero_row, p, hier, dist)[0] == kWeightFloor);
  CHECK(update_w_in(zero_row, p, hier, dist)[1] == kWeightFloor);
}

TEST_CASE("empty distance bins keep their value and are flagged") {
  SquareMatrix<double> km(3, 0.0);
  km(0, 1) = km(1, 0) = 5.0;
  km(0, 2) = km(2, 0) = km(1, 2) = km(2, 1) = 50.0;
  const auto dist = bin_distances(km, BinSpec::explicit_edges({10.0, 20.0, 100.0}));
  SquareMatrix<double> flows(3, 1.0);
  for (std::size_t a = 0; a < 3; ++a) flows(a, a) = 0.0;
  const auto net = network(flows);
  const ModelParams p{{1, 1, 1}, {1, 1, 1}, {1.0, 0.7, 1.0}};
  const auto up = update_g(net, p, Hierarchy::flat(3, 0.5), dist);
  CHECK(up.flagged == std::vector<std::size_t>{1});
  CHECK(up.g[1] == 0.7);
}

TEST_CASE("closed form updates match scalar minimization") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto inst = random_instance(seed);
    const auto h = oracle::lca_levels(inst.hier);
    const std::size_t n = inst.net.size();

    const auto w_out = update_w_out(inst.net, inst.params, inst.hier, inst.dist);
    const auto w_in = update_w_in(inst.net, inst.params, inst.hier, inst.dist);
    for (std::size_t a = 0; a < n; ++a) {
      auto p = inst.params;
      const double best_out = oracle::golden_min(
          [&](double x) {
            p.w_out[a] = x;
            return oracle::poisson_normal(inst.net, p, h, inst.dist);
          },
          1e-6, 1e6);
      CHECK(rel(w_out[a], best_out) < 1e-6);
      p = inst.params;
      const double best_in = oracle::golden_min(
          [&](double x) {
            p.w_in[a] = x;
            return oracle::poisson_normal(inst.net, p, h, inst.dist);
          },
          1e-6, 1e6);
      CHECK(rel(w_in[a], best_in) < 1e-6);
    }

    const auto g = update_g(inst.net, inst.params, inst.hier, inst.dist);
    for (std::size_t bin = 0; bin < inst.dist.bin_count(); ++bin) {
      if (std::count(g.flagged.begin(), g.flagged.end(), bin)) continue;
      auto p = inst.params;
      const double best = oracle::golden_min(
          [&](double x) {
            p.g[bin] = x;
            return oracle::poisson_normal(inst.net, p, h, inst.dist);
          },
          1e-6, 1e6);
      CHECK(rel(g.g[bin], best) < 1e-6);
    }
  }
}

TEST_CASE("least squares updates match scalar minimization") {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto inst = random_instance(seed);
    const auto h = oracle::lca_levels(inst.hier);
    const auto w_out =
        update_w_out(inst.net, inst.params, inst.hier, inst.dist, ObjectiveKind::LeastSquares);
    auto p = inst.params;
    const double best = oracle::golden_min(
        [&](double x) {
          p.w_out[0] = x;
          return oracle::least_squares(inst.net, p, h, inst.dist);
        },
        1e-6, 1e6);
    CHECK(rel(w_out[0], best) < 1e-6);
  }
}

TEST_CASE("optimal level examples") {
  SquareMatrix<double> flows(2, 0.0);
  flows(0, 1) = 6.0;
  const auto net = network(flows);
  const auto dist = unit_distance_matrix(2);
  const ModelParams p{{2.0, 2.0}, {3.0, 3.0}, {1.0}};
  const std::vector<double> ladder{0.25, 0.5, 0.75};
  const std::vector<NodePair> ab{{0, 1}};
  CHECK(optimal_level_value(net, p, dist, ab, {0.0, 1.0}, ladder) == 0.5);
  const std::vector<NodePair> ba{{1, 0}};
  CHECK(optimal_level_value(net, p, dist, ba, {0.0, 0.6}, ladder) == 0.5);
  CHECK(optimal_level_value(net, p, dist, ba, {0.0, 1.0}, ladder) == 0.75);
  CHECK_FALSE(optimal_level_value(net, p, dist, ab, {0.55, 0.7}, ladder));
  CHECK_THROWS_AS(optimal_level_value(net, p, dist, {}, {0.0, 1.0}, ladder), ValidationError);
}

TEST_CASE("optimal level matches a ladder scan") {
  const auto ladder = default_ladder();
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto inst = random_instance(seed);
    const std::size_t n = inst.net.size();
    Rng rng(seed);
    std::vector<NodePair> pairs;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (a != b && rng.uniform() < 0.4) pairs.emplace_back(a, b);
      }
    }
    if (pairs.empty()) pairs.emplace_back(0, 1);
    const LevelBounds bounds{ladder[rng.below(4)], ladder[5 + rng.below(5)]};
    const auto got = optimal_level_value(inst.net, inst.params, inst.dist, pairs, bounds, ladder);
    REQUIRE(got);
    double best_h = 0.0, best = std::numeric_limits<double>::infinity();
    for (double lv : ladder) {
      if (lv < bounds.lo || lv > bounds.hi) continue;
      double total = 0.0;
      for (auto [a, b] : pairs) {
        const double m = inst.params.w_out[a] * inst.params.w_in[b] * (1.0 / lv - 1.0) *
                         inst.params.g[static_cast<std::size_t>(inst.dist.bin(a, b))];
        total += (inst.net.flow(a, b) - m) * (inst.net.flow(a, b) - m) / m;
      }
      if (total < best) {
        best = total;
        best_h = lv;
      }
    }
    CHECK(*got == best_h);
  }
}

TEST_CASE("weight fit recovers noiseless means") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed + 50);
    const std::size_t n = 4 + rng.below(7), bins = 1 + rng.below(3);
    ModelParams truth;
    for (std::size_t i = 0; i < n; ++i) {
      truth.w_out.push_back(1.0 + 20.0 * rng.uniform());
      truth.w_in.push_back(1.0 + 20.0 * rng.uniform());
    }
    SquareMatrix<double> km(n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) km(a, b) = km(b, a) = 1.0 + 99.0 * rng.uniform();
    }
    const auto dist = bin_distances(km, BinSpec::linear(bins, 0.0, 100.0));
    for (std::size_t b = 0; b < bins; ++b) truth.g.push_back(0.3 + rng.uniform());
    const auto hier = random_hierarchy(n, default_ladder(), seed);
    const auto net = noiseless(truth, hier, dist);

    FitConfig cfg;
    cfg.weight_loop_tol = 1e-15;
    cfg.weight_loop_max_iter = 5000;
    const auto fit = fit_weights(net, initial_params(net, dist), hier, dist, cfg);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (a == b) continue;
        CHECK(rel(model_value(fit.params, hier, dist, a, b), net.flow(a, b)) < 1e-6);
      }
    }
    double sum_out = 0.0, sum_in = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum_out += fit.params.w_out[i];
      sum_in += fit.params.w_in[i];
    }
    CHECK(sum_out == doctest::Approx(sum_in).epsilon(1e-12));
  }
}

TEST_CASE("weight fit from its own optimum stops at once") {
  const auto inst = random_instance(7);
  FitConfig cfg;
  const auto first = fit_weights(inst.net, inst.params, inst.hier, inst.dist, cfg);
  const auto again = fit_weights(inst.net, first.params, inst.hier, inst.dist, cfg);
  CHECK(again.rounds <= 2);
  CHECK(again.objective <= first.objective);
  CHECK(rel(again.objective, first.objective) < 1e-7);
}

TEST_CASE("rebalance keeps model values") {
  const auto inst = random_instance(3);
  auto p = inst.params;
  rebalance(p);
  double so = 0.0, si = 0.0;
  for (double w : p.w_out) so += w;
  for (double w : p.w_in) si += w;
  CHECK(so == doctest::Approx(si).epsilon(1e-12));
  for (std::size_t a = 0; a < inst.net.size(); ++a) {
    for (std::size_t b = 0; b < inst.net.size(); ++b) {
      if (a == b) continue;
      CHECK(rel(model_value(p, inst.hier, inst.dist, a, b),
                model_value(inst.params, inst.hier, inst.dist, a, b)) <= 1e-12);
    }
  }
}

TEST_CASE("gravity fit ignores the hierarchy") {
  const auto inst = random_instance(12);
  FitConfig cfg;
  const auto gravity = fit_gravity(inst.net, inst.dist, cfg);
  const auto flat = fit_weights(inst.net, initial_params(inst.net, inst.dist),
                                Hierarchy::flat(inst.net.size(), 0.5), inst.dist, cfg);
  CHECK(gravity.objective == flat.objective);
  CHECK(gravity.params.w_out == flat.params.w_out);
  CHECK(gravity.params.g == flat.params.g);
}

TEST_CASE("move enumeration") {
  SUBCASE("two nodes only re-level their merge") {
    const auto ladder = default_ladder();
    const auto two = Hierarchy::flat(2, ladder[5], ladder);
    const auto moves = enumerate_moves(two, ladder[5]);
    REQUIRE(moves.size() == 1);
    CHECK(moves[0].kind == MoveKind::Reheight);
  }
  SUBCASE("three leaves") {
    const std::vector<double> ladder{0.3, 0.5, 0.7};
    const std::vector<Hierarchy::Vertex> parents{3, 3, 4, 4, Hierarchy::npos};
    const auto t = Hierarchy::from_parents(3, parents, std::vector<double>{0, 0, 0, 0.3, 0.7},
                                           ladder);
    bool c_joins_ab = false, a_beside_c = false;
    for (double level : t.merge_heights()) {
      for (const auto& m : enumerate_moves(t, level)) {
        if (m.kind == MoveKind::Reheight && m.source == 4 && m.bounds.lo == 0.3) c_joins_ab = true;
        if (m.kind != MoveKind::Relocate) continue;
        // Beside the only sibling would just re-level the parent.
        CHECK_FALSE(t.parent(m.target) == t.parent(m.source));
        if (m.source == 0 && m.target == 2) a_beside_c = true;
      }
    }
    CHECK(c_joins_ab);
    CHECK(a_beside_c);
  }
  SUBCASE("every move on random trees stays valid") {
    const auto ladder = default_ladder();
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const auto hier = random_hierarchy(3 + seed % 6, ladder, seed);
      for (double level : hier.merge_heights()) {
        for (const auto& m : enumerate_moves(hier, level)) {
          for (double lv : ladder) {
            if (lv < m.bounds.lo || lv > m.bounds.hi) continue;
            const auto next = apply_move(hier, m, lv);
            CHECK(next.leaf_count() == hier.leaf_count());
            CHECK(validate_ultrametric(oracle::lca_levels(next)).ok);
          }
        }
      }
    }
  }
}

TEST_CASE("greedy step picks the brute force best move under fixed parameters") {
  const auto ladder = default_ladder();
  const auto truth = planted(6, 2, ladder[1], ladder[8]);
  const auto dist = unit_distance_matrix(6);
  const ModelParams params{std::vector<double>(6, 10.0), std::vector<double>(6, 10.0), {1.0}};
  const auto net = noiseless(params, truth, dist);

  // Node 3 placed with the first community.
  const std::vector<Hierarchy::Vertex> parents{6, 6, 6, 6, 7, 7, 8, 8, Hierarchy::npos};
  const std::vector<double> heights{0, 0, 0, 0, 0, 0, ladder[1], ladder[1], ladder[8]};
  const auto wrong = Hierarchy::from_parents(6, parents, heights, ladder);
  FitConfig cfg;
  cfg.mode = FitMode::Generic;
  const auto start = fit_weights(net, initial_params(net, dist), wrong, dist, cfg);
  const FitState state{start.params, wrong, start.objective};

  // Every move at every ladder level, scored by the direct objective.
  double best = std::numeric_limits<double>::infinity();
  Hierarchy best_hier;
  for (double level : wrong.merge_heights()) {
    for (const auto& m : enumerate_moves(wrong, level)) {
      for (double lv : ladder) {
        if (lv < m.bounds.lo || lv > m.bounds.hi) continue;
        const auto next = apply_move(wrong, m, lv);
        if (next == wrong) continue;
        const double value = oracle::poisson_normal(net, start.params, oracle::lca_levels(next), dist);
        if (value < best) {
          best = value;
          best_hier = next;
        }
      }
    }
  }

  const auto step = greedy_step(net, state, dist, cfg);
  REQUIRE(step.move);
  CHECK(step.move->kind == MoveKind::Relocate);
  CHECK(step.move->source_leaves == std::vector<std::size_t>{3});
  CHECK(step.state.hierarchy == best_hier);
  CHECK(step.move->gain == doctest::Approx(start.objective - best).epsilon(1e-9));
  CHECK(step.state.objective < best);

  // Further steps finish the correction.
  FitState cur = step.state;
  for (int i = 0; i < 20; ++i) {
    const auto next = greedy_step(net, cur, dist, cfg);
    if (!next.move) break;
    CHECK(next.state.objective < cur.objective);
    cur = next.state;
  }
  CHECK(cut_to_k(cur.hierarchy, 2).partition.labels == cut_at_level(truth, ladder[1]).labels);
}

TEST_CASE("greedy step at the optimum changes nothing") {
  const auto ladder = default_ladder();
  const auto truth = planted(6, 2, ladder[1], ladder[8]);
  const auto dist = unit_distance_matrix(6);
  const ModelParams params{std::vector<double>(6, 10.0), std::vector<double>(6, 10.0), {1.0}};
  const auto net = noiseless(params, truth, dist);
  FitConfig cfg;
  cfg.weight_loop_tol = 1e-15;
  cfg.weight_loop_max_iter = 2000;
  const auto w = fit_weights(net, initial_params(net, dist), truth, dist, cfg);
  const auto step = greedy_step(net, {w.params, truth, w.objective}, dist, cfg);
  CHECK_FALSE(step.move);
  CHECK(step.gain == 0.0);
  CHECK(step.state.hierarchy == truth);
}

TEST_CASE("fit runs") {
  const auto ladder = default_ladder();
  SUBCASE("one node is trivial") {
    const auto net = network(SquareMatrix<double>(1, 0.0));
    const auto rep = fit(net, unit_distance_matrix(1), {});
    CHECK(rep.objective == 0.0);
    CHECK(rep.converged);
    CHECK(rep.hierarchy.leaf_count() == 1);
    CHECK(rep.hierarchy.merge_heights().empty());
  }
  SUBCASE("noiseless planted pairs are recovered in most seeds") {
    const auto truth = planted(8, 2, ladder[1], ladder[8]);
    const auto dist = unit_distance_matrix(8);
    const ModelParams params{std::vector<double>(8, 16.0), std::vector<double>(8, 16.0), {1.0}};
    const auto net = noiseless(params, truth, dist);
    int good = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      FitConfig cfg;
      cfg.mode = FitMode::Generic;
      cfg.seed = seed;
      const auto rep = fit(net, dist, cfg);
      good += partition_agreement(cut_to_k(rep.hierarchy, 2).partition,
                                  cut_at_level(truth, ladder[1])) == 1.0;
    }
    CHECK(good >= 6);
  }
  SUBCASE("trajectories never rise and every state is valid") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const auto inst = random_instance(seed + 300);
      FitConfig cfg;
      cfg.seed = seed;
      std::size_t observed = 0;
      const auto rep = fit(inst.net, inst.dist, cfg, [&](const FitState& s, const AcceptedMove&) {
        ++observed;
        CHECK(validate_ultrametric(s.hierarchy.level_matrix()).ok);
      });
      CHECK(observed == rep.moves.size());
      CHECK(rep.step_objectives.size() == rep.moves.size() + 1);
      for (std::size_t i = 1; i < rep.step_objectives.size(); ++i) {
        CHECK(rep.step_objectives[i] <= rep.step_objectives[i - 1]);
      }
      for (std::size_t i = 1; i < rep.sweep_objectives.size(); ++i) {
        CHECK(rep.sweep_objectives[i] <= rep.sweep_objectives[i - 1]);
      }
      CHECK(rel(rep.objective, objective(inst.net, rep.params, rep.hierarchy, rep.distances, {})) <
            1e-9);
    }
  }
  SUBCASE("same seed, same report; thread count does not matter") {
    const auto inst = random_instance(77);
    FitConfig cfg;
    cfg.seed = 5;
    const auto a = fit(inst.net, inst.dist, cfg);
    cfg.threads = 4;
    const auto b = fit(inst.net, inst.dist, cfg);
    CHECK(a.hierarchy == b.hierarchy);
    CHECK(a.step_objectives == b.step_objectives);
    CHECK(a.params.w_out == b.params.w_out);
  }
  SUBCASE("generic mode equals spatial mode on constant distances") {
    const auto inst = random_instance(31);
    const std::size_t n = inst.net.size();
    SquareMatrix<double> km(n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) km(a, b) = a == b ? 0.0 : 300.0;
    }
    const auto constant = bin_distances(km, BinSpec::logarithmic(12));
    CHECK(constant.bin_count() == 1);
    FitConfig cfg;
    cfg.seed = 2;
    const auto spatial = fit(inst.net, constant, cfg);
    cfg.mode = FitMode::Generic;
    const auto generic = fit(inst.net, inst.dist, cfg);
    CHECK(spatial.step_objectives == generic.step_objectives);
    CHECK(spatial.hierarchy == generic.hierarchy);
  }
  SUBCASE("prefit records the gravity objective and improves on it") {
    const auto truth = planted(8, 2, ladder[1], ladder[8]);
    const auto dist = unit_distance_matrix(8);
    const ModelParams params{std::vector<double>(8, 16.0), std::vector<double>(8, 16.0), {1.0}};
    const auto net = sample_poisson_network(params, truth, dist, 4);
    FitConfig cfg;
    cfg.mode = FitMode::PrefitThenHierarchy;
    const auto rep = fit(net, dist, cfg);
    REQUIRE(rep.gravity_objective);
    CHECK(rep.objective < *rep.gravity_objective);
  }
  SUBCASE("least squares fits run") {
    const auto inst = random_instance(9);
    FitConfig cfg;
    cfg.objective.kind = ObjectiveKind::LeastSquares;
    const auto rep = fit(inst.net, inst.dist, cfg);
    for (std::size_t i = 1; i < rep.step_objectives.size(); ++i) {
      CHECK(rep.step_objectives[i] <= rep.step_objectives[i - 1]);
    }
  }
  SUBCASE("loop objectives are refused") {
    const auto inst = random_instance(9);
    FitConfig cfg;
    cfg.objective.include_loops = true;
    CHECK_THROWS_AS(fit(inst.net, inst.dist, cfg), UnsupportedError);
  }
}
