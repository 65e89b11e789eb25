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

#include "doctest.h"
#include "hierflow/error.hpp"
#include "hierflow/model.hpp"
#include "hierflow/random.hpp"
#include "oracles.hpp"

using namespace hierflow;

namespace {

FlowNetwork two_nodes(double ab, double ba) {
  SquareMatrix<double> flows(2, 0.0);
  flows(0, 1) = ab;
  flows(1, 0) = ba;
  return FlowNetwork({{"a", "a", {}}, {"b", "b", {}}}, flows);
}

ModelParams random_params(Rng& rng, std::size_t n, std::size_t bins) {
  ModelParams p;
  for (std::size_t i = 0; i < n; ++i) {
    p.w_out.push_back(0.5 + 5.0 * rng.uniform());
    p.w_in.push_back(0.5 + 5.0 * rng.uniform());
  }
  for (std::size_t b = 0; b < bins; ++b) p.g.push_back(0.2 + rng.uniform());
  return p;
}

DistanceMatrix random_distances(Rng& rng, std::size_t n, std::size_t bins) {
  SquareMatrix<double> km(n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) km(a, b) = km(b, a) = 1.0 + 999.0 * rng.uniform();
  }
  return bin_distances(km, BinSpec::linear(bins, 0.0, 1000.0));
}

}  // namespace

TEST_CASE("deterrence function") {
  CHECK(deterrence_f(0.5) == 1.0);
  CHECK(deterrence_f(0.25) == 3.0);
  CHECK(deterrence_f(1.0) == 0.0);
  CHECK(deterrence_f(0.2) > deterrence_f(0.3));
  CHECK_THROWS_AS(deterrence_f(0.0), ValidationError);
  CHECK_THROWS_AS(deterrence_f(1.5), ValidationError);
}

TEST_CASE("model values") {
  const auto hier = Hierarchy::flat(2, 0.5);
  const auto dist = unit_distance_matrix(2);
  ModelParams p{{2.0, 1.0}, {1.0, 3.0}, {1.0}};
  CHECK(model_value(p, hier, dist, 0, 1) == doctest::Approx(6.0));
  p.g = {0.5};
  CHECK(model_value(p, hier, dist, 0, 1) == doctest::Approx(3.0));
  p.w_out = {0.0, 1.0};
  CHECK(model_value(p, hier, dist, 0, 1) == 0.0);
  CHECK_THROWS_AS(model_value(p, hier, dist, 1, 1), ValidationError);
}

TEST_CASE("objective on two nodes") {
  const auto net = two_nodes(4.0, 0.0);
  const auto hier = Hierarchy::flat(2, 0.5);
  const auto dist = unit_distance_matrix(2);
  const ModelParams p{{1.0, 1.0}, {2.0, 2.0}, {1.0}};  // m = 2 both ways
  CHECK(objective(net, p, hier, dist, {ObjectiveKind::PoissonNormal}) == doctest::Approx(4.0));
  CHECK(objective(net, p, hier, dist, {ObjectiveKind::LeastSquares}) == doctest::Approx(8.0));

  const auto exact = two_nodes(2.0, 2.0);
  CHECK(objective(exact, p, hier, dist, {ObjectiveKind::PoissonNormal}) == 0.0);
  CHECK(objective(exact, p, hier, dist, {ObjectiveKind::LeastSquares}) == 0.0);
}

TEST_CASE("objective errors") {
  const auto net = two_nodes(4.0, 1.0);
  const auto dist = unit_distance_matrix(2);
  const ModelParams p{{1.0, 1.0}, {2.0, 2.0}, {1.0}};
  const ModelParams silent{{0.0, 0.0}, {2.0, 2.0}, {1.0}};  // m = 0 on every pair
  const auto hier = Hierarchy::flat(2, 0.5);
  CHECK_THROWS_AS(objective(net, silent, hier, dist, {}), DegenerateError);
  CHECK(objective(net, silent, hier, dist, {ObjectiveKind::LeastSquares}) == doctest::Approx(17.0));
  CHECK_THROWS_AS(objective(net, p, hier, dist,
                            {ObjectiveKind::PoissonNormal, true}),
                  UnsupportedError);
}

TEST_CASE("objective matches a direct evaluation") {
  Rng rng(21);
  const auto ladder = default_ladder();
  for (int i = 0; i < 30; ++i) {
    const std::size_t n = 3 + rng.below(8), bins = 1 + rng.below(4);
    const auto params = random_params(rng, n, bins);
    const auto dist = random_distances(rng, n, bins);
    const auto hier = random_hierarchy(n, ladder, rng.below(1000));
    const auto net = sample_poisson_network(params, hier, dist, rng.below(1000));
    const auto h = oracle::lca_levels(hier);
    CHECK(objective(net, params, hier, dist, {ObjectiveKind::PoissonNormal}) ==
          doctest::Approx(oracle::poisson_normal(net, params, h, dist)).epsilon(1e-12));
    CHECK(objective(net, params, hier, dist, {ObjectiveKind::LeastSquares}) ==
          doctest::Approx(oracle::least_squares(net, params, h, dist)).epsilon(1e-12));
  }
}

TEST_CASE("weight gauge leaves the objective unchanged") {
  Rng rng(4);
  const auto params = random_params(rng, 6, 2);
  const auto dist = random_distances(rng, 6, 2);
  const auto hier = random_hierarchy(6, default_ladder(), 9);
  const auto net = sample_poisson_network(params, hier, dist, 2);
  auto scaled = params;
  for (auto& w : scaled.w_out) w *= 3.7;
  for (auto& w : scaled.w_in) w /= 3.7;
  for (std::size_t a = 0; a < 6; ++a) {
    for (std::size_t b = 0; b < 6; ++b) {
      if (a != b) {
        CHECK(model_value(scaled, hier, dist, a, b) ==
              doctest::Approx(model_value(params, hier, dist, a, b)).epsilon(1e-12));
      }
    }
  }
  CHECK(objective(net, scaled, hier, dist, {}) ==
        doctest::Approx(objective(net, params, hier, dist, {})).epsilon(1e-12));
}

TEST_CASE("a single bin with g = 1 is the generic model") {
  Rng rng(6);
  auto params = random_params(rng, 5, 1);
  params.g = {1.0};
  const auto hier = random_hierarchy(5, default_ladder(), 1);
  SquareMatrix<double> km(5, 0.0);
  for (std::size_t a = 0; a < 5; ++a) {
    for (std::size_t b = 0; b < 5; ++b) km(a, b) = a == b ? 0.0 : 250.0;
  }
  const auto spatial = bin_distances(km, BinSpec::explicit_edges({1000.0}));
  const auto generic = unit_distance_matrix(5);
  for (std::size_t a = 0; a < 5; ++a) {
    for (std::size_t b = 0; b < 5; ++b) {
      if (a == b) continue;
      CHECK(model_value(params, hier, spatial, a, b) == model_value(params, hier, generic, a, b));
      CHECK(model_value(params, hier, generic, a, b) ==
            doctest::Approx(params.w_out[a] * params.w_in[b] * (1.0 / h_of(hier, a, b) - 1.0)));
    }
  }
}

TEST_CASE("poisson sampling") {
  const auto hier = Hierarchy::flat(4, 0.5);
  const auto dist = unit_distance_matrix(4);
  SUBCASE("zero means give zero flows") {
    const ModelParams zero{{0, 0, 0, 0}, {1, 1, 1, 1}, {1.0}};
    const auto net = sample_poisson_network(zero, hier, dist, 3);
    for (double v : net.flows().data()) CHECK(v == 0.0);
  }
  SUBCASE("deterministic per seed") {
    const ModelParams p{{3, 4, 5, 6}, {2, 2, 2, 2}, {1.0}};
    CHECK(sample_poisson_network(p, hier, dist, 9).flows() ==
          sample_poisson_network(p, hier, dist, 9).flows());
    CHECK_FALSE(sample_poisson_network(p, hier, dist, 9).flows() ==
                sample_poisson_network(p, hier, dist, 10).flows());
  }
  SUBCASE("means agree with the Poisson law") {
    for (double mean : {3.0, 100.0}) {
      const ModelParams p{{1.0, 1.0}, {mean, mean}, {1.0}};
      const auto two = Hierarchy::flat(2, 0.5);
      const auto d2 = unit_distance_matrix(2);
      double sum = 0.0, sq = 0.0;
      const int draws = 1000;
      for (int s = 0; s < draws; ++s) {
        const double x = sample_poisson_network(p, two, d2, static_cast<std::uint64_t>(s)).flow(0, 1);
        CHECK(x == std::floor(x));
        sum += x;
        sq += x * x;
      }
      const double avg = sum / draws;
      const double se = std::sqrt(mean / draws);
      CHECK(std::abs(avg - mean) < 3.0 * se);
      const double var = sq / draws - avg * avg;
      CHECK(var == doctest::Approx(mean).epsilon(0.15));
    }
  }
}
