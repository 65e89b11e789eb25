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
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "hierflow/error.hpp"
#include "hierflow/graph.hpp"
#include "hierflow/random.hpp"

using namespace hierflow;

namespace {

FlowNetwork edges(const std::string& text) {
  std::istringstream in(text);
  return read_edge_csv(in);
}

std::vector<NodeRecord> nodes(const std::string& text) {
  std::istringstream in(text);
  return read_nodes_csv(in);
}

// Central angle from the dot and cross products of unit vectors, a
// different route to the same great-circle distance than haversine.
double vector_distance(Coordinate p, Coordinate q) {
  auto unit = [](Coordinate c) {
    const double la = c.lat * std::numbers::pi / 180.0, lo = c.lon * std::numbers::pi / 180.0;
    return std::array<double, 3>{std::cos(la) * std::cos(lo), std::cos(la) * std::sin(lo),
                                 std::sin(la)};
  };
  const auto a = unit(p), b = unit(q);
  const double cx = a[1] * b[2] - a[2] * b[1], cy = a[2] * b[0] - a[0] * b[2],
               cz = a[0] * b[1] - a[1] * b[0];
  const double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  return kEarthRadiusKm * std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), dot);
}

}  // namespace

TEST_CASE("edge csv transcribes a single row") {
  const auto net = edges("origin,destination,weight\nA,B,5\n");
  REQUIRE(net.size() == 2);
  const auto a = *net.index_of("A"), b = *net.index_of("B");
  CHECK(net.flow(a, b) == 5.0);
  CHECK(net.flow(b, a) == 0.0);
}

TEST_CASE("edge csv with only a header is empty") {
  CHECK(edges("origin,destination,weight\n").size() == 0);
}

TEST_CASE("edge csv rejects bad rows") {
  CHECK_THROWS_AS(edges("origin,destination,weight\nA,B,-1\n"), ValidationError);
  CHECK_THROWS_AS(edges("origin,destination,weight\nA,B,1\nA,B,2\n"), ValidationError);
  try {
    edges("origin,destination,weight\nA,B,1\nA,B\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(edges("origin,destination,weight\nA,B,x\n"), ParseError);
}

TEST_CASE("edge csv round trip keeps the flow matrix") {
  const auto net = edges("origin,destination,weight\nA,B,5\nB,C,0.25\nC,A,12\nA,C,3\n");
  std::ostringstream out;
  write_edge_csv(out, net);
  const auto again = edges(out.str());
  CHECK(again.ids() == net.ids());
  CHECK(again.flows() == net.flows());

  std::ostringstream dense;
  write_edge_csv(dense, net, true);
  CHECK(edges(dense.str()).flows() == net.flows());
}

TEST_CASE("node csv records and ranges") {
  const auto recs = nodes("id,label,lat,lon\nNY,New York,40.7128,-74.0060\nX,Plain\n");
  REQUIRE(recs.size() == 2);
  REQUIRE(recs[0].coordinate);
  CHECK(recs[0].coordinate->lat == doctest::Approx(40.7128));
  CHECK(recs[0].coordinate->lon == doctest::Approx(-74.0060));
  CHECK(recs[0].label == "New York");
  CHECK_FALSE(recs[1].coordinate);
  CHECK_THROWS_AS(nodes("id,label,lat,lon\nX,Bad,95,0\n"), ValidationError);
  CHECK_THROWS_AS(nodes("id,label,lat,lon\nX,Bad,0,181\n"), ValidationError);
  CHECK_THROWS_AS(nodes("id,label,lat,lon\nA,a\nA,b\n"), ValidationError);
}

TEST_CASE("known nodes fix the order and reject strangers") {
  const auto known = nodes("id,label\nB,b\nA,a\nC,c\n");
  std::istringstream in("origin,destination,weight\nA,B,5\n");
  const auto net = read_edge_csv(in, {}, &known);
  CHECK(net.ids() == std::vector<std::string>{"B", "A", "C"});
  CHECK(net.flow(1, 0) == 5.0);
  std::istringstream bad("origin,destination,weight\nA,Z,5\n");
  CHECK_THROWS_AS(read_edge_csv(bad, {}, &known), ValidationError);
}

TEST_CASE("great circle distance") {
  const Coordinate ny{40.7128, -74.0060}, la{34.0522, -118.2437};
  CHECK(great_circle_distance(ny, ny) == 0.0);
  // Pinned from the vector formula evaluated separately: 3935.75169 km.
  CHECK(great_circle_distance(ny, la) == doctest::Approx(3935.751690893985).epsilon(1e-9));
  CHECK(great_circle_distance(ny, la) == doctest::Approx(vector_distance(ny, la)).epsilon(1e-9));
  CHECK(great_circle_distance({0, 0}, {0, 180}) ==
        doctest::Approx(std::numbers::pi * kEarthRadiusKm).epsilon(1e-12));
}

TEST_CASE("great circle distance is a metric on random triples") {
  Rng rng(11);
  auto draw = [&] { return Coordinate{rng.uniform() * 180.0 - 90.0, rng.uniform() * 360.0 - 180.0}; };
  for (int i = 0; i < 500; ++i) {
    const auto p = draw(), q = draw(), r = draw();
    const double pq = great_circle_distance(p, q), qp = great_circle_distance(q, p);
    CHECK(pq == doctest::Approx(qp).epsilon(1e-12));
    CHECK(pq >= 0.0);
    CHECK(pq == doctest::Approx(vector_distance(p, q)).epsilon(1e-8));
    CHECK(great_circle_distance(p, r) <= pq + great_circle_distance(q, r) + 1e-9);
  }
}

TEST_CASE("distance binning") {
  SUBCASE("coincident nodes share the single linear bin") {
    const auto net = FlowNetwork::without_flows(
        {{"a", "a", Coordinate{10, 10}}, {"b", "b", Coordinate{10, 10}}});
    const auto d = build_distance_matrix(net, BinSpec::linear(1, 0.0, 100.0));
    CHECK(d.bin_count() == 1);
    CHECK(d.bin(0, 1) == 0);
    CHECK(d.bin(1, 0) == 0);
    CHECK(d.bin(0, 0) == -1);
  }
  SUBCASE("explicit edges place 500 km in the second bin") {
    SquareMatrix<double> km(2, 0.0);
    km(0, 1) = km(1, 0) = 500.0;
    const auto d = bin_distances(km, BinSpec::explicit_edges({100.0, 1000.0}));
    CHECK(d.bin(0, 1) == 1);
    km(0, 1) = km(1, 0) = 1500.0;
    CHECK_THROWS_AS(bin_distances(km, BinSpec::explicit_edges({100.0, 1000.0})),
                    ValidationError);
  }
  SUBCASE("unit distances form one bin") {
    const auto d = unit_distance_matrix(4);
    CHECK(d.bin_count() == 1);
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t b = 0; b < 4; ++b) CHECK(d.bin(a, b) == (a == b ? -1 : 0));
    }
  }
  SUBCASE("missing coordinates are an error") {
    const auto net = FlowNetwork::without_flows({{"a", "a", Coordinate{1, 1}}, {"b", "b", {}}});
    CHECK_THROWS_AS(build_distance_matrix(net, BinSpec::logarithmic(4)), ValidationError);
  }
  SUBCASE("logarithmic binning covers every pair") {
    Rng rng(5);
    std::vector<NodeRecord> recs;
    for (int i = 0; i < 20; ++i) {
      recs.push_back({"n" + std::to_string(i), "",
                      Coordinate{rng.uniform() * 40.0 + 10.0, rng.uniform() * 60.0 - 120.0}});
    }
    recs.push_back({"dup", "", recs[0].coordinate});
    const auto d = build_distance_matrix(FlowNetwork::without_flows(recs), BinSpec::logarithmic(12));
    CHECK(d.bin_count() == 12);
    std::size_t total = 0;
    for (auto c : d.bin_populations()) total += c;
    CHECK(total == recs.size() * (recs.size() - 1));
    CHECK(d.bin(0, recs.size() - 1) == 0);  // zero distance joins the first bin
    for (std::size_t a = 0; a < recs.size(); ++a) {
      for (std::size_t b = 0; b < recs.size(); ++b) {
        CHECK(d.values(a, b) == d.values(b, a));
        if (a == b) continue;
        const int bin = d.bin(a, b);
        REQUIRE(bin >= 0);
        CHECK(d.values(a, b) <= d.bin_edges[static_cast<std::size_t>(bin)] * (1 + 1e-12));
        if (bin > 0) CHECK(d.values(a, b) > d.bin_edges[static_cast<std::size_t>(bin) - 1]);
      }
    }
  }
}

TEST_CASE("distance csv overrides coordinates") {
  const auto net = FlowNetwork::without_flows({{"a", "a", {}}, {"b", "b", {}}, {"c", "c", {}}});
  std::istringstream in("id_a,id_b,km\na,b,10\nb,c,20\na,c,30\n");
  const auto km = read_distance_csv(in, net);
  CHECK(km(1, 0) == 10.0);
  CHECK(km(2, 1) == 20.0);
  const auto d = build_distance_matrix(net, km, BinSpec::explicit_edges({15.0, 40.0}));
  CHECK(d.bin(0, 1) == 0);
  CHECK(d.bin(0, 2) == 1);
  std::istringstream partial("id_a,id_b,km\na,b,10\n");
  CHECK_THROWS_AS(read_distance_csv(partial, net), ValidationError);
}
