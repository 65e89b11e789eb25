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

#include "doctest.h"
#include "hierflow/error.hpp"
#include "hierflow/io.hpp"
#include "json.hpp"

using namespace hierflow;
using nlohmann::json;

namespace {

std::vector<std::string> names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("v" + std::to_string(i));
  return out;
}

}  // namespace

TEST_CASE("newick round trip keeps the tree") {
  const auto ladder = default_ladder();
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const std::size_t n = 1 + seed % 11;
    const auto hier = random_hierarchy(n, ladder, seed);
    const auto ids = names(n);
    const auto text = io::to_newick(hier, ids);
    const auto back = io::parse_newick(text, ids, ladder);
    CHECK(back.hierarchy == hier);
    CHECK(back.ids == ids);
    CHECK(io::to_newick(back.hierarchy, back.ids) == text);
  }
}

TEST_CASE("plain newick takes heights from branch lengths") {
  const auto tree = io::parse_newick("((a:0.3,b:0.3):0.4,c:0.7);");
  REQUIRE(tree.ids == std::vector<std::string>{"a", "b", "c"});
  CHECK(h_of(tree.hierarchy, 0, 1) == doctest::Approx(0.3));
  CHECK(h_of(tree.hierarchy, 0, 2) == doctest::Approx(0.7));
}

TEST_CASE("newick names with special characters are quoted") {
  const auto hier = Hierarchy::flat(3, 0.5);
  const std::vector<std::string> ids{"New York", "it's", "a,b"};
  const auto text = io::to_newick(hier, ids);
  const auto back = io::parse_newick(text, ids);
  CHECK(back.ids == ids);
  CHECK(back.hierarchy == hier);
}

TEST_CASE("newick errors") {
  CHECK_THROWS_AS(io::parse_newick("((a,b),c"), ParseError);
  const std::vector<std::string> order{"a", "b", "x"};
  CHECK_THROWS_AS(io::parse_newick("((a:0.3,b:0.3):0.4,c:0.7);", order), ValidationError);
}

TEST_CASE("partition documents") {
  const io::PartitionDocument doc{{{0, 1, 0, 2}, 0.4}, {"a", "b", "c", "d"}, false};
  const auto back = io::partition_from_json(io::partition_to_json(doc));
  CHECK(back.partition == doc.partition);
  CHECK(back.ids == doc.ids);
  CHECK_FALSE(back.exact);

  const auto j = json::parse(io::partition_to_json(doc));
  CHECK(j["schema"] == 1);
  CHECK(j["communities"] == 3);
  CHECK(io::partition_to_csv(doc) == "id,community\na,0\nb,1\nc,0\nd,2\n");

  CHECK_THROWS_AS(io::partition_from_json("{\"nodes\":[]}"), ValidationError);
  CHECK_THROWS_AS(io::partition_from_json("not json"), ParseError);
}

TEST_CASE("geojson attaches communities to points") {
  const io::PartitionDocument doc{{{0, 1}, 0.4}, {"NY", "X"}, true};
  const std::vector<NodeRecord> recs{{"NY", "New York", Coordinate{40.7, -74.0}},
                                     {"X", "Nowhere", std::nullopt}};
  const auto j = json::parse(io::partition_to_geojson(doc, recs));
  CHECK(j["type"] == "FeatureCollection");
  REQUIRE(j["features"].size() == 2);
  CHECK(j["features"][0]["geometry"]["coordinates"][0] == -74.0);
  CHECK(j["features"][0]["geometry"]["coordinates"][1] == 40.7);
  CHECK(j["features"][0]["properties"]["community"] == 0);
  CHECK(j["features"][1]["geometry"].is_null());
}

TEST_CASE("model documents round trip") {
  const auto ladder = default_ladder();
  SquareMatrix<double> km(3, 0.0);
  km(0, 1) = km(1, 0) = 10.0;
  km(0, 2) = km(2, 0) = 300.0;
  km(1, 2) = km(2, 1) = 290.0;
  io::ModelDocument doc;
  doc.ids = {"a", "b", "c"};
  doc.distances = bin_distances(km, BinSpec::explicit_edges({100.0, 1000.0}));
  doc.params = {{1.5, 2.0, 0.25}, {3.0, 1.0, 0.5}, {1.0, 0.3}};
  doc.hierarchy = random_hierarchy(3, ladder, 4);
  doc.bins = BinSpec::explicit_edges({100.0, 1000.0});
  doc.ladder = ladder;
  doc.mode = FitMode::Spatial;
  doc.objective_value = 12.5;
  const auto text = io::model_to_json(doc);
  const auto back = io::model_from_json(text);
  CHECK(back.ids == doc.ids);
  CHECK(back.params.w_out == doc.params.w_out);
  CHECK(back.params.g == doc.params.g);
  CHECK(back.hierarchy == doc.hierarchy);
  CHECK(back.distances.bin_index == doc.distances.bin_index);
  CHECK(back.distances.values == doc.distances.values);
  CHECK(back.objective_value == doc.objective_value);
  CHECK(io::model_to_json(back) == text);

  auto j = json::parse(text);
  j.erase("distances");
  j["g"]["values"] = {1.0};
  j["g"]["edges_km"] = {1.0};
  const auto unit = io::model_from_json(j.dump());
  CHECK(unit.distances.bin_count() == 1);
  CHECK(unit.distances.bin(0, 2) == 0);

  j = json::parse(text);
  j["schema"] = 99;
  CHECK_THROWS_AS(io::model_from_json(j.dump()), ValidationError);
}

TEST_CASE("fit reports and move logs") {
  const auto ladder = default_ladder();
  const auto hier = random_hierarchy(6, ladder, 3);
  const ModelParams p{std::vector<double>(6, 5.0), std::vector<double>(6, 5.0), {1.0}};
  const auto net = sample_poisson_network(p, hier, unit_distance_matrix(6), 8);
  FitConfig cfg;
  cfg.mode = FitMode::Generic;
  const auto rep = fit(net, unit_distance_matrix(6), cfg);
  const auto ids = net.ids();
  const auto j = json::parse(io::report_to_json(rep, cfg, ids));
  CHECK(j["schema"] == 1);
  CHECK(j["converged"] == rep.converged);
  CHECK(j["moves"].size() == rep.moves.size());
  const auto csv = io::moves_to_csv(rep, ids);
  CHECK(csv.starts_with("sweep,kind,old_level,new_level,gain,objective,source,target\n"));
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) ==
        rep.moves.size() + 1);
  const auto config = json::parse(io::config_to_json(cfg));
  CHECK(config["mode"] == "generic");
}
