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

// Regenerates the bundled fixtures under data/. Both networks are
// synthetic: flows are Poisson draws from the model with a planted
// hierarchy, so the ground truth is known exactly.
//
//   hierflow_make_fixtures <data-dir>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hierflow/fit.hpp"
#include "hierflow/io.hpp"
#include "hierflow/random.hpp"

namespace fs = std::filesystem;
using namespace hierflow;

namespace {

struct State {
  const char* id;
  const char* name;
  double lat, lon;
  int region;  // index into kRegions
};

// Approximate geographic centroids.
constexpr State kStates[] = {
    {"ME", "Maine", 45.37, -69.24, 0},          {"NH", "New Hampshire", 43.68, -71.58, 0},
    {"VT", "Vermont", 44.07, -72.67, 0},        {"MA", "Massachusetts", 42.26, -71.81, 0},
    {"NY", "New York", 42.95, -75.53, 1},       {"NJ", "New Jersey", 40.19, -74.67, 1},
    {"PA", "Pennsylvania", 40.88, -77.80, 1},   {"VA", "Virginia", 37.52, -78.85, 2},
    {"NC", "North Carolina", 35.56, -79.39, 2}, {"SC", "South Carolina", 33.90, -80.90, 2},
    {"GA", "Georgia", 32.68, -83.22, 3},        {"FL", "Florida", 28.63, -82.45, 3},
    {"AL", "Alabama", 32.79, -86.83, 3},        {"OH", "Ohio", 40.29, -82.79, 4},
    {"MI", "Michigan", 44.35, -85.41, 4},       {"IN", "Indiana", 39.89, -86.28, 4},
    {"WI", "Wisconsin", 44.62, -89.99, 5},      {"MN", "Minnesota", 46.28, -94.31, 5},
    {"IA", "Iowa", 42.07, -93.50, 5},           {"KS", "Kansas", 38.48, -98.38, 6},
    {"NE", "Nebraska", 41.53, -99.79, 6},       {"MO", "Missouri", 38.36, -92.46, 6},
    {"TX", "Texas", 31.47, -99.33, 7},          {"OK", "Oklahoma", 35.59, -97.49, 7},
    {"AR", "Arkansas", 34.90, -92.44, 7},       {"LA", "Louisiana", 31.07, -92.00, 8},
    {"MS", "Mississippi", 32.74, -89.67, 8},    {"TN", "Tennessee", 35.86, -86.35, 8},
    {"CA", "California", 37.18, -119.47, 9},    {"OR", "Oregon", 43.93, -120.56, 9},
    {"WA", "Washington", 47.38, -120.45, 9},    {"CO", "Colorado", 38.99, -105.55, 10},
    {"UT", "Utah", 39.32, -111.67, 10},         {"NV", "Nevada", 39.33, -116.63, 10},
    {"AZ", "Arizona", 34.29, -111.66, 10},      {"NM", "New Mexico", 34.41, -106.11, 10},
    {"MT", "Montana", 47.05, -109.63, 11},      {"ID", "Idaho", 44.39, -114.61, 11},
    {"WY", "Wyoming", 43.00, -107.55, 11},
};

// Twelve regions nest into five divisions, which nest into three zones.
constexpr int kRegionDivision[12] = {0, 0, 1, 1, 2, 2, 2, 3, 3, 4, 4, 4};
constexpr int kDivisionZone[5] = {0, 0, 1, 1, 2};

void write(const fs::path& path, const std::string& text) {
  io::write_text(path, text);
  std::cout << "wrote " << path.string() << "\n";
}

std::string edges_text(const FlowNetwork& net) {
  std::ostringstream out;
  write_edge_csv(out, net, true);
  return out.str();
}

void planted_fixture(const fs::path& dir) {
  const std::size_t n = 8, k = 2;
  const std::vector<double> ladder = default_ladder();
  const double within = ladder[1], between = ladder[8];
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
  doc.params = ModelParams{std::vector<double>(n, 16.0), std::vector<double>(n, 16.0), {1.0}};
  doc.ladder = ladder;
  doc.mode = FitMode::Generic;

  std::vector<NodeRecord> nodes;
  for (const auto& id : doc.ids) nodes.push_back({id, id, std::nullopt});
  const FlowNetwork net =
      sample_poisson_network(doc.params, *doc.hierarchy, doc.distances, 20260101, nodes);

  fs::create_directories(dir);
  write(dir / "edges.csv", edges_text(net));
  write(dir / "model.json", io::model_to_json(doc));
  write(dir / "truth.json",
        io::partition_to_json({cut_at_level(*doc.hierarchy, within), doc.ids, true}));
}

void migration_fixture(const fs::path& dir) {
  const std::vector<double> ladder = default_ladder();
  const double region_h = ladder[1], division_h = ladder[3], zone_h = ladder[5],
               top_h = ladder[7];
  const std::size_t n = std::size(kStates);

  // Vertices: states, 12 regions, 5 divisions, 3 zones, root.
  const std::size_t region0 = n, division0 = n + 12, zone0 = division0 + 5,
                    root = zone0 + 3;
  std::vector<Hierarchy::Vertex> parents(root + 1, Hierarchy::npos);
  std::vector<double> heights(root + 1, 0.0);
  std::vector<NodeRecord> nodes;
  for (std::size_t i = 0; i < n; ++i) {
    parents[i] = region0 + static_cast<std::size_t>(kStates[i].region);
    nodes.push_back({kStates[i].id, kStates[i].name, Coordinate{kStates[i].lat, kStates[i].lon}});
  }
  for (std::size_t r = 0; r < 12; ++r) {
    parents[region0 + r] = division0 + static_cast<std::size_t>(kRegionDivision[r]);
    heights[region0 + r] = region_h;
  }
  for (std::size_t d = 0; d < 5; ++d) {
    parents[division0 + d] = zone0 + static_cast<std::size_t>(kDivisionZone[d]);
    heights[division0 + d] = division_h;
  }
  for (std::size_t z = 0; z < 3; ++z) {
    parents[zone0 + z] = root;
    heights[zone0 + z] = zone_h;
  }
  heights[root] = top_h;
  const Hierarchy truth = Hierarchy::from_parents(n, parents, heights, ladder);

  const FlowNetwork blank = FlowNetwork::without_flows(nodes);
  const BinSpec bins = BinSpec::logarithmic(12);
  DistanceMatrix dist = build_distance_matrix(blank, bins);

  // Populous-looking weights and a distance decay of roughly d^-0.7.
  Rng rng(7);
  ModelParams params;
  for (std::size_t i = 0; i < n; ++i) {
    const double size = 20.0 + 40.0 * rng.uniform();
    params.w_out.push_back(size);
    params.w_in.push_back(size * (0.8 + 0.4 * rng.uniform()));
  }
  for (double edge : dist.bin_edges) params.g.push_back(std::pow(edge / 300.0, -0.7));

  const FlowNetwork net = sample_poisson_network(params, truth, dist, 20260315, nodes);

  io::ModelDocument doc;
  doc.ids = net.ids();
  doc.params = params;
  doc.hierarchy = truth;
  doc.distances = dist;
  doc.bins = bins;
  doc.ladder = ladder;
  doc.mode = FitMode::Spatial;

  fs::create_directories(dir);
  {
    std::ostringstream out;
    write_nodes_csv(out, nodes);
    write(dir / "nodes.csv", out.str());
  }
  write(dir / "edges.csv", edges_text(net));
  write(dir / "model.json", io::model_to_json(doc));
  write(dir / "truth.nwk", io::to_newick(truth, doc.ids) + "\n");
  for (double h : {region_h, division_h, zone_h}) {
    const Partition p = cut_at_level(truth, h);
    write(dir / ("truth_k" + std::to_string(p.community_count()) + ".json"),
          io::partition_to_json({p, doc.ids, true}));
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: hierflow_make_fixtures <data-dir>\n";
    return 2;
  }
  try {
    const fs::path root = argv[1];
    planted_fixture(root / "planted8");
    migration_fixture(root / "migration");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
