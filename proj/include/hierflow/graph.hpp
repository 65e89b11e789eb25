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

// Flow network data model, CSV ingestion, geographic distances and
// distance binning.

#ifndef HIERFLOW_GRAPH_HPP
#define HIERFLOW_GRAPH_HPP

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "hierflow/matrix.hpp"

namespace hierflow {

struct Coordinate {
  double lat = 0.0;  // degrees, [-90, 90]
  double lon = 0.0;  // degrees, [-180, 180]

  bool operator==(const Coordinate&) const = default;
};

struct NodeRecord {
  std::string id;
  std::string label;
  std::optional<Coordinate> coordinate;

  bool operator==(const NodeRecord&) const = default;
};

/// Directed weighted network of observed flows e(a, b). Immutable once
/// constructed; the constructor enforces the invariants.
class FlowNetwork {
 public:
  FlowNetwork() = default;
  FlowNetwork(std::vector<NodeRecord> nodes, SquareMatrix<double> flows);

  /// Network over `nodes` with every flow zero.
  static FlowNetwork without_flows(std::vector<NodeRecord> nodes);

  std::size_t size() const noexcept { return nodes_.size(); }
  bool empty() const noexcept { return nodes_.empty(); }
  bool directed() const noexcept { return true; }

  const std::vector<NodeRecord>& nodes() const noexcept { return nodes_; }
  const NodeRecord& node(std::size_t i) const { return nodes_.at(i); }
  const SquareMatrix<double>& flows() const noexcept { return flows_; }
  double flow(std::size_t origin, std::size_t destination) const {
    return flows_(origin, destination);
  }

  std::optional<std::size_t> index_of(const std::string& id) const;
  std::vector<std::string> ids() const;

  /// True when every node carries a coordinate.
  bool has_coordinates() const;

  /// Same network with nodes permuted into the order of `ids`. Throws
  /// ValidationError unless `ids` is exactly this network's node set.
  FlowNetwork reordered(std::span<const std::string> ids) const;

 private:
  std::vector<NodeRecord> nodes_;
  SquareMatrix<double> flows_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct CsvOptions {
  char delimiter = ',';
  bool header = true;
};

/// Edge list rows (origin, destination, weight). When `known_nodes` is
/// given the network uses that node order and every referenced id must be
/// listed there; otherwise nodes are registered in order of first
/// appearance.
FlowNetwork read_edge_csv(std::istream& in, const CsvOptions& options = {},
                          const std::vector<NodeRecord>* known_nodes = nullptr);
FlowNetwork parse_edge_csv(const std::filesystem::path& path,
                           const CsvOptions& options = {},
                           const std::vector<NodeRecord>* known_nodes = nullptr);

/// Node rows (id, label, lat, lon); label, lat and lon may be omitted.
std::vector<NodeRecord> read_nodes_csv(std::istream& in,
                                       const CsvOptions& options = {});
std::vector<NodeRecord> parse_nodes_csv(const std::filesystem::path& path,
                                        const CsvOptions& options = {});

/// Writes a header plus one row per ordered pair. Zero flows are skipped
/// unless `include_zeros`; loops are written only when nonzero.
void write_edge_csv(std::ostream& out, const FlowNetwork& net,
                    bool include_zeros = false);

void write_nodes_csv(std::ostream& out, const std::vector<NodeRecord>& nodes);

inline constexpr double kEarthRadiusKm = 6371.0088;

/// Haversine distance in km on a sphere of radius kEarthRadiusKm.
double great_circle_distance(const Coordinate& p, const Coordinate& q);

enum class BinMode { Linear, Logarithmic, ExplicitEdges };

/// How pairwise distances are grouped into bins of the deterrence g.
/// Bins are described by their ascending upper edges: bin i holds
/// distances in (edges[i-1], edges[i]], bin 0 also holds everything at or
/// below edges[0].
struct BinSpec {
  BinMode mode = BinMode::Logarithmic;
  std::size_t count = 12;
  std::vector<double> edges;  // ExplicitEdges only
  std::optional<double> lo;   // Linear/Logarithmic range; defaults from data
  std::optional<double> hi;

  static BinSpec logarithmic(std::size_t count);
  static BinSpec linear(std::size_t count, std::optional<double> lo = {},
                        std::optional<double> hi = {});
  static BinSpec explicit_edges(std::vector<double> edges);

  void validate() const;
};

std::string to_string(BinMode mode);

struct DistanceMatrix {
  SquareMatrix<double> values;  // km; symmetric with zero diagonal
  SquareMatrix<int> bin_index;  // -1 on the diagonal
  std::vector<double> bin_edges;

  std::size_t size() const noexcept { return values.size(); }
  std::size_t bin_count() const noexcept { return bin_edges.size(); }
  int bin(std::size_t a, std::size_t b) const { return bin_index(a, b); }
  /// Number of off-diagonal ordered pairs in each bin.
  std::vector<std::size_t> bin_populations() const;
};

/// Resolves `bins` against the given distances and assigns every
/// off-diagonal pair to a bin.
DistanceMatrix bin_distances(SquareMatrix<double> values, const BinSpec& bins);

/// Distances from node coordinates. Throws ValidationError when a node
/// has no coordinate.
DistanceMatrix build_distance_matrix(const FlowNetwork& net,
                                     const BinSpec& bins);

/// Distances from an explicit pairwise table instead of coordinates.
DistanceMatrix build_distance_matrix(const FlowNetwork& net,
                                     const SquareMatrix<double>& km,
                                     const BinSpec& bins);

/// The generic-network reduction: d(a, b) = 1 for every pair, one bin.
DistanceMatrix unit_distance_matrix(std::size_t n);

/// Rows (id_a, id_b, km). Every unordered pair of distinct nodes must be
/// covered; either orientation is accepted.
SquareMatrix<double> read_distance_csv(std::istream& in, const FlowNetwork& net,
                                       const CsvOptions& options = {});
SquareMatrix<double> parse_distance_csv(const std::filesystem::path& path,
                                        const FlowNetwork& net,
                                        const CsvOptions& options = {});

}  // namespace hierflow

#endif  // HIERFLOW_GRAPH_HPP
