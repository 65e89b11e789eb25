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

#include "hierflow/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>

#include "csv.hpp"
#include "hierflow/error.hpp"

namespace hierflow {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return in;
}

void check_coordinate(const Coordinate& c, const std::string& id) {
  if (!(c.lat >= -90.0 && c.lat <= 90.0)) {
    throw ValidationError("node '" + id + "': latitude " +
                          detail::format_number(c.lat) +
                          " outside [-90, 90]");
  }
  if (!(c.lon >= -180.0 && c.lon <= 180.0)) {
    throw ValidationError("node '" + id + "': longitude " +
                          detail::format_number(c.lon) +
                          " outside [-180, 180]");
  }
}

}  // namespace

FlowNetwork::FlowNetwork(std::vector<NodeRecord> nodes,
                         SquareMatrix<double> flows)
    : nodes_(std::move(nodes)), flows_(std::move(flows)) {
  if (flows_.size() != nodes_.size()) {
    throw ValidationError("flow matrix dimension " +
                          std::to_string(flows_.size()) +
                          " does not match node count " +
                          std::to_string(nodes_.size()));
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& node = nodes_[i];
    if (!index_.emplace(node.id, i).second) {
      throw ValidationError("duplicate node id '" + node.id + "'");
    }
    if (node.coordinate) check_coordinate(*node.coordinate, node.id);
  }
  for (std::size_t a = 0; a < size(); ++a) {
    for (std::size_t b = 0; b < size(); ++b) {
      const double e = flows_(a, b);
      if (!std::isfinite(e) || e < 0.0) {
        throw ValidationError("flow " + nodes_[a].id + " -> " + nodes_[b].id +
                              " must be finite and non-negative, got " +
                              detail::format_number(e));
      }
    }
  }
}

FlowNetwork FlowNetwork::without_flows(std::vector<NodeRecord> nodes) {
  const std::size_t n = nodes.size();
  return FlowNetwork(std::move(nodes), SquareMatrix<double>(n));
}

std::optional<std::size_t> FlowNetwork::index_of(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> FlowNetwork::ids() const {
  std::vector<std::string> out;
  out.reserve(nodes_.size());
  for (const auto& node : nodes_) out.push_back(node.id);
  return out;
}

bool FlowNetwork::has_coordinates() const {
  return std::all_of(nodes_.begin(), nodes_.end(),
                     [](const NodeRecord& n) { return n.coordinate.has_value(); });
}

FlowNetwork FlowNetwork::reordered(std::span<const std::string> ids) const {
  if (ids.size() != size()) {
    throw ValidationError("node set mismatch: expected " +
                          std::to_string(ids.size()) + " nodes, network has " +
                          std::to_string(size()));
  }
  std::vector<std::size_t> source(ids.size());
  std::vector<NodeRecord> nodes;
  nodes.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto idx = index_of(ids[i]);
    if (!idx) throw ValidationError("node set mismatch: unknown node '" + ids[i] + "'");
    source[i] = *idx;
    nodes.push_back(nodes_[*idx]);
  }
  SquareMatrix<double> flows(ids.size());
  for (std::size_t a = 0; a < ids.size(); ++a) {
    for (std::size_t b = 0; b < ids.size(); ++b) {
      flows(a, b) = flows_(source[a], source[b]);
    }
  }
  return FlowNetwork(std::move(nodes), std::move(flows));
}

FlowNetwork read_edge_csv(std::istream& in, const CsvOptions& options,
                          const std::vector<NodeRecord>* known_nodes) {
  struct Edge {
    std::size_t origin, destination;
    double weight;
    std::size_t line;
  };

  std::vector<NodeRecord> nodes;
  std::unordered_map<std::string, std::size_t> index;
  if (known_nodes) {
    nodes = *known_nodes;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!index.emplace(nodes[i].id, i).second) {
        throw ValidationError("duplicate node id '" + nodes[i].id + "'");
      }
    }
  }
  auto resolve = [&](const std::string& id, std::size_t line) {
    if (id.empty()) throw ParseError("empty node id", line);
    if (const auto it = index.find(id); it != index.end()) return it->second;
    if (known_nodes) {
      throw ValidationError("line " + std::to_string(line) + ": node '" + id +
                            "' is not in the node list");
    }
    index.emplace(id, nodes.size());
    nodes.push_back({id, id, std::nullopt});
    return nodes.size() - 1;
  };

  std::vector<Edge> edges;
  for (const auto& row : detail::read_csv(in, options.delimiter, options.header)) {
    if (row.fields.size() != 3) {
      throw ParseError("expected 3 fields (origin, destination, weight), got " +
                           std::to_string(row.fields.size()),
                       row.line);
    }
    const double w = detail::parse_number(row.fields[2], row.line, "weight");
    if (!std::isfinite(w) || w < 0.0) {
      throw ValidationError("line " + std::to_string(row.line) + ": weight " +
                            row.fields[2] + " must be finite and non-negative");
    }
    const std::size_t o = resolve(row.fields[0], row.line);
    const std::size_t d = resolve(row.fields[1], row.line);
    edges.push_back({o, d, w, row.line});
  }

  SquareMatrix<double> flows(nodes.size());
  SquareMatrix<char> seen(nodes.size(), 0);
  for (const auto& e : edges) {
    if (seen(e.origin, e.destination)) {
      throw ValidationError("line " + std::to_string(e.line) +
                            ": duplicate edge " + nodes[e.origin].id + " -> " +
                            nodes[e.destination].id);
    }
    seen(e.origin, e.destination) = 1;
    flows(e.origin, e.destination) = e.weight;
  }
  return FlowNetwork(std::move(nodes), std::move(flows));
}

FlowNetwork parse_edge_csv(const std::filesystem::path& path,
                           const CsvOptions& options,
                           const std::vector<NodeRecord>* known_nodes) {
  auto in = open_input(path);
  return read_edge_csv(in, options, known_nodes);
}

std::vector<NodeRecord> read_nodes_csv(std::istream& in,
                                       const CsvOptions& options) {
  std::vector<NodeRecord> nodes;
  std::unordered_map<std::string, std::size_t> seen;
  for (const auto& row : detail::read_csv(in, options.delimiter, options.header)) {
    const auto& f = row.fields;
    if (f.empty() || f.size() > 4 || f[0].empty()) {
      throw ParseError("expected id[,label[,lat,lon]]", row.line);
    }
    NodeRecord node;
    node.id = f[0];
    node.label = f.size() > 1 && !f[1].empty() ? f[1] : f[0];
    const bool has_lat = f.size() > 2 && !f[2].empty();
    const bool has_lon = f.size() > 3 && !f[3].empty();
    if (has_lat != has_lon) {
      throw ParseError("latitude and longitude must both be given or both omitted",
                       row.line);
    }
    if (has_lat) {
      Coordinate c{detail::parse_number(f[2], row.line, "latitude"),
                   detail::parse_number(f[3], row.line, "longitude")};
      try {
        check_coordinate(c, node.id);
      } catch (const ValidationError& e) {
        throw ValidationError("line " + std::to_string(row.line) + ": " + e.what());
      }
      node.coordinate = c;
    }
    if (!seen.emplace(node.id, row.line).second) {
      throw ValidationError("line " + std::to_string(row.line) +
                            ": duplicate node id '" + node.id + "'");
    }
    nodes.push_back(std::move(node));
  }
  return nodes;
}

std::vector<NodeRecord> parse_nodes_csv(const std::filesystem::path& path,
                                        const CsvOptions& options) {
  auto in = open_input(path);
  return read_nodes_csv(in, options);
}

void write_edge_csv(std::ostream& out, const FlowNetwork& net,
                    bool include_zeros) {
  out << "origin,destination,weight\n";
  for (std::size_t a = 0; a < net.size(); ++a) {
    for (std::size_t b = 0; b < net.size(); ++b) {
      const double e = net.flow(a, b);
      if (e == 0.0 && (a == b || !include_zeros)) continue;
      out << detail::csv_escape(net.node(a).id) << ','
          << detail::csv_escape(net.node(b).id) << ','
          << detail::format_number(e) << '\n';
    }
  }
}

void write_nodes_csv(std::ostream& out, const std::vector<NodeRecord>& nodes) {
  out << "id,label,lat,lon\n";
  for (const auto& node : nodes) {
    out << detail::csv_escape(node.id) << ',' << detail::csv_escape(node.label);
    if (node.coordinate) {
      out << ',' << detail::format_number(node.coordinate->lat) << ','
          << detail::format_number(node.coordinate->lon);
    }
    out << '\n';
  }
}

double great_circle_distance(const Coordinate& p, const Coordinate& q) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double phi1 = p.lat * rad;
  const double phi2 = q.lat * rad;
  const double dphi = (q.lat - p.lat) * rad;
  const double dlambda = (q.lon - p.lon) * rad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(std::min(1.0, h)));
}

BinSpec BinSpec::logarithmic(std::size_t count) {
  BinSpec spec;
  spec.mode = BinMode::Logarithmic;
  spec.count = count;
  return spec;
}

BinSpec BinSpec::linear(std::size_t count, std::optional<double> lo,
                        std::optional<double> hi) {
  BinSpec spec;
  spec.mode = BinMode::Linear;
  spec.count = count;
  spec.lo = lo;
  spec.hi = hi;
  return spec;
}

BinSpec BinSpec::explicit_edges(std::vector<double> edges) {
  BinSpec spec;
  spec.mode = BinMode::ExplicitEdges;
  spec.count = edges.size();
  spec.edges = std::move(edges);
  return spec;
}

void BinSpec::validate() const {
  if (mode == BinMode::ExplicitEdges) {
    if (edges.empty()) throw ValidationError("explicit bin edges must be non-empty");
    for (std::size_t i = 0; i < edges.size(); ++i) {
      if (!std::isfinite(edges[i]) || edges[i] < 0.0) {
        throw ValidationError("bin edges must be finite and non-negative");
      }
      if (i > 0 && !(edges[i] > edges[i - 1])) {
        throw ValidationError("bin edges must be strictly ascending");
      }
    }
    return;
  }
  if (count < 1) throw ValidationError("bin count must be at least 1");
  if (lo && (!std::isfinite(*lo) || *lo < 0.0)) {
    throw ValidationError("bin range lower bound must be finite and non-negative");
  }
  if (hi && (!std::isfinite(*hi) || *hi < 0.0)) {
    throw ValidationError("bin range upper bound must be finite and non-negative");
  }
  if (lo && hi && !(*hi > *lo)) {
    throw ValidationError("bin range must satisfy lo < hi");
  }
  if (mode == BinMode::Logarithmic && lo && *lo <= 0.0) {
    throw ValidationError("logarithmic bins need a positive lower bound");
  }
}

std::string to_string(BinMode mode) {
  switch (mode) {
    case BinMode::Linear: return "linear";
    case BinMode::Logarithmic: return "logarithmic";
    case BinMode::ExplicitEdges: return "explicit-edges";
  }
  return "unknown";
}

std::vector<std::size_t> DistanceMatrix::bin_populations() const {
  std::vector<std::size_t> pop(bin_count(), 0);
  for (std::size_t a = 0; a < size(); ++a) {
    for (std::size_t b = 0; b < size(); ++b) {
      if (a != b) ++pop[static_cast<std::size_t>(bin_index(a, b))];
    }
  }
  return pop;
}

namespace {

std::vector<double> resolve_edges(const SquareMatrix<double>& values,
                                  const BinSpec& bins) {
  if (bins.mode == BinMode::ExplicitEdges) return bins.edges;

  const std::size_t n = values.size();
  double max_d = 0.0;
  double min_pos = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      max_d = std::max(max_d, values(a, b));
      if (values(a, b) > 0.0) min_pos = std::min(min_pos, values(a, b));
    }
  }

  const double hi = bins.hi.value_or(max_d);
  std::vector<double> edges;
  if (bins.mode == BinMode::Linear) {
    const double lo = bins.lo.value_or(0.0);
    if (!(hi > lo)) return {hi};
    for (std::size_t i = 1; i < bins.count; ++i) {
      edges.push_back(lo + (hi - lo) * static_cast<double>(i) /
                               static_cast<double>(bins.count));
    }
    edges.push_back(hi);
    return edges;
  }

  const double lo = bins.lo.value_or(min_pos);
  // Degenerate ranges (no positive distances, or all equal) collapse to
  // a single bin.
  if (!std::isfinite(lo) || !(hi > lo)) return {hi};
  const double ratio = std::log(hi / lo);
  for (std::size_t i = 1; i < bins.count; ++i) {
    edges.push_back(lo * std::exp(ratio * static_cast<double>(i) /
                                  static_cast<double>(bins.count)));
  }
  edges.push_back(hi);
  return edges;
}

}  // namespace

DistanceMatrix bin_distances(SquareMatrix<double> values, const BinSpec& bins) {
  bins.validate();
  const std::size_t n = values.size();
  for (std::size_t a = 0; a < n; ++a) {
    if (values(a, a) != 0.0) throw ValidationError("distance diagonal must be zero");
    for (std::size_t b = 0; b < n; ++b) {
      if (!std::isfinite(values(a, b)) || values(a, b) < 0.0) {
        throw ValidationError("distances must be finite and non-negative");
      }
      if (values(a, b) != values(b, a)) {
        throw ValidationError("distance matrix must be symmetric");
      }
    }
  }

  DistanceMatrix dist;
  dist.bin_edges = resolve_edges(values, bins);
  dist.bin_index = SquareMatrix<int>(n, -1);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      const double d = values(a, b);
      const auto it = std::lower_bound(dist.bin_edges.begin(),
                                       dist.bin_edges.end(), d);
      if (it == dist.bin_edges.end()) {
        throw ValidationError("distance " + detail::format_number(d) +
                              " km exceeds the last bin edge " +
                              detail::format_number(dist.bin_edges.back()));
      }
      dist.bin_index(a, b) = static_cast<int>(it - dist.bin_edges.begin());
    }
  }
  dist.values = std::move(values);
  return dist;
}

DistanceMatrix build_distance_matrix(const FlowNetwork& net,
                                     const BinSpec& bins) {
  const std::size_t n = net.size();
  SquareMatrix<double> km(n);
  for (std::size_t a = 0; a < n; ++a) {
    if (!net.node(a).coordinate) {
      throw ValidationError("node '" + net.node(a).id +
                            "' has no coordinate and no distance table was given");
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double d =
          great_circle_distance(*net.node(a).coordinate, *net.node(b).coordinate);
      km(a, b) = d;
      km(b, a) = d;
    }
  }
  return bin_distances(std::move(km), bins);
}

DistanceMatrix build_distance_matrix(const FlowNetwork& net,
                                     const SquareMatrix<double>& km,
                                     const BinSpec& bins) {
  if (km.size() != net.size()) {
    throw ValidationError("distance table dimension does not match node count");
  }
  return bin_distances(km, bins);
}

DistanceMatrix unit_distance_matrix(std::size_t n) {
  DistanceMatrix dist;
  dist.values = SquareMatrix<double>(n, 1.0);
  dist.bin_index = SquareMatrix<int>(n, 0);
  for (std::size_t a = 0; a < n; ++a) {
    dist.values(a, a) = 0.0;
    dist.bin_index(a, a) = -1;
  }
  dist.bin_edges = {1.0};
  return dist;
}

SquareMatrix<double> read_distance_csv(std::istream& in, const FlowNetwork& net,
                                       const CsvOptions& options) {
  const std::size_t n = net.size();
  SquareMatrix<double> km(n, -1.0);
  for (std::size_t a = 0; a < n; ++a) km(a, a) = 0.0;
  for (const auto& row : detail::read_csv(in, options.delimiter, options.header)) {
    if (row.fields.size() != 3) {
      throw ParseError("expected 3 fields (id_a, id_b, km)", row.line);
    }
    const auto a = net.index_of(row.fields[0]);
    const auto b = net.index_of(row.fields[1]);
    if (!a || !b) {
      throw ValidationError("line " + std::to_string(row.line) +
                            ": unknown node in distance table");
    }
    const double d = detail::parse_number(row.fields[2], row.line, "distance");
    if (!std::isfinite(d) || d < 0.0) {
      throw ValidationError("line " + std::to_string(row.line) +
                            ": distance must be finite and non-negative");
    }
    if (*a == *b) {
      if (d != 0.0) {
        throw ValidationError("line " + std::to_string(row.line) +
                              ": self distance must be zero");
      }
      continue;
    }
    if (km(*a, *b) >= 0.0 && km(*a, *b) != d) {
      throw ValidationError("line " + std::to_string(row.line) +
                            ": conflicting distances for " + row.fields[0] +
                            ", " + row.fields[1]);
    }
    km(*a, *b) = d;
    km(*b, *a) = d;
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (km(a, b) < 0.0) {
        throw ValidationError("distance table has no entry for " + net.node(a).id +
                              ", " + net.node(b).id);
      }
    }
  }
  return km;
}

SquareMatrix<double> parse_distance_csv(const std::filesystem::path& path,
                                        const FlowNetwork& net,
                                        const CsvOptions& options) {
  auto in = open_input(path);
  return read_distance_csv(in, net, options);
}

}  // namespace hierflow
