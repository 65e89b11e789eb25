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

#include "hierflow/io.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "csv.hpp"
#include "hierflow/error.hpp"
#include "json.hpp"

namespace hierflow::io {

using nlohmann::json;
using detail::format_number;

namespace {

bool plain_newick_name(const std::string& name) {
  if (name.empty()) return false;
  for (unsigned char c : name) {
    if (std::isspace(c) || std::string_view("()[]':;,").find(static_cast<char>(c)) !=
                               std::string_view::npos) {
      return false;
    }
  }
  return true;
}

std::string newick_name(const std::string& name) {
  if (plain_newick_name(name)) return name;
  std::string out = "'";
  for (char c : name) {
    if (c == '\'') out.push_back('\'');
    out.push_back(c);
  }
  out.push_back('\'');
  return out;
}

void write_newick(const Hierarchy& hier, std::span<const std::string> ids,
                  Hierarchy::Vertex v, std::string& out) {
  if (hier.is_leaf(v)) {
    out += newick_name(ids[v]);
  } else {
    out.push_back('(');
    bool first = true;
    for (auto c : hier.children(v)) {
      if (!first) out.push_back(',');
      first = false;
      write_newick(hier, ids, c, out);
    }
    out += ")[&height=" + format_number(hier.height(v)) + "]";
  }
  const auto p = hier.parent(v);
  if (p != Hierarchy::npos) {
    out += ":" + format_number(hier.height(p) - hier.height(v));
  }
}

void check_ids(const Hierarchy& hier, std::span<const std::string> ids) {
  if (ids.size() != hier.leaf_count()) {
    throw ValidationError("id list does not match the hierarchy's leaf count");
  }
}

class NewickParser {
 public:
  struct Node {
    bool leaf = true;
    std::string name;
    std::optional<double> height;
    std::optional<double> length;
    std::vector<std::size_t> kids;
  };

  explicit NewickParser(std::string_view text) : text_(text) {}

  std::vector<Node> parse() {
    skip();
    if (peek() == ';') {
      ++pos_;
      expect_end();
      return {};
    }
    subtree();
    skip();
    if (peek() == ';') ++pos_;
    expect_end();
    return std::move(nodes_);
  }

 private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("newick: " + what + " at offset " + std::to_string(pos_), 0);
  }

  void expect_end() {
    skip();
    if (pos_ != text_.size()) fail("trailing characters");
  }

  std::size_t subtree() {
    skip();
    const std::size_t id = nodes_.size();
    nodes_.emplace_back();
    if (peek() == '(') {
      ++pos_;
      nodes_[id].leaf = false;
      for (;;) {
        const std::size_t kid = subtree();
        nodes_[id].kids.push_back(kid);
        skip();
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        if (peek() == ')') {
          ++pos_;
          break;
        }
        fail("expected ',' or ')'");
      }
      skip();
      name();  // internal labels are ignored
    } else {
      nodes_[id].name = name();
      if (nodes_[id].name.empty()) fail("expected a leaf name");
    }
    annotations(id);
    return id;
  }

  std::string name() {
    skip();
    std::string out;
    if (peek() == '\'') {
      ++pos_;
      for (;;) {
        if (pos_ >= text_.size()) fail("unterminated quoted name");
        const char c = text_[pos_++];
        if (c == '\'') {
          if (peek() == '\'') {
            out.push_back('\'');
            ++pos_;
            continue;
          }
          break;
        }
        out.push_back(c);
      }
      return out;
    }
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c)) ||
          std::string_view("()[]':;,").find(c) != std::string_view::npos) {
        break;
      }
      out.push_back(c);
      ++pos_;
    }
    return out;
  }

  void annotations(std::size_t id) {
    for (;;) {
      skip();
      if (peek() == '[') {
        const auto close = text_.find(']', pos_);
        if (close == std::string_view::npos) fail("unterminated comment");
        const auto body = text_.substr(pos_ + 1, close - pos_ - 1);
        constexpr std::string_view key = "&height=";
        if (body.starts_with(key)) {
          nodes_[id].height = detail::parse_number(body.substr(key.size()), 0, "height");
        }
        pos_ = close + 1;
      } else if (peek() == ':') {
        ++pos_;
        skip();
        const auto start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) ||
                std::string_view("+-.eE").find(text_[pos_]) != std::string_view::npos)) {
          ++pos_;
        }
        nodes_[id].length =
            detail::parse_number(text_.substr(start, pos_ - start), 0, "branch length");
      } else {
        return;
      }
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::vector<Node> nodes_;
};

json matrix_json(const SquareMatrix<double>& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.size(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

json matrix_json(const SquareMatrix<int>& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.size(); ++r) {
    rows.push_back(std::vector<int>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

template <class T>
SquareMatrix<T> matrix_from_json(const json& j, std::size_t n, const char* what) {
  if (!j.is_array() || j.size() != n) {
    throw ValidationError(std::string("model: '") + what + "' must be " +
                          std::to_string(n) + " rows");
  }
  SquareMatrix<T> m(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = j[r].get<std::vector<T>>();
    if (row.size() != n) {
      throw ValidationError(std::string("model: '") + what + "' must be square");
    }
    for (std::size_t c = 0; c < n; ++c) m(r, c) = row[c];
  }
  return m;
}

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": " + e.what(), 0);
  }
}

void check_schema(const json& j, const char* what) {
  if (!j.is_object() || !j.contains("schema") || j["schema"] != kSchemaVersion) {
    throw ValidationError(std::string(what) + ": missing or unsupported schema version");
  }
}

json bins_json(const BinSpec& bins) {
  json j{{"mode", to_string(bins.mode)}, {"count", bins.count}};
  if (bins.mode == BinMode::ExplicitEdges) j["edges"] = bins.edges;
  if (bins.lo) j["lo"] = *bins.lo;
  if (bins.hi) j["hi"] = *bins.hi;
  return j;
}

BinSpec bins_from_json(const json& j) {
  BinSpec bins;
  const auto mode = j.at("mode").get<std::string>();
  if (mode == to_string(BinMode::Linear)) {
    bins.mode = BinMode::Linear;
  } else if (mode == to_string(BinMode::Logarithmic)) {
    bins.mode = BinMode::Logarithmic;
  } else if (mode == to_string(BinMode::ExplicitEdges)) {
    bins.mode = BinMode::ExplicitEdges;
    bins.edges = j.at("edges").get<std::vector<double>>();
  } else {
    throw ValidationError("unknown bin mode '" + mode + "'");
  }
  bins.count = j.at("count").get<std::size_t>();
  if (j.contains("lo")) bins.lo = j["lo"].get<double>();
  if (j.contains("hi")) bins.hi = j["hi"].get<double>();
  bins.validate();
  return bins;
}

std::string joined_ids(const std::vector<std::size_t>& leaves,
                       std::span<const std::string> ids) {
  std::string out;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (i) out.push_back(';');
    out += ids[leaves[i]];
  }
  return out;
}

}  // namespace

std::string to_newick(const Hierarchy& hier, std::span<const std::string> ids) {
  check_ids(hier, ids);
  if (hier.leaf_count() == 0) return ";";
  std::string out;
  write_newick(hier, ids, hier.root(), out);
  out.push_back(';');
  return out;
}

NewickTree parse_newick(std::string_view text, std::span<const std::string> order,
                        std::vector<double> ladder) {
  const auto nodes = NewickParser(text).parse();

  std::vector<std::string> names;
  std::vector<std::size_t> leaf_nodes;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].leaf) {
      names.push_back(nodes[i].name);
      leaf_nodes.push_back(i);
    }
  }
  const std::size_t n = names.size();

  std::vector<std::size_t> leaf_index(n);
  std::vector<std::string> ids;
  {
    std::unordered_map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < n; ++i) {
      if (!seen.emplace(names[i], i).second) {
        throw ValidationError("newick: duplicate leaf '" + names[i] + "'");
      }
    }
    if (order.empty()) {
      ids = names;
      for (std::size_t i = 0; i < n; ++i) leaf_index[i] = i;
    } else {
      if (order.size() != n) {
        throw ValidationError("newick: leaf set does not match the node list (" +
                              std::to_string(n) + " leaves, " +
                              std::to_string(order.size()) + " nodes)");
      }
      ids.assign(order.begin(), order.end());
      std::vector<bool> used(n, false);
      for (std::size_t idx = 0; idx < n; ++idx) {
        const auto it = seen.find(order[idx]);
        if (it == seen.end()) {
          throw ValidationError("newick: node '" + order[idx] + "' is not a leaf");
        }
        leaf_index[it->second] = idx;
        used[it->second] = true;
      }
    }
  }

  // Heights: explicit comment, else derived from the first child's branch.
  std::vector<double> node_height(nodes.size(), 0.0);
  for (std::size_t i = nodes.size(); i-- > 0;) {
    const auto& node = nodes[i];
    if (node.leaf) continue;
    if (node.height) {
      node_height[i] = *node.height;
    } else {
      const auto& kid = nodes[node.kids.front()];
      if (!kid.length) {
        throw ValidationError("newick: internal vertex needs a height comment or "
                              "branch lengths");
      }
      node_height[i] = node_height[node.kids.front()] + *kid.length;
    }
  }

  std::vector<Hierarchy::Vertex> vertex(nodes.size());
  std::size_t next_internal = n;
  std::size_t leaf_counter = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    vertex[i] = nodes[i].leaf ? leaf_index[leaf_counter++] : next_internal++;
  }
  std::vector<Hierarchy::Vertex> parents(next_internal, Hierarchy::npos);
  std::vector<double> heights(next_internal, 0.0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    heights[vertex[i]] = node_height[i];
    for (auto kid : nodes[i].kids) parents[vertex[kid]] = vertex[i];
  }
  return {Hierarchy::from_parents(n, parents, heights, std::move(ladder)),
          std::move(ids)};
}

std::string to_dot(const Hierarchy& hier, std::span<const std::string> ids) {
  check_ids(hier, ids);
  std::ostringstream out;
  out << "digraph hierarchy {\n  node [shape=box];\n";
  for (Hierarchy::Vertex v = 0; v < hier.vertex_count(); ++v) {
    if (hier.is_leaf(v)) {
      std::string escaped;
      for (char c : ids[v]) {
        if (c == '"' || c == '\\') escaped.push_back('\\');
        escaped.push_back(c);
      }
      out << "  v" << v << " [label=\"" << escaped << "\"];\n";
    } else {
      out << "  v" << v << " [shape=ellipse, label=\"h=" << format_number(hier.height(v))
          << "\"];\n";
    }
  }
  for (Hierarchy::Vertex v = 0; v < hier.vertex_count(); ++v) {
    for (auto c : hier.children(v)) out << "  v" << v << " -> v" << c << ";\n";
  }
  out << "}\n";
  return out.str();
}

std::string partition_to_json(const PartitionDocument& doc) {
  if (doc.ids.size() != doc.partition.size()) {
    throw ValidationError("partition and id list differ in size");
  }
  json j{{"schema", kSchemaVersion},
         {"level", doc.partition.level},
         {"communities", doc.partition.community_count()},
         {"exact", doc.exact},
         {"nodes", doc.ids},
         {"labels", doc.partition.labels}};
  return j.dump(2) + "\n";
}

PartitionDocument partition_from_json(std::string_view text) {
  const json j = parse_json(text, "partition");
  check_schema(j, "partition");
  PartitionDocument doc;
  try {
    doc.ids = j.at("nodes").get<std::vector<std::string>>();
    doc.partition.labels = j.at("labels").get<std::vector<std::size_t>>();
    doc.partition.level = j.value("level", 0.0);
    doc.exact = j.value("exact", true);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("partition: ") + e.what());
  }
  if (doc.ids.size() != doc.partition.labels.size()) {
    throw ValidationError("partition: nodes and labels differ in length");
  }
  return doc;
}

std::string partition_to_csv(const PartitionDocument& doc) {
  std::string out = "id,community\n";
  for (std::size_t i = 0; i < doc.ids.size(); ++i) {
    out += detail::csv_escape(doc.ids[i]) + "," +
           std::to_string(doc.partition.labels.at(i)) + "\n";
  }
  return out;
}

std::string partition_to_geojson(const PartitionDocument& doc,
                                 const std::vector<NodeRecord>& nodes) {
  std::map<std::string, const NodeRecord*> by_id;
  for (const auto& node : nodes) by_id[node.id] = &node;
  json features = json::array();
  for (std::size_t i = 0; i < doc.ids.size(); ++i) {
    const auto it = by_id.find(doc.ids[i]);
    const NodeRecord* node = it == by_id.end() ? nullptr : it->second;
    json feature{{"type", "Feature"},
                 {"properties",
                  {{"id", doc.ids[i]},
                   {"label", node ? node->label : doc.ids[i]},
                   {"community", doc.partition.labels.at(i)}}}};
    if (node && node->coordinate) {
      feature["geometry"] = {
          {"type", "Point"},
          {"coordinates", {node->coordinate->lon, node->coordinate->lat}}};
    } else {
      feature["geometry"] = nullptr;
    }
    features.push_back(std::move(feature));
  }
  json j{{"type", "FeatureCollection"},
         {"schema", kSchemaVersion},
         {"level", doc.partition.level},
         {"communities", doc.partition.community_count()},
         {"exact", doc.exact},
         {"features", std::move(features)}};
  return j.dump(2) + "\n";
}

std::string model_to_json(const ModelDocument& doc) {
  const std::size_t n = doc.ids.size();
  doc.params.validate(n, doc.distances.bin_count(), false);
  json j{{"schema", kSchemaVersion},
         {"nodes", doc.ids},
         {"w_out", doc.params.w_out},
         {"w_in", doc.params.w_in},
         {"g", {{"values", doc.params.g}, {"edges_km", doc.distances.bin_edges}}},
         {"ladder", doc.ladder},
         {"objective",
          {{"kind", to_string(doc.objective.kind)},
           {"include_loops", doc.objective.include_loops}}}};
  if (doc.bins) j["g"]["bins"] = bins_json(*doc.bins);
  if (doc.objective_value) j["objective"]["value"] = *doc.objective_value;
  if (doc.mode) j["mode"] = to_string(*doc.mode);
  if (doc.hierarchy) j["hierarchy"] = to_newick(*doc.hierarchy, doc.ids);
  j["distances"] = {{"km", matrix_json(doc.distances.values)},
                    {"bin_index", matrix_json(doc.distances.bin_index)}};
  return j.dump(2) + "\n";
}

ModelDocument model_from_json(std::string_view text) {
  const json j = parse_json(text, "model");
  check_schema(j, "model");
  ModelDocument doc;
  try {
    doc.ids = j.at("nodes").get<std::vector<std::string>>();
    const std::size_t n = doc.ids.size();
    doc.params.w_out = j.at("w_out").get<std::vector<double>>();
    doc.params.w_in = j.at("w_in").get<std::vector<double>>();
    const json& g = j.at("g");
    doc.params.g = g.is_array() ? g.get<std::vector<double>>()
                                : g.at("values").get<std::vector<double>>();
    doc.ladder = j.value("ladder", std::vector<double>{});
    if (g.is_object() && g.contains("bins")) doc.bins = bins_from_json(g["bins"]);
    if (j.contains("objective")) {
      const json& o = j["objective"];
      doc.objective.kind = objective_kind_from_string(o.value("kind", "poisson-normal"));
      doc.objective.include_loops = o.value("include_loops", false);
      if (o.contains("value")) doc.objective_value = o["value"].get<double>();
    }
    if (j.contains("mode")) doc.mode = fit_mode_from_string(j["mode"].get<std::string>());
    if (j.contains("distances")) {
      const json& d = j["distances"];
      doc.distances.values = matrix_from_json<double>(d.at("km"), n, "km");
      doc.distances.bin_index = matrix_from_json<int>(d.at("bin_index"), n, "bin_index");
      doc.distances.bin_edges = g.is_object() && g.contains("edges_km")
                                    ? g["edges_km"].get<std::vector<double>>()
                                    : std::vector<double>(doc.params.g.size(), 1.0);
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
          const int bin = doc.distances.bin_index(a, b);
          const bool ok = a == b ? bin == -1
                                 : bin >= 0 && static_cast<std::size_t>(bin) <
                                                   doc.distances.bin_count();
          if (!ok) throw ValidationError("model: bin_index entry out of range");
        }
      }
    } else {
      doc.distances = unit_distance_matrix(n);
    }
    if (j.contains("hierarchy")) {
      doc.hierarchy =
          parse_newick(j["hierarchy"].get<std::string>(), doc.ids, doc.ladder).hierarchy;
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model: ") + e.what());
  }
  doc.params.validate(doc.ids.size(), doc.distances.bin_count(), false);
  return doc;
}

std::string config_to_json(const FitConfig& cfg) {
  json j{{"objective", to_string(cfg.objective.kind)},
         {"include_loops", cfg.objective.include_loops},
         {"ladder", cfg.ladder},
         {"bins", bins_json(cfg.bins)},
         {"weight_loop_tol", cfg.weight_loop_tol},
         {"weight_loop_max_iter", cfg.weight_loop_max_iter},
         {"outer_max_sweeps", cfg.outer_max_sweeps},
         {"min_move_gain", cfg.min_move_gain},
         {"seed", cfg.seed},
         {"mode", to_string(cfg.mode)}};
  return j.dump();
}

std::string report_to_json(const FitReport& report, const FitConfig& cfg,
                           std::span<const std::string> ids) {
  json moves = json::array();
  for (const auto& m : report.moves) {
    std::vector<std::string> source, target;
    for (auto a : m.source_leaves) source.push_back(ids[a]);
    for (auto a : m.target_leaves) target.push_back(ids[a]);
    moves.push_back({{"sweep", m.sweep},
                     {"kind", to_string(m.kind)},
                     {"source", source},
                     {"target", target},
                     {"old_level", m.old_level},
                     {"new_level", m.new_level},
                     {"gain", m.gain},
                     {"objective", m.objective}});
  }
  json j{{"schema", kSchemaVersion},
         {"converged", report.converged},
         {"sweeps", report.sweeps},
         {"objective", report.objective},
         {"sweep_objectives", report.sweep_objectives},
         {"step_objectives", report.step_objectives},
         {"moves", std::move(moves)},
         {"nonmonotone_inner_steps", report.nonmonotone_inner_steps},
         {"config", json::parse(config_to_json(cfg))},
         {"params",
          {{"nodes", std::vector<std::string>(ids.begin(), ids.end())},
           {"w_out", report.params.w_out},
           {"w_in", report.params.w_in},
           {"g", report.params.g}}},
         {"hierarchy", to_newick(report.hierarchy, ids)}};
  if (report.gravity_objective) j["gravity_objective"] = *report.gravity_objective;
  return j.dump(2) + "\n";
}

std::string moves_to_csv(const FitReport& report, std::span<const std::string> ids) {
  std::string out = "sweep,kind,old_level,new_level,gain,objective,source,target\n";
  for (const auto& m : report.moves) {
    out += std::to_string(m.sweep) + "," + to_string(m.kind) + "," +
           format_number(m.old_level) + "," + format_number(m.new_level) + "," +
           format_number(m.gain) + "," + format_number(m.objective) + "," +
           detail::csv_escape(joined_ids(m.source_leaves, ids)) + "," +
           detail::csv_escape(joined_ids(m.target_leaves, ids)) + "\n";
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace hierflow::io
