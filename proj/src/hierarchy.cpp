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

#include "hierflow/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <utility>

#include "hierflow/error.hpp"
#include "hierflow/random.hpp"

namespace hierflow {

std::vector<double> default_ladder(std::size_t levels) {
  if (levels == 0) throw ValidationError("ladder needs at least one level");
  std::vector<double> ladder;
  ladder.reserve(levels);
  for (std::size_t i = 1; i <= levels; ++i) {
    ladder.push_back(static_cast<double>(i) / static_cast<double>(levels + 1));
  }
  return ladder;
}

void validate_ladder(std::span<const double> ladder) {
  if (ladder.empty()) throw ValidationError("ladder must be non-empty");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    if (!(ladder[i] > 0.0 && ladder[i] < 1.0)) {
      throw ValidationError("ladder levels must lie in (0, 1)");
    }
    if (i > 0 && !(ladder[i] > ladder[i - 1])) {
      throw ValidationError("ladder must be strictly ascending");
    }
  }
}

Hierarchy Hierarchy::from_parents(std::size_t leaf_count,
                                  std::span<const Vertex> parents,
                                  std::span<const double> heights,
                                  std::vector<double> ladder) {
  const std::size_t total = parents.size();
  if (heights.size() != total || total < leaf_count) {
    throw ValidationError("hierarchy arrays have inconsistent sizes");
  }
  if (!ladder.empty()) validate_ladder(ladder);

  Hierarchy out;
  out.leaf_count_ = leaf_count;
  out.ladder_ = std::move(ladder);
  if (leaf_count == 0) {
    if (total != 0) throw ValidationError("internal vertices without leaves");
    return out;
  }

  auto live = [&](Vertex v) { return parents[v] != removed; };
  Vertex root = npos;
  for (Vertex v = 0; v < total; ++v) {
    if (!live(v)) {
      if (v < leaf_count) {
        throw ValidationError("leaf " + std::to_string(v) + " is missing");
      }
      continue;
    }
    const Vertex p = parents[v];
    if (p == npos) {
      if (root != npos) throw ValidationError("hierarchy has more than one root");
      root = v;
    } else if (p >= total || p < leaf_count || !live(p)) {
      throw ValidationError("vertex " + std::to_string(v) +
                            " has an invalid parent");
    }
  }
  if (root == npos) throw ValidationError("hierarchy has no root");
  for (Vertex v = 0; v < total; ++v) {
    if (!live(v)) continue;
    Vertex x = v;
    for (std::size_t steps = 0; x != root; ++steps) {
      if (steps > total) throw ValidationError("hierarchy contains a cycle");
      x = parents[x];
    }
  }

  std::vector<std::vector<Vertex>> kids(total);
  for (Vertex v = 0; v < total; ++v) {
    if (live(v) && v != root) kids[parents[v]].push_back(v);
  }

  // Contract internal vertices into equal-height parents (top-down, so a
  // chain of equal heights collapses onto its top vertex).
  std::vector<Vertex> rep(total, npos);
  std::vector<Vertex> order{root};
  rep[root] = root;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Vertex v = order[i];
    for (Vertex c : kids[v]) {
      const bool internal = c >= leaf_count;
      rep[c] = internal && heights[c] == heights[v] ? rep[v] : c;
      order.push_back(c);
    }
  }

  std::vector<Vertex> parent(total, removed);
  std::vector<std::vector<Vertex>> children(total);
  for (Vertex v : order) {
    if (rep[v] != v) continue;
    parent[v] = v == root ? npos : rep[parents[v]];
    if (v != root) children[parent[v]].push_back(v);
  }

  // Splice single-child internal vertices; drop childless ones.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Vertex v = *it;
    if (v < leaf_count || rep[v] != v || parent[v] == removed) continue;
    if (children[v].empty()) throw ValidationError("internal vertex without leaves");
    if (children[v].size() > 1) continue;
    const Vertex c = children[v].front();
    const Vertex p = parent[v];
    parent[c] = p;
    if (p == npos) {
      root = c;
    } else {
      std::replace(children[p].begin(), children[p].end(), v, c);
    }
    parent[v] = removed;
    children[v].clear();
  }

  std::vector<double> height(total, 0.0);
  for (Vertex v = leaf_count; v < total; ++v) {
    if (parent[v] == removed) continue;
    const double h = heights[v];
    if (!(h > 0.0 && h < 1.0)) {
      throw ValidationError("merge height " + std::to_string(h) +
                            " outside (0, 1)");
    }
    if (!out.ladder_.empty() &&
        !std::binary_search(out.ladder_.begin(), out.ladder_.end(), h)) {
      throw ValidationError("merge height " + std::to_string(h) +
                            " is not a ladder level");
    }
    height[v] = h;
  }
  for (Vertex v = leaf_count; v < total; ++v) {
    if (parent[v] == removed) continue;
    for (Vertex c : children[v]) {
      if (!(height[c] < height[v])) {
        throw ValidationError("merge heights must increase toward the root");
      }
    }
  }

  // Canonical numbering: children by smallest leaf, internal ids in
  // post-order.
  std::vector<std::size_t> min_leaf(total, npos);
  std::vector<Vertex> post;
  {
    std::vector<std::pair<Vertex, bool>> stack{{root, false}};
    while (!stack.empty()) {
      auto [v, expanded] = stack.back();
      stack.pop_back();
      if (expanded || v < leaf_count) {
        if (v < leaf_count) {
          min_leaf[v] = v;
        } else {
          std::size_t m = npos;
          for (Vertex c : children[v]) m = std::min(m, min_leaf[c]);
          min_leaf[v] = m;
        }
        post.push_back(v);
        continue;
      }
      stack.push_back({v, true});
      for (Vertex c : children[v]) stack.push_back({c, false});
    }
  }
  for (Vertex v : post) {
    std::sort(children[v].begin(), children[v].end(),
              [&](Vertex a, Vertex b) { return min_leaf[a] < min_leaf[b]; });
  }
  std::vector<Vertex> renum(total, npos);
  Vertex next = leaf_count;
  {
    std::vector<std::pair<Vertex, bool>> stack{{root, false}};
    while (!stack.empty()) {
      auto [v, expanded] = stack.back();
      stack.pop_back();
      if (v < leaf_count) {
        renum[v] = v;
        continue;
      }
      if (expanded) {
        renum[v] = next++;
        continue;
      }
      stack.push_back({v, true});
      for (auto it = children[v].rbegin(); it != children[v].rend(); ++it) {
        stack.push_back({*it, false});
      }
    }
  }

  const std::size_t count = next;
  out.parent_.assign(count, npos);
  out.height_.assign(count, 0.0);
  out.children_.assign(count, {});
  for (Vertex v = 0; v < total; ++v) {
    if (renum[v] == npos) continue;
    const Vertex nv = renum[v];
    out.parent_[nv] = parent[v] == npos ? npos : renum[parent[v]];
    out.height_[nv] = height[v];
    for (Vertex c : children[v]) out.children_[nv].push_back(renum[c]);
  }
  out.root_ = renum[root];
  out.index();
  return out;
}

Hierarchy Hierarchy::flat(std::size_t leaf_count, double level,
                          std::vector<double> ladder) {
  if (leaf_count <= 1) {
    return from_parents(leaf_count, std::vector<Vertex>(leaf_count, npos),
                        std::vector<double>(leaf_count, 0.0), std::move(ladder));
  }
  std::vector<Vertex> parents(leaf_count + 1, leaf_count);
  parents[leaf_count] = npos;
  std::vector<double> heights(leaf_count + 1, 0.0);
  heights[leaf_count] = level;
  return from_parents(leaf_count, parents, heights, std::move(ladder));
}

void Hierarchy::index() {
  const std::size_t count = parent_.size();
  leaf_order_.clear();
  leaf_pos_.assign(leaf_count_, 0);
  range_begin_.assign(count, 0);
  range_end_.assign(count, 0);
  min_leaf_.assign(count, npos);
  depth_.assign(count, 0);
  if (count == 0) return;

  std::vector<std::pair<Vertex, bool>> stack{{root_, false}};
  while (!stack.empty()) {
    auto [v, expanded] = stack.back();
    stack.pop_back();
    if (expanded) {
      range_end_[v] = leaf_order_.size();
      continue;
    }
    range_begin_[v] = leaf_order_.size();
    if (v < leaf_count_) {
      leaf_pos_[v] = leaf_order_.size();
      leaf_order_.push_back(v);
      range_end_[v] = leaf_order_.size();
      min_leaf_[v] = v;
      continue;
    }
    stack.push_back({v, true});
    for (auto it = children_[v].rbegin(); it != children_[v].rend(); ++it) {
      depth_[*it] = depth_[v] + 1;
      stack.push_back({*it, false});
    }
  }
  for (Vertex v = leaf_count_; v < count; ++v) {
    min_leaf_[v] = *std::min_element(leaf_order_.begin() + range_begin_[v],
                                     leaf_order_.begin() + range_end_[v]);
  }
}

std::span<const std::size_t> Hierarchy::leaves_under(Vertex v) const {
  return std::span<const std::size_t>(leaf_order_)
      .subspan(range_begin_.at(v), range_end_.at(v) - range_begin_.at(v));
}

bool Hierarchy::contains(Vertex v, std::size_t a) const {
  const std::size_t pos = leaf_pos_.at(a);
  return pos >= range_begin_.at(v) && pos < range_end_.at(v);
}

double Hierarchy::level(std::size_t a, std::size_t b) const {
  if (a == b) return 0.0;
  Vertex x = a;
  Vertex y = b;
  while (x != y) {
    if (depth_[x] >= depth_[y]) {
      x = parent_[x];
    } else {
      y = parent_[y];
    }
  }
  return height_[x];
}

SquareMatrix<double> Hierarchy::level_matrix() const {
  SquareMatrix<double> out(leaf_count_);
  for (Vertex v = leaf_count_; v < parent_.size(); ++v) {
    const auto& kids = children_[v];
    for (std::size_t i = 0; i < kids.size(); ++i) {
      for (std::size_t j = i + 1; j < kids.size(); ++j) {
        for (std::size_t a : leaves_under(kids[i])) {
          for (std::size_t b : leaves_under(kids[j])) {
            out(a, b) = height_[v];
            out(b, a) = height_[v];
          }
        }
      }
    }
  }
  return out;
}

std::vector<double> Hierarchy::merge_heights() const {
  std::vector<double> hs(height_.begin() + static_cast<std::ptrdiff_t>(leaf_count_),
                         height_.end());
  std::sort(hs.begin(), hs.end());
  hs.erase(std::unique(hs.begin(), hs.end()), hs.end());
  return hs;
}

std::vector<Hierarchy::Vertex> Hierarchy::internal_vertices_at(double h) const {
  std::vector<Vertex> out;
  for (Vertex v = leaf_count_; v < parent_.size(); ++v) {
    if (height_[v] == h) out.push_back(v);
  }
  return out;
}

Hierarchy Hierarchy::relocated(Vertex source, Vertex target, double h) const {
  const std::size_t count = parent_.size();
  if (source >= count || target >= count) {
    throw ValidationError("relocation refers to an unknown vertex");
  }
  if (source == root_) throw ValidationError("cannot relocate the root");
  for (Vertex x = target; x != npos; x = parent_[x]) {
    if (x == source) {
      throw ValidationError("relocation target lies inside the moved subtree");
    }
  }
  const Vertex p = parent_[source];
  const bool spliced = children_[p].size() == 2;
  if (spliced && target == p) {
    throw ValidationError("relocation target disappears when the source is detached");
  }

  std::vector<Vertex> parents(parent_);
  std::vector<double> heights(height_);
  if (spliced) {
    const Vertex sibling =
        children_[p][0] == source ? children_[p][1] : children_[p][0];
    parents[sibling] = parents[p];
    parents[p] = removed;
  }
  const Vertex joint = count;
  parents.push_back(parents[target]);
  heights.push_back(h);
  parents[target] = joint;
  parents[source] = joint;
  return from_parents(leaf_count_, parents, heights, ladder_);
}

Hierarchy Hierarchy::reheighted(Vertex v, double h) const {
  if (v >= parent_.size() || is_leaf(v)) {
    throw ValidationError("only internal vertices carry a height");
  }
  std::vector<double> heights(height_);
  heights[v] = h;
  return from_parents(leaf_count_, parent_, heights, ladder_);
}

double h_of(const Hierarchy& hier, std::size_t a, std::size_t b) {
  if (a >= hier.leaf_count() || b >= hier.leaf_count()) {
    throw ValidationError("unknown node index");
  }
  return hier.level(a, b);
}

UltrametricReport validate_ultrametric(const SquareMatrix<double>& levels) {
  const std::size_t n = levels.size();
  for (std::size_t a = 0; a < n; ++a) {
    if (levels(a, a) != 0.0) {
      throw ValidationError("diagonal entry " + std::to_string(a) + " is nonzero");
    }
    for (std::size_t b = a + 1; b < n; ++b) {
      if (levels(a, b) != levels(b, a)) {
        throw ValidationError("level matrix is asymmetric at (" +
                              std::to_string(a) + ", " + std::to_string(b) + ")");
      }
      if (!(levels(a, b) > 0.0)) {
        throw ValidationError("off-diagonal levels must be positive");
      }
    }
  }
  UltrametricReport report;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      for (std::size_t c = b + 1; c < n; ++c) {
        std::array<double, 3> t{levels(a, b), levels(a, c), levels(b, c)};
        std::sort(t.begin(), t.end());
        if (t[1] != t[2]) {
          report.ok = false;
          report.violation = {a, b, c};
          return report;
        }
      }
    }
  }
  return report;
}

std::size_t Partition::community_count() const {
  if (labels.empty()) return 0;
  return *std::max_element(labels.begin(), labels.end()) + 1;
}

Partition cut_at_level(const Hierarchy& hier, double t) {
  const std::size_t n = hier.leaf_count();
  Partition out;
  out.level = t;
  out.labels.assign(n, 0);
  std::map<Hierarchy::Vertex, std::size_t> label_of;
  for (std::size_t a = 0; a < n; ++a) {
    Hierarchy::Vertex v = a;
    while (hier.parent(v) != Hierarchy::npos && hier.height(hier.parent(v)) <= t) {
      v = hier.parent(v);
    }
    const auto [it, inserted] = label_of.emplace(v, label_of.size());
    out.labels[a] = it->second;
  }
  return out;
}

Section cut_to_k(const Hierarchy& hier, std::size_t k) {
  const std::size_t n = hier.leaf_count();
  if (k < 1 || k > n) {
    throw ValidationError("k = " + std::to_string(k) + " outside [1, " +
                          std::to_string(n) + "]");
  }
  // Community count at level t is n minus, for every vertex merged at or
  // below t, its child count minus one.
  std::vector<double> levels{0.0};
  for (double h : hier.merge_heights()) levels.push_back(h);
  std::vector<std::size_t> counts(levels.size(), n);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    std::size_t c = n;
    for (Hierarchy::Vertex v = n; v < hier.vertex_count(); ++v) {
      if (hier.height(v) <= levels[i]) c -= hier.children(v).size() - 1;
    }
    counts[i] = c;
  }
  // counts strictly decrease along the ascending levels.
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (counts[i] == k) return {cut_at_level(hier, levels[i]), true};
  }
  std::size_t best = 0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (counts[i] > k) best = i;
  }
  return {cut_at_level(hier, levels[best]), false};
}

namespace {

// Distinct levels a balanced binary tree over `count` leaves occupies.
std::size_t levels_needed(std::size_t count) {
  std::size_t levels = 0;
  for (std::size_t span = 1; span < count; span *= 2) ++levels;
  return levels;
}

struct RandomBuilder {
  std::span<const double> ladder;
  Rng& rng;
  std::vector<Hierarchy::Vertex> parents;
  std::vector<double> heights;

  // Returns the vertex holding `leaves`, merged at a level index <= max_idx.
  Hierarchy::Vertex build(std::vector<std::size_t> leaves, std::size_t max_idx) {
    if (leaves.size() == 1) return leaves.front();
    // Keep enough levels below for the remaining binary merges; only when
    // the ladder is too short does a set collapse into a star.
    const std::size_t need = std::min(max_idx, levels_needed(leaves.size()) - 1);
    const std::size_t idx = need + rng.below(max_idx - need + 1);
    const Hierarchy::Vertex v = parents.size();
    parents.push_back(Hierarchy::npos);
    heights.push_back(ladder[idx]);
    if (idx == 0) {
      for (std::size_t leaf : leaves) parents[leaf] = v;
      return v;
    }
    for (std::size_t i = leaves.size() - 1; i > 0; --i) {
      std::swap(leaves[i], leaves[rng.below(i + 1)]);
    }
    // Each side must fit a binary tree on the idx levels below.
    const std::size_t m = leaves.size();
    const std::size_t cap = idx < 32 ? std::size_t{1} << idx : m;
    std::size_t lo = 1, hi = m - 1;
    if (m - 1 > cap && m - cap <= cap) {
      lo = m - cap;
      hi = cap;
    }
    const std::size_t split = lo + rng.below(hi - lo + 1);
    std::vector<std::size_t> left(leaves.begin(),
                                  leaves.begin() + static_cast<std::ptrdiff_t>(split));
    std::vector<std::size_t> right(leaves.begin() + static_cast<std::ptrdiff_t>(split),
                                   leaves.end());
    const auto l = build(std::move(left), idx - 1);
    const auto r = build(std::move(right), idx - 1);
    parents[l] = v;
    parents[r] = v;
    return v;
  }
};

}  // namespace

Hierarchy random_hierarchy(std::size_t nodes, std::span<const double> ladder,
                           std::uint64_t seed) {
  validate_ladder(ladder);
  std::vector<double> owned(ladder.begin(), ladder.end());
  if (nodes <= 1) return Hierarchy::flat(nodes, owned.front(), owned);

  Rng rng(seed);
  RandomBuilder builder{ladder, rng, std::vector<Hierarchy::Vertex>(nodes, Hierarchy::npos),
                        std::vector<double>(nodes, 0.0)};
  std::vector<std::size_t> leaves(nodes);
  std::iota(leaves.begin(), leaves.end(), 0);
  builder.build(std::move(leaves), ladder.size() - 1);
  return Hierarchy::from_parents(nodes, builder.parents, builder.heights,
                                 std::move(owned));
}

double partition_agreement(const Partition& p, const Partition& q) {
  if (p.size() != q.size()) {
    throw ValidationError("partitions cover different node counts (" +
                          std::to_string(p.size()) + " vs " +
                          std::to_string(q.size()) + ")");
  }
  const std::size_t n = p.size();
  auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
  std::map<std::pair<std::size_t, std::size_t>, double> table;
  std::map<std::size_t, double> rows, cols;
  for (std::size_t i = 0; i < n; ++i) {
    table[{p.labels[i], q.labels[i]}] += 1.0;
    rows[p.labels[i]] += 1.0;
    cols[q.labels[i]] += 1.0;
  }
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [key, count] : table) index += pairs(count);
  for (const auto& [key, count] : rows) sum_rows += pairs(count);
  for (const auto& [key, count] : cols) sum_cols += pairs(count);
  const double total = pairs(static_cast<double>(n));
  const double expected = total > 0.0 ? sum_rows * sum_cols / total : 0.0;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) {
    // Both partitions trivial in the same way (or n < 2): agreement is
    // perfect exactly when they coincide up to relabeling.
    return table.size() == rows.size() && table.size() == cols.size() ? 1.0 : 0.0;
  }
  return (index - expected) / (max_index - expected);
}

}  // namespace hierflow
