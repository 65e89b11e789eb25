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

// Ultrametric hierarchies as dendrograms with monotone merge heights.
//
// A symmetric pair function h with h(a,a) = 0 and
//   h(a,b) <= max(h(a,c), h(b,c))
// for every triple is exactly an ultrametric, and every ultrametric is
// the lowest-common-ancestor height of some dendrogram. Storing the
// dendrogram keeps the triangle condition true by construction; every
// edit goes through the normalizing constructor.

#ifndef HIERFLOW_HIERARCHY_HPP
#define HIERFLOW_HIERARCHY_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hierflow/matrix.hpp"

namespace hierflow {

/// Admissible levels {1/(L+1), ..., L/(L+1)}.
std::vector<double> default_ladder(std::size_t levels = 10);

/// Throws ValidationError unless `ladder` is non-empty, strictly
/// ascending and inside (0, 1).
void validate_ladder(std::span<const double> ladder);

class Hierarchy {
 public:
  using Vertex = std::size_t;
  static constexpr Vertex npos = static_cast<Vertex>(-1);
  /// Marks a vertex slot that from_parents should ignore.
  static constexpr Vertex removed = static_cast<Vertex>(-2);

  Hierarchy() = default;

  /// Builds a normalized hierarchy from a parent array. Vertices
  /// [0, leaf_count) are the leaves; the rest are internal merges with the
  /// given heights (leaf heights are ignored). Exactly one live vertex
  /// has parent npos. Internal vertices whose height equals their
  /// parent's are contracted into it, single-child vertices are spliced
  /// out, and vertices are renumbered canonically (children ordered by
  /// smallest leaf, internal ids in post-order). When `ladder` is
  /// non-empty every internal height must be one of its values.
  static Hierarchy from_parents(std::size_t leaf_count,
                                std::span<const Vertex> parents,
                                std::span<const double> heights,
                                std::vector<double> ladder = {});

  /// All leaves merged at a single level.
  static Hierarchy flat(std::size_t leaf_count, double level,
                        std::vector<double> ladder = {});

  std::size_t leaf_count() const noexcept { return leaf_count_; }
  std::size_t vertex_count() const noexcept { return parent_.size(); }
  Vertex root() const noexcept { return root_; }
  bool is_leaf(Vertex v) const noexcept { return v < leaf_count_; }
  Vertex parent(Vertex v) const { return parent_.at(v); }
  double height(Vertex v) const { return height_.at(v); }
  const std::vector<Vertex>& children(Vertex v) const { return children_.at(v); }
  const std::vector<double>& ladder() const noexcept { return ladder_; }

  /// Leaves below `v` (v itself for a leaf), ascending DFS order.
  std::span<const std::size_t> leaves_under(Vertex v) const;
  /// True when leaf `a` lies in the subtree of `v`.
  bool contains(Vertex v, std::size_t a) const;
  Vertex smallest_leaf(Vertex v) const { return min_leaf_.at(v); }

  /// h(a, b): height of the lowest common ancestor, 0 when a == b.
  double level(std::size_t a, std::size_t b) const;
  SquareMatrix<double> level_matrix() const;

  /// Distinct internal heights, ascending.
  std::vector<double> merge_heights() const;
  std::vector<Vertex> internal_vertices_at(double height) const;

  /// Detach `source` and re-merge it with `target` at `height`.
  /// Equal heights contract, so height == height(target) makes `source`
  /// a child of `target`. `target` must not lie inside `source`, nor be
  /// the parent of `source` when that parent would be left with a single
  /// child.
  Hierarchy relocated(Vertex source, Vertex target, double height) const;

  /// Same tree with internal vertex `v` moved to `height`. Reaching the
  /// height of a child or of the parent contracts the two.
  Hierarchy reheighted(Vertex v, double height) const;

  bool operator==(const Hierarchy& other) const {
    return leaf_count_ == other.leaf_count_ && parent_ == other.parent_ &&
           height_ == other.height_;
  }

 private:
  void index();

  std::size_t leaf_count_ = 0;
  Vertex root_ = npos;
  std::vector<Vertex> parent_;
  std::vector<double> height_;
  std::vector<std::vector<Vertex>> children_;
  std::vector<double> ladder_;
  // Leaves in DFS order; each vertex owns a contiguous range of it.
  std::vector<std::size_t> leaf_order_;
  std::vector<std::size_t> leaf_pos_;
  std::vector<std::size_t> range_begin_, range_end_;
  std::vector<std::size_t> min_leaf_;
  std::vector<std::size_t> depth_;
};

/// h(a, b) with bounds checking; throws ValidationError for unknown nodes.
double h_of(const Hierarchy& hier, std::size_t a, std::size_t b);

struct UltrametricReport {
  bool ok = true;
  /// First violating triple (a < b < c) in lexicographic order.
  std::optional<std::array<std::size_t, 3>> violation;
};

/// Checks h(a,b) <= max(h(a,c), h(b,c)) over every triple. Throws
/// ValidationError for an asymmetric matrix, a nonzero diagonal or a
/// non-positive off-diagonal entry.
UltrametricReport validate_ultrametric(const SquareMatrix<double>& levels);

struct Partition {
  std::vector<std::size_t> labels;  // node index -> community id
  double level = 0.0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t community_count() const;
  bool operator==(const Partition&) const = default;
};

/// Cut result of cut_to_k; `exact` is false when tied heights made k
/// unreachable and the next coarser-feasible cut was returned.
struct Section {
  Partition partition;
  bool exact = true;
};

/// Communities are the maximal leaf sets with pairwise h <= t. Labels are
/// numbered from 0 in order of each community's smallest node index.
Partition cut_at_level(const Hierarchy& hier, double t);

/// Partition with exactly k communities when some level yields it; else
/// the cut with the fewest communities above k, flagged inexact.
Section cut_to_k(const Hierarchy& hier, std::size_t k);

/// Random valid hierarchy: top-down recursive binary splits, each child
/// subtree taking a uniformly drawn level strictly below its parent's.
Hierarchy random_hierarchy(std::size_t nodes, std::span<const double> ladder,
                           std::uint64_t seed);

/// Adjusted Rand index in [-1, 1].
double partition_agreement(const Partition& p, const Partition& q);

}  // namespace hierflow

#endif  // HIERFLOW_HIERARCHY_HPP
