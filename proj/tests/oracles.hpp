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

// Independent reference computations used by the unit and acceptance
// tests. Nothing here calls into the fitting code: objectives are summed
// directly from the model definition and scalar optima are found by
// numerical search.

#ifndef HIERFLOW_TESTS_ORACLES_HPP
#define HIERFLOW_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

#include "hierflow/fit.hpp"

namespace oracle {

using hierflow::DistanceMatrix;
using hierflow::FlowNetwork;
using hierflow::Hierarchy;
using hierflow::ModelParams;
using hierflow::SquareMatrix;

// Golden-section search for the minimum of a unimodal function on
// [lo, hi], carried out in log space so that scalars spanning several
// orders of magnitude converge to a relative tolerance.
inline double golden_min(const std::function<double(double)>& fn, double lo, double hi,
                         int iterations = 200) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::log(lo), b = std::log(hi);
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = fn(std::exp(c)), fd = fn(std::exp(d));
  for (int i = 0; i < iterations && b - a > 1e-15; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = fn(std::exp(c));
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = fn(std::exp(d));
    }
  }
  return std::exp((a + b) / 2.0);
}

// Poisson-normal criterion written out from the model definition.
inline double poisson_normal(const FlowNetwork& net, const ModelParams& p,
                             const SquareMatrix<double>& h, const DistanceMatrix& d) {
  double total = 0.0;
  for (std::size_t a = 0; a < net.size(); ++a) {
    for (std::size_t b = 0; b < net.size(); ++b) {
      if (a == b) continue;
      const double m = p.w_out[a] * p.w_in[b] * (1.0 / h(a, b) - 1.0) *
                       p.g[static_cast<std::size_t>(d.bin_index(a, b))];
      const double e = net.flow(a, b);
      total += (e - m) * (e - m) / m;
    }
  }
  return total;
}

inline double least_squares(const FlowNetwork& net, const ModelParams& p,
                            const SquareMatrix<double>& h, const DistanceMatrix& d) {
  double total = 0.0;
  for (std::size_t a = 0; a < net.size(); ++a) {
    for (std::size_t b = 0; b < net.size(); ++b) {
      if (a == b) continue;
      const double m = p.w_out[a] * p.w_in[b] * (1.0 / h(a, b) - 1.0) *
                       p.g[static_cast<std::size_t>(d.bin_index(a, b))];
      total += (net.flow(a, b) - m) * (net.flow(a, b) - m);
    }
  }
  return total;
}

// Pairwise levels from the hierarchy's parent links, without using its
// cached lowest-common-ancestor machinery.
inline SquareMatrix<double> lca_levels(const Hierarchy& hier) {
  const std::size_t n = hier.leaf_count();
  SquareMatrix<double> out(n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    std::vector<Hierarchy::Vertex> path;
    for (auto v = a; v != Hierarchy::npos; v = hier.parent(v)) path.push_back(v);
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      for (auto v = b; v != Hierarchy::npos; v = hier.parent(v)) {
        if (std::find(path.begin(), path.end(), v) != path.end()) {
          out(a, b) = hier.height(v);
          break;
        }
      }
    }
  }
  return out;
}

// Connected components of the graph {(a, b) : h(a, b) <= t}, labelled by
// smallest member.
inline std::vector<std::size_t> components(const SquareMatrix<double>& h, double t) {
  const std::size_t n = h.size();
  std::vector<std::size_t> root(n);
  std::iota(root.begin(), root.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    return root[x] == x ? x : root[x] = find(root[x]);
  };
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (h(a, b) <= t) {
        const auto ra = find(a), rb = find(b);
        root[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
  }
  std::map<std::size_t, std::size_t> label;
  std::vector<std::size_t> out(n);
  for (std::size_t a = 0; a < n; ++a) {
    const auto r = find(a);
    out[a] = label.emplace(r, label.size()).first->second;
  }
  return out;
}

// Adjusted Rand index from pair counts over all unordered pairs.
inline double adjusted_rand(const std::vector<std::size_t>& p, const std::vector<std::size_t>& q) {
  const std::size_t n = p.size();
  double both = 0, in_p = 0, in_q = 0, pairs = 0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const bool sp = p[a] == p[b], sq = q[a] == q[b];
      both += sp && sq;
      in_p += sp;
      in_q += sq;
      pairs += 1;
    }
  }
  const double expected = in_p * in_q / pairs;
  const double maximum = (in_p + in_q) / 2.0;
  if (maximum == expected) return 1.0;
  return (both - expected) / (maximum - expected);
}

}  // namespace oracle

#endif  // HIERFLOW_TESTS_ORACLES_HPP
