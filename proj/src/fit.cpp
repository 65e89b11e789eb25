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

#include "hierflow/fit.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <tuple>

#include "hierflow/error.hpp"

namespace hierflow {

std::string to_string(FitMode mode) {
  switch (mode) {
    case FitMode::Spatial: return "spatial";
    case FitMode::Generic: return "generic";
    case FitMode::PrefitThenHierarchy: return "prefit";
  }
  return "unknown";
}

FitMode fit_mode_from_string(const std::string& text) {
  if (text == "spatial") return FitMode::Spatial;
  if (text == "generic") return FitMode::Generic;
  if (text == "prefit" || text == "gravity-only-prefit-then-h") {
    return FitMode::PrefitThenHierarchy;
  }
  throw ValidationError("unknown fit mode '" + text + "'");
}

std::string to_string(MoveKind kind) {
  return kind == MoveKind::Relocate ? "relocate" : "reheight";
}

void FitConfig::validate() const {
  validate_ladder(ladder);
  bins.validate();
  if (!(weight_loop_tol > 0.0)) throw ValidationError("weight_loop_tol must be positive");
  if (weight_loop_max_iter < 1) {
    throw ValidationError("weight_loop_max_iter must be at least 1");
  }
  if (!(min_move_gain > 0.0)) throw ValidationError("min_move_gain must be positive");
}

namespace {

// Accumulates the sufficient statistics of one scalar coordinate update.
struct ScalarFit {
  ObjectiveKind kind;
  double num = 0.0;
  double den = 0.0;

  void add(double observed, double coef) {
    if (!(coef > 0.0)) return;
    if (kind == ObjectiveKind::PoissonNormal) {
      num += observed * observed / coef;
      den += coef;
    } else {
      num += observed * coef;
      den += coef * coef;
    }
  }
  void subtract(double observed, double coef) {
    ScalarFit part{kind};
    part.add(observed, coef);
    num -= part.num;
    den -= part.den;
  }
  bool defined() const { return den > 0.0; }
  double solve() const {
    return kind == ObjectiveKind::PoissonNormal ? std::sqrt(num / den) : num / den;
  }
  // Criterion as a function of the scalar, up to an additive constant.
  double restricted(double x) const {
    return kind == ObjectiveKind::PoissonNormal ? num / x + den * x
                                                : den * x * x - 2.0 * num * x;
  }
};

double floored(double x) { return std::max(x, kWeightFloor); }

std::vector<double> solve_w_out(const FlowNetwork& net, const ModelParams& params,
                                const SquareMatrix<double>& f,
                                const DistanceMatrix& dist, ObjectiveKind kind) {
  const std::size_t n = net.size();
  std::vector<double> out(n);
  for (std::size_t a = 0; a < n; ++a) {
    ScalarFit fit{kind};
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      fit.add(net.flow(a, b),
              params.w_in[b] * params.g[static_cast<std::size_t>(dist.bin(a, b))] *
                  f(a, b));
    }
    if (!fit.defined()) {
      throw DegenerateError("node '" + net.node(a).id +
                            "' has no destination with positive w_in * g * f");
    }
    out[a] = floored(fit.solve());
  }
  return out;
}

std::vector<double> solve_w_in(const FlowNetwork& net, const ModelParams& params,
                               const SquareMatrix<double>& f,
                               const DistanceMatrix& dist, ObjectiveKind kind) {
  const std::size_t n = net.size();
  std::vector<double> out(n);
  for (std::size_t b = 0; b < n; ++b) {
    ScalarFit fit{kind};
    for (std::size_t a = 0; a < n; ++a) {
      if (a == b) continue;
      fit.add(net.flow(a, b),
              params.w_out[a] * params.g[static_cast<std::size_t>(dist.bin(a, b))] *
                  f(a, b));
    }
    if (!fit.defined()) {
      throw DegenerateError("node '" + net.node(b).id +
                            "' has no origin with positive w_out * g * f");
    }
    out[b] = floored(fit.solve());
  }
  return out;
}

DeterrenceUpdate solve_g(const FlowNetwork& net, const ModelParams& params,
                         const SquareMatrix<double>& f, const DistanceMatrix& dist,
                         ObjectiveKind kind) {
  const std::size_t n = net.size();
  std::vector<ScalarFit> fits(dist.bin_count(), ScalarFit{kind});
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      fits[static_cast<std::size_t>(dist.bin(a, b))].add(
          net.flow(a, b), params.w_out[a] * params.w_in[b] * f(a, b));
    }
  }
  DeterrenceUpdate out{params.g, {}};
  for (std::size_t bin = 0; bin < fits.size(); ++bin) {
    if (!fits[bin].defined()) {
      out.flagged.push_back(bin);
      continue;
    }
    out.g[bin] = floored(fits[bin].solve());
  }
  return out;
}

void check_inputs(const FlowNetwork& net, const ModelParams& params,
                  std::size_t leaves, const DistanceMatrix& dist) {
  if (leaves != net.size() || dist.size() != net.size()) {
    throw ValidationError("network, hierarchy and distances disagree on node count");
  }
  params.validate(net.size(), dist.bin_count(), false);
}

std::optional<std::size_t> reference_bin(const DistanceMatrix& dist) {
  const auto pop = dist.bin_populations();
  for (std::size_t bin = 0; bin < pop.size(); ++bin) {
    if (pop[bin] > 0) return bin;
  }
  return std::nullopt;
}

WeightFit fit_weights_with(const FlowNetwork& net, ModelParams params,
                           const SquareMatrix<double>& f,
                           const DistanceMatrix& dist, const FitConfig& cfg) {
  const ObjectiveKind kind = cfg.objective.kind;
  const auto ref = reference_bin(dist);
  auto evaluate = [&](const ModelParams& p) {
    return objective_from(net, gravity_matrix(p, dist), f, kind);
  };

  WeightFit out;
  double current = evaluate(params);
  while (out.rounds < cfg.weight_loop_max_iter) {
    ModelParams next = params;
    double inner = current;
    auto track = [&] {
      const double value = evaluate(next);
      if (value > inner) ++out.nonmonotone_steps;
      inner = value;
    };

    next.w_in = solve_w_in(net, next, f, dist, kind);
    track();
    next.w_out = solve_w_out(net, next, f, dist, kind);
    track();
    if (dist.bin_count() > 1) {
      const auto update = solve_g(net, next, f, dist, kind);
      for (std::size_t bin = 0; bin < update.g.size(); ++bin) {
        if (ref && bin == *ref) continue;
        // One bin at a time: the bins share no pairs, so updating them in
        // sequence or together gives the same values.
        next.g[bin] = update.g[bin];
      }
      track();
    }
    rebalance(next);
    const double value = evaluate(next);
    ++out.rounds;
    if (value > current) {
      ++out.nonmonotone_steps;
      out.converged = true;
      break;
    }
    const double improvement = current - value;
    params = std::move(next);
    current = value;
    if (current == 0.0 || improvement <= cfg.weight_loop_tol * (current + improvement)) {
      out.converged = true;
      break;
    }
  }
  out.params = std::move(params);
  out.objective = current;
  return out;
}

SquareMatrix<double> unit_deterrence(std::size_t n) {
  SquareMatrix<double> f(n, 1.0);
  for (std::size_t a = 0; a < n; ++a) f(a, a) = 0.0;
  return f;
}

// Picks the best admissible ladder level for a shared f given the
// accumulated statistics.
std::optional<double> choose_level(const ScalarFit& fit, LevelBounds bounds,
                                   std::span<const double> ladder) {
  const auto first = std::lower_bound(ladder.begin(), ladder.end(), bounds.lo);
  const auto last = std::upper_bound(ladder.begin(), ladder.end(), bounds.hi);
  if (first >= last) return std::nullopt;
  if (!fit.defined()) return *(last - 1);

  const double fstar = std::max(fit.solve(), 0.0);
  const double hstar = std::clamp(1.0 / (1.0 + fstar), *first, *(last - 1));
  auto upper = std::lower_bound(first, last, hstar);
  if (upper == last) upper = last - 1;
  const auto lower = *upper > hstar && upper != first ? upper - 1 : upper;
  if (lower == upper) return *upper;
  const double lo_value = fit.restricted(1.0 / *lower - 1.0);
  const double up_value = fit.restricted(1.0 / *upper - 1.0);
  return up_value < lo_value ? *upper : *lower;
}

double ladder_top(const Hierarchy& hier) {
  return hier.ladder().empty() ? std::nextafter(1.0, 0.0) : hier.ladder().back();
}

bool inside(const Hierarchy& hier, Hierarchy::Vertex outer, Hierarchy::Vertex v) {
  const auto lo = hier.leaves_under(outer);
  const auto lv = hier.leaves_under(v);
  return lv.data() >= lo.data() && lv.data() + lv.size() <= lo.data() + lo.size();
}

struct Evaluation {
  bool valid = false;
  double gain = 0.0;
  double level = 0.0;
};

// Everything move evaluation reads; immutable while candidates are scored.
//
// Per-bin sufficient statistics make the deterrence part of a move cheap:
// with m = c * g, a bin's share of the criterion depends on g only through
// its ScalarFit sums, so a move that changes a few coefficients c updates
// those sums, re-solves g for the touched bins and scores the exact change
// without revisiting untouched pairs.
struct Snapshot {
  const FlowNetwork& net;
  const Hierarchy& hier;
  const ModelParams& params;
  const DistanceMatrix& dist;
  SquareMatrix<double> levels;
  ObjectiveKind kind;
  std::vector<ScalarFit> bins;
  std::optional<std::size_t> ref;

  Snapshot(const FlowNetwork& net_, const Hierarchy& hier_, const ModelParams& params_,
           const DistanceMatrix& dist_, ObjectiveKind kind_)
      : net(net_), hier(hier_), params(params_), dist(dist_), levels(hier_.level_matrix()),
        kind(kind_), bins(dist_.bin_count(), ScalarFit{kind_}), ref(reference_bin(dist_)) {
    const std::size_t n = net.size();
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (a != b) bins[bin(a, b)].add(net.flow(a, b), coef(a, b, levels(a, b)));
      }
    }
  }

  std::size_t bin(std::size_t a, std::size_t b) const {
    return static_cast<std::size_t>(dist.bin(a, b));
  }
  double coef(std::size_t a, std::size_t b, double h) const {
    return params.w_out[a] * params.w_in[b] * (1.0 / h - 1.0);
  }

  Evaluation evaluate(const Move& move, int rounds, ModelParams* adapted = nullptr) const {
    if (move.kind == MoveKind::Reheight) {
      const auto v = move.source;
      const double old_level = hier.height(v);
      std::vector<std::size_t> moved(hier.leaves_under(v).begin(), hier.leaves_under(v).end());
      // Pairs whose lowest common ancestor is v: heights increase strictly
      // upwards, so inside v's subtree only v sits at its height.
      auto shared = [&](std::size_t a, std::size_t x) {
        return x != a && hier.contains(v, x) && levels(a, x) == old_level;
      };
      auto h_new = [&](std::size_t a, std::size_t x, double lv) {
        return shared(a, x) ? lv : levels(a, x);
      };
      auto changed = [&](double lv) { return lv != old_level; };
      return score(std::move(moved), shared, h_new, changed, move.level, move.bounds, rounds,
                 adapted);
    }

    const std::size_t n = net.size();
    const auto s = move.source;
    const auto t = move.target;
    auto in_target = [&](std::size_t x) {
      return hier.contains(t, x) && !hier.contains(s, x);
    };
    std::size_t rep = n;
    for (std::size_t x : hier.leaves_under(t)) {
      if (!hier.contains(s, x)) {
        rep = x;
        break;
      }
    }
    std::vector<std::size_t> moved(hier.leaves_under(s).begin(), hier.leaves_under(s).end());
    auto shared = [&](std::size_t, std::size_t x) { return in_target(x); };
    auto h_new = [&](std::size_t a, std::size_t x, double lv) {
      if (hier.contains(s, x)) return levels(a, x);
      return in_target(x) ? lv : levels(rep, x);
    };
    auto changed = [&](double lv) {
      for (std::size_t a : hier.leaves_under(s)) {
        for (std::size_t x = 0; x < n; ++x) {
          if (!hier.contains(s, x) && levels(a, x) != h_new(a, x, lv)) return true;
        }
      }
      return false;
    };
    return score(std::move(moved), shared, h_new, changed, move.level, move.bounds, rounds,
                 adapted);
  }

  // Scores a move that gives the pairs selected by `shared` one new level
  // and may shift other pairs of the `moved` leaves (h_new). With rounds
  // > 0 the weights of the moved leaves and the g of the bins they touch,
  // which were fitted to the old structure, are re-solved for every
  // candidate level; all other parameters stay fixed. The gain is the
  // exact objective decrease of the best such change.
  template <class Shared, class NewLevel, class Changed>
  Evaluation score(std::vector<std::size_t> moved, Shared shared, NewLevel h_new,
                   Changed changed, double old_level, LevelBounds bounds, int rounds,
                   ModelParams* adapted) const {
    Evaluation out;
    const std::size_t n = net.size();
    std::sort(moved.begin(), moved.end());
    const std::size_t m = moved.size();
    std::vector<double> w_out(m), w_in(m);
    for (std::size_t i = 0; i < m; ++i) {
      w_out[i] = params.w_out[moved[i]];
      w_in[i] = params.w_in[moved[i]];
    }
    std::vector<double> g = params.g;
    std::vector<std::ptrdiff_t> slot_of;
    if (m * 8 > n) {
      slot_of.assign(n, -1);
      for (std::size_t i = 0; i < m; ++i) slot_of[moved[i]] = static_cast<std::ptrdiff_t>(i);
    }
    auto where = [&](std::size_t x) -> std::ptrdiff_t {
      if (!slot_of.empty()) return slot_of[x];
      const auto it = std::lower_bound(moved.begin(), moved.end(), x);
      return it == moved.end() || *it != x ? -1 : it - moved.begin();
    };
    auto wo = [&](std::size_t x) {
      const auto i = where(x);
      return i < 0 ? params.w_out[x] : w_out[static_cast<std::size_t>(i)];
    };
    auto wi = [&](std::size_t x) {
      const auto i = where(x);
      return i < 0 ? params.w_in[x] : w_in[static_cast<std::size_t>(i)];
    };
    // Every ordered pair with at least one moved endpoint, once.
    auto for_touched = [&](auto&& fn) {
      for (std::size_t a : moved) {
        for (std::size_t x = 0; x < n; ++x) {
          if (x == a) continue;
          fn(a, x, a, x);
          if (where(x) < 0) fn(x, a, a, x);
        }
      }
    };
    auto level_fit = [&] {
      ScalarFit fit{kind};
      for (std::size_t a : moved) {
        for (std::size_t x = 0; x < n; ++x) {
          if (!shared(a, x)) continue;
          fit.add(net.flow(a, x), wo(a) * wi(x) * g[bin(a, x)]);
          if (where(x) < 0) fit.add(net.flow(x, a), wo(x) * wi(a) * g[bin(x, a)]);
        }
      }
      return choose_level(fit, bounds, hier.ladder());
    };

    // Candidate levels: the fixed-parameter choice and its ladder
    // neighbours, plus the neighbours of the current level. The fixed
    // choice alone tends to reproduce the current level, since weights
    // and g were fitted to it.
    const auto ladder = hier.ladder();
    const auto first = std::lower_bound(ladder.begin(), ladder.end(), bounds.lo);
    const auto last = std::upper_bound(ladder.begin(), ladder.end(), bounds.hi);
    std::vector<double> candidates;
    auto add_around = [&](double h) {
      auto it = std::lower_bound(first, last, h);
      for (auto c = it == first ? it : it - 1; c != last && c <= it + 1; ++c) {
        if (std::find(candidates.begin(), candidates.end(), *c) == candidates.end()) {
          candidates.push_back(*c);
        }
      }
    };
    if (const auto fixed = level_fit()) add_around(*fixed);
    add_around(old_level);
    std::sort(candidates.begin(), candidates.end());

    // Bin sums after the move, as deltas against the snapshot.
    std::vector<ScalarFit> delta(bins.size(), ScalarFit{kind});
    std::vector<char> touched(bins.size(), 0);
    double level = 0.0;
    auto rebin = [&] {
      std::fill(delta.begin(), delta.end(), ScalarFit{kind});
      for_touched([&](std::size_t from, std::size_t to, std::size_t a, std::size_t x) {
        const std::size_t b = bin(from, to);
        const double e = net.flow(from, to);
        delta[b].add(e, wo(from) * wi(to) * (1.0 / h_new(a, x, level) - 1.0));
        delta[b].subtract(e, coef(from, to, levels(from, to)));
        touched[b] = 1;
      });
      for (std::size_t b = 0; b < bins.size(); ++b) {
        if (rounds == 0 || !touched[b] || (ref && b == *ref)) continue;
        ScalarFit merged = bins[b];
        merged.num += delta[b].num;
        merged.den += delta[b].den;
        if (merged.den > 0.0) g[b] = floored(merged.solve());
      }
    };
    // Criterion change per touched bin, written to avoid differencing the
    // large bin totals.
    auto bin_gain = [&] {
      double gain = 0.0;
      for (std::size_t b = 0; b < bins.size(); ++b) {
        if (!touched[b]) continue;
        const double g0 = params.g[b], g1 = g[b];
        const double num = bins[b].num, den = bins[b].den;
        const double dn = delta[b].num, dd = delta[b].den;
        if (kind == ObjectiveKind::PoissonNormal) {
          gain += num * (1.0 / g0 - 1.0 / g1) + den * (g0 - g1) - dn / g1 - dd * g1;
        } else {
          gain += den * (g0 * g0 - g1 * g1) - 2.0 * num * (g0 - g1) - dd * g1 * g1 +
                  2.0 * dn * g1;
        }
      }
      return gain;
    };

    std::vector<double> best_out, best_in, best_g;
    for (double candidate : candidates) {
      if (!changed(candidate)) continue;
      level = candidate;
      for (std::size_t i = 0; i < m; ++i) {
        w_out[i] = params.w_out[moved[i]];
        w_in[i] = params.w_in[moved[i]];
      }
      g = params.g;
      std::fill(touched.begin(), touched.end(), 0);
      if (rounds == 0) rebin();
      for (int round = 0; round < rounds; ++round) {
        for (std::size_t i = 0; i < m; ++i) {
          const std::size_t a = moved[i];
          ScalarFit row{kind};
          for (std::size_t x = 0; x < n; ++x) {
            if (x != a) {
              row.add(net.flow(a, x), wi(x) * g[bin(a, x)] * (1.0 / h_new(a, x, level) - 1.0));
            }
          }
          if (row.defined()) w_out[i] = floored(row.solve());
        }
        for (std::size_t i = 0; i < m; ++i) {
          const std::size_t a = moved[i];
          ScalarFit col{kind};
          for (std::size_t x = 0; x < n; ++x) {
            if (x != a) {
              col.add(net.flow(x, a), wo(x) * g[bin(x, a)] * (1.0 / h_new(a, x, level) - 1.0));
            }
          }
          if (col.defined()) w_in[i] = floored(col.solve());
        }
        rebin();
      }
      const double gain = bin_gain();
      if (!out.valid || gain > out.gain) {
        out.valid = true;
        out.level = level;
        out.gain = gain;
        if (adapted) {
          best_out = w_out;
          best_in = w_in;
          best_g = g;
        }
      }
    }
    if (out.valid && adapted) {
      *adapted = params;
      adapted->g = best_g;
      for (std::size_t i = 0; i < m; ++i) {
        adapted->w_out[moved[i]] = best_out[i];
        adapted->w_in[moved[i]] = best_in[i];
      }
    }
    return out;
  }
};

std::vector<Evaluation> evaluate_all(const Snapshot& snap,
                                     const std::vector<Move>& moves, int rounds,
                                     unsigned threads) {
  std::vector<Evaluation> out(moves.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(
      std::min<std::size_t>(threads, std::max<std::size_t>(1, moves.size() / 32)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < moves.size(); ++i) out[i] = snap.evaluate(moves[i], rounds);
    return out;
  }
  std::vector<std::thread> workers;
  const std::size_t chunk = (moves.size() + threads - 1) / threads;
  for (unsigned w = 0; w < threads; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(moves.size(), begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&, begin, end] {
      for (std::size_t i = begin; i < end; ++i) out[i] = snap.evaluate(moves[i], rounds);
    });
  }
  for (auto& worker : workers) worker.join();
  return out;
}

std::vector<std::size_t> to_vector(std::span<const std::size_t> s) {
  std::vector<std::size_t> v(s.begin(), s.end());
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

std::vector<double> update_w_out(const FlowNetwork& net, const ModelParams& params,
                                 const Hierarchy& hier, const DistanceMatrix& dist,
                                 ObjectiveKind kind) {
  check_inputs(net, params, hier.leaf_count(), dist);
  return solve_w_out(net, params, deterrence_matrix(hier), dist, kind);
}

std::vector<double> update_w_in(const FlowNetwork& net, const ModelParams& params,
                                const Hierarchy& hier, const DistanceMatrix& dist,
                                ObjectiveKind kind) {
  check_inputs(net, params, hier.leaf_count(), dist);
  return solve_w_in(net, params, deterrence_matrix(hier), dist, kind);
}

DeterrenceUpdate update_g(const FlowNetwork& net, const ModelParams& params,
                          const Hierarchy& hier, const DistanceMatrix& dist,
                          ObjectiveKind kind) {
  check_inputs(net, params, hier.leaf_count(), dist);
  return solve_g(net, params, deterrence_matrix(hier), dist, kind);
}

void rebalance(ModelParams& params) {
  double sum_out = 0.0, sum_in = 0.0;
  for (double w : params.w_out) sum_out += w;
  for (double w : params.w_in) sum_in += w;
  if (!(sum_out > 0.0 && sum_in > 0.0)) return;
  const double c = std::sqrt(sum_in / sum_out);
  for (double& w : params.w_out) w *= c;
  for (double& w : params.w_in) w /= c;
}

ModelParams initial_params(const FlowNetwork& net, const DistanceMatrix& dist) {
  const std::size_t n = net.size();
  ModelParams p{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                std::vector<double>(dist.bin_count(), 1.0)};
  double total = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      p.w_out[a] += net.flow(a, b);
      p.w_in[b] += net.flow(a, b);
      total += net.flow(a, b);
    }
  }
  const double scale = total > 0.0 ? 1.0 / std::sqrt(total) : 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    p.w_out[a] = total > 0.0 ? floored(p.w_out[a] * scale) : 1.0;
    p.w_in[a] = total > 0.0 ? floored(p.w_in[a] * scale) : 1.0;
  }
  return p;
}

WeightFit fit_weights(const FlowNetwork& net, const ModelParams& params,
                      const Hierarchy& hier, const DistanceMatrix& dist,
                      const FitConfig& cfg) {
  check_inputs(net, params, hier.leaf_count(), dist);
  if (cfg.objective.include_loops) {
    throw UnsupportedError("loop-including objectives are unsupported");
  }
  return fit_weights_with(net, params, deterrence_matrix(hier), dist, cfg);
}

WeightFit fit_gravity(const FlowNetwork& net, const DistanceMatrix& dist,
                      const FitConfig& cfg) {
  if (dist.size() != net.size()) {
    throw ValidationError("network and distances disagree on node count");
  }
  if (cfg.objective.include_loops) {
    throw UnsupportedError("loop-including objectives are unsupported");
  }
  // h = 0.5 for every pair gives f = 1 exactly.
  return fit_weights_with(net, initial_params(net, dist), unit_deterrence(net.size()),
                          dist, cfg);
}

std::optional<double> optimal_level_value(const FlowNetwork& net,
                                          const ModelParams& params,
                                          const DistanceMatrix& dist,
                                          std::span<const NodePair> pairs,
                                          LevelBounds bounds,
                                          std::span<const double> ladder,
                                          ObjectiveKind kind) {
  if (pairs.empty()) throw ValidationError("optimal level needs at least one pair");
  if (!(bounds.lo <= bounds.hi)) throw ValidationError("level bounds must satisfy lo <= hi");
  validate_ladder(ladder);
  params.validate(net.size(), dist.bin_count(), false);
  ScalarFit fit{kind};
  for (const auto& [a, b] : pairs) {
    if (a == b || a >= net.size() || b >= net.size()) {
      throw ValidationError("invalid pair in level optimization");
    }
    fit.add(net.flow(a, b), params.w_out[a] * params.w_in[b] *
                                params.g[static_cast<std::size_t>(dist.bin(a, b))]);
  }
  return choose_level(fit, bounds, ladder);
}

std::vector<Move> enumerate_moves(const Hierarchy& hier, double level) {
  std::vector<Move> moves;
  const auto& ladder = hier.ladder();
  const double top = ladder_top(hier);
  auto has_level = [&](double lo, double hi) {
    if (ladder.empty()) return lo <= hi;
    const auto it = std::lower_bound(ladder.begin(), ladder.end(), lo);
    return it != ladder.end() && *it <= hi;
  };

  for (const auto v : hier.internal_vertices_at(level)) {
    const auto p = hier.parent(v);
    double child_top = 0.0;
    for (auto c : hier.children(v)) child_top = std::max(child_top, hier.height(c));
    const LevelBounds own{child_top, p == Hierarchy::npos ? top : hier.height(p)};
    if (has_level(own.lo, own.hi)) {
      moves.push_back({MoveKind::Reheight, v, Hierarchy::npos, level, own});
    }

    const bool spliced = hier.children(v).size() == 2;
    for (const auto s : hier.children(v)) {
      for (Hierarchy::Vertex t = 0; t < hier.vertex_count(); ++t) {
        if (inside(hier, s, t)) continue;
        // With two children, moving one beside the other only re-levels v.
        if (spliced && (t == v || hier.parent(t) == v)) continue;
        const auto pp = hier.parent(t);
        const LevelBounds bounds{std::max(hier.height(s), hier.height(t)),
                                 pp == Hierarchy::npos ? top : hier.height(pp)};
        if (!has_level(bounds.lo, bounds.hi)) continue;
        moves.push_back({MoveKind::Relocate, s, t, level, bounds});
      }
    }
  }

  auto key = [&](const Move& m) {
    return std::make_tuple(
        hier.smallest_leaf(m.source), m.kind == MoveKind::Relocate ? 1 : 0,
        m.target == Hierarchy::npos ? std::size_t{0} : hier.smallest_leaf(m.target),
        m.target == Hierarchy::npos ? std::size_t{0} : hier.leaves_under(m.target).size());
  };
  std::stable_sort(moves.begin(), moves.end(),
                   [&](const Move& a, const Move& b) { return key(a) < key(b); });
  return moves;
}

std::vector<NodePair> move_level_pairs(const Hierarchy& hier, const Move& move) {
  std::vector<NodePair> pairs;
  if (move.kind == MoveKind::Reheight) {
    const auto& kids = hier.children(move.source);
    for (std::size_t i = 0; i < kids.size(); ++i) {
      for (std::size_t j = 0; j < kids.size(); ++j) {
        if (i == j) continue;
        for (std::size_t a : hier.leaves_under(kids[i])) {
          for (std::size_t b : hier.leaves_under(kids[j])) pairs.emplace_back(a, b);
        }
      }
    }
    return pairs;
  }
  for (std::size_t a : hier.leaves_under(move.source)) {
    for (std::size_t x : hier.leaves_under(move.target)) {
      if (hier.contains(move.source, x)) continue;
      pairs.emplace_back(a, x);
      pairs.emplace_back(x, a);
    }
  }
  return pairs;
}

Hierarchy apply_move(const Hierarchy& hier, const Move& move, double new_level) {
  if (new_level < move.bounds.lo || new_level > move.bounds.hi) {
    throw ValidationError("new level outside the move's bounds");
  }
  if (move.kind == MoveKind::Reheight) return hier.reheighted(move.source, new_level);
  return hier.relocated(move.source, move.target, new_level);
}

StepResult greedy_step(const FlowNetwork& net, const FitState& state,
                       const DistanceMatrix& dist, const FitConfig& cfg,
                       std::optional<double> level) {
  const auto& hier = state.hierarchy;
  check_inputs(net, state.params, hier.leaf_count(), dist);

  std::vector<Move> moves;
  const auto levels = level ? std::vector<double>{*level} : hier.merge_heights();
  for (double h : levels) {
    auto at = enumerate_moves(hier, h);
    moves.insert(moves.end(), at.begin(), at.end());
  }

  StepResult out{state, 0.0, std::nullopt};
  if (moves.empty()) return out;

  // Moves are ranked with all parameters fixed. Only when that finds
  // nothing are the moved leaves' weights and the touched g re-solved:
  // those adapted gains reach moves whose benefit appears only after a
  // refit, but they also flatter wrong merges, so they are a fallback.
  const Snapshot snap(net, hier, state.params, dist, cfg.objective.kind);
  int rounds = 0;
  std::vector<Evaluation> evals;
  std::optional<std::size_t> best;
  for (int tier : {0, 2}) {
    rounds = tier;
    evals = evaluate_all(snap, moves, rounds, cfg.threads);
    best.reset();
    for (std::size_t i = 0; i < evals.size(); ++i) {
      if (!evals[i].valid) continue;
      if (!best || evals[i].gain > evals[*best].gain) best = i;
    }
    if (best && evals[*best].gain >= cfg.min_move_gain) break;
  }
  if (!best || evals[*best].gain < cfg.min_move_gain) return out;

  const Move& move = moves[*best];
  Hierarchy next = apply_move(hier, move, evals[*best].level);
  ModelParams start = state.params;
  snap.evaluate(move, rounds, &start);
  WeightFit refit = fit_weights_with(net, std::move(start), deterrence_matrix(next), dist, cfg);
  if (!(refit.objective < state.objective)) return out;

  AcceptedMove record;
  record.kind = move.kind;
  record.source_leaves = to_vector(hier.leaves_under(move.source));
  if (move.kind == MoveKind::Relocate) {
    for (std::size_t x : hier.leaves_under(move.target)) {
      if (!hier.contains(move.source, x)) record.target_leaves.push_back(x);
    }
    std::sort(record.target_leaves.begin(), record.target_leaves.end());
  }
  record.old_level = move.level;
  record.new_level = evals[*best].level;
  record.gain = evals[*best].gain;
  record.objective = refit.objective;

  out.state = FitState{std::move(refit.params), std::move(next), refit.objective};
  out.gain = record.gain;
  out.move = std::move(record);
  return out;
}

FitReport fit(const FlowNetwork& net, const DistanceMatrix& dist,
              const FitConfig& cfg, const MoveObserver& observer) {
  cfg.validate();
  if (cfg.objective.include_loops) {
    throw UnsupportedError("loop-including objectives are unsupported");
  }
  const std::size_t n = net.size();
  FitReport report;
  if (cfg.mode == FitMode::Generic) {
    report.distances = unit_distance_matrix(n);
  } else {
    if (dist.size() != n) {
      throw ValidationError("network and distances disagree on node count");
    }
    report.distances = dist;
  }
  const DistanceMatrix& d = report.distances;

  if (n <= 1) {
    report.params = ModelParams{std::vector<double>(n, 1.0), std::vector<double>(n, 1.0),
                                std::vector<double>(d.bin_count(), 1.0)};
    report.hierarchy = Hierarchy::flat(n, cfg.ladder.front(), cfg.ladder);
    report.sweep_objectives = {0.0};
    report.step_objectives = {0.0};
    report.converged = true;
    return report;
  }

  FitState state;
  if (cfg.mode == FitMode::PrefitThenHierarchy) {
    const WeightFit gravity = fit_gravity(net, d, cfg);
    report.nonmonotone_inner_steps += gravity.nonmonotone_steps;
    // Start from the flat hierarchy at the ladder level closest to 0.5,
    // folding its constant f into the weights.
    const double flat_level = *std::min_element(
        cfg.ladder.begin(), cfg.ladder.end(), [](double a, double b) {
          return std::fabs(a - 0.5) < std::fabs(b - 0.5);
        });
    state.hierarchy = Hierarchy::flat(n, flat_level, cfg.ladder);
    state.params = gravity.params;
    const double f0 = deterrence_f(flat_level);
    if (f0 != 1.0) {
      const double s = std::sqrt(f0);
      for (double& w : state.params.w_out) w /= s;
      for (double& w : state.params.w_in) w /= s;
    }
    report.gravity_objective = gravity.objective;
  } else {
    state.hierarchy = random_hierarchy(n, cfg.ladder, cfg.seed);
    state.params = initial_params(net, d);
  }
  {
    WeightFit start = fit_weights_with(net, state.params,
                                       deterrence_matrix(state.hierarchy), d, cfg);
    report.nonmonotone_inner_steps += start.nonmonotone_steps;
    state.params = std::move(start.params);
    state.objective = start.objective;
  }
  report.sweep_objectives.push_back(state.objective);
  report.step_objectives.push_back(state.objective);

  for (std::size_t sweep = 1; sweep <= cfg.outer_max_sweeps; ++sweep) {
    std::size_t accepted = 0;
    for (double level : cfg.ladder) {
      if (state.hierarchy.internal_vertices_at(level).empty()) continue;
      StepResult step = greedy_step(net, state, d, cfg, level);
      if (!step.move) continue;
      step.move->sweep = sweep;
      state = std::move(step.state);
      report.step_objectives.push_back(state.objective);
      if (observer) observer(state, *step.move);
      report.moves.push_back(std::move(*step.move));
      ++accepted;
    }
    report.sweeps = sweep;
    report.sweep_objectives.push_back(state.objective);
    if (accepted == 0) {
      report.converged = true;
      break;
    }
  }
  if (cfg.outer_max_sweeps == 0) report.converged = false;

  report.objective = objective(net, state.params, state.hierarchy, d, cfg.objective);
  report.params = std::move(state.params);
  report.hierarchy = std::move(state.hierarchy);
  return report;
}

}  // namespace hierflow
