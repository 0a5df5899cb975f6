#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <thread>
#include <stdexcept>
#include <utility>
#include <vector>

#include "opekit/geometry.hpp"
#include "opekit/multiindex.hpp"
#include "opekit/propagator.hpp"
#include "opekit/trees.hpp"

namespace opekit {

struct Slot {
  int vertex = 0;
  int index = 0;
  MultiIndex alpha;
};

// Visits every perfect matching of n items, pairing the lowest free item first.
// `allowed(a, b)` prunes pairs; the callback receives pairs as (a, b) with a < b.
inline void for_each_matching(int n, const std::function<bool(int, int)>& allowed,
                              const std::function<void(const std::vector<std::pair<int, int>>&)>& visit) {
  if (n % 2) return;
  std::vector<std::pair<int, int>> pairs;
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  std::function<void()> rec = [&]() {
    int i = 0;
    while (i < n && used[static_cast<std::size_t>(i)]) ++i;
    if (i == n) {
      visit(pairs);
      return;
    }
    used[static_cast<std::size_t>(i)] = 1;
    for (int j = i + 1; j < n; ++j) {
      if (used[static_cast<std::size_t>(j)] || !allowed(i, j)) continue;
      used[static_cast<std::size_t>(j)] = 1;
      pairs.emplace_back(i, j);
      rec();
      pairs.pop_back();
      used[static_cast<std::size_t>(j)] = 0;
    }
    used[static_cast<std::size_t>(i)] = 0;
  };
  rec();
}

// Hafnian of a symmetric matrix stored row-major; zero entries are skipped.
class Hafnian {
 public:
  Hafnian(const std::vector<double>& w, int n) : w_(w), n_(n) {}
  double value() const {
    if (n_ % 2) return 0.0;
    if (n_ == 0) return 1.0;
    if (n_ > 62) throw std::length_error("too many slots for matching enumeration");
    return rec(0);
  }
  // Sum restricted to matchings whose first pair is (0, j); used for partitioned evaluation.
  double value_with_first_partner(int j) const {
    const double a = w_[static_cast<std::size_t>(j)];
    if (a == 0.0) return 0.0;
    return a * rec((std::uint64_t{1} << 0) | (std::uint64_t{1} << j));
  }

 private:
  double rec(std::uint64_t used) const {
    int i = 0;
    while (i < n_ && (used >> i & 1U)) ++i;
    if (i == n_) return 1.0;
    double sum = 0.0;
    const std::uint64_t u2 = used | (std::uint64_t{1} << i);
    const double* row = &w_[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_)];
    for (int j = i + 1; j < n_; ++j) {
      if ((u2 >> j & 1U) || row[j] == 0.0) continue;
      sum += row[j] * rec(u2 | (std::uint64_t{1} << j));
    }
    return sum;
  }
  const std::vector<double>& w_;
  int n_;
};

enum class Execution { sequential, parallel };

namespace detail {

// Cheap necessary conditions for a nonzero free coefficient: an even slot
// count and no vertex holding more than half of all slots.
inline bool slots_feasible(std::span<const CompositeOp> leaf_ops, const CompositeOp& target) {
  std::size_t total = target.size();
  std::size_t biggest = target.size();
  for (const auto& op : leaf_ops) {
    total += op.size();
    biggest = std::max(biggest, op.size());
  }
  return total % 2 == 0 && 2 * biggest <= total;
}

}  // namespace detail

// Free coefficient of leaf operators at distinct points, expanded around
// `root_point` into `target` (plain monomial normalization: divided by the
// target's identical-factor symmetry factor).
inline double free_coefficient(std::span<const CompositeOp> leaf_ops, std::span<const Point4> leaf_points,
                               const CompositeOp& target, const Point4& root_point, MassParam mass,
                               Execution exec = Execution::sequential) {
  if (leaf_ops.size() != leaf_points.size()) throw std::invalid_argument("operator/point count mismatch");
  if (!detail::slots_feasible(leaf_ops, target)) return 0.0;

  // Canonical leaf order makes the summation order independent of input order.
  std::vector<std::size_t> order(leaf_ops.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (leaf_ops[a] != leaf_ops[b]) return leaf_ops[a] < leaf_ops[b];
    return leaf_points[a] < leaf_points[b];
  });

  std::vector<Slot> slots;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& f = leaf_ops[order[k]].factors();
    for (std::size_t i = 0; i < f.size(); ++i) slots.push_back({static_cast<int>(k), static_cast<int>(i), f[i]});
  }
  const int root_vertex = static_cast<int>(order.size());
  for (std::size_t i = 0; i < target.size(); ++i)
    slots.push_back({root_vertex, static_cast<int>(i), target.factors()[i]});

  const int n = static_cast<int>(slots.size());
  std::vector<double> w(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);

  // One jet per leaf pair, sized for the largest derivative order needed.
  const std::size_t nl = order.size();
  std::vector<int> need(nl * nl, -1);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      const Slot& sa = slots[static_cast<std::size_t>(a)];
      const Slot& sb = slots[static_cast<std::size_t>(b)];
      if (sa.vertex == sb.vertex || sb.vertex == root_vertex) continue;
      auto& k = need[static_cast<std::size_t>(sa.vertex) * nl + static_cast<std::size_t>(sb.vertex)];
      k = std::max(k, sa.alpha.order() + sb.alpha.order());
    }
  std::vector<std::unique_ptr<PropagatorJet>> jets(nl * nl);
  for (std::size_t v = 0; v < nl; ++v)
    for (std::size_t u = v + 1; u < nl; ++u)
      if (need[v * nl + u] >= 0)
        jets[v * nl + u] = std::make_unique<PropagatorJet>(leaf_points[order[v]] - leaf_points[order[u]], mass,
                                                           need[v * nl + u]);

  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      const Slot& sa = slots[static_cast<std::size_t>(a)];
      const Slot& sb = slots[static_cast<std::size_t>(b)];
      double val = 0.0;
      if (sa.vertex == sb.vertex) {
        val = 0.0;
      } else if (sb.vertex == root_vertex) {
        // d^{alpha_v} (x_v - x_R)^{alpha_R} / alpha_R!
        val = taylor_monomial(leaf_points[order[static_cast<std::size_t>(sa.vertex)]] - root_point,
                              sb.alpha - sa.alpha);
      } else {
        // d^{alpha}_{x_v} d^{beta}_{x_w} D(x_v - x_w) = (-1)^{|beta|} D^{(alpha+beta)}(x_v - x_w)
        const auto& jet = *jets[static_cast<std::size_t>(sa.vertex) * nl + static_cast<std::size_t>(sb.vertex)];
        val = jet.derivative(sa.alpha + sb.alpha);
        if (sb.alpha.order() % 2) val = -val;
      }
      w[static_cast<std::size_t>(a) * static_cast<std::size_t>(n) + static_cast<std::size_t>(b)] = val;
      w[static_cast<std::size_t>(b) * static_cast<std::size_t>(n) + static_cast<std::size_t>(a)] = val;
    }

  Hafnian h(w, n);
  double total = 0.0;
  if (exec == Execution::parallel && n >= 10) {
    std::vector<double> part(static_cast<std::size_t>(n), 0.0);
    std::vector<std::thread> pool;
    for (int j = 1; j < n; ++j) pool.emplace_back([&, j] { part[static_cast<std::size_t>(j)] = h.value_with_first_partner(j); });
    for (auto& t : pool) t.join();
    for (int j = 1; j < n; ++j) total += part[static_cast<std::size_t>(j)];
  } else {
    total = h.value();
  }
  return total / target.symmetry_factor();
}

// free_ope on a tree whose only internal vertex is the root.
inline double free_ope(const WeightedTree& t, MassParam mass, Execution exec = Execution::sequential) {
  if (!t.internal_nonroot().empty()) throw TreeError("free_ope requires a tree without internal non-root vertices");
  std::vector<CompositeOp> ops;
  std::vector<Point4> pts;
  for (int v : t.leaves()) {
    ops.push_back(t.op(v));
    pts.push_back(t.point(v));
  }
  return free_coefficient(ops, pts, t.op(t.root()), t.point(t.root()), mass, exec);
}

// Sparse coefficient vector over multi-indices of one fixed order.
using TaylorVector = std::vector<std::pair<MultiIndex, double>>;

// Pushes a coefficient vector through one Taylor step: the degree-d part of the
// expansion of monomial weights around a new point,
// c'(beta) = sum_gamma c(gamma) (p - q)^{beta - gamma} / (beta - gamma)!.
inline TaylorVector taylor_step(const TaylorVector& c, const Point4& p, const Point4& q, int d) {
  TaylorVector out;
  const Point4 h = p - q;
  for (const auto& beta : multi_indices_of_order(d)) {
    double s = 0.0;
    for (const auto& [gamma, cg] : c) {
      if (!gamma.below(beta)) continue;
      s += cg * taylor_monomial(h, beta - gamma);
    }
    if (s != 0.0) out.emplace_back(beta, s);
  }
  return out;
}

// Merged contraction over a general tree: the product over internal non-root
// vertices u of the sum over operators with [A_u] = D_u, evaluated through
// matchings of leaf and root slots with Taylor-weighted entries.
class MergedContraction {
 public:
  MergedContraction(const WeightedTree& t, std::map<int, int> dims, MassParam mass)
      : t_(t), dims_(std::move(dims)), mass_(mass) {
    for (int u : t_.internal_nonroot())
      if (!dims_.count(u)) throw std::invalid_argument("dimension missing for internal vertex " + std::to_string(u));
    for (int v : t_.leaves())
      for (std::size_t i = 0; i < t_.op(v).size(); ++i)
        slots_.push_back({v, static_cast<int>(i), t_.op(v).factors()[i]});
    for (std::size_t i = 0; i < t_.op(t_.root()).size(); ++i)
      slots_.push_back({t_.root(), static_cast<int>(i), t_.op(t_.root()).factors()[i]});
    for (int v = 0; v < t_.size(); ++v) {
      std::vector<int> up;
      if (v != t_.root())
        for (int p : t_.ancestors(v))
          if (p != t_.root()) up.push_back(p);
      up_.push_back(std::move(up));
    }
  }

  double value() {
    const int n = static_cast<int>(slots_.size());
    double total = 0.0;
    auto allowed = [&](int a, int b) {
      return slots_[static_cast<std::size_t>(a)].vertex != slots_[static_cast<std::size_t>(b)].vertex;
    };
    for_each_matching(n, allowed, [&](const std::vector<std::pair<int, int>>& pairs) { total += matching_value(pairs); });
    return total / t_.op(t_.root()).symmetry_factor();
  }

 private:
  // Internal non-root vertices crossed by the edge on the side of slot a.
  std::vector<int> side(int a, int b) const {
    const int va = slots_[static_cast<std::size_t>(a)].vertex;
    const int vb = slots_[static_cast<std::size_t>(b)].vertex;
    std::vector<int> out;
    if (va == t_.root()) return out;
    const auto& other = up_[static_cast<std::size_t>(vb)];
    for (int u : up_[static_cast<std::size_t>(va)])
      if (std::find(other.begin(), other.end(), u) == other.end()) out.push_back(u);
    return out;
  }

  double matching_value(const std::vector<std::pair<int, int>>& pairs) {
    // For each internal vertex, the list of (pair index) crossing it.
    std::map<int, std::vector<int>> crossing;
    for (int u : t_.internal_nonroot()) crossing[u];
    std::vector<std::vector<int>> sides_a, sides_b;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      sides_a.push_back(side(pairs[k].first, pairs[k].second));
      sides_b.push_back(side(pairs[k].second, pairs[k].first));
      for (int u : sides_a.back()) crossing[u].push_back(static_cast<int>(k));
      for (int u : sides_b.back()) crossing[u].push_back(static_cast<int>(k));
    }
    for (const auto& [u, list] : crossing) {
      const int d = dims_.at(u);
      if (static_cast<int>(list.size()) > d) return 0.0;
      if (list.empty() && d != 0) return 0.0;
    }
    // degree[(u, k)] assignments enumerated vertex by vertex.
    std::vector<int> verts;
    for (const auto& [u, list] : crossing) verts.push_back(u);
    std::map<std::pair<int, int>, int> degree;
    double sum = 0.0;
    std::function<void(std::size_t)> assign_vertex;
    std::function<void(std::size_t, std::size_t, int)> assign_pair;
    assign_vertex = [&](std::size_t vi) {
      if (vi == verts.size()) {
        double prod = 1.0;
        for (std::size_t k = 0; k < pairs.size() && prod != 0.0; ++k) {
          std::vector<int> da, db;
          for (int u : sides_a[k]) da.push_back(degree.at({u, static_cast<int>(k)}));
          for (int u : sides_b[k]) db.push_back(degree.at({u, static_cast<int>(k)}));
          prod *= entry(pairs[k].first, pairs[k].second, sides_a[k], da, sides_b[k], db);
        }
        sum += prod;
        return;
      }
      const int u = verts[vi];
      const auto& list = crossing.at(u);
      if (list.empty()) {
        assign_vertex(vi + 1);
        return;
      }
      // Sum of (d + 1) over crossing pairs must equal D_u.
      assign_pair(vi, 0, dims_.at(u) - static_cast<int>(list.size()));
    };
    assign_pair = [&](std::size_t vi, std::size_t pi, int left) {
      const int u = verts[vi];
      const auto& list = crossing.at(u);
      if (pi + 1 == list.size()) {
        degree[{u, list[pi]}] = left;
        assign_vertex(vi + 1);
        return;
      }
      for (int d = 0; d <= left; ++d) {
        degree[{u, list[pi]}] = d;
        assign_pair(vi, pi + 1, left - d);
      }
    };
    assign_vertex(0);
    return sum;
  }

  TaylorVector chain(int slot, const std::vector<int>& path, const std::vector<int>& degs, Point4& top) const {
    const Slot& s = slots_[static_cast<std::size_t>(slot)];
    TaylorVector c{{s.alpha, 1.0}};
    Point4 p = t_.point(s.vertex);
    for (std::size_t k = 0; k < path.size() && !c.empty(); ++k) {
      const Point4& q = t_.point(path[k]);
      c = taylor_step(c, p, q, degs[k]);
      p = q;
    }
    top = p;
    return c;
  }

  double entry(int a, int b, const std::vector<int>& pa, const std::vector<int>& da, const std::vector<int>& pb,
               const std::vector<int>& db) {
    std::vector<int> key{a, b};
    key.insert(key.end(), da.begin(), da.end());
    key.push_back(-1);
    key.insert(key.end(), db.begin(), db.end());
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;

    const Slot& sb = slots_[static_cast<std::size_t>(b)];
    Point4 p{}, q{};
    const TaylorVector ca = chain(a, pa, da, p);
    double val = 0.0;
    if (!ca.empty()) {
      if (sb.vertex == t_.root()) {
        const Point4 xr = t_.point(t_.root());
        for (const auto& [beta, c] : ca) val += c * taylor_monomial(p - xr, sb.alpha - beta);
      } else {
        const TaylorVector cb = chain(b, pb, db, q);
        if (!cb.empty()) {
          std::map<MultiIndex, double> combined;
          int order = 0;
          for (const auto& [beta, c1] : ca)
            for (const auto& [gamma, c2] : cb) {
              combined[beta + gamma] += (gamma.order() % 2 ? -c1 : c1) * c2;
              order = beta.order() + gamma.order();
            }
          PropagatorJet jet(p - q, mass_, order);
          for (const auto& [delta, c] : combined) val += c * jet.derivative(delta);
        }
      }
    }
    cache_.emplace(std::move(key), val);
    return val;
  }

  const WeightedTree& t_;
  std::map<int, int> dims_;
  MassParam mass_;
  std::vector<Slot> slots_;
  std::vector<std::vector<int>> up_;
  std::map<std::vector<int>, double> cache_;
};

// Single Taylor-weighted entry M_pi for the pair (leaf v, slot alpha_v) and
// (leaf w or root, slot alpha_w), with one degree per crossed internal vertex.
inline double merged_entry(const WeightedTree& t, int v, const MultiIndex& alpha_v, int w,
                           const MultiIndex& alpha_w, const std::map<int, int>& degrees, MassParam mass) {
  auto upper = [&](int x) {
    std::vector<int> out;
    if (x == t.root()) return out;
    for (int p : t.ancestors(x))
      if (p != t.root()) out.push_back(p);
    return out;
  };
  const auto uv = upper(v), uw = upper(w);
  auto walk = [&](int start, const MultiIndex& a, const std::vector<int>& mine, const std::vector<int>& other,
                  Point4& top) {
    TaylorVector c{{a, 1.0}};
    Point4 p = t.point(start);
    for (int u : mine) {
      if (std::find(other.begin(), other.end(), u) != other.end()) break;
      c = taylor_step(c, p, t.point(u), degrees.at(u));
      p = t.point(u);
    }
    top = p;
    return c;
  };
  Point4 p{}, q{};
  const TaylorVector ca = walk(v, alpha_v, uv, uw, p);
  double val = 0.0;
  if (w == t.root()) {
    for (const auto& [beta, c] : ca) val += c * taylor_monomial(p - t.point(w), alpha_w - beta);
    return val;
  }
  const TaylorVector cb = walk(w, alpha_w, uw, uv, q);
  std::map<MultiIndex, double> combined;
  int order = 0;
  for (const auto& [beta, c1] : ca)
    for (const auto& [gamma, c2] : cb) {
      combined[beta + gamma] += (gamma.order() % 2 ? -c1 : c1) * c2;
      order = beta.order() + gamma.order();
    }
  if (combined.empty()) return 0.0;
  PropagatorJet jet(p - q, mass, order);
  for (const auto& [delta, c] : combined) val += c * jet.derivative(delta);
  return val;
}

inline double merged_contraction(const WeightedTree& t, const std::map<int, int>& dims, MassParam mass) {
  MergedContraction mc(t, dims, mass);
  return mc.value();
}

}  // namespace opekit
