#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "opekit/coefficients.hpp"
#include "opekit/geometry.hpp"
#include "opekit/matchings.hpp"
#include "opekit/multiindex.hpp"
#include "opekit/propagator.hpp"
#include "opekit/trees.hpp"

namespace opekit {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// exp(x), saturating to +inf instead of overflowing.
inline double exp_saturating(double log_value) {
  if (log_value > 709.0) return std::numeric_limits<double>::infinity();
  return std::exp(log_value);
}

inline double log_factorial(double x) { return std::lgamma(x + 1.0); }

struct BoundParams {
  double eps = 0.0;
  std::map<int, double> delta;  // per internal vertex, in (0,1); missing entries use default_delta
  double default_delta = 0.5;
  double K = 1.0;
  std::optional<Branch> branch;
  std::map<int, int> dims;  // D per internal non-root vertex
};

// Full right-hand side of the tree bound: power counting, prod xi_i^{D_i}, the
// combinatorial factor raised to 8^{r+1}, and the per-vertex delta factors.
inline double bound_B(const WeightedTree& t, int r, const BoundParams& p, MassParam mass) {
  if (mass.massless()) throw std::invalid_argument("bound_B requires m > 0");
  const int dt = t.external_dimension();
  const double eps_max = std::ldexp(1.0, -(dt + 4 * r + 3));
  if (!(p.eps > 0.0 && p.eps <= eps_max)) throw std::invalid_argument("eps out of range (0, 2^-(D_T+4r+3)]");
  const Branch b = p.branch ? *p.branch : t.default_branch();
  auto on_branch = [&](int v) { return std::find(b.path.begin(), b.path.end(), v) != b.path.end(); };
  // Dimension carried by a vertex: its operator for leaves/root, D for internal ones.
  auto dim = [&](int v) {
    if (t.is_leaf(v) || v == t.root()) return t.op(v).dimension();
    return p.dims.at(v);
  };
  for (int u : t.internal_nonroot())
    if (!p.dims.count(u)) throw std::invalid_argument("bound_B: D missing for an internal vertex");

  double lg = 0.0;
  const int root = t.root();
  double spread = 0.0;
  for (int i : t.children(root)) spread = std::max(spread, dist(t.point(i), t.point(root)));
  lg += dim(root) * std::log(spread);
  for (int i : t.leaves()) {
    double nearest = std::numeric_limits<double>::infinity();
    for (int j : t.siblings(i)) nearest = std::min(nearest, dist(t.point(i), t.point(j)));
    if (std::isfinite(nearest)) lg -= dim(i) * std::log(nearest);
  }
  for (int u : t.internal_nonroot()) lg += p.dims.at(u) * std::log(t.xi(u));

  const double power = std::pow(8.0, r + 1);
  double comb = 0.0;
  for (int v = 0; v < t.size(); ++v) {
    if (on_branch(v))
      comb += dim(v) * std::log1p(p.eps) + dt * std::log(p.dims.at(v) + 1.0);
    else
      comb -= dim(v) * std::log(p.eps);
  }
  lg += std::log(p.K) + power * comb;

  for (int v : t.internal()) {
    const double dv = p.delta.count(v) ? p.delta.at(v) : p.default_delta;
    if (!(dv > 0.0 && dv < 1.0)) throw std::invalid_argument("delta values must lie in (0,1)");
    int excess = -dim(v);
    double far = 1.0 / mass.m, close = std::numeric_limits<double>::infinity();
    const auto& ch = t.children(v);
    for (int i : ch) {
      excess += dim(i);
      far = std::max(far, dist(t.point(i), t.point(v)));
    }
    for (std::size_t a = 0; a < ch.size(); ++a)
      for (std::size_t c = a + 1; c < ch.size(); ++c) close = std::min(close, dist(t.point(ch[a]), t.point(ch[c])));
    if (!std::isfinite(close)) close = 1.0;  // single child: no pair distance
    const int step = excess > 0 ? 1 : 0;  // Heaviside with theta(0) = 0
    lg += dv * (std::log(far) - step * std::log(mass.m) - (1 + step) * std::log(close));
  }
  return exp_saturating(lg);
}

// Right-hand side of the remainder bound for an N-point request split at M.
inline double bound_theorem1(const std::vector<int>& input_dims, int target_dim, int D, const std::vector<Point4>& x,
                             std::size_t split, double K, double c, MassParam mass) {
  const double xi = separation_ratio(x, split);
  if (!(xi < 1.0)) throw DomainError("separation ratio must be below 1");
  if (input_dims.size() != x.size()) throw std::invalid_argument("one dimension per point required");
  int sum_a = 0;
  for (int d : input_dims) sum_a += d;
  const Point4& xn = x.back();
  double far = mass.massless() ? std::numeric_limits<double>::infinity() : 1.0 / mass.m;
  for (const auto& p : x) far = std::max(far, dist(p, xn));
  double close = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) close = std::min(close, dist(x[i], x[j]));
  const double lg = std::log(K) + 0.5 * (D + 1) * std::log(xi) +
                    c * (sum_a + target_dim) * std::log((D + 2) / (std::sqrt(xi) - xi)) +
                    (target_dim + 1) * std::log(far) - (sum_a + 1) * std::log(close);
  return exp_saturating(lg);
}

// One measured remainder, with everything bound_theorem1 needs besides (K, c).
struct RemainderSample {
  double abs_remainder = 0.0;
  std::vector<int> input_dims;
  int target_dim = 0;
  int D = 0;
  std::vector<Point4> x;
  std::size_t split = 1;
  MassParam mass{1.0};
};

struct FittedConstants {
  double K = 1.0;
  double c = 0.0;
};

// Least-squares fit of (log K, c) in log space, with log K then raised to the
// upper envelope of the training residuals and multiplied by `safety`.
inline FittedConstants fit_remainder_constants(const std::vector<RemainderSample>& samples, double safety = 2.0) {
  std::vector<double> ys, fs;
  for (const auto& s : samples) {
    if (!(s.abs_remainder > 0.0)) continue;
    const double base = std::log(bound_theorem1(s.input_dims, s.target_dim, s.D, s.x, s.split, 1.0, 0.0, s.mass));
    const double xi = separation_ratio(s.x, s.split);
    int total = s.target_dim;
    for (int d : s.input_dims) total += d;
    ys.push_back(std::log(s.abs_remainder) - base);
    fs.push_back(total * std::log((s.D + 2) / (std::sqrt(xi) - xi)));
  }
  FittedConstants out;
  if (ys.empty()) return out;
  const double n = static_cast<double>(ys.size());
  double mf = 0, my = 0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    mf += fs[i] / n;
    my += ys[i] / n;
  }
  double sff = 0, sfy = 0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    sff += (fs[i] - mf) * (fs[i] - mf);
    sfy += (fs[i] - mf) * (ys[i] - my);
  }
  out.c = sff > 0 ? std::max(0.0, sfy / sff) : 0.0;
  double log_k = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ys.size(); ++i) log_k = std::max(log_k, ys[i] - out.c * fs[i]);
  out.K = safety * std::exp(log_k);
  return out;
}

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds() const { return lhs <= rhs; }
};

// Nested Taylor sum of d^w Delta at y against its printed bound. The nested sum
// is evaluated exactly: sum_{|v|=d} x^v/v! d^v = (x.d)^d/d!, so the coefficient
// vectors of the r factors are convolved and contracted with derivatives at y.
inline BoundCheck taylor_bound_check(int r, const std::vector<int>& degrees, const MultiIndex& w,
                                     const std::vector<Point4>& x, const Point4& y, double eps, double delta,
                                     MassParam mass) {
  if (r < 1 || static_cast<int>(degrees.size()) != r || static_cast<int>(x.size()) != r)
    throw std::invalid_argument("taylor_bound_check: need r degrees and r points");
  if (!(eps > 0.0 && eps <= 1.0 / (8.0 * r))) throw std::invalid_argument("eps out of range (0, 1/(8r)]");
  if (!(delta >= 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in [0,1]");
  if (norm(y) == 0.0) throw SingularPointError("y must be nonzero");
  if (mass.massless() && delta > 0.0) throw std::invalid_argument("delta > 0 needs m > 0");

  std::map<MultiIndex, double> coeff{{MultiIndex{}, 1.0}};
  int total = 0;
  for (int i = 0; i < r; ++i) {
    std::map<MultiIndex, double> next;
    for (const auto& v : multi_indices_of_order(degrees[static_cast<std::size_t>(i)])) {
      const double xv = taylor_monomial(x[static_cast<std::size_t>(i)], v);
      if (xv == 0.0) continue;
      for (const auto& [u, c] : coeff) next[u + v] += c * xv;
    }
    coeff = std::move(next);
    total += degrees[static_cast<std::size_t>(i)];
  }
  PropagatorJet jet(y, mass, total + w.order());
  double lhs = 0.0;
  for (const auto& [u, c] : coeff) lhs += c * jet.derivative(u + w);

  const double ny = norm(y);
  double lg = log_factorial(w.order() + delta);
  for (int i = 0; i + 1 < r; ++i)
    lg += degrees[static_cast<std::size_t>(i)] * (std::log(norm(x[static_cast<std::size_t>(i)])) - 2 * std::log(eps));
  lg += degrees.back() * (std::log1p(eps) + std::log(norm(x.back())));
  lg -= (4 + 2 * w.order() + 2 * delta) * std::log(eps);
  lg -= (2 + w.order() + total + delta) * std::log(ny);
  if (delta > 0.0) lg -= delta * std::log(mass.m);
  return {std::abs(lhs), exp_saturating(lg)};
}

// Bound on one merged-matching entry. `degrees` holds d_pi^u for each crossed
// internal vertex. The ordering constraint between nested crossed vertices uses
// theta(x) = [x >= 0].
inline BoundCheck m_pi_bound(const WeightedTree& t, int v, const MultiIndex& alpha_v, int w,
                             const MultiIndex& alpha_w, const std::map<int, int>& degrees, double eps, double delta,
                             MassParam mass, std::optional<Branch> branch = std::nullopt) {
  const Branch b = branch ? *branch : t.default_branch();
  auto on_branch = [&](int u) { return std::find(b.path.begin(), b.path.end(), u) != b.path.end(); };
  auto strict_up = [&](int x) {
    std::vector<int> out;
    if (x == t.root()) return out;
    for (int p : t.ancestors(x))
      if (p != t.root()) out.push_back(p);
    return out;
  };
  const auto uv = strict_up(v), uw = strict_up(w);
  auto side = [&](const std::vector<int>& mine, const std::vector<int>& other) {
    std::vector<int> out;
    for (int u : mine)
      if (std::find(other.begin(), other.end(), u) == other.end()) out.push_back(u);
    return out;
  };
  const auto pv = side(uv, uw), pw = side(uw, uv);
  const double lhs = std::abs(merged_entry(t, v, alpha_v, w, alpha_w, degrees, mass));

  auto nearest_sibling = [&](int x) {
    double d = std::numeric_limits<double>::infinity();
    for (int s : t.siblings(x)) d = std::min(d, dist(t.point(s), t.point(x)));
    return d;
  };
  // Ordering factor along one side; a violated constraint makes the bound zero.
  auto ordered = [&](const std::vector<int>& path, int start) {
    int prev = start;
    for (int u : path) {
      if (degrees.at(u) < prev) return false;
      prev = degrees.at(u);
    }
    return true;
  };

  if (w == t.root()) {
    if (!ordered(pv, alpha_v.order())) return {lhs, 0.0};
    double far = 0.0;
    for (int u : t.children(t.root())) far = std::max(far, dist(t.point(u), t.point(t.root())));
    double lg = (alpha_w.order() + 1) * std::log(far) - (alpha_v.order() + 1) * std::log(nearest_sibling(v));
    for (int u : pv) lg += degrees.at(u) * std::log(t.xi(u));
    return {lhs, exp_saturating(lg)};
  }
  if (!ordered(pv, alpha_v.order()) || !ordered(pw, alpha_w.order())) return {lhs, 0.0};
  const int e = pv.empty() ? v : pv.back();
  const int f = pw.empty() ? w : pw.back();
  double lg = log_factorial(alpha_v.order() + alpha_w.order() + delta);
  for (const auto* path : {&pv, &pw})
    for (int u : *path) {
      const double chi = t.xi(u) * (on_branch(u) ? (1.0 + eps) : 1.0 / (eps * eps));
      lg += (degrees.at(u) + 1) * std::log(chi);
    }
  lg -= (1 + alpha_v.order()) * std::log(eps * eps * nearest_sibling(v));
  lg -= (1 + alpha_w.order()) * std::log(eps * eps * nearest_sibling(w));
  if (delta > 0.0) lg -= delta * (std::log(mass.m) + std::log(eps * eps * dist(t.point(e), t.point(f))));
  return {lhs, exp_saturating(lg)};
}

// Tail sum over d > D of q^d (d+1)^p against its closed-form bound,
// with q = xi (1+eps)^{8^{r+1}} and p = 8^{r+1} D_T.
inline BoundCheck dsum_check(double q, int p, int D) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("dsum_check needs 0 < q < 1");
  double lhs = 0.0;
  const double lq = std::log(q);
  double peak = -std::numeric_limits<double>::infinity();
  for (int d = D + 1;; ++d) {
    const double lt = d * lq + p * std::log(d + 1.0);
    peak = std::max(peak, lt);
    lhs += std::exp(std::min(lt, 709.0));
    if (lt < peak - 50.0 && d > D + 10) break;
    if (d > D + 1000000) break;
  }
  const double lg = (D + 1) * lq + (p + 1) * std::log((D + 2) / (1.0 - q)) + log_factorial(p);
  return {lhs, exp_saturating(lg)};
}

// Closed-form tail bound with the choice (1+eps)^{8^{r+1}} = 1/sqrt(xi).
inline double dsum_tail_bound(double xi, int r, int dim_total, int D) {
  const double q = std::sqrt(xi);
  const double p = std::pow(8.0, r + 1) * dim_total;
  const double lg = (D + 1) * std::log(q) + (p + 1) * std::log((D + 2) / (1.0 - q)) + std::lgamma(p + 1);
  return exp_saturating(lg);
}

}  // namespace opekit
