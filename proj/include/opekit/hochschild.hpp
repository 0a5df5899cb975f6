#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "opekit/bounds.hpp"
#include "opekit/geometry.hpp"
#include "opekit/matchings.hpp"
#include "opekit/multiindex.hpp"
#include "opekit/quadrature.hpp"
#include "opekit/recursion.hpp"

namespace opekit {

// Position-dependent multilinear map V^{tensor N} -> V, given by its components.
struct TruncatedCochain {
  int arity = 1;
  std::function<double(std::span<const Point4>, std::span<const CompositeOp>, const CompositeOp&)> eval;
  int d_max = 4;
};

// Nested-separation domain: r_{1,i-1} < r_{i-1,i} < r_{i-2,i} < ... < r_{1,i} for 1 < i <= N,
// with a relative tolerance against boundary flapping.
inline bool in_nested_domain(std::span<const Point4> x, double rel_tol = 1e-12) {
  const std::size_t n = x.size();
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (x[a] == x[b]) return false;
  auto r = [&](std::size_t i, std::size_t j) { return dist(x[i - 1], x[j - 1]); };
  for (std::size_t i = 3; i <= n; ++i) {
    std::vector<double> chain{r(1, i - 1)};
    for (std::size_t k = i - 1; k >= 1; --k) chain.push_back(r(k, i));
    for (std::size_t k = 0; k + 1 < chain.size(); ++k)
      if (!(chain[k] < chain[k + 1] * (1.0 - rel_tol))) return false;
  }
  return true;
}

inline double free_two_point(const CompositeOp& a1, const CompositeOp& a2, const CompositeOp& out, const Point4& x1,
                             const Point4& x2, MassParam mass) {
  const CompositeOp ops[2] = {a1, a2};
  const Point4 pts[2] = {x1, x2};
  return free_coefficient(ops, pts, out, x2, mass);
}

// Boundary operator on an arity-N cochain, evaluated at N+1 points, with every
// intermediate operator sum truncated at dimension d_max.
inline double b_apply(const TruncatedCochain& f, std::span<const Point4> x, std::span<const CompositeOp> ins,
                      const CompositeOp& out, int d_max, MassParam mass, bool check_domain = true) {
  const std::size_t n = static_cast<std::size_t>(f.arity);
  if (x.size() != n + 1 || ins.size() != n + 1) throw std::invalid_argument("b_apply needs N+1 points and operators");
  if (check_domain && !in_nested_domain(x)) throw DomainError("points are outside the nested-separation domain");
  const auto cs = enumerate_ops_up_to(d_max);
  double total = 0.0;

  // C0(x_1, x_{N+1}) (id (x) f(x_2..x_{N+1}))
  for (const auto& c : cs) {
    const double k = free_two_point(ins[0], c, out, x[0], x[n], mass);
    if (k != 0.0) total += k * f.eval(x.subspan(1), ins.subspan(1), c);
  }
  // sum_i (-1)^i f(.., x_i omitted, ..)(.. C0(x_i, x_{i+1}) ..)
  for (std::size_t i = 1; i <= n; ++i) {
    std::vector<Point4> pts;
    for (std::size_t j = 0; j <= n; ++j)
      if (j != i - 1) pts.push_back(x[j]);
    double part = 0.0;
    for (const auto& c : cs) {
      const double k = free_two_point(ins[i - 1], ins[i], c, x[i - 1], x[i], mass);
      if (k == 0.0) continue;
      std::vector<CompositeOp> ops;
      for (std::size_t j = 0; j <= n; ++j) {
        if (j == i - 1) continue;
        ops.push_back(j == i ? c : ins[j]);
      }
      part += f.eval(pts, ops, out) * k;
    }
    total += (i % 2 ? -part : part);
  }
  // (-1)^{N+1} C0(x_N, x_{N+1}) (f(x_1..x_N) (x) id)
  double last = 0.0;
  for (const auto& c : cs) {
    const double k = free_two_point(c, ins[n], out, x[n - 1], x[n], mass);
    if (k != 0.0) last += k * f.eval(x.subspan(0, n), ins.subspan(0, n), c);
  }
  total += ((n + 1) % 2 ? -last : last);
  return total;
}

// The cochain b f, evaluated with the same truncation. Inner evaluations skip
// the domain check because sub-configurations need not be nested.
inline TruncatedCochain coboundary(const TruncatedCochain& f, MassParam mass) {
  TruncatedCochain g;
  g.arity = f.arity + 1;
  g.d_max = f.d_max;
  g.eval = [f, mass](std::span<const Point4> x, std::span<const CompositeOp> ins, const CompositeOp& out) {
    return b_apply(f, x, ins, out, f.d_max, mass, false);
  };
  return g;
}

inline double b_squared_residual(const TruncatedCochain& f, std::span<const Point4> x, std::span<const CompositeOp> ins,
                                 const CompositeOp& out, int d_max, MassParam mass) {
  TruncatedCochain inner = f;
  inner.d_max = d_max;
  return std::abs(b_apply(coboundary(inner, mass), x, ins, out, d_max, mass));
}

// f_A^B = a^B b_A with finite support.
inline TruncatedCochain rank_one_cochain(std::map<CompositeOp, double> a, std::map<CompositeOp, double> b) {
  TruncatedCochain f;
  f.arity = 1;
  f.eval = [a = std::move(a), b = std::move(b)](std::span<const Point4>, std::span<const CompositeOp> ins,
                                                const CompositeOp& out) {
    auto ia = a.find(out);
    auto ib = b.find(ins[0]);
    return (ia == a.end() || ib == b.end()) ? 0.0 : ia->second * ib->second;
  };
  return f;
}

inline TruncatedCochain identity_cochain() {
  TruncatedCochain f;
  f.arity = 1;
  f.eval = [](std::span<const Point4>, std::span<const CompositeOp> ins, const CompositeOp& out) {
    return ins[0] == out ? 1.0 : 0.0;
  };
  return f;
}

inline TruncatedCochain free_cochain(MassParam mass) {
  TruncatedCochain f;
  f.arity = 2;
  f.eval = [mass](std::span<const Point4> x, std::span<const CompositeOp> ins, const CompositeOp& out) {
    return free_two_point(ins[0], ins[1], out, x[0], x[1], mass);
  };
  return f;
}

// Largest separation ratio met by the two-point compositions at three nested points.
inline double nested_ratio(std::span<const Point4> x) {
  const double r12 = dist(x[0], x[1]), r23 = dist(x[1], x[2]), r13 = dist(x[0], x[2]);
  return std::max(r12 / r23, r23 / r13);
}

struct CocycleResult {
  double value = 0.0;      // the four-term combination at first order
  double error = 0.0;      // 1 sigma
  double tail = 0.0;       // truncation-tail estimate
  double scale = 0.0;      // magnitude of the largest single term
  std::vector<double> by_dimension;  // contribution of each intermediate dimension
};

// First-order associativity combination
//   C0(x2,x3)(C1(x1,x2) (x) id) - C0(x1,x3)(id (x) C1(x2,x3))
// + C1(x2,x3)(C0(x1,x2) (x) id) - C1(x1,x3)(id (x) C0(x2,x3)),
// with intermediate sums truncated at d_max. All first-order factors share one
// Monte Carlo integral (the sum over intermediate operators is finite).
inline CocycleResult cocycle_residual_C1(std::span<const Point4> x, std::span<const CompositeOp> ins,
                                         const CompositeOp& out, int d_max, MassParam mass,
                                         const QuadratureConfig& q) {
  if (x.size() != 3 || ins.size() != 3) throw std::invalid_argument("cocycle check needs three points and operators");
  if (!in_nested_domain(x)) throw DomainError("points are outside the nested-separation domain");
  if (mass.massless()) throw std::invalid_argument("cocycle check needs m > 0");
  for (const auto& a : ins)
    if (a.dimension() > 2) throw std::invalid_argument("cocycle check supports operators of dimension <= 2");

  struct Term {
    std::unique_ptr<FirstOrderIntegrand> integrand;
    double weight;
    int dim;
    int which;
  };
  std::vector<Term> terms;
  const Point4 &x1 = x[0], &x2 = x[1], &x3 = x[2];
  for (int d = 0; d <= d_max; ++d)
    for (const auto& c : enumerate_ops(d)) {
      // C0(x2,x3)_{C A3}^B * C1(x1,x2)_{A1 A2}^C
      if (double k = free_two_point(c, ins[2], out, x2, x3, mass); k != 0.0)
        terms.push_back({std::make_unique<FirstOrderIntegrand>(std::vector{ins[0], ins[1]}, c,
                                                               std::vector{x1, x2}, 1, mass),
                         k, d, 0});
      // C0(x1,x3)_{A1 C}^B * C1(x2,x3)_{A2 A3}^C
      if (double k = free_two_point(ins[0], c, out, x1, x3, mass); k != 0.0)
        terms.push_back({std::make_unique<FirstOrderIntegrand>(std::vector{ins[1], ins[2]}, c,
                                                               std::vector{x2, x3}, 1, mass),
                         -k, d, 1});
      // C1(x2,x3)_{C A3}^B * C0(x1,x2)_{A1 A2}^C
      if (double k = free_two_point(ins[0], ins[1], c, x1, x2, mass); k != 0.0)
        terms.push_back({std::make_unique<FirstOrderIntegrand>(std::vector{c, ins[2]}, out,
                                                               std::vector{x2, x3}, 1, mass),
                         k, d, 2});
      // C1(x1,x3)_{A1 C}^B * C0(x2,x3)_{A2 A3}^C
      if (double k = free_two_point(ins[1], ins[2], c, x2, x3, mass); k != 0.0)
        terms.push_back({std::make_unique<FirstOrderIntegrand>(std::vector{ins[0], c}, out,
                                                               std::vector{x1, x3}, 1, mass),
                         -k, d, 3});
    }

  // Components: one per intermediate dimension, one per term family, then the total.
  const std::size_t nd = static_cast<std::size_t>(d_max) + 1;
  const std::vector<Point4> pts{x1, x2, x3};
  auto lay = first_order_strata(pts, 2, mass, q, std::nullopt);
  VectorIntegrand f = [&](const Point4& y, double* o) {
    std::fill(o, o + nd + 5, 0.0);
    for (const auto& t : terms) {
      const double v = t.weight * (*t.integrand)(y);
      o[static_cast<std::size_t>(t.dim)] += v;
      o[nd + static_cast<std::size_t>(t.which)] += v;
      o[nd + 4] += v;
    }
  };
  const auto est = integrate_strata_vec(lay.strata, f, nd + 5, q);

  CocycleResult res;
  for (std::size_t d = 0; d < nd; ++d) {
    // C1 = -integral, so every component flips sign.
    res.by_dimension.push_back(-est[d].value);
    res.value += -est[d].value;
  }
  // The families share samples, so the error comes from the summed component.
  res.error = est[nd + 4].error;
  for (std::size_t k = 0; k < 4; ++k) res.scale = std::max(res.scale, std::abs(est[nd + k].value));
  // Geometric tail with ratio sqrt(xi) (the choice that turns the dimension sum
  // into the remainder bound), seeded by the last two computed shells.
  const double ratio = std::sqrt(nested_ratio(x));
  const double last = std::max(std::abs(res.by_dimension[nd - 1]) + est[nd - 1].error,
                               nd >= 2 ? std::abs(res.by_dimension[nd - 2]) + est[nd - 2].error : 0.0);
  res.tail = last * ratio / (1.0 - ratio);
  return res;
}

}  // namespace opekit
