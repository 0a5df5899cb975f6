#pragma once

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "opekit/geometry.hpp"
#include "opekit/matchings.hpp"
#include "opekit/multiindex.hpp"
#include "opekit/quadrature.hpp"
#include "opekit/trees.hpp"

namespace opekit {

// The interaction vertex phi^4/4!; its 1/4! is applied explicitly.
inline const CompositeOp& interaction_op() {
  static const CompositeOp l = CompositeOp::phi_power(4);
  return l;
}
inline constexpr double kInteractionNorm = 1.0 / 24.0;

class UnsupportedOrder : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Integrand of the first-order recursion at a point y, before the overall minus sign:
// C0_{L A...}^B(y, x) - sum_i sum_{[C]<=[A_i]} C0_{L A_i}^C(y, x_i) C0_{..C..}^B(x)
//                    - sum_{[C]<[B]} C0_{A...}^C(x) C0_{L C}^B(y, x_ref).
class FirstOrderIntegrand {
 public:
  FirstOrderIntegrand(std::vector<CompositeOp> ops, CompositeOp target, std::vector<Point4> points,
                      std::size_t ref, MassParam mass)
      : ops_(std::move(ops)), target_(std::move(target)), points_(std::move(points)), ref_(ref), mass_(mass) {
    const std::size_t n = ops_.size();
    if (n == 0 || n != points_.size()) throw std::invalid_argument("first-order integrand: bad request");
    if (ref_ >= n) throw std::invalid_argument("first-order integrand: reference index out of range");
    const Point4& xr = points_[ref_];
    // Vertex counterterms, with the y-independent outer factor precomputed.
    for (std::size_t i = 0; i < n; ++i) {
      for (int d = 0; d <= ops_[i].dimension(); ++d)
        for (const auto& c : enumerate_ops(d)) {
          // The inner factor needs an even total slot count.
          if ((4 + ops_[i].size() + c.size()) % 2) continue;
          auto replaced = ops_;
          replaced[i] = c;
          const double outer = free_coefficient(replaced, points_, target_, xr, mass_);
          if (outer != 0.0) vertex_terms_.push_back({i, c, outer});
        }
    }
    for (int d = 0; d < target_.dimension(); ++d)
      for (const auto& c : enumerate_ops(d)) {
        if ((4 + c.size() + target_.size()) % 2) continue;
        const double inner = free_coefficient(ops_, points_, c, xr, mass_);
        if (inner != 0.0) root_terms_.push_back({c, inner});
      }
    full_ops_.push_back(interaction_op());
    full_ops_.insert(full_ops_.end(), ops_.begin(), ops_.end());
    full_points_.push_back(Point4{});
    full_points_.insert(full_points_.end(), points_.begin(), points_.end());
  }

  double operator()(const Point4& y) const {
    auto pts = full_points_;
    pts[0] = y;
    double v = free_coefficient(full_ops_, pts, target_, points_[ref_], mass_);
    for (const auto& t : vertex_terms_) {
      const CompositeOp pair_ops[2] = {interaction_op(), ops_[t.index]};
      const Point4 pair_pts[2] = {y, points_[t.index]};
      v -= free_coefficient(pair_ops, pair_pts, t.op, points_[t.index], mass_) * t.outer;
    }
    for (const auto& t : root_terms_) {
      const CompositeOp pair_ops[2] = {interaction_op(), t.op};
      const Point4 pair_pts[2] = {y, points_[ref_]};
      v -= t.inner * free_coefficient(pair_ops, pair_pts, target_, points_[ref_], mass_);
    }
    return kInteractionNorm * v;
  }

  const std::vector<Point4>& points() const { return points_; }
  std::size_t reference() const { return ref_; }

 private:
  struct VertexTerm {
    std::size_t index;
    CompositeOp op;
    double outer;
  };
  struct RootTerm {
    CompositeOp op;
    double inner;
  };
  std::vector<CompositeOp> ops_;
  CompositeOp target_;
  std::vector<Point4> points_;
  std::size_t ref_;
  MassParam mass_;
  std::vector<CompositeOp> full_ops_;
  std::vector<Point4> full_points_;
  std::vector<VertexTerm> vertex_terms_;
  std::vector<RootTerm> root_terms_;
};

// Practical strata: a UV ball of radius half the nearest-neighbour distance at
// every point, a mixture-sampled ball around the reference point with the UV balls cut
// out, and (massive case) an exponential shell out to R_cut.
struct StrataLayout {
  std::vector<Stratum> strata;
  double r_ir = 0.0;
  double r_cut = 0.0;
};

inline StrataLayout first_order_strata(const std::vector<Point4>& pts, std::size_t ref, MassParam mass,
                                       const QuadratureConfig& q, std::optional<double> ball_radius) {
  StrataLayout lay;
  const Point4& xr = pts[ref];
  std::vector<Ball> uv;
  double span = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (j != i) nearest = std::min(nearest, dist(pts[i], pts[j]));
    if (!std::isfinite(nearest)) nearest = mass.massless() ? 1.0 : 1.0 / mass.m;
    if (ball_radius) nearest = std::min(nearest, *ball_radius);
    uv.push_back({pts[i], 0.5 * nearest});
    span = std::max(span, dist(pts[i], xr) + 0.5 * nearest);
  }
  std::optional<Ball> clip;
  if (ball_radius) clip = Ball{xr, *ball_radius};
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Stratum s;
    s.kind = Stratum::Kind::uv_ball;
    s.center = pts[i];
    s.r_out = uv[i].radius;
    s.clip = clip;
    s.label = "uv" + std::to_string(i + 1);
    lay.strata.push_back(s);
  }
  lay.r_ir = ball_radius ? *ball_radius : 2.0 * span;
  Stratum im;
  im.kind = Stratum::Kind::mixture_ball;
  im.foci = pts;
  im.center = xr;
  im.r_out = lay.r_ir;
  im.exclude = uv;
  im.label = "im";
  lay.strata.push_back(im);
  if (!ball_radius) {
    lay.r_cut = q.r_cut > 0.0 ? q.r_cut : lay.r_ir + 40.0 / mass.m;
    if (lay.r_cut < 10.0 / mass.m || lay.r_cut <= lay.r_ir)
      throw std::invalid_argument("R_cut must exceed 10/m and the intermediate radius");
    Stratum ir;
    ir.kind = Stratum::Kind::exp_shell;
    ir.center = xr;
    ir.r_in = lay.r_ir;
    ir.r_out = lay.r_cut;
    ir.rate = mass.m;
    ir.label = "ir";
    lay.strata.push_back(ir);
  }
  return lay;
}

// Rough bound on the integral beyond R_cut, assuming at least e^{-m r} decay.
inline double exterior_tail(const std::function<double(const Point4&)>& f, const Point4& center, double r_cut,
                            double m) {
  std::mt19937_64 rng(12345);
  double peak = 0.0;
  for (int k = 0; k < 32; ++k) peak = std::max(peak, std::abs(f(center + r_cut * random_direction(rng))));
  const double r = r_cut;
  return 2.0 * std::numbers::pi * std::numbers::pi * peak *
         (r * r * r / m + 3 * r * r / (m * m) + 6 * r / (m * m * m) + 6 / (m * m * m * m));
}

inline void check_distinct(const std::vector<Point4>& pts) {
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      if (pts[i] == pts[j]) throw std::invalid_argument("points must be pairwise distinct");
}

// First-order coefficient in the massive theory: -integral of the recursion integrand.
inline Estimate first_order_coeff(const std::vector<CompositeOp>& ops, const CompositeOp& target,
                                  const std::vector<Point4>& pts, std::size_t ref, MassParam mass,
                                  const QuadratureConfig& q) {
  if (mass.massless()) throw std::invalid_argument("massless first order needs massless_first_order with a scale L");
  check_distinct(pts);
  FirstOrderIntegrand f(ops, target, pts, ref, mass);
  auto lay = first_order_strata(pts, ref, mass, q, std::nullopt);
  std::function<double(const Point4&)> fn = std::cref(f);
  Estimate e = integrate_strata(lay.strata, fn, q);
  e.tail = exterior_tail(fn, pts[ref], lay.r_cut, mass.m);
  e.value = -e.value;
  e.error += e.tail;
  return e;
}

inline Estimate massless_first_order(const std::vector<CompositeOp>& ops, const CompositeOp& target,
                                     const std::vector<Point4>& pts, std::size_t ref, double L,
                                     const QuadratureConfig& q) {
  check_distinct(pts);
  double reach = 0.0;
  for (const auto& p : pts) reach = std::max(reach, dist(p, pts[ref]));
  if (!(L > reach)) throw std::invalid_argument("L must exceed the largest distance to the reference point");
  const MassParam zero{0.0};
  FirstOrderIntegrand f(ops, target, pts, ref, zero);
  auto lay = first_order_strata(pts, ref, zero, q, L);
  Estimate e = integrate_strata(lay.strata, std::cref(f), q);
  e.value = -e.value;
  return e;
}

// Gamma_A^B = integral over |y| > L of C0_{L A}^B(y, 0), with the 1/4! of the
// inserted interaction vertex. A and B are plain monomials; for the
// interaction-to-interaction entry the 1/4! and 4! of A and B cancel, so
// gamma_mixing(phi^4, phi^4) is that entry.
inline double gamma_mixing(const CompositeOp& a, const CompositeOp& b, double L, MassParam mass) {
  if (mass.massless() || mass.m < 0) throw std::invalid_argument("gamma_mixing requires m > 0");
  if (!(L > 0)) throw std::invalid_argument("gamma_mixing requires L > 0");
  if (a.dimension() > 4 || b.dimension() > 4) throw std::invalid_argument("gamma_mixing supports [A],[B] <= 4");
  if (a.dimension() < b.dimension()) return 0.0;
  const CompositeOp ops[2] = {interaction_op(), a};
  const Point4 origin{};
  auto at = [&](const Point4& y) {
    const Point4 pts[2] = {y, origin};
    return kInteractionNorm * free_coefficient(ops, pts, b, origin, mass);
  };
  bool radial = true;
  for (const auto& f : a.factors()) radial = radial && f.order() == 0;
  for (const auto& f : b.factors()) radial = radial && f.order() == 0;
  constexpr double pi = std::numbers::pi;
  // Angular average over S^3 (product Gauss rule in hyperspherical angles).
  auto angular = [&](double r) {
    if (radial) return 2.0 * pi * pi * at({r, 0.0, 0.0, 0.0});
    using G = boost::math::quadrature::gauss<double, 10>;
    double s = 0.0;
    const int nphi = 12;
    for (int k = 0; k < nphi; ++k) {
      const double ph = 2.0 * pi * (k + 0.5) / nphi;
      s += G::integrate(
          [&](double psi) {
            return G::integrate(
                [&](double th) {
                  const Point4 y{r * std::cos(psi), r * std::sin(psi) * std::cos(th),
                                 r * std::sin(psi) * std::sin(th) * std::cos(ph),
                                 r * std::sin(psi) * std::sin(th) * std::sin(ph)};
                  return at(y) * std::sin(psi) * std::sin(psi) * std::sin(th);
                },
                0.0, pi);
          },
          0.0, pi);
    }
    return s * 2.0 * pi / nphi;
  };
  // r = L e^t; d^4y = r^3 dr dOmega = r^4 dt dOmega.
  const double t_max = std::log((L + 80.0 / mass.m) / L);
  auto g = [&](double t) {
    const double r = L * std::exp(t);
    const double r2 = r * r;
    return r2 * r2 * angular(r);
  };
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, 0.0, t_max, 12, 1e-11);
}

enum class RegionKind { uv, ir, im };
struct Region {
  RegionKind kind = RegionKind::im;
  int child = -1;  // set for uv
};

// Region of y relative to the children of an internal vertex, with the
// branch-dependent thresholds (1+eps)^{2 8^{r+1}} on the branch and
// eps^{-2 8^{r+1}} off it.
inline Region region_classify(const Point4& y, int v, const WeightedTree& t, double eps, int r,
                              std::optional<Branch> branch = std::nullopt) {
  if (t.is_leaf(v)) throw TreeError("region_classify needs an internal vertex");
  const int dt = t.external_dimension();
  const double eps_max = std::ldexp(1.0, -(dt + 4 * r + 3));
  if (!(eps > 0.0 && eps <= eps_max)) throw std::invalid_argument("eps out of range (0, 2^-(D_T+4r+3)]");
  const Branch b = branch ? *branch : t.default_branch();
  auto on_branch = [&](int w) { return std::find(b.path.begin(), b.path.end(), w) != b.path.end(); };
  const double power = 2.0 * std::pow(8.0, r + 1);
  const double log_on = power * std::log1p(eps);
  const double log_off = -power * std::log(eps);
  for (int i : t.children(v)) {
    double nearest = std::numeric_limits<double>::infinity();
    for (int j : t.siblings(i)) nearest = std::min(nearest, dist(t.point(i), t.point(j)));
    const double di = dist(t.point(i), y);
    const double lhs = (di == 0.0) ? -std::numeric_limits<double>::infinity() : std::log(di);
    if (lhs + (on_branch(i) ? log_on : log_off) < std::log(nearest)) return {RegionKind::uv, i};
  }
  double spread = 0.0;
  for (int j : t.children(v)) spread = std::max(spread, dist(t.point(v), t.point(j)));
  const bool parent_on = v != t.root() && on_branch(t.parent(v));
  const double dv = dist(t.point(v), y);
  if (dv > 0.0 && std::log(dv) >= std::log(spread) + (parent_on ? log_on : log_off)) return {RegionKind::ir, -1};
  return {RegionKind::im, -1};
}

}  // namespace opekit
