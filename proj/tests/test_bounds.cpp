#include <gtest/gtest.h>

#include <random>

#include "opekit/bounds.hpp"

using namespace opekit;

namespace {

const CompositeOp kPhi = CompositeOp::phi_power(1);

std::mt19937_64& rng() {
  static std::mt19937_64 g(17);
  return g;
}

Point4 scaled_point(double s) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Point4 p{u(rng()), u(rng()), u(rng()), u(rng())};
  return (s / norm(p)) * p;
}

// Two leaves under the root at x_1.
WeightedTree pair_tree(const Point4& a, const Point4& b) {
  return build_tree({{0, 2, a, kPhi}, {1, 2, b, kPhi}, {2, std::nullopt, b, CompositeOp{}}});
}

// Leaves 0..4; vertex 5 over (0,1) at x_1, vertex 6 over (3,4) at x_4, root 7 over (5,2,6) at x_4.
WeightedTree two_cluster_tree(const std::vector<Point4>& x) {
  const CompositeOp phi2 = CompositeOp::phi_power(2);
  return build_tree({{0, 5, x[0], kPhi}, {1, 5, x[1], kPhi}, {2, 7, x[2], kPhi}, {3, 6, x[3], kPhi},
                     {4, 6, x[4], kPhi}, {5, 7, x[1], phi2}, {6, 7, x[4], phi2}, {7, std::nullopt, x[4], phi2}});
}

}  // namespace

TEST(BoundB, PairTreeHandValue) {
  const Point4 a{0.3, 0, 0, 0}, b{0, 0, 0, 0};
  const WeightedTree t = pair_tree(a, b);
  BoundParams p;
  p.eps = 1.0 / 64;
  const double d = 0.3, m = 1.0;
  // No vertex lies on the (empty) branch path: leaves give eps^{-1} each, raised to 8.
  const double want = std::pow(d, -2) * std::pow(p.eps, -16) * std::pow(std::max(1 / m, d) / (m * d * d), 0.5);
  EXPECT_NEAR(bound_B(t, 0, p, {m}), want, 1e-12 * want);
}

TEST(BoundB, ScalesWithKAndGrowsAsEpsShrinks) {
  const WeightedTree t = pair_tree({0.3, 0.1, 0, 0}, {0, 0, 0, 0});
  BoundParams p;
  p.eps = 1.0 / 64;
  const double base = bound_B(t, 0, p, {1.0});
  p.K = 3.0;
  EXPECT_NEAR(bound_B(t, 0, p, {1.0}), 3.0 * base, 1e-12 * base);
  p.K = 1.0;
  p.eps = 1.0 / 128;
  EXPECT_GT(bound_B(t, 0, p, {1.0}), base);
}

TEST(BoundB, Validation) {
  const WeightedTree t = pair_tree({0.3, 0.1, 0, 0}, {0, 0, 0, 0});
  BoundParams p;
  p.eps = 0.5;
  EXPECT_THROW(bound_B(t, 0, p, {1.0}), std::invalid_argument);
  p.eps = 1.0 / 64;
  EXPECT_THROW(bound_B(t, 0, p, {0.0}), std::invalid_argument);
  p.default_delta = 1.0;
  EXPECT_THROW(bound_B(t, 0, p, {1.0}), std::invalid_argument);
  const std::vector<Point4> x{{0.1, 0, 0, 0}, {0, 0, 0, 0}, {0, 2, 0, 0}, {2.1, 0, 0, 0}, {2, 0, 0, 0}};
  BoundParams q;
  q.eps = 1e-6;
  EXPECT_THROW(bound_B(two_cluster_tree(x), 0, q, {1.0}), std::invalid_argument);
  q.dims = {{5, 2}, {6, 2}};
  EXPECT_GT(bound_B(two_cluster_tree(x), 0, q, {1.0}), 0.0);
}

TEST(RemainderBound, HandValue) {
  const std::vector<Point4> x{{0.5, 0, 0, 0}, {0, 0, 0, 0}, {0, 1, 0, 0}};
  const double xi = 0.5, K = 2.0, c = 0.3;
  const int D = 4;
  const double close = 0.5, far = std::max(1.0, std::hypot(0.5, 1.0));
  const double want = K * std::pow(xi, 0.5 * (D + 1)) * std::pow((D + 2) / (std::sqrt(xi) - xi), c * 4) *
                      std::pow(far, 2) / std::pow(close, 4);
  EXPECT_NEAR(bound_theorem1({1, 1, 1}, 1, D, x, 2, K, c, {1.0}), want, 1e-12 * want);
}

TEST(RemainderBound, VanishesAsTruncationGrows) {
  const std::vector<Point4> x{{0.5, 0, 0, 0}, {0, 0, 0, 0}, {0, 1, 0, 0}};
  double prev = bound_theorem1({1, 1, 1}, 1, 0, x, 2, 1.0, 0.0, {1.0});
  for (int D = 1; D <= 40; ++D) {
    const double v = bound_theorem1({1, 1, 1}, 1, D, x, 2, 1.0, 0.0, {1.0});
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_LT(bound_theorem1({1, 1, 1}, 1, 2000, x, 2, 1.0, 0.5, {1.0}),
            1e-100 * bound_theorem1({1, 1, 1}, 1, 10, x, 2, 1.0, 0.5, {1.0}));
}

TEST(RemainderBound, DomainError) {
  const std::vector<Point4> x{{1.2, 0, 0, 0}, {0, 0, 0, 0}, {0, 1, 0, 0}};
  ASSERT_NEAR(separation_ratio(x, 2), 1.2, 1e-15);
  EXPECT_THROW(bound_theorem1({1, 1, 1}, 1, 4, x, 2, 1.0, 0.0, {1.0}), DomainError);
}

TEST(RemainderBound, FitRecoversSyntheticConstants) {
  std::vector<RemainderSample> samples;
  const double k0 = 0.07, c0 = 0.4;
  for (double s : {0.2, 0.35, 0.5, 0.65})
    for (int D = 0; D <= 10; ++D) {
      RemainderSample r;
      r.input_dims = {1, 1, 1};
      r.target_dim = 1;
      r.D = D;
      r.x = {{s, 0, 0, 0}, {0, 0, 0, 0}, {0, 1, 0, 0}};
      r.split = 2;
      r.abs_remainder = bound_theorem1(r.input_dims, 1, D, r.x, 2, k0, c0, {1.0});
      samples.push_back(r);
    }
  const FittedConstants f = fit_remainder_constants(samples);
  EXPECT_NEAR(f.c, c0, 1e-9);
  EXPECT_NEAR(f.K, 2 * k0, 1e-9);
}

TEST(Taylor, SingleTermIsPropagator) {
  const Point4 y{0.4, -0.2, 0.7, 0.1};
  const auto r = taylor_bound_check(1, {0}, MultiIndex{}, {{0.1, 0, 0, 0}}, y, 1.0 / 8, 0.0, {1.0});
  EXPECT_DOUBLE_EQ(r.lhs, propagator(y, {1.0}));
  EXPECT_TRUE(r.holds());
}

TEST(Taylor, SingleVariableSumIsDirectionalDerivative) {
  // sum_{|v|=2} x^v/v! d^v Delta = (x.d)^2 Delta / 2
  const Point4 y{0.4, -0.2, 0.7, 0.1}, x{0.05, 0.02, -0.03, 0.01};
  double want = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      MultiIndex ab;
      ab[static_cast<std::size_t>(a)] += 1;
      ab[static_cast<std::size_t>(b)] += 1;
      want += 0.5 * x[static_cast<std::size_t>(a)] * x[static_cast<std::size_t>(b)] * propagator_derivative(ab, y, {1.0});
    }
  const auto r = taylor_bound_check(1, {2}, MultiIndex{}, {x}, y, 1.0 / 8, 0.0, {1.0});
  EXPECT_NEAR(r.lhs, std::abs(want), 1e-12 * std::abs(want));
}

TEST(Taylor, RandomizedDomination) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int violations = 0;
  for (int k = 0; k < 3000; ++k) {
    const int r = 1 + static_cast<int>(rng()() % 3);
    std::vector<int> degrees;
    std::vector<Point4> x;
    for (int i = 0; i < r; ++i) {
      degrees.push_back(static_cast<int>(rng()() % 5));
      x.push_back(scaled_point(std::pow(10.0, 2 * u(rng()))));
    }
    MultiIndex w;
    for (int j = static_cast<int>(rng()() % 3); j > 0; --j) w[rng()() % 4] += 1;
    const Point4 y = scaled_point(std::pow(10.0, 2 * u(rng())));
    const double eps = std::pow(10.0, -0.5 * (u(rng()) + 1)) / (8.0 * r);
    double delta = rng()() % 2 ? 0.5 : 0.0;
    double m = rng()() % 2 ? 0.5 : 1.0;
    if (k % 3 == 0) {
      delta = 0.0;
      m = 0.0;
    }
    if (!taylor_bound_check(r, degrees, w, x, y, eps, delta, {m}).holds()) ++violations;
  }
  EXPECT_EQ(violations, 0);
}

TEST(Taylor, Validation) {
  const Point4 y{1, 0, 0, 0};
  EXPECT_THROW(taylor_bound_check(1, {1}, {}, {y}, y, 0.2, 0.0, {1.0}), std::invalid_argument);
  EXPECT_THROW(taylor_bound_check(2, {1}, {}, {y}, y, 0.01, 0.0, {1.0}), std::invalid_argument);
  EXPECT_THROW(taylor_bound_check(1, {1}, {}, {y}, y, 0.1, 0.5, {0.0}), std::invalid_argument);
  EXPECT_THROW(taylor_bound_check(1, {1}, {}, {y}, {0, 0, 0, 0}, 0.1, 0.0, {1.0}), SingularPointError);
}

TEST(MergedEntryBound, RandomizedDomination) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int violations = 0, nonzero = 0;
  for (int g = 0; g < 100; ++g) {
    const Point4 a = scaled_point(1.0), b = scaled_point(1.0) + Point4{2.5, 0, 0, 0},
                 c = scaled_point(1.0) + Point4{0, 2.5, 0, 0};
    const double s1 = 0.05 + 0.15 * (u(rng()) + 1), s2 = 0.05 + 0.15 * (u(rng()) + 1);
    const WeightedTree t = two_cluster_tree({a + scaled_point(s1), a, c, b + scaled_point(s2), b});
    for (int k = 0; k < 40; ++k) {
      const int v = static_cast<int>(rng()() % 5);
      int w = 0;
      do {
        w = static_cast<int>(rng()() % 6);
        if (w == 5) w = 7;
      } while (w == v || (w != 7 && t.parent(w) == t.parent(v)));
      MultiIndex av, aw;
      for (int j = static_cast<int>(rng()() % 3); j > 0; --j) av[rng()() % 4] += 1;
      for (int j = static_cast<int>(rng()() % (w == 7 ? 6 : 3)); j > 0; --j) aw[rng()() % 4] += 1;
      const std::map<int, int> degrees{{5, static_cast<int>(rng()() % 5)}, {6, static_cast<int>(rng()() % 5)}};
      const double eps = std::pow(10.0, -0.5 * (u(rng()) + 1)) / 16.0;
      const double delta = rng()() % 2 ? 0.5 : 0.0;
      const double m = rng()() % 2 ? 0.5 : 1.0;
      const BoundCheck r = m_pi_bound(t, v, av, w, aw, degrees, eps, delta, {m});
      if (r.lhs > 0) ++nonzero;
      if (!r.holds()) ++violations;
    }
  }
  EXPECT_EQ(violations, 0);
  EXPECT_GT(nonzero, 500);
}

TEST(DegreeSum, TailAgainstClosedForm) {
  for (double q : {0.1, 0.5, 0.9})
    for (int p : {0, 1, 4, 16})
      for (int D : {0, 3, 10, 40}) {
        const BoundCheck r = dsum_check(q, p, D);
        EXPECT_TRUE(r.holds()) << q << " " << p << " " << D;
        EXPECT_GT(r.lhs, 0.0);
      }
  EXPECT_THROW(dsum_check(1.0, 1, 1), std::invalid_argument);
}

TEST(DegreeSum, TailBoundDecreasesPastItsPeak) {
  // (D+2)^{p+1} q^{D+1} with p = 16, q = 1/2 peaks near D = 17/ln 2.
  double prev = dsum_tail_bound(0.25, 0, 2, 25);
  for (int D = 26; D < 400; ++D) {
    const double v = dsum_tail_bound(0.25, 0, 2, D);
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_LT(dsum_tail_bound(0.25, 0, 2, 400), 1e-30);
}
