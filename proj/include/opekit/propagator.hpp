#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "opekit/geometry.hpp"
#include "opekit/multiindex.hpp"

namespace opekit {

class SingularPointError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// g_k(z) = z^{k+1} K_{k+1}(z) for k = -1..k_max, stored at index k+1.
// Upward recurrence g_k = z^2 g_{k-2} + 2k g_{k-1} is stable for K.
// Returns false when K underflows; the sequence is then all zero.
inline bool scaled_bessel_sequence(double z, int k_max, std::vector<double>& g) {
  g.assign(static_cast<std::size_t>(k_max) + 2, 0.0);
  if (z > 700.0) return false;
  const double k0 = std::cyl_bessel_k(0.0, z);
  const double k1 = std::cyl_bessel_k(1.0, z);
  if (k1 == 0.0) return false;
  g[0] = k0;
  if (k_max >= 0) g[1] = z * k1;
  const double z2 = z * z;
  for (int k = 1; k <= k_max; ++k)
    g[static_cast<std::size_t>(k) + 1] =
        z2 * g[static_cast<std::size_t>(k) - 1] + 2.0 * k * g[static_cast<std::size_t>(k)];
  return true;
}

// All partial derivatives of the propagator at one point, up to a fixed order.
class PropagatorJet {
 public:
  PropagatorJet(const Point4& x, MassParam mass, int max_order) : x_(x), max_order_(max_order) {
    const double s = norm2(x);
    if (!(s > 0.0)) throw SingularPointError("propagator evaluated at coincident points");
    constexpr double inv4pi2 = 1.0 / (4.0 * std::numbers::pi * std::numbers::pi);
    h_.assign(static_cast<std::size_t>(max_order) + 1, 0.0);
    if (mass.massless()) {
      // h^(k)(s) = (-1)^k k! / (4 pi^2 s^{k+1})
      double v = inv4pi2 / s;
      for (int k = 0; k <= max_order; ++k) {
        h_[static_cast<std::size_t>(k)] = v;
        v *= -(k + 1) / s;
      }
    } else {
      const double z = mass.m * std::sqrt(s);
      std::vector<double> g;
      underflow_ = !scaled_bessel_sequence(z, max_order, g);
      // h^(k)(s) = (-1)^k g_k(z) / (4 pi^2 2^k s^{k+1})
      double pre = inv4pi2 / s;
      for (int k = 0; k <= max_order; ++k) {
        h_[static_cast<std::size_t>(k)] = pre * g[static_cast<std::size_t>(k) + 1];
        pre *= -1.0 / (2.0 * s);
      }
    }
  }

  int max_order() const { return max_order_; }
  bool underflow() const { return underflow_; }
  // k-th derivative of the radial profile with respect to s = x^2.
  double radial(int k) const { return h_.at(static_cast<std::size_t>(k)); }
  double value() const { return h_[0]; }

  // Multivariate chain rule for d^a h(sum x_mu^2):
  // sum over j_mu <= a_mu/2 of prod_mu a_mu!/(j_mu!(a_mu-2j_mu)!) (2x_mu)^{a_mu-2j_mu}
  // times h^{(|a|-sum j)}.
  double derivative(const MultiIndex& a) const {
    if (a.order() > max_order_) throw std::out_of_range("PropagatorJet: order exceeds jet");
    if (a.order() == 0) return h_[0];
    // Per-axis coefficient tables indexed by j.
    double coef[4][33];
    int jmax[4];
    for (int mu = 0; mu < 4; ++mu) {
      const int n = a[mu];
      jmax[mu] = n / 2;
      const double two_x = 2.0 * x_[mu];
      for (int j = 0; j <= jmax[mu]; ++j) {
        const int p = n - 2 * j;
        double pw = 1.0;
        for (int t = 0; t < p; ++t) pw *= two_x;
        coef[mu][j] = factorial(n) / (factorial(j) * factorial(p)) * pw;
      }
    }
    const int total = a.order();
    double sum = 0.0;
    for (int j0 = 0; j0 <= jmax[0]; ++j0)
      for (int j1 = 0; j1 <= jmax[1]; ++j1) {
        const double c01 = coef[0][j0] * coef[1][j1];
        if (c01 == 0.0) continue;
        for (int j2 = 0; j2 <= jmax[2]; ++j2) {
          const double c012 = c01 * coef[2][j2];
          if (c012 == 0.0) continue;
          for (int j3 = 0; j3 <= jmax[3]; ++j3) {
            const int k = total - (j0 + j1 + j2 + j3);
            sum += c012 * coef[3][j3] * h_[static_cast<std::size_t>(k)];
          }
        }
      }
    return sum;
  }

 private:
  Point4 x_;
  int max_order_;
  bool underflow_ = false;
  std::vector<double> h_;
};

inline double propagator(const Point4& x, MassParam mass) { return PropagatorJet(x, mass, 0).value(); }

inline double propagator_derivative(const MultiIndex& a, const Point4& x, MassParam mass) {
  if (a.order() > 32) throw std::out_of_range("propagator_derivative: order above 32");
  return PropagatorJet(x, mass, a.order()).derivative(a);
}

}  // namespace opekit
