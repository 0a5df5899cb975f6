#pragma once

#include <array>
#include <cmath>
#include <string>

#include "opekit/multiindex.hpp"

namespace opekit {

using Point4 = std::array<double, 4>;

inline Point4 operator+(const Point4& a, const Point4& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]};
}
inline Point4 operator-(const Point4& a, const Point4& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]};
}
inline Point4 operator*(double s, const Point4& a) { return {s * a[0], s * a[1], s * a[2], s * a[3]}; }

inline double norm2(const Point4& a) { return a[0] * a[0] + a[1] * a[1] + a[2] * a[2] + a[3] * a[3]; }
inline double norm(const Point4& a) { return std::sqrt(norm2(a)); }
inline double dist(const Point4& a, const Point4& b) { return norm(a - b); }

// x^a with the convention 0^0 = 1.
inline double monomial(const Point4& x, const MultiIndex& a) {
  double p = 1.0;
  for (int mu = 0; mu < 4; ++mu)
    for (int k = 0; k < a[mu]; ++k) p *= x[mu];
  return p;
}

// x^a / a!, or 0 when some entry of a is negative.
inline double taylor_monomial(const Point4& x, const MultiIndex& a) {
  if (!a.nonnegative()) return 0.0;
  return monomial(x, a) / multi_factorial(a);
}

struct MassParam {
  double m = 0.0;
  bool massless() const { return m == 0.0; }
};

}  // namespace opekit
