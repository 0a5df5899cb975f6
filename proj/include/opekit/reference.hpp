#pragma once

// Brute-force reference implementations used by the tests and the acceptance
// checks. They share no enumeration code with the main path: Wick contractions
// are expanded field by field, and the uncontracted remainder is matched to the
// target by explicit permutations.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "opekit/geometry.hpp"
#include "opekit/matchings.hpp"
#include "opekit/multiindex.hpp"
#include "opekit/propagator.hpp"

namespace opekit::reference {

struct Field {
  int vertex;
  MultiIndex alpha;
};

struct WickResult {
  double value = 0.0;
  double abs_sum = 0.0;  // sum of |terms|, the cancellation-free magnitude
  long terms = 0;
};

// Coefficient of the normal-ordered monomial `target` at `root` in the Wick
// expansion of the product of normal-ordered leaf monomials.
inline WickResult wick_coefficient(const std::vector<CompositeOp>& ops, const std::vector<Point4>& pts,
                                   const CompositeOp& target, const Point4& root, MassParam mass) {
  std::vector<Field> fields;
  for (std::size_t v = 0; v < ops.size(); ++v)
    for (const auto& a : ops[v].factors()) fields.push_back({static_cast<int>(v), a});
  const std::size_t n = fields.size();
  const auto& want = target.factors();
  WickResult out;
  if (n < want.size() || (n - want.size()) % 2) return out;

  std::vector<char> used(n, 0);
  std::vector<std::size_t> open;
  // Recursively decide, field by field, to contract with a later field or to keep it.
  auto recurse = [&](auto&& self, std::size_t i, double weight) -> void {
    while (i < n && used[i]) ++i;
    if (i == n) {
      if (open.size() != want.size()) return;
      std::vector<std::size_t> perm(want.size());
      std::iota(perm.begin(), perm.end(), 0);
      do {
        double w = weight;
        for (std::size_t k = 0; k < open.size() && w != 0.0; ++k) {
          const Field& f = fields[open[k]];
          const MultiIndex rest = want[perm[k]] - f.alpha;
          if (!rest.nonnegative()) {
            w = 0.0;
            break;
          }
          w *= monomial(pts[static_cast<std::size_t>(f.vertex)] - root, rest) / multi_factorial(rest);
        }
        out.value += w;
        out.abs_sum += std::abs(w);
        ++out.terms;
      } while (std::next_permutation(perm.begin(), perm.end()));
      return;
    }
    used[i] = 1;
    if (open.size() < want.size()) {
      open.push_back(i);
      self(self, i + 1, weight);
      open.pop_back();
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      if (used[j] || fields[j].vertex == fields[i].vertex) continue;
      used[j] = 1;
      const Point4 sep = pts[static_cast<std::size_t>(fields[i].vertex)] - pts[static_cast<std::size_t>(fields[j].vertex)];
      double c = propagator_derivative(fields[i].alpha + fields[j].alpha, sep, mass);
      if (fields[j].alpha.order() % 2) c = -c;
      self(self, i + 1, weight * c);
      used[j] = 0;
    }
    used[i] = 0;
  };
  recurse(recurse, 0, 1.0);
  const double s = target.symmetry_factor();
  out.value /= s;
  out.abs_sum /= s;
  return out;
}

// Number of perfect matchings of 2k items, (2k-1)!!.
inline long double_factorial_odd(int k) {
  long r = 1;
  for (int i = 2 * k - 1; i > 1; i -= 2) r *= i;
  return r;
}

struct McResult {
  double value = 0.0;
  double sigma = 0.0;
};

// Integral of prod_i Delta(y - x_i) over R^4 (or over |y - center| <= radius),
// by importance sampling from an equal mixture of densities
// p_i(y) = |y - x_i|^{-2} e^{-|y - x_i|/s} / (2 pi^2 s^2) centred on each point.
inline McResult product_integral(const std::vector<Point4>& pts, MassParam mass, std::size_t samples, std::uint64_t seed,
                                 double s, std::optional<std::pair<Point4, double>> ball = std::nullopt) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> radius(2.0, s);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
  const double norm_c = 2.0 * std::numbers::pi * std::numbers::pi * s * s;
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    Point4 dir{g(rng), g(rng), g(rng), g(rng)};
    const double len = norm(dir);
    const double r = radius(rng);
    const Point4& c = pts[pick(rng)];
    Point4 y;
    for (int mu = 0; mu < 4; ++mu) y[static_cast<std::size_t>(mu)] = c[static_cast<std::size_t>(mu)] + r * dir[static_cast<std::size_t>(mu)] / len;
    double w = 0.0;
    if (!ball || dist(y, ball->first) <= ball->second) {
      double pdf = 0.0, f = 1.0;
      for (const auto& x : pts) {
        const double d = dist(y, x);
        pdf += std::exp(-d / s) / (d * d * norm_c);
        f *= propagator(y - x, mass);
      }
      pdf /= static_cast<double>(pts.size());
      w = f / pdf;
    }
    sum += w;
    sum2 += w * w;
  }
  const double n = static_cast<double>(samples);
  const double mean = sum / n;
  return {mean, std::sqrt(std::max(0.0, sum2 / n - mean * mean) / (n - 1))};
}

}  // namespace opekit::reference
