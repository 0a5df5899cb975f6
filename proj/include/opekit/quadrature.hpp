#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "opekit/geometry.hpp"

namespace opekit {

class NumericDiagnostic : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QuadratureConfig {
  std::size_t samples_per_region = 200000;
  std::uint64_t seed = 42;
  double r_cut = 0.0;            // 0 selects R_IR + 40/m
  unsigned workers = 0;          // 0 selects OPE_KIT_THREADS or hardware concurrency
  std::size_t batch_size = 4096;  // fixed, so results do not depend on the worker count
};

struct Estimate {
  double value = 0.0;
  double error = 0.0;  // 1 sigma statistical error plus any truncation tail
  double tail = 0.0;
};

inline unsigned resolve_workers(unsigned requested) {
  if (requested) return requested;
  if (const char* env = std::getenv("OPE_KIT_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stratum, std::uint64_t batch) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stratum) ^ batch);
}

struct Ball {
  Point4 center{};
  double radius = 0.0;
  bool contains(const Point4& y) const { return norm2(y - center) < radius * radius; }
};

// One sampling region. Points falling in `exclude` or outside `clip` contribute zero.
struct Stratum {
  enum class Kind { uv_ball, volume_ball, exp_shell, mixture_ball };
  Kind kind = Kind::volume_ball;
  Point4 center{};
  double r_in = 0.0;
  double r_out = 0.0;
  double rate = 1.0;  // exp_shell only
  std::vector<Point4> foci;  // mixture_ball only
  std::vector<Ball> exclude;
  std::optional<Ball> clip;
  std::string label;
};

inline Point4 random_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Point4 v;
  double n2 = 0.0;
  do {
    for (auto& c : v) c = g(rng);
    n2 = norm2(v);
  } while (n2 < 1e-30);
  return (1.0 / std::sqrt(n2)) * v;
}

// Half the draws are uniform in the ball; the rest pick a focus and take a
// uniform radius about it out to the far edge of the ball, so integrands with
// 1/r^2 peaks at the foci keep bounded weights.
inline double sample_mixture(const Stratum& s, std::mt19937_64& rng, Point4& y) {
  constexpr double area_s3 = 2.0 * std::numbers::pi * std::numbers::pi;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const std::size_t k = s.foci.size();
  if (k == 0) throw std::invalid_argument("mixture stratum needs at least one focus");
  const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, 2 * k - 1)(rng);
  const double u = 1.0 - uni(rng);
  const Point4 dir = random_direction(rng);
  auto reach = [&](std::size_t i) { return s.r_out + dist(s.foci[i], s.center); };
  if (pick < k)
    y = s.center + (s.r_out * std::sqrt(std::sqrt(u))) * dir;
  else
    y = s.foci[pick - k] + (reach(pick - k) * u) * dir;
  if (norm2(y - s.center) >= s.r_out * s.r_out) return 0.0;
  for (const auto& b : s.exclude)
    if (b.contains(y)) return 0.0;
  if (s.clip && !(norm2(y - s.clip->center) <= s.clip->radius * s.clip->radius)) return 0.0;
  double pdf = 0.5 / (0.5 * std::numbers::pi * std::numbers::pi * std::pow(s.r_out, 4));
  for (std::size_t i = 0; i < k; ++i) {
    const double r = dist(y, s.foci[i]);
    if (r < reach(i)) pdf += 0.5 / static_cast<double>(k) / (area_s3 * r * r * r * reach(i));
  }
  return 1.0 / pdf;
}

// Draws one point of the stratum and returns the importance weight 1/pdf.
inline double sample_stratum(const Stratum& s, std::mt19937_64& rng, Point4& y) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  if (s.kind == Stratum::Kind::mixture_ball) return sample_mixture(s, rng, y);
  const double u = 1.0 - uni(rng);  // (0, 1]
  const Point4 dir = random_direction(rng);
  constexpr double area_s3 = 2.0 * std::numbers::pi * std::numbers::pi;
  double r = 0.0, weight = 0.0;
  switch (s.kind) {
    case Stratum::Kind::uv_ball:
      // Radius uniform: density proportional to r^{-3} in four dimensions.
      r = s.r_out * u;
      weight = area_s3 * r * r * r * s.r_out;
      break;
    case Stratum::Kind::volume_ball:
      r = s.r_out * std::sqrt(std::sqrt(u));
      weight = 0.5 * std::numbers::pi * std::numbers::pi * std::pow(s.r_out, 4);
      break;
    case Stratum::Kind::exp_shell: {
      const double width = s.r_out - s.r_in;
      const double norm = -std::expm1(-s.rate * width);
      const double t = -std::log1p(-u * norm) / s.rate;
      r = s.r_in + t;
      const double pdf = s.rate * std::exp(-s.rate * t) / norm;
      weight = area_s3 * r * r * r / pdf;
      break;
    }
    case Stratum::Kind::mixture_ball:
      break;  // handled above
  }
  y = s.center + r * dir;
  for (const auto& b : s.exclude)
    if (b.contains(y)) return 0.0;
  if (s.clip && !(norm2(y - s.clip->center) <= s.clip->radius * s.clip->radius)) return 0.0;
  return weight;
}

struct StratumResult {
  double mean = 0.0;
  double variance_of_mean = 0.0;
  std::size_t samples = 0;
};

// Integrand with `dim` components evaluated at one point into `out`.
using VectorIntegrand = std::function<void(const Point4&, double* out)>;

// Stratified Monte Carlo of a vector integrand: per component, the sum over
// strata of E[w f]. Batches use independent seed-derived streams and are merged
// in batch order, so results do not depend on the worker count.
inline std::vector<Estimate> integrate_strata_vec(const std::vector<Stratum>& strata, const VectorIntegrand& f,
                                                  std::size_t dim, const QuadratureConfig& q) {
  if (q.samples_per_region < 1000) throw std::invalid_argument("sample budget must be at least 1000 per region");
  const std::size_t bs = std::max<std::size_t>(q.batch_size, 16);
  const std::size_t nb = (q.samples_per_region + bs - 1) / bs;
  struct Partial {
    std::vector<double> s, ss;
    std::size_t n = 0;
  };
  std::vector<Partial> parts(strata.size() * nb);
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    std::vector<double> buf(dim);
    while (true) {
      const std::size_t job = next.fetch_add(1);
      if (job >= parts.size()) return;
      const std::size_t si = job / nb, bi = job % nb;
      const std::size_t count = std::min(bs, q.samples_per_region - bi * bs);
      std::mt19937_64 rng(stream_seed(q.seed, si, bi));
      Partial p;
      p.s.assign(dim, 0.0);
      p.ss.assign(dim, 0.0);
      Point4 y;
      for (std::size_t k = 0; k < count; ++k) {
        const double w = sample_stratum(strata[si], rng, y);
        if (w == 0.0) continue;
        f(y, buf.data());
        for (std::size_t c = 0; c < dim; ++c) {
          const double v = w * buf[c];
          if (!std::isfinite(v)) throw NumericDiagnostic("non-finite integrand sample in stratum " + strata[si].label);
          p.s[c] += v;
          p.ss[c] += v * v;
        }
      }
      p.n = count;
      parts[job] = std::move(p);
    }
  };
  const unsigned workers = std::min<unsigned>(resolve_workers(q.workers), static_cast<unsigned>(parts.size()));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          work();
        } catch (...) {
          errors[w] = std::current_exception();
          next = parts.size();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<Estimate> total(dim);
  std::vector<double> var(dim, 0.0);
  for (std::size_t si = 0; si < strata.size(); ++si) {
    for (std::size_t c = 0; c < dim; ++c) {
      auto merge = [&](std::size_t nbatches) {
        double s = 0.0, ss = 0.0;
        std::size_t n = 0;
        for (std::size_t bi = 0; bi < nbatches; ++bi) {
          const Partial& p = parts[si * nb + bi];
          s += p.s[c];
          ss += p.ss[c];
          n += p.n;
        }
        StratumResult r;
        r.samples = n;
        r.mean = s / static_cast<double>(n);
        const double v = std::max(0.0, ss / static_cast<double>(n) - r.mean * r.mean);
        r.variance_of_mean = v / static_cast<double>(n > 1 ? n - 1 : 1);
        return r;
      };
      const StratumResult full = merge(nb);
      if (nb >= 4) {
        // The error should shrink like n^{-1/2}; growth under doubling flags a heavy tail.
        const StratumResult half = merge(nb / 2);
        if (half.variance_of_mean > 0.0 && full.variance_of_mean > 4.0 * half.variance_of_mean)
          throw NumericDiagnostic("stratum '" + strata[si].label + "' error does not shrink with samples");
      }
      total[c].value += full.mean;
      var[c] += full.variance_of_mean;
    }
  }
  for (std::size_t c = 0; c < dim; ++c) total[c].error = std::sqrt(var[c]);
  return total;
}

inline Estimate integrate_strata(const std::vector<Stratum>& strata, const std::function<double(const Point4&)>& f,
                                 const QuadratureConfig& q) {
  return integrate_strata_vec(strata, [&](const Point4& y, double* out) { out[0] = f(y); }, 1, q).front();
}

}  // namespace opekit
