#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace opekit {

// Derivative counts along the four Euclidean axes.
struct MultiIndex {
  std::array<int, 4> n{0, 0, 0, 0};

  constexpr int order() const { return n[0] + n[1] + n[2] + n[3]; }
  constexpr int operator[](std::size_t mu) const { return n[mu]; }
  constexpr int& operator[](std::size_t mu) { return n[mu]; }
  auto operator<=>(const MultiIndex&) const = default;

  MultiIndex operator+(const MultiIndex& o) const {
    return {{n[0] + o.n[0], n[1] + o.n[1], n[2] + o.n[2], n[3] + o.n[3]}};
  }
  MultiIndex operator-(const MultiIndex& o) const {
    return {{n[0] - o.n[0], n[1] - o.n[1], n[2] - o.n[2], n[3] - o.n[3]}};
  }
  bool nonnegative() const { return n[0] >= 0 && n[1] >= 0 && n[2] >= 0 && n[3] >= 0; }
  // Componentwise a <= b.
  bool below(const MultiIndex& o) const {
    return n[0] <= o.n[0] && n[1] <= o.n[1] && n[2] <= o.n[2] && n[3] <= o.n[3];
  }
};

inline double factorial(int k) {
  static const std::array<double, 171> table = [] {
    std::array<double, 171> t{};
    t[0] = 1.0;
    for (int i = 1; i < 171; ++i) t[i] = t[i - 1] * i;
    return t;
  }();
  if (k < 0) throw std::domain_error("factorial of negative integer");
  if (k > 170) return std::numeric_limits<double>::infinity();
  return table[static_cast<std::size_t>(k)];
}

inline double multi_factorial(const MultiIndex& a) {
  return factorial(a[0]) * factorial(a[1]) * factorial(a[2]) * factorial(a[3]);
}

// All multi-indices of total order d, in lexicographic order of the 4-tuple.
inline const std::vector<MultiIndex>& multi_indices_of_order(int d) {
  static std::mutex mu;
  static std::map<int, std::vector<MultiIndex>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(d);
  if (it != cache.end()) return it->second;
  std::vector<MultiIndex> out;
  for (int a = 0; a <= d; ++a)
    for (int b = 0; a + b <= d; ++b)
      for (int c = 0; a + b + c <= d; ++c) out.push_back({{a, b, c, d - a - b - c}});
  std::sort(out.begin(), out.end());
  return cache.emplace(d, std::move(out)).first->second;
}

// Dense index of a multi-index inside multi_indices_of_order(|a|).
inline std::size_t multi_index_rank(const MultiIndex& a) {
  const auto& list = multi_indices_of_order(a.order());
  auto it = std::lower_bound(list.begin(), list.end(), a);
  return static_cast<std::size_t>(it - list.begin());
}

// Normal-ordered monomial of derivative factors; empty factor list is the identity.
class CompositeOp {
 public:
  CompositeOp() = default;
  explicit CompositeOp(std::vector<MultiIndex> factors) : factors_(std::move(factors)) {
    for (const auto& f : factors_)
      if (!f.nonnegative()) throw std::invalid_argument("multi-index entries must be nonnegative");
    std::sort(factors_.begin(), factors_.end());
  }

  static CompositeOp identity() { return {}; }
  static CompositeOp phi_power(int k) { return CompositeOp(std::vector<MultiIndex>(k, MultiIndex{})); }

  const std::vector<MultiIndex>& factors() const { return factors_; }
  std::size_t size() const { return factors_.size(); }
  bool is_identity() const { return factors_.empty(); }

  int dimension() const {
    int d = 0;
    for (const auto& f : factors_) d += 1 + f.order();
    return d;
  }

  // Product of factorials of the multiplicities of identical factors.
  double symmetry_factor() const {
    double s = 1.0;
    std::size_t i = 0;
    while (i < factors_.size()) {
      std::size_t j = i;
      while (j < factors_.size() && factors_[j] == factors_[i]) ++j;
      s *= factorial(static_cast<int>(j - i));
      i = j;
    }
    return s;
  }

  auto operator<=>(const CompositeOp&) const = default;
  bool operator==(const CompositeOp&) const = default;

 private:
  std::vector<MultiIndex> factors_;
};

inline int dimension(const CompositeOp& op) { return op.dimension(); }

inline std::string to_string(const MultiIndex& a) {
  return "d[" + std::to_string(a[0]) + "," + std::to_string(a[1]) + "," + std::to_string(a[2]) +
         "," + std::to_string(a[3]) + "]phi";
}

// Renders in the operator grammar; plain phi factors are grouped as phi^k.
inline std::string to_string(const CompositeOp& op) {
  if (op.is_identity()) return "1";
  std::string out;
  const auto& f = op.factors();
  std::size_t i = 0;
  while (i < f.size()) {
    std::size_t j = i;
    while (j < f.size() && f[j] == f[i]) ++j;
    if (!out.empty()) out += "*";
    const std::size_t mult = j - i;
    if (f[i].order() == 0) {
      out += mult == 1 ? std::string("phi") : "phi^" + std::to_string(mult);
    } else {
      for (std::size_t k = 0; k < mult; ++k) {
        if (k) out += "*";
        out += to_string(f[i]);
      }
    }
    i = j;
  }
  return out;
}

namespace detail {

inline void extend_ops(const std::vector<MultiIndex>& pool, std::size_t start, int remaining,
                       int factors_left, std::vector<MultiIndex>& cur,
                       std::vector<CompositeOp>& out) {
  if (factors_left == 0) {
    if (remaining == 0) out.push_back(CompositeOp(cur));
    return;
  }
  for (std::size_t i = start; i < pool.size(); ++i) {
    const int cost = 1 + pool[i].order();
    // Every remaining factor costs at least one unit.
    if (cost + (factors_left - 1) > remaining) continue;
    cur.push_back(pool[i]);
    extend_ops(pool, i, remaining - cost, factors_left - 1, cur, out);
    cur.pop_back();
  }
}

}  // namespace detail

// Every canonical operator of dimension d, ordered by factor count and then
// lexicographically by factor list.
inline const std::vector<CompositeOp>& enumerate_ops(int d) {
  if (d < 0) throw std::invalid_argument("enumerate_ops: negative dimension");
  static std::mutex mu;
  static std::map<int, std::vector<CompositeOp>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(d);
  if (it != cache.end()) return it->second;

  std::vector<CompositeOp> out;
  if (d == 0) {
    out.push_back(CompositeOp::identity());
  } else {
    std::vector<MultiIndex> pool;
    for (int k = 0; k < d; ++k) {
      const auto& level = multi_indices_of_order(k);
      pool.insert(pool.end(), level.begin(), level.end());
    }
    std::sort(pool.begin(), pool.end());
    std::vector<MultiIndex> cur;
    for (int n = 1; n <= d; ++n) {
      std::vector<CompositeOp> level;
      detail::extend_ops(pool, 0, d, n, cur, level);
      std::sort(level.begin(), level.end());
      out.insert(out.end(), level.begin(), level.end());
    }
  }
  return cache.emplace(d, std::move(out)).first->second;
}

// Concatenation of enumerate_ops(0..d_max).
inline std::vector<CompositeOp> enumerate_ops_up_to(int d_max) {
  std::vector<CompositeOp> out;
  for (int d = 0; d <= d_max; ++d) {
    const auto& level = enumerate_ops(d);
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

}  // namespace opekit
