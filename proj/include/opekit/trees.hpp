#pragma once

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "opekit/geometry.hpp"
#include "opekit/multiindex.hpp"

namespace opekit {

class TreeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct VertexSpec {
  int id = 0;
  std::optional<int> parent;  // empty for the root
  Point4 point{};
  CompositeOp op;
};

// Internal non-root vertices on the path from a leaf up to the root, ordered upward.
struct Branch {
  int leaf = -1;
  std::vector<int> path;
};

enum class GraftMode { at_vertex, above_child, below_vertex };

// Rooted tree with (point, operator) weights. Vertex ids are 0..n-1.
class WeightedTree {
 public:
  static WeightedTree build(std::vector<VertexSpec> spec) {
    WeightedTree t;
    const int n = static_cast<int>(spec.size());
    if (n < 2) throw TreeError("tree needs a root and at least one leaf");
    std::sort(spec.begin(), spec.end(), [](const VertexSpec& a, const VertexSpec& b) { return a.id < b.id; });
    for (int i = 0; i < n; ++i)
      if (spec[static_cast<std::size_t>(i)].id != i)
        throw TreeError("vertex ids must be exactly 0..n-1");
    t.parent_.assign(static_cast<std::size_t>(n), -1);
    t.children_.assign(static_cast<std::size_t>(n), {});
    t.point_.resize(static_cast<std::size_t>(n));
    t.op_.resize(static_cast<std::size_t>(n));
    int roots = 0;
    for (const auto& v : spec) {
      const auto i = static_cast<std::size_t>(v.id);
      t.point_[i] = v.point;
      t.op_[i] = v.op;
      if (!v.parent) {
        ++roots;
        t.root_ = v.id;
        continue;
      }
      const int p = *v.parent;
      if (p < 0 || p >= n || p == v.id) throw TreeError("vertex " + std::to_string(v.id) + " has invalid parent");
      t.parent_[i] = p;
      t.children_[static_cast<std::size_t>(p)].push_back(v.id);
    }
    if (roots != 1) throw TreeError("tree must have exactly one root");
    t.validate();
    return t;
  }

  int size() const { return static_cast<int>(parent_.size()); }
  int root() const { return root_; }
  int parent(int v) const { return parent_.at(static_cast<std::size_t>(v)); }
  const std::vector<int>& children(int v) const { return children_.at(static_cast<std::size_t>(v)); }
  const Point4& point(int v) const { return point_.at(static_cast<std::size_t>(v)); }
  const CompositeOp& op(int v) const { return op_.at(static_cast<std::size_t>(v)); }
  bool is_leaf(int v) const { return v != root_ && children(v).empty(); }
  bool is_internal(int v) const { return !is_leaf(v); }

  std::vector<int> leaves() const {
    std::vector<int> out;
    for (int v = 0; v < size(); ++v)
      if (is_leaf(v)) out.push_back(v);
    return out;
  }
  // I: internal vertices including the root.
  std::vector<int> internal() const {
    std::vector<int> out;
    for (int v = 0; v < size(); ++v)
      if (is_internal(v)) out.push_back(v);
    return out;
  }
  // I_root: internal vertices other than the root.
  std::vector<int> internal_nonroot() const {
    std::vector<int> out;
    for (int v = 0; v < size(); ++v)
      if (is_internal(v) && v != root_) out.push_back(v);
    return out;
  }
  std::vector<int> siblings(int v) const {
    std::vector<int> out;
    if (v == root_) return out;
    for (int w : children(parent(v)))
      if (w != v) out.push_back(w);
    return out;
  }
  // Strict descendants.
  std::vector<int> descendants(int v) const {
    std::vector<int> out, stack(children(v).begin(), children(v).end());
    while (!stack.empty()) {
      int w = stack.back();
      stack.pop_back();
      out.push_back(w);
      for (int c : children(w)) stack.push_back(c);
    }
    std::sort(out.begin(), out.end());
    return out;
  }
  // Strict ancestors, nearest first, ending at the root.
  std::vector<int> ancestors(int v) const {
    std::vector<int> out;
    for (int p = parent(v); p >= 0; p = parent(p)) out.push_back(p);
    return out;
  }
  bool is_descendant(int w, int v) const {
    for (int p = parent(w); p >= 0; p = parent(p))
      if (p == v) return true;
    return false;
  }
  int degree(int v) const { return static_cast<int>(children(v).size()) + (v == root_ ? 0 : 1); }

  // max_{e in ch(v)} |x_e - x_v| / min_{e in sb(v)} |x_e - x_v|, defined on I_root.
  double xi(int v) const {
    if (v == root_ || is_leaf(v)) throw TreeError("xi is defined only for internal non-root vertices");
    double mx = 0.0;
    for (int e : children(v)) mx = std::max(mx, dist(point(e), point(v)));
    double mn = std::numeric_limits<double>::infinity();
    for (int e : siblings(v)) mn = std::min(mn, dist(point(e), point(v)));
    if (siblings(v).empty()) throw TreeError("xi undefined: vertex has no siblings");
    return mx / mn;
  }

  // Sum of dimensions over leaves and root.
  int external_dimension() const {
    int d = op(root_).dimension();
    for (int v : leaves()) d += op(v).dimension();
    return d;
  }

  std::vector<Branch> branches() const {
    std::vector<Branch> out;
    for (int leaf : leaves()) {
      Branch b{leaf, {}};
      for (int p = parent(leaf); p >= 0 && p != root_; p = parent(p)) b.path.push_back(p);
      out.push_back(std::move(b));
    }
    return out;
  }
  // Branches whose internal vertices all sit at the leaf's point.
  std::vector<Branch> constant_branches() const {
    std::vector<Branch> out;
    for (auto& b : branches()) {
      bool ok = true;
      for (int v : b.path) ok = ok && point(v) == point(b.leaf);
      if (ok) out.push_back(std::move(b));
    }
    return out;
  }
  Branch default_branch() const {
    auto cb = constant_branches();
    return cb.front();
  }

  std::vector<VertexSpec> spec() const {
    std::vector<VertexSpec> out;
    for (int v = 0; v < size(); ++v) {
      VertexSpec s{v, std::nullopt, point(v), op(v)};
      if (v != root_) s.parent = parent(v);
      out.push_back(s);
    }
    return out;
  }

  WeightedTree with_op(int v, CompositeOp a) const {
    WeightedTree t = *this;
    t.op_.at(static_cast<std::size_t>(v)) = std::move(a);
    return t;
  }

 private:
  void validate() const {
    const int n = size();
    // Every vertex must reach the root without revisiting.
    for (int v = 0; v < n; ++v) {
      int steps = 0;
      for (int p = v; p != root_; p = parent(p)) {
        if (p < 0 || ++steps > n) throw TreeError("tree has a cycle or is disconnected");
      }
    }
    if (children(root_).empty()) throw TreeError("root has no children");
    std::vector<int> lv;
    for (int v = 0; v < n; ++v) {
      if (is_leaf(v)) {
        lv.push_back(v);
        continue;
      }
      if (v != root_ && children(v).size() < 2)
        throw TreeError("internal vertex " + std::to_string(v) + " has degree 2");
      bool found = false;
      for (int c : children(v)) found = found || point(c) == point(v);
      if (!found) throw TreeError("vertex " + std::to_string(v) + " point is not one of its children's points");
    }
    for (std::size_t i = 0; i < lv.size(); ++i)
      for (std::size_t j = i + 1; j < lv.size(); ++j)
        if (point(lv[i]) == point(lv[j])) throw TreeError("coincident leaf points");
  }

  std::vector<int> parent_;
  std::vector<std::vector<int>> children_;
  std::vector<Point4> point_;
  std::vector<CompositeOp> op_;
  int root_ = 0;
};

inline WeightedTree build_tree(std::vector<VertexSpec> spec) { return WeightedTree::build(std::move(spec)); }

// Single-vertex product: root at points[ref] with every point attached as a leaf.
// Leaves get ids 0..N-1 in input order; the root is id N.
inline WeightedTree star_tree(const std::vector<CompositeOp>& ops, const std::vector<Point4>& points,
                              const CompositeOp& target, std::size_t ref) {
  if (ops.size() != points.size()) throw TreeError("operator and point counts differ");
  if (ref >= points.size()) throw TreeError("reference index out of range");
  std::vector<VertexSpec> spec;
  const int root = static_cast<int>(ops.size());
  for (std::size_t i = 0; i < ops.size(); ++i) spec.push_back({static_cast<int>(i), root, points[i], ops[i]});
  spec.push_back({root, std::nullopt, points[ref], target});
  return WeightedTree::build(std::move(spec));
}

// Adds a leaf (interaction operator, y). New leaf id is n; an added internal vertex is n+1.
inline WeightedTree graft(const WeightedTree& t, GraftMode mode, int v, const Point4& y,
                          const CompositeOp& leaf_op, std::optional<CompositeOp> new_op = std::nullopt) {
  if (v < 0 || v >= t.size() || t.is_leaf(v)) throw TreeError("graft target must be an internal vertex");
  auto spec = t.spec();
  const int leaf = t.size();
  if (mode == GraftMode::at_vertex) {
    spec.push_back({leaf, v, y, leaf_op});
    return WeightedTree::build(std::move(spec));
  }
  if (!new_op) throw TreeError("graft mode requires an operator for the new vertex");
  const int u = leaf + 1;
  if (mode == GraftMode::above_child) {
    // u sits on the edge between v and its parent, carrying (A_u, x_v).
    if (v == t.root()) throw TreeError("above_child requires a non-root vertex");
    const int p = t.parent(v);
    spec[static_cast<std::size_t>(v)].parent = u;
    spec.push_back({u, p, t.point(v), *new_op});
    spec.push_back({leaf, u, y, leaf_op});
    return WeightedTree::build(std::move(spec));
  }
  // below_vertex: u splits v's parent edge (or becomes the new root), carrying (A_v, x_v);
  // v is reweighted to (A_u, x_v).
  VertexSpec& vs = spec[static_cast<std::size_t>(v)];
  VertexSpec us{u, vs.parent, t.point(v), vs.op};
  vs.parent = u;
  vs.op = *new_op;
  spec.push_back(us);
  spec.push_back({leaf, u, y, leaf_op});
  return WeightedTree::build(std::move(spec));
}

}  // namespace opekit
