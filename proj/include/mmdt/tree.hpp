#pragma once

// Mixture model decision trees: axis selection, threshold objectives and the tree builder.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mmdt/error.hpp"
#include "mmdt/io.hpp"
#include "mmdt/mixture.hpp"

namespace mmdt {

enum class Objective { exact_discrete, chebyshev, gaussian };

inline const char* objective_name(Objective o) {
  switch (o) {
    case Objective::exact_discrete: return "exact-discrete";
    case Objective::chebyshev: return "chebyshev";
    case Objective::gaussian: return "gaussian";
  }
  return "?";
}

inline Objective parse_objective(const std::string& s) {
  if (s == "exact-discrete") return Objective::exact_discrete;
  if (s == "chebyshev") return Objective::chebyshev;
  if (s == "gaussian") return Objective::gaussian;
  fail(ErrorKind::validation, "unknown objective \"" + s + "\"");
}

struct BuildOptions {
  Objective objective = Objective::chebyshev;
  std::uint64_t seed = 0;
  int intervals_per_gap = 16;
};

/// Internal node: `x[axis] <= theta` goes left. Leaf: `component >= 0`.
struct AxisNode {
  int axis = -1;
  double theta = 0.0;
  int left = -1;
  int right = -1;
  int component = -1;

  bool is_leaf() const { return component >= 0; }
};

/// Nodes are stored in pre-order; node 0 is the root.
struct AxisTree {
  std::vector<AxisNode> nodes;
  std::size_t dim = 0;
  std::size_t num_components = 0;
  std::string model_fingerprint;
  BuildOptions options;

  int add_leaf(int component) {
    nodes.push_back({.component = component});
    return static_cast<int>(nodes.size()) - 1;
  }
  int add_cut(int axis, double theta) {
    nodes.push_back({.axis = axis, .theta = theta});
    return static_cast<int>(nodes.size()) - 1;
  }

  /// Index of the leaf node reached by x.
  int leaf_of(std::span<const double> x) const {
    int t = 0;
    while (!nodes[static_cast<std::size_t>(t)].is_leaf()) {
      const auto& n = nodes[static_cast<std::size_t>(t)];
      t = x[static_cast<std::size_t>(n.axis)] <= n.theta ? n.left : n.right;
    }
    return t;
  }

  std::size_t num_leaves() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const AxisNode& n) { return n.is_leaf(); }));
  }
};

/// Component index of the leaf x falls into.
inline int predict(const AxisTree& tree, std::span<const double> x) {
  require(x.size() == tree.dim, "dimension mismatch: tree expects " + std::to_string(tree.dim) + ", got " +
                                    std::to_string(x.size()),
          ErrorKind::incompatible);
  return tree.nodes[static_cast<std::size_t>(tree.leaf_of(x))].component;
}

using ComponentSet = std::vector<std::size_t>;

struct AxisChoice {
  std::size_t axis = 0;
  double spread = 0.0;  // max - min of projected means on the chosen axis
};

/// Axis maximizing (spread of projected means) / sigma_axis; ties go to the lowest axis.
inline AxisChoice select_axis(const MixtureModel& model, const ComponentSet& node) {
  require(node.size() >= 2, "axis selection needs at least two components");
  AxisChoice best;
  double best_score = -1.0;
  for (std::size_t j = 0; j < model.dim(); ++j) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t k : node) {
      lo = std::min(lo, model.mean(k)[j]);
      hi = std::max(hi, model.mean(k)[j]);
    }
    const double score = (hi - lo) / model.sigma[j];
    if (score > best_score) {
      best_score = score;
      best = {j, hi - lo};
    }
  }
  return best;
}

namespace detail {

inline Vector node_weights(const MixtureModel& model, const ComponentSet& node) {
  double total = 0.0;
  for (std::size_t k : node) total += model.weights[k];
  Vector w;
  w.reserve(node.size());
  for (std::size_t k : node) w.push_back(model.weights[k] / total);
  return w;
}

inline bool on_mean(const MixtureModel& model, const ComponentSet& node, std::size_t axis, double theta) {
  return std::any_of(node.begin(), node.end(), [&](std::size_t k) { return model.mean(k)[axis] == theta; });
}

inline double upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

inline double chebyshev_unchecked(const MixtureModel& model, const ComponentSet& node, std::size_t axis, double theta) {
  const Vector w = node_weights(model, node);
  const double var = model.sigma[axis] * model.sigma[axis];
  double total = 0.0;
  for (std::size_t n = 0; n < node.size(); ++n) {
    const double gap = model.mean(node[n])[axis] - theta;
    total += w[n] * std::min(1.0, var / (gap * gap));
  }
  return total;
}

inline double gaussian_unchecked(const MixtureModel& model, const ComponentSet& node, std::size_t axis, double theta) {
  const Vector w = node_weights(model, node);
  double total = 0.0;
  for (std::size_t n = 0; n < node.size(); ++n) {
    const Component& c = model.components[node[n]];
    total += w[n] * upper_tail(std::abs(c.mean[axis] - theta) / c.stddev[axis]);
  }
  return total;
}

inline double exact_discrete_unchecked(const MixtureModel& model, const ComponentSet& node, std::size_t axis,
                                       double theta) {
  const Vector w = node_weights(model, node);
  double total = 0.0;
  for (std::size_t n = 0; n < node.size(); ++n) {
    const Component& c = model.components[node[n]];
    const bool mean_left = c.mean[axis] <= theta;
    double p = 0.0;
    for (std::size_t s = 0; s < c.support.size(); ++s)
      if ((c.support[s][axis] <= theta) != mean_left) p += c.mass[s];
    total += w[n] * p;
  }
  return total;
}

}  // namespace detail

/// Chebyshev bound on the node-conditional probability that theta separates x from its mean.
inline double chebyshev_objective(const MixtureModel& model, const ComponentSet& node, std::size_t axis, double theta) {
  require(!detail::on_mean(model, node, axis, theta), "threshold on a mean");
  return detail::chebyshev_unchecked(model, node, axis, theta);
}

/// Exact Gaussian tail probability of separation, summed over node components.
inline double gaussian_objective(const MixtureModel& model, const ComponentSet& node, std::size_t axis, double theta) {
  for (std::size_t k : node)
    require(model.components[k].is_gaussian(), "gaussian objective requires gaussian components",
            ErrorKind::incompatible);
  require(!detail::on_mean(model, node, axis, theta), "threshold on a mean");
  return detail::gaussian_unchecked(model, node, axis, theta);
}

/// Exact separation probability by enumerating support points.
inline double exact_discrete_objective(const MixtureModel& model, const ComponentSet& node, std::size_t axis,
                                       double theta) {
  for (std::size_t k : node)
    require(model.components[k].is_discrete(), "exact-discrete objective requires finite-discrete components",
            ErrorKind::incompatible);
  require(!detail::on_mean(model, node, axis, theta), "threshold on a mean");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t k : node) {
    lo = std::min(lo, model.mean(k)[axis]);
    hi = std::max(hi, model.mean(k)[axis]);
  }
  require(theta > lo && theta < hi, "threshold outside the projected means");
  return detail::exact_discrete_unchecked(model, node, axis, theta);
}

inline double evaluate_objective(const MixtureModel& model, const ComponentSet& node, std::size_t axis, double theta,
                                 Objective objective) {
  switch (objective) {
    case Objective::exact_discrete: return exact_discrete_objective(model, node, axis, theta);
    case Objective::chebyshev: return chebyshev_objective(model, node, axis, theta);
    case Objective::gaussian: return gaussian_objective(model, node, axis, theta);
  }
  return 0.0;
}

struct ThresholdChoice {
  double theta = 0.0;
  double value = 0.0;
};

namespace detail {

/// Strictly better, with a relative tolerance so that rounding noise resolves to the tie rule.
inline bool clearly_less(double a, double b) { return a < b - 1e-12 * std::max(std::abs(b), 1e-300); }

inline ThresholdChoice ternary_in_gap(const std::function<double(double)>& f, double a, double b, int intervals) {
  // Coarse bracketing on an evenly spaced interior grid.
  std::vector<double> grid(static_cast<std::size_t>(intervals) + 1);
  for (int t = 0; t <= intervals; ++t) grid[static_cast<std::size_t>(t)] = a + (b - a) * t / intervals;
  grid.front() = a;
  grid.back() = b;
  std::size_t best = 1;
  double best_v = f(grid[1]);
  for (std::size_t t = 2; t + 1 < grid.size(); ++t) {
    const double v = f(grid[t]);
    if (v < best_v) {
      best_v = v;
      best = t;
    }
  }
  double lo = grid[best - 1], hi = grid[best + 1];
  for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (!(m1 > lo && m2 < hi && m1 < m2)) break;
    if (f(m1) <= f(m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  double theta = 0.5 * (lo + hi);
  if (!(theta > a && theta < b)) theta = grid[best];
  double v = f(theta);
  if (best_v < v) {  // never worse than the bracketing grid point
    theta = grid[best];
    v = best_v;
  }
  return {theta, v};
}

}  // namespace detail

/// Minimizes the objective over theta strictly between the extreme projected means on `axis`.
/// Ties resolve to the lowest theta.
inline ThresholdChoice minimize_threshold(const MixtureModel& model, const ComponentSet& node, std::size_t axis,
                                          Objective objective, const BuildOptions& options) {
  require(options.intervals_per_gap >= 3, "intervals-per-gap must be at least 3");
  Vector means;
  for (std::size_t k : node) means.push_back(model.mean(k)[axis]);
  std::sort(means.begin(), means.end());
  means.erase(std::unique(means.begin(), means.end()), means.end());
  require(means.size() >= 2, "need two distinct projected means on the axis");

  ThresholdChoice best{0.0, std::numeric_limits<double>::infinity()};
  bool have = false;
  auto offer = [&](ThresholdChoice c) {
    if (!have || detail::clearly_less(c.value, best.value)) {
      best = c;
      have = true;
    }
  };

  if (objective == Objective::exact_discrete) {
    Vector cuts = means;
    for (std::size_t k : node) {
      const Component& c = model.components[k];
      require(c.is_discrete(), "exact-discrete objective requires finite-discrete components", ErrorKind::incompatible);
      for (const auto& s : c.support)
        if (s[axis] > means.front() && s[axis] < means.back()) cuts.push_back(s[axis]);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    for (std::size_t t = 0; t + 1 < cuts.size(); ++t) {
      const double theta = 0.5 * (cuts[t] + cuts[t + 1]);
      if (!(theta > cuts[t] && theta < cuts[t + 1])) continue;
      offer({theta, detail::exact_discrete_unchecked(model, node, axis, theta)});
    }
    require(have, "no admissible threshold between the projected means");
    return best;
  }

  if (objective == Objective::gaussian)
    for (std::size_t k : node)
      require(model.components[k].is_gaussian(), "gaussian objective requires gaussian components",
              ErrorKind::incompatible);

  const std::function<double(double)> f = [&](double theta) {
    if (detail::on_mean(model, node, axis, theta)) return std::numeric_limits<double>::infinity();
    return objective == Objective::chebyshev ? detail::chebyshev_unchecked(model, node, axis, theta)
                                             : detail::gaussian_unchecked(model, node, axis, theta);
  };
  for (std::size_t g = 0; g + 1 < means.size(); ++g)
    offer(detail::ternary_in_gap(f, means[g], means[g + 1], options.intervals_per_gap));
  return best;
}

namespace detail {

inline void check_objective_compatible(const MixtureModel& model, Objective objective) {
  if (objective == Objective::gaussian)
    require(model.all_gaussian(), "gaussian objective requires gaussian components");
  if (objective == Objective::exact_discrete)
    require(model.all_discrete(), "exact-discrete objective requires finite-discrete components");
}

inline int build_node(AxisTree& tree, const MixtureModel& model, const ComponentSet& node, const BuildOptions& opt) {
  if (node.size() == 1) return tree.add_leaf(static_cast<int>(node.front()));
  const AxisChoice axis = select_axis(model, node);
  const ThresholdChoice cut = minimize_threshold(model, node, axis.axis, opt.objective, opt);
  ComponentSet left, right;
  for (std::size_t k : node) (model.mean(k)[axis.axis] <= cut.theta ? left : right).push_back(k);
  require(!left.empty() && !right.empty(), "internal error: cut does not separate any means");
  const int id = tree.add_cut(static_cast<int>(axis.axis), cut.theta);
  const int l = build_node(tree, model, left, opt);
  const int r = build_node(tree, model, right, opt);
  tree.nodes[static_cast<std::size_t>(id)].left = l;
  tree.nodes[static_cast<std::size_t>(id)].right = r;
  return id;
}

}  // namespace detail

/// Builds the K-leaf mixture model decision tree. Deterministic in (model, options).
inline AxisTree build_mmdt(const MixtureModel& model, const BuildOptions& options = {}) {
  model.validate();
  require(options.intervals_per_gap >= 3, "intervals-per-gap must be at least 3");
  detail::check_objective_compatible(model, options.objective);
  AxisTree tree;
  tree.dim = model.dim();
  tree.num_components = model.size();
  tree.model_fingerprint = fingerprint(model);
  tree.options = options;
  ComponentSet all(model.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  detail::build_node(tree, model, all, options);
  return tree;
}

/// Structural invariants for a K-leaf tree over `means`. Returns an empty string when
/// all hold, otherwise a description of the first violation.
inline std::string check_tree(const AxisTree& tree, const std::vector<Vector>& means) {
  const std::size_t K = means.size();
  if (tree.nodes.empty()) return "empty tree";
  if (tree.num_leaves() != K) return "leaf count " + std::to_string(tree.num_leaves()) + " != K";
  std::vector<int> seen(K, 0);
  for (const auto& n : tree.nodes) {
    if (n.is_leaf()) {
      if (n.component >= static_cast<int>(K)) return "leaf component out of range";
      ++seen[static_cast<std::size_t>(n.component)];
    } else {
      if (n.left <= 0 || n.right <= 0) return "internal node without two children";
      if (n.axis < 0 || n.axis >= static_cast<int>(tree.dim)) return "axis out of range";
      if (!std::isfinite(n.theta)) return "non-finite threshold";
    }
  }
  for (std::size_t k = 0; k < K; ++k)
    if (seen[k] != 1) return "leaf map is not a bijection";
  for (std::size_t k = 0; k < K; ++k)
    if (tree.nodes[static_cast<std::size_t>(tree.leaf_of(means[k]))].component != static_cast<int>(k))
      return "mean " + std::to_string(k) + " is outside its leaf cell";

  // Every internal node splits its arriving means, and theta lies strictly inside their range.
  std::string err;
  std::function<void(int, const ComponentSet&)> walk = [&](int t, const ComponentSet& here) {
    if (!err.empty()) return;
    const auto& n = tree.nodes[static_cast<std::size_t>(t)];
    if (n.is_leaf()) return;
    ComponentSet l, r;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t k : here) {
      const double v = means[k][static_cast<std::size_t>(n.axis)];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      (v <= n.theta ? l : r).push_back(k);
    }
    if (l.empty() || r.empty()) {
      err = "node " + std::to_string(t) + " does not partition its components";
      return;
    }
    if (!(n.theta > lo && n.theta < hi)) {
      err = "node " + std::to_string(t) + " threshold outside the projected means";
      return;
    }
    walk(n.left, l);
    walk(n.right, r);
  };
  ComponentSet all(K);
  std::iota(all.begin(), all.end(), std::size_t{0});
  walk(0, all);
  return err;
}

inline std::vector<Vector> component_means(const MixtureModel& model) {
  std::vector<Vector> out;
  for (const auto& c : model.components) out.push_back(c.mean);
  return out;
}

}  // namespace mmdt
