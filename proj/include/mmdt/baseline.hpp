#pragma once

// IMM baseline: greedy mistake-minimizing axis cuts over a dataset with reference centers.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "mmdt/error.hpp"
#include "mmdt/evaluate.hpp"
#include "mmdt/mixture.hpp"
#include "mmdt/tree.hpp"

namespace mmdt {

struct CenteredDataset {
  Points points;
  std::vector<Vector> centers;
  std::vector<int> assignment;  // nearest center in l2, ties to the lower index

  std::size_t size() const { return points.rows; }
  std::size_t dim() const { return points.cols; }
  std::size_t num_centers() const { return centers.size(); }
};

inline int nearest_center(std::span<const double> x, const std::vector<Vector>& centers) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const double d = detail::l2sq(x, centers[k]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

inline CenteredDataset make_centered(Points points, std::vector<Vector> centers) {
  require(centers.size() >= 2, "need at least two centers");
  for (std::size_t k = 0; k < centers.size(); ++k) {
    require(centers[k].size() == points.cols, "center dimension differs from data", ErrorKind::incompatible);
    for (std::size_t l = 0; l < k; ++l)
      require(centers[k] != centers[l], "duplicate centers " + std::to_string(l) + " and " + std::to_string(k));
  }
  CenteredDataset out;
  out.assignment.resize(points.rows);
  for (std::size_t i = 0; i < points.rows; ++i) out.assignment[i] = nearest_center(points.row(i), centers);
  out.points = std::move(points);
  out.centers = std::move(centers);
  return out;
}

/// Per internal node (indexed by node id): points still with their center on arrival, and mistakes made.
struct ImmTrace {
  std::vector<std::size_t> eligible;
  std::vector<std::size_t> mistakes;
};

namespace detail {

struct ImmCut {
  std::size_t axis = 0;
  double theta = 0.0;
  std::size_t mistakes = std::numeric_limits<std::size_t>::max();
};

/// Best cut on one axis: midpoints between consecutive distinct values of point and center
/// coordinates; each eligible point charges the candidates between its coordinate and its center's.
inline ImmCut best_cut_on_axis(const CenteredDataset& data, const std::vector<std::size_t>& pts,
                               const ComponentSet& centers, std::size_t j, std::vector<double>& values) {
  values.clear();
  double cmin = std::numeric_limits<double>::infinity(), cmax = -cmin;
  for (std::size_t k : centers) {
    values.push_back(data.centers[k][j]);
    cmin = std::min(cmin, data.centers[k][j]);
    cmax = std::max(cmax, data.centers[k][j]);
  }
  ImmCut best;
  best.axis = j;
  if (!(cmin < cmax)) return best;
  for (std::size_t i : pts) values.push_back(data.points(i, j));
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());

  std::vector<long> diff(values.size() + 1, 0);
  const auto index = [&](double v) {
    return static_cast<std::size_t>(std::lower_bound(values.begin(), values.end(), v) - values.begin());
  };
  for (std::size_t i : pts) {
    const double x = data.points(i, j);
    const double c = data.centers[static_cast<std::size_t>(data.assignment[i])][j];
    if (x == c) continue;
    ++diff[index(std::min(x, c))];
    --diff[index(std::max(x, c))];
  }
  long running = 0;
  for (std::size_t t = 0; t + 1 < values.size(); ++t) {
    running += diff[t];
    if (values[t] < cmin || values[t + 1] > cmax) continue;
    const auto m = static_cast<std::size_t>(running);
    if (m < best.mistakes) {
      best.mistakes = m;
      best.theta = 0.5 * (values[t] + values[t + 1]);
    }
  }
  return best;
}

inline int build_imm_node(AxisTree& tree, const CenteredDataset& data, const std::vector<std::size_t>& pts,
                          const ComponentSet& centers, ImmTrace* trace, std::size_t parent_eligible) {
  if (centers.size() == 1) return tree.add_leaf(static_cast<int>(centers.front()));

  ImmCut best;
  std::vector<double> scratch;
  for (std::size_t j = 0; j < data.dim(); ++j) {
    const ImmCut c = best_cut_on_axis(data, pts, centers, j, scratch);
    if (c.mistakes < best.mistakes) best = c;
  }
  require(best.mistakes != std::numeric_limits<std::size_t>::max(), "no axis separates the remaining centers");
  require(pts.size() <= parent_eligible, "internal error: eligible count increased along a path");

  const int id = tree.add_cut(static_cast<int>(best.axis), best.theta);
  if (trace) {
    trace->eligible.resize(tree.nodes.size(), 0);
    trace->mistakes.resize(tree.nodes.size(), 0);
    trace->eligible[static_cast<std::size_t>(id)] = pts.size();
    trace->mistakes[static_cast<std::size_t>(id)] = best.mistakes;
  }
  ComponentSet lc, rc;
  for (std::size_t k : centers) (data.centers[k][best.axis] <= best.theta ? lc : rc).push_back(k);
  std::vector<std::size_t> lp, rp;
  for (std::size_t i : pts) {
    const bool xl = data.points(i, best.axis) <= best.theta;
    const bool cl = data.centers[static_cast<std::size_t>(data.assignment[i])][best.axis] <= best.theta;
    if (xl == cl) (xl ? lp : rp).push_back(i);
  }
  const int l = build_imm_node(tree, data, lp, lc, trace, pts.size());
  const int r = build_imm_node(tree, data, rp, rc, trace, pts.size());
  tree.nodes[static_cast<std::size_t>(id)].left = l;
  tree.nodes[static_cast<std::size_t>(id)].right = r;
  return id;
}

}  // namespace detail

/// Greedy IMM. Ties go to the lowest axis, then the lowest threshold.
inline AxisTree build_imm(const CenteredDataset& data, ImmTrace* trace = nullptr) {
  require(data.num_centers() >= 2, "need at least two centers");
  require(data.assignment.size() == data.size(), "assignment size differs from data");
  for (std::size_t k = 0; k < data.num_centers(); ++k)
    for (std::size_t l = 0; l < k; ++l)
      require(data.centers[k] != data.centers[l], "duplicate centers " + std::to_string(l) + " and " + std::to_string(k));
  AxisTree tree;
  tree.dim = data.dim();
  tree.num_components = data.num_centers();
  std::vector<std::size_t> pts(data.size());
  std::iota(pts.begin(), pts.end(), std::size_t{0});
  ComponentSet centers(data.num_centers());
  std::iota(centers.begin(), centers.end(), std::size_t{0});
  if (trace) *trace = {};
  detail::build_imm_node(tree, data, pts, centers, trace, pts.size());
  return tree;
}

enum class Norm { l1, l2sq };

struct EmpiricalPrice {
  double price = 0.0;
  double baseline_cost = 0.0;
  double tree_cost = 0.0;
  std::size_t empty_leaves = 0;  // leaves that fell back to their assigned center
};

namespace detail {

/// Coordinate-wise lower median (l1) or mean (l2sq) of the given rows.
inline Vector group_center(const Points& x, const std::vector<std::size_t>& rows, Norm norm) {
  Vector c(x.cols, 0.0);
  std::vector<double> col(rows.size());
  for (std::size_t j = 0; j < x.cols; ++j) {
    for (std::size_t t = 0; t < rows.size(); ++t) col[t] = x(rows[t], j);
    if (norm == Norm::l2sq) {
      c[j] = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
    } else {
      auto mid = col.begin() + static_cast<std::ptrdiff_t>((col.size() - 1) / 2);
      std::nth_element(col.begin(), mid, col.end());
      c[j] = *mid;
    }
  }
  return c;
}

inline double group_cost(const Points& x, const std::vector<std::vector<std::size_t>>& groups,
                         const std::vector<Vector>& centers, Norm norm) {
  double s = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (std::size_t i : groups[g]) s += norm == Norm::l1 ? l1(x.row(i), centers[g]) : l2sq(x.row(i), centers[g]);
  return s;
}

}  // namespace detail

/// Tree cost with per-leaf medians (l1) or means (l2sq) over the cost of the assignment
/// groups with the same statistic.
inline EmpiricalPrice empirical_price_report(const CenteredDataset& data, const AxisTree& tree, Norm norm) {
  require(tree.dim == data.dim(), "tree/data dimension mismatch", ErrorKind::incompatible);
  require(tree.num_components == data.num_centers(), "tree/center count mismatch", ErrorKind::incompatible);
  const std::size_t K = data.num_centers();
  std::vector<std::vector<std::size_t>> by_assign(K), by_leaf(K);
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_assign[static_cast<std::size_t>(data.assignment[i])].push_back(i);
    by_leaf[static_cast<std::size_t>(predict(tree, data.points.row(i)))].push_back(i);
  }
  EmpiricalPrice r;
  std::vector<Vector> base(K), leaf(K);
  for (std::size_t k = 0; k < K; ++k) {
    base[k] = by_assign[k].empty() ? data.centers[k] : detail::group_center(data.points, by_assign[k], norm);
    if (by_leaf[k].empty()) {
      leaf[k] = data.centers[k];
      ++r.empty_leaves;
    } else {
      leaf[k] = detail::group_center(data.points, by_leaf[k], norm);
    }
  }
  r.baseline_cost = detail::group_cost(data.points, by_assign, base, norm);
  r.tree_cost = detail::group_cost(data.points, by_leaf, leaf, norm);
  r.price = detail::safe_ratio(r.tree_cost, r.baseline_cost);
  return r;
}

inline double empirical_price(const CenteredDataset& data, const AxisTree& tree, Norm norm) {
  return empirical_price_report(data, tree, norm).price;
}

}  // namespace mmdt
