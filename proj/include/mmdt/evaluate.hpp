#pragma once

// Price of explainability, error rate and the theorem bound calculators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <thread>
#include <vector>

#include "mmdt/error.hpp"
#include "mmdt/mixture.hpp"
#include "mmdt/tree.hpp"

namespace mmdt {

/// 4 + 2 pi^2 / 3, the series constant shared by the upper bounds.
inline const double kSeparationConstant = 4.0 + 2.0 * M_PI * M_PI / 3.0;

struct EvalReport {
  double price_l1 = 0.0;      // tree cost with leaf medians / baseline
  double price_l1_hat = 0.0;  // tree cost with assigned component means / baseline
  double price_l2sq = 0.0;    // squared-l2 cost with leaf means / E||x - mu(x)||^2
  double error_rate = 0.0;    // P(assigned component != generating component)
  double baseline_cost = 0.0;
  double tree_cost = 0.0;
  double tree_cost_hat = 0.0;
  bool exact = false;
  std::size_t mc_samples = 0;
  std::uint64_t mc_seed = 0;
  double confidence_radius = 0.0;        // 3 sd / sqrt(n) of the per-point price terms
  double error_confidence_radius = 0.0;  // 3 sqrt(e(1-e)/n)
  std::vector<int> empty_leaves;         // components whose leaf received no mass/samples
  std::vector<Vector> leaf_medians;      // indexed by component
  std::optional<double> thm1;
  std::optional<double> thm3;
};

// ---- bounds ----------------------------------------------------------------

inline double thm1_bound(double alpha, double beta, std::size_t K, double q) {
  require(q > 0.0, "q must be positive");
  require(alpha >= 1.0 && beta >= 1.0 && K >= 2, "need alpha >= 1, beta >= 1, K >= 2");
  const double k = static_cast<double>(K);
  return 1.0 + kSeparationConstant * alpha * beta * k * (k - 1.0) / std::sqrt(q);
}

inline double thm3_bound(double alpha, std::size_t K, double q) {
  require(q > 0.0, "q must be positive");
  require(alpha >= 1.0 && K >= 2, "need alpha >= 1, K >= 2");
  const double k = static_cast<double>(K);
  return std::min(1.0, kSeparationConstant * alpha * k * (k - 1.0) / q);
}

inline double thm4_floor(std::size_t K, double q) {
  require(q >= static_cast<double>(K), "construction requires q >= K");
  return (static_cast<double>(K) - 1.0) / (4.0 * q);
}

/// Ratio-free squared-cost envelope 1 + c * alpha * K (K - 1).
inline double l2sq_envelope(double alpha, std::size_t K) {
  const double k = static_cast<double>(K);
  return 1.0 + kSeparationConstant * alpha * k * (k - 1.0);
}

/// Smallest beta with beta * E|x_i - mu_i(x)| >= sqrt(E|x_i - mu_i(x)|^2) on every axis,
/// computed from exact per-component moments.
inline double beta_estimate(const MixtureModel& model) {
  double beta = 1.0;
  for (std::size_t j = 0; j < model.dim(); ++j) {
    double abs_dev = 0.0, sq_dev = 0.0;
    for (std::size_t k = 0; k < model.size(); ++k) {
      abs_dev += model.weights[k] * model.components[k].mean_abs_deviation(j);
      sq_dev += model.weights[k] * model.components[k].raw_variance(j);
    }
    if (abs_dev > 0.0) beta = std::max(beta, std::sqrt(sq_dev) / abs_dev);
  }
  return beta;
}

// ---- helpers ---------------------------------------------------------------

namespace detail {

/// Lower weighted median: smallest value whose cumulative weight reaches half the total.
inline double weighted_median(std::vector<std::pair<double, double>> value_weight) {
  std::sort(value_weight.begin(), value_weight.end());
  double total = 0.0;
  for (const auto& vw : value_weight) total += vw.second;
  double cum = 0.0;
  for (const auto& vw : value_weight) {
    cum += vw.second;
    if (cum >= 0.5 * total) return vw.first;
  }
  return value_weight.back().first;
}

inline double l1(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += std::abs(a[j] - b[j]);
  return s;
}

inline double l2sq(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

inline double safe_ratio(double num, double den) {
  if (den > 0.0) return num / den;
  return num == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
}

/// Runs f(i) for i in [0, count) on up to `threads` workers; f must only touch slot i.
template <typename F>
void parallel_for(std::size_t count, unsigned threads, F&& f) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < count; i += threads) f(i);
    });
  for (auto& th : pool) th.join();
}

inline void check_tree_fits(const MixtureModel& model, const AxisTree& tree) {
  require(tree.dim == model.dim(), "tree/mixture dimension mismatch", ErrorKind::incompatible);
  require(tree.num_components == model.size(), "tree/mixture component count mismatch", ErrorKind::incompatible);
}

inline double analytic_l1_baseline(const MixtureModel& model) {
  double b = 0.0;
  for (std::size_t k = 0; k < model.size(); ++k)
    for (std::size_t j = 0; j < model.dim(); ++j) b += model.weights[k] * model.components[k].mean_abs_deviation(j);
  return b;
}

inline double analytic_l2sq_baseline(const MixtureModel& model) {
  double b = 0.0;
  for (std::size_t k = 0; k < model.size(); ++k)
    for (std::size_t j = 0; j < model.dim(); ++j) b += model.weights[k] * model.components[k].raw_variance(j);
  return b;
}

}  // namespace detail

// ---- exact (finite-discrete) ------------------------------------------------

/// Exact evaluation by enumerating every (component, support point) pair.
inline EvalReport exact_eval_discrete(const MixtureModel& model, const AxisTree& tree) {
  require(model.all_discrete(), "exact evaluation requires finite-discrete components", ErrorKind::incompatible);
  detail::check_tree_fits(model, tree);
  const std::size_t K = model.size(), d = model.dim();

  struct Item {
    const Vector* x;
    double w;
    std::size_t truth;
    std::size_t assigned;
  };
  std::vector<Item> items;
  for (std::size_t k = 0; k < K; ++k) {
    const Component& c = model.components[k];
    for (std::size_t s = 0; s < c.support.size(); ++s)
      items.push_back({&c.support[s], model.weights[k] * c.mass[s], k,
                       static_cast<std::size_t>(predict(tree, c.support[s]))});
  }

  EvalReport r;
  r.exact = true;
  r.leaf_medians.assign(K, Vector(d, 0.0));
  std::vector<Vector> leaf_means(K, Vector(d, 0.0));
  std::vector<double> leaf_mass(K, 0.0);
  for (const auto& it : items) {
    leaf_mass[it.assigned] += it.w;
    for (std::size_t j = 0; j < d; ++j) leaf_means[it.assigned][j] += it.w * (*it.x)[j];
  }
  for (std::size_t l = 0; l < K; ++l) {
    if (leaf_mass[l] <= 0.0) {
      r.empty_leaves.push_back(static_cast<int>(l));
      r.leaf_medians[l] = model.mean(l);
      leaf_means[l] = model.mean(l);
      continue;
    }
    for (std::size_t j = 0; j < d; ++j) {
      leaf_means[l][j] /= leaf_mass[l];
      std::vector<std::pair<double, double>> vw;
      for (const auto& it : items)
        if (it.assigned == l) vw.emplace_back((*it.x)[j], it.w);
      r.leaf_medians[l][j] = detail::weighted_median(std::move(vw));
    }
  }

  double base_l1 = 0.0, base_l2 = 0.0, cost = 0.0, cost_hat = 0.0, cost_l2 = 0.0, err = 0.0;
  for (const auto& it : items) {
    base_l1 += it.w * detail::l1(*it.x, model.mean(it.truth));
    base_l2 += it.w * detail::l2sq(*it.x, model.mean(it.truth));
    cost += it.w * detail::l1(*it.x, r.leaf_medians[it.assigned]);
    cost_hat += it.w * detail::l1(*it.x, model.mean(it.assigned));
    cost_l2 += it.w * detail::l2sq(*it.x, leaf_means[it.assigned]);
    if (it.assigned != it.truth) err += it.w;
  }
  r.baseline_cost = base_l1;
  r.tree_cost = cost;
  r.tree_cost_hat = cost_hat;
  r.price_l1 = detail::safe_ratio(cost, base_l1);
  r.price_l1_hat = detail::safe_ratio(cost_hat, base_l1);
  r.price_l2sq = detail::safe_ratio(cost_l2, base_l2);
  r.error_rate = std::clamp(err, 0.0, 1.0);
  return r;
}

// ---- Monte Carlo --------------------------------------------------------------

inline constexpr std::size_t kShardSize = 4096;

/// Monte-Carlo evaluation. Shard s draws from seed ^ s; partial sums are reduced in shard
/// order, so the report does not depend on `threads`.
inline EvalReport mc_eval(const MixtureModel& model, const AxisTree& tree, std::size_t n, std::uint64_t seed,
                          unsigned threads = 1) {
  require(n >= 100, "Monte-Carlo evaluation needs n >= 100");
  detail::check_tree_fits(model, tree);
  const std::size_t K = model.size(), d = model.dim();
  const std::size_t shards = (n + kShardSize - 1) / kShardSize;

  Points x(n, d);
  std::vector<int> truth(n), assigned(n);
  detail::parallel_for(shards, threads, [&](std::size_t s) {
    Rng rng = make_rng(seed ^ static_cast<std::uint64_t>(s));
    std::discrete_distribution<int> pick(model.weights.begin(), model.weights.end());
    const std::size_t begin = s * kShardSize, end = std::min(n, begin + kShardSize);
    for (std::size_t i = begin; i < end; ++i) {
      truth[i] = pick(rng);
      model.components[static_cast<std::size_t>(truth[i])].draw(rng, x.row(i));
      assigned[i] = tree.nodes[static_cast<std::size_t>(tree.leaf_of(x.row(i)))].component;
    }
  });

  EvalReport r;
  r.mc_samples = n;
  r.mc_seed = seed;
  r.leaf_medians.assign(K, Vector(d, 0.0));
  std::vector<Vector> leaf_means(K, Vector(d, 0.0));
  {
    std::vector<std::vector<std::size_t>> members(K);
    for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(assigned[i])].push_back(i);
    detail::parallel_for(K, threads, [&](std::size_t l) {
      if (members[l].empty()) {
        r.leaf_medians[l] = model.mean(l);
        leaf_means[l] = model.mean(l);
        return;
      }
      Vector col(members[l].size());
      for (std::size_t j = 0; j < d; ++j) {
        double sum = 0.0;
        for (std::size_t m = 0; m < col.size(); ++m) {
          col[m] = x(members[l][m], j);
          sum += col[m];
        }
        leaf_means[l][j] = sum / static_cast<double>(col.size());
        const auto mid = col.begin() + static_cast<std::ptrdiff_t>((col.size() - 1) / 2);
        std::nth_element(col.begin(), mid, col.end());
        r.leaf_medians[l][j] = *mid;
      }
    });
    for (std::size_t l = 0; l < K; ++l)
      if (members[l].empty()) r.empty_leaves.push_back(static_cast<int>(l));
  }

  struct Partial {
    double cost = 0.0, cost_sq = 0.0, cost_hat = 0.0, cost_l2 = 0.0, errors = 0.0;
  };
  std::vector<Partial> partial(shards);
  detail::parallel_for(shards, threads, [&](std::size_t s) {
    Partial p;
    const std::size_t begin = s * kShardSize, end = std::min(n, begin + kShardSize);
    for (std::size_t i = begin; i < end; ++i) {
      const auto l = static_cast<std::size_t>(assigned[i]);
      const double c = detail::l1(x.row(i), r.leaf_medians[l]);
      p.cost += c;
      p.cost_sq += c * c;
      p.cost_hat += detail::l1(x.row(i), model.mean(l));
      p.cost_l2 += detail::l2sq(x.row(i), leaf_means[l]);
      if (assigned[i] != truth[i]) p.errors += 1.0;
    }
    partial[s] = p;
  });
  Partial tot;
  for (const auto& p : partial) {
    tot.cost += p.cost;
    tot.cost_sq += p.cost_sq;
    tot.cost_hat += p.cost_hat;
    tot.cost_l2 += p.cost_l2;
    tot.errors += p.errors;
  }
  const double nn = static_cast<double>(n);
  const double base_l1 = detail::analytic_l1_baseline(model);
  const double base_l2 = detail::analytic_l2sq_baseline(model);
  r.baseline_cost = base_l1;
  r.tree_cost = tot.cost / nn;
  r.tree_cost_hat = tot.cost_hat / nn;
  r.price_l1 = detail::safe_ratio(r.tree_cost, base_l1);
  r.price_l1_hat = detail::safe_ratio(r.tree_cost_hat, base_l1);
  r.price_l2sq = detail::safe_ratio(tot.cost_l2 / nn, base_l2);
  r.error_rate = tot.errors / nn;
  const double var = std::max(0.0, tot.cost_sq / nn - r.tree_cost * r.tree_cost) * nn / (nn - 1.0);
  r.confidence_radius = base_l1 > 0.0 ? 3.0 * std::sqrt(var) / base_l1 / std::sqrt(nn) : 0.0;
  r.error_confidence_radius = 3.0 * std::sqrt(r.error_rate * (1.0 - r.error_rate) / nn);
  return r;
}

/// Monte-Carlo squared-l2 price with leaf means as centers.
inline double price_l2sq(const MixtureModel& model, const AxisTree& tree, std::size_t n, std::uint64_t seed,
                         unsigned threads = 1) {
  return mc_eval(model, tree, n, seed, threads).price_l2sq;
}

/// Exact evaluation when every component is finite-discrete, Monte Carlo otherwise.
inline EvalReport evaluate(const MixtureModel& model, const AxisTree& tree, std::size_t n, std::uint64_t seed,
                           unsigned threads = 1) {
  return model.all_discrete() ? exact_eval_discrete(model, tree) : mc_eval(model, tree, n, seed, threads);
}

/// Attaches theorem bounds (alpha and ENR from the model; beta from beta_estimate unless given).
inline void attach_bounds(EvalReport& r, const MixtureModel& model, std::optional<double> alpha = std::nullopt,
                          std::optional<double> beta = std::nullopt) {
  if (model.size() < 2) return;
  const double q = enr(model);
  if (!(q > 0.0)) return;
  const double a = alpha.value_or(model.alpha);
  const double b = beta.value_or(beta_estimate(model));
  r.thm1 = thm1_bound(a, b, model.size(), q);
  r.thm3 = thm3_bound(a, model.size(), q);
}

/// Exact error rate of an axis tree on an all-Gaussian mixture: each leaf cell is a box,
/// so the in-cell probability factorizes over axes.
inline double exact_error_gaussian(const MixtureModel& model, const AxisTree& tree) {
  require(model.all_gaussian(), "exact Gaussian error requires gaussian components", ErrorKind::incompatible);
  detail::check_tree_fits(model, tree);
  const std::size_t d = model.dim();
  double err = 0.0;
  std::vector<double> lo(d), hi(d);
  std::function<void(int)> walk = [&](int t) {
    const AxisNode& node = tree.nodes[static_cast<std::size_t>(t)];
    if (node.is_leaf()) {
      const auto k = static_cast<std::size_t>(node.component);
      const Component& c = model.components[k];
      double log_inside = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        // P(x_j outside (lo, hi]) for x_j ~ N(mu, s^2), computed with tails only.
        const double below = std::isfinite(lo[j]) ? 0.5 * std::erfc((c.mean[j] - lo[j]) / (c.stddev[j] * M_SQRT2)) : 0.0;
        const double above = std::isfinite(hi[j]) ? 0.5 * std::erfc((hi[j] - c.mean[j]) / (c.stddev[j] * M_SQRT2)) : 0.0;
        log_inside += std::log1p(-std::min(1.0, below + above));
      }
      err += model.weights[k] * -std::expm1(log_inside);
      return;
    }
    const auto j = static_cast<std::size_t>(node.axis);
    const double saved_hi = hi[j], saved_lo = lo[j];
    hi[j] = std::min(hi[j], node.theta);
    walk(node.left);
    hi[j] = saved_hi;
    lo[j] = std::max(lo[j], node.theta);
    walk(node.right);
    lo[j] = saved_lo;
  };
  std::fill(lo.begin(), lo.end(), -std::numeric_limits<double>::infinity());
  std::fill(hi.begin(), hi.end(), std::numeric_limits<double>::infinity());
  walk(0);
  return err;
}

}  // namespace mmdt
