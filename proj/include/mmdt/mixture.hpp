#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmdt/error.hpp"
#include "mmdt/rng.hpp"

namespace mmdt {

using Vector = std::vector<double>;

/// Floor applied to every per-axis variance (mixture and component).
inline constexpr double kVarianceFloor = 1e-12;

/// Row-major N x d matrix of points.
struct Points {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Points() = default;
  Points(std::size_t n, std::size_t d) : rows(n), cols(d), data(n * d, 0.0) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  void push_back(std::span<const double> x) {
    if (rows == 0 && cols == 0) cols = x.size();
    require(x.size() == cols, "row dimension mismatch");
    data.insert(data.end(), x.begin(), x.end());
    ++rows;
  }
};

/// Points with optional component labels (0-based internally).
struct LabeledDataset {
  Points points;
  std::vector<int> labels;  // empty when unlabeled

  bool has_labels() const { return !labels.empty(); }
  std::size_t size() const { return points.rows; }
  std::size_t dim() const { return points.cols; }
};

enum class ComponentKind { gaussian_diagonal, finite_discrete };

struct Component {
  ComponentKind kind = ComponentKind::gaussian_diagonal;
  Vector mean;
  Vector stddev;                // gaussian_diagonal only
  std::vector<Vector> support;  // finite_discrete only
  Vector mass;                  // finite_discrete only

  static Component gaussian(Vector mean, Vector stddev) {
    Component c;
    c.kind = ComponentKind::gaussian_diagonal;
    c.mean = std::move(mean);
    c.stddev = std::move(stddev);
    return c;
  }

  /// Discrete component; the mean is the mass-weighted support average.
  static Component discrete(std::vector<Vector> support, Vector mass) {
    require(!support.empty() && support.size() == mass.size(), "support and mass sizes differ");
    Vector mean(support.front().size(), 0.0);
    for (std::size_t s = 0; s < support.size(); ++s)
      for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += mass[s] * support[s][j];
    return discrete(std::move(support), std::move(mass), std::move(mean));
  }

  /// Discrete component with a known (analytic) mean; checked by validate().
  static Component discrete(std::vector<Vector> support, Vector mass, Vector mean) {
    Component c;
    c.kind = ComponentKind::finite_discrete;
    c.support = std::move(support);
    c.mass = std::move(mass);
    c.mean = std::move(mean);
    return c;
  }

  bool is_discrete() const { return kind == ComponentKind::finite_discrete; }
  bool is_gaussian() const { return kind == ComponentKind::gaussian_diagonal; }
  std::size_t dim() const { return mean.size(); }

  /// Var(x_axis) under this component.
  double variance(std::size_t axis) const {
    if (is_gaussian()) return std::max(stddev[axis] * stddev[axis], kVarianceFloor);
    double v = 0.0;
    for (std::size_t s = 0; s < support.size(); ++s) {
      const double dev = support[s][axis] - mean[axis];
      v += mass[s] * dev * dev;
    }
    return std::max(v, kVarianceFloor);
  }

  /// E|x_axis - mean_axis| under this component.
  double mean_abs_deviation(std::size_t axis) const {
    if (is_gaussian()) return stddev[axis] * std::sqrt(2.0 / M_PI);
    double v = 0.0;
    for (std::size_t s = 0; s < support.size(); ++s) v += mass[s] * std::abs(support[s][axis] - mean[axis]);
    return v;
  }

  /// Exact second moment E|x_axis - mean_axis|^2 (no floor).
  double raw_variance(std::size_t axis) const {
    if (is_gaussian()) return stddev[axis] * stddev[axis];
    double v = 0.0;
    for (std::size_t s = 0; s < support.size(); ++s) {
      const double dev = support[s][axis] - mean[axis];
      v += mass[s] * dev * dev;
    }
    return v;
  }

  void draw(Rng& rng, std::span<double> out) const {
    if (is_gaussian()) {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (std::size_t j = 0; j < mean.size(); ++j) out[j] = mean[j] + stddev[j] * normal(rng);
    } else {
      std::discrete_distribution<std::size_t> pick(mass.begin(), mass.end());
      const Vector& x = support[pick(rng)];
      std::copy(x.begin(), x.end(), out.begin());
    }
  }
};

struct MixtureModel {
  std::vector<Component> components;
  Vector weights;
  Vector sigma;  // per-axis mixture standard deviations
  double alpha = 1.0;

  std::size_t size() const { return components.size(); }
  std::size_t dim() const { return sigma.size(); }
  const Vector& mean(std::size_t k) const { return components[k].mean; }

  bool all_discrete() const {
    return std::all_of(components.begin(), components.end(), [](const Component& c) { return c.is_discrete(); });
  }
  bool all_gaussian() const {
    return std::all_of(components.begin(), components.end(), [](const Component& c) { return c.is_gaussian(); });
  }

  /// Throws Error(validation) on the first violated invariant.
  void validate() const;
};

/// Pooled within-component per-axis standard deviation, sqrt(sum_k p_k Var_k(x_j)).
inline Vector pooled_sigma(const std::vector<Component>& components, const Vector& weights) {
  require(!components.empty(), "mixture has no components");
  const std::size_t d = components.front().dim();
  Vector sigma(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double v = 0.0;
    for (std::size_t k = 0; k < components.size(); ++k) v += weights[k] * components[k].raw_variance(j);
    sigma[j] = std::sqrt(std::max(v, kVarianceFloor));
  }
  return sigma;
}

/// Assembles a mixture, deriving sigma by pooling and alpha = K * max p when not given.
inline MixtureModel make_mixture(std::vector<Component> components, Vector weights,
                                 std::optional<double> alpha = std::nullopt,
                                 std::optional<Vector> sigma = std::nullopt) {
  MixtureModel m;
  m.sigma = sigma ? *sigma : pooled_sigma(components, weights);
  m.alpha = alpha ? *alpha
                  : static_cast<double>(components.size()) * *std::max_element(weights.begin(), weights.end());
  m.components = std::move(components);
  m.weights = std::move(weights);
  return m;
}

namespace detail {

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline void validate_component(const Component& c, std::size_t d, std::size_t k) {
  const std::string where = "component " + std::to_string(k) + ": ";
  require(c.mean.size() == d, where + "mean dimension mismatch");
  require(all_finite(c.mean), where + "non-finite mean");
  if (c.is_gaussian()) {
    require(c.stddev.size() == d, where + "stddev dimension mismatch");
    for (double s : c.stddev) require(std::isfinite(s) && s > 0.0, where + "stddev must be positive");
    return;
  }
  require(!c.support.empty() && c.support.size() == c.mass.size(), where + "support and mass sizes differ");
  double total = 0.0;
  for (std::size_t s = 0; s < c.support.size(); ++s) {
    require(c.support[s].size() == d, where + "support point dimension mismatch");
    require(all_finite(c.support[s]), where + "non-finite support point");
    require(std::isfinite(c.mass[s]) && c.mass[s] > 0.0, where + "masses must be positive");
    total += c.mass[s];
  }
  require(std::abs(total - 1.0) <= 1e-9, where + "masses must sum to 1");
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (std::size_t s = 0; s < c.support.size(); ++s) m += c.mass[s] * c.support[s][j];
    require(std::abs(m - c.mean[j]) <= 1e-9, where + "mean does not match the support average");
  }
}

}  // namespace detail

inline void MixtureModel::validate() const {
  const std::size_t K = components.size();
  require(K >= 2, "need at least two components");
  require(dim() >= 1, "dimension must be at least 1");
  require(weights.size() == K, "one weight per component required");
  require(std::isfinite(alpha) && alpha >= 1.0, "alpha must be >= 1");
  for (double s : sigma) require(std::isfinite(s) && s > 0.0, "mixture sigma must be positive");
  double total = 0.0;
  for (double p : weights) {
    require(std::isfinite(p) && p > 0.0, "weights must be positive");
    total += p;
  }
  require(std::abs(total - 1.0) <= 1e-9, "weights must sum to 1");
  for (double p : weights)
    require(p <= alpha / static_cast<double>(K) + 1e-12, "weight exceeds alpha/K");
  for (std::size_t k = 0; k < K; ++k) detail::validate_component(components[k], dim(), k);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t l = k + 1; l < K; ++l)
      require(components[k].mean != components[l].mean,
              "components " + std::to_string(k) + " and " + std::to_string(l) + " share a mean");
}

/// Explainability-to-noise ratio: min over pairs of the max per-axis squared normalized mean gap.
inline double enr(const MixtureModel& model) {
  require(model.size() >= 2, "need at least two components");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < model.size(); ++k)
    for (std::size_t l = k + 1; l < model.size(); ++l) {
      double worst_axis = 0.0;
      for (std::size_t j = 0; j < model.dim(); ++j) {
        const double gap = model.mean(k)[j] - model.mean(l)[j];
        worst_axis = std::max(worst_axis, gap * gap / (model.sigma[j] * model.sigma[j]));
      }
      best = std::min(best, worst_axis);
    }
  return best;
}

/// Signal-to-noise ratio: min over pairs of the summed squared normalized mean gaps.
inline double snr(const MixtureModel& model) {
  require(model.size() >= 2, "need at least two components");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < model.size(); ++k)
    for (std::size_t l = k + 1; l < model.size(); ++l) {
      double sum = 0.0;
      for (std::size_t j = 0; j < model.dim(); ++j) {
        const double gap = model.mean(k)[j] - model.mean(l)[j];
        sum += gap * gap / (model.sigma[j] * model.sigma[j]);
      }
      best = std::min(best, sum);
    }
  return best;
}

/// Draws n labeled points. Bit-identical for identical (model, n, seed).
inline LabeledDataset sample(const MixtureModel& model, std::size_t n, std::uint64_t seed) {
  require(n >= 1, "sample size must be positive");
  Rng rng = make_rng(seed);
  std::discrete_distribution<int> pick(model.weights.begin(), model.weights.end());
  LabeledDataset out;
  out.points = Points(n, model.dim());
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int k = pick(rng);
    out.labels[i] = k;
    model.components[static_cast<std::size_t>(k)].draw(rng, out.points.row(i));
  }
  return out;
}

struct GmmFit {
  MixtureModel model;
  std::vector<double> log_likelihood;  // total log-likelihood before each M-step
  int iterations = 0;
  bool converged = false;
  int reseeds = 0;
};

namespace detail {

inline double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

inline Vector axis_variance(const Points& x) {
  Vector mean(x.cols, 0.0), var(x.cols, 0.0);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) mean[j] += x(i, j);
  for (double& m : mean) m /= static_cast<double>(x.rows);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j) {
      const double dev = x(i, j) - mean[j];
      var[j] += dev * dev;
    }
  for (double& v : var) v = std::max(v / static_cast<double>(x.rows), kVarianceFloor);
  return var;
}

/// k-means++ D^2 seeding in per-axis standardized coordinates.
inline std::vector<std::size_t> seed_centers(const Points& x, std::size_t K, const Vector& scale, Rng& rng) {
  const std::size_t n = x.rows;
  auto dist2 = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) {
      const double t = (x(a, j) - x(b, j)) / scale[j];
      s += t * t;
    }
    return s;
  };
  std::vector<std::size_t> chosen{std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)};
  Vector nearest(n, std::numeric_limits<double>::infinity());
  while (chosen.size() < K) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], dist2(i, chosen.back()));
      total += nearest[i];
    }
    std::size_t next = 0;
    if (total > 0.0) {
      double u = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (next = 0; next + 1 < n; ++next) {
        u -= nearest[next];
        if (u < 0.0 && nearest[next] > 0.0) break;
      }
    } else {
      // All points coincide with a chosen center: take the next unused index.
      next = chosen.size() % n;
    }
    chosen.push_back(next);
  }
  return chosen;
}

}  // namespace detail

/// Diagonal-covariance EM. `tol` bounds the per-point average log-likelihood improvement.
inline GmmFit fit_gmm(const LabeledDataset& data, std::size_t K, std::uint64_t seed, int max_iters = 500,
                      double tol = 1e-8) {
  const Points& x = data.points;
  const std::size_t n = x.rows, d = x.cols;
  require(K >= 1, "K must be positive");
  require(n >= K, "need at least K points");
  require(detail::all_finite(x.data), "non-finite input data");

  const Vector data_var = detail::axis_variance(x);
  Vector scale(d);
  for (std::size_t j = 0; j < d; ++j) scale[j] = std::sqrt(data_var[j]);

  Rng rng = make_rng(seed);
  const auto init = detail::seed_centers(x, K, scale, rng);
  std::vector<Vector> mu(K), var(K, data_var);
  for (std::size_t k = 0; k < K; ++k) mu[k].assign(x.row(init[k]).begin(), x.row(init[k]).end());
  Vector w(K, 1.0 / static_cast<double>(K));

  GmmFit fit;
  std::vector<double> resp(n * K);
  Vector point_ll(n);
  double prev_avg = -std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < max_iters; ++iter) {
    // E-step
    std::vector<double> log_norm(K);
    for (std::size_t k = 0; k < K; ++k) {
      double s = std::log(w[k]);
      for (std::size_t j = 0; j < d; ++j) s -= 0.5 * std::log(2.0 * M_PI * var[k][j]);
      log_norm[k] = s;
    }
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double* r = resp.data() + i * K;
      for (std::size_t k = 0; k < K; ++k) {
        double q = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double dev = x(i, j) - mu[k][j];
          q += dev * dev / var[k][j];
        }
        r[k] = log_norm[k] - 0.5 * q;
      }
      const double lse = detail::log_sum_exp({r, K});
      point_ll[i] = lse;
      ll += lse;
      for (std::size_t k = 0; k < K; ++k) r[k] = std::exp(r[k] - lse);
    }
    fit.log_likelihood.push_back(ll);
    fit.iterations = iter + 1;
    const double avg = ll / static_cast<double>(n);
    if (avg - prev_avg < tol) {
      fit.converged = true;
      break;
    }
    prev_avg = avg;

    // M-step
    for (std::size_t k = 0; k < K; ++k) {
      double nk = 0.0;
      for (std::size_t i = 0; i < n; ++i) nk += resp[i * K + k];
      if (nk < 1e-10) {
        // Empty component: restart it at the worst-explained point.
        const auto worst = static_cast<std::size_t>(
            std::min_element(point_ll.begin(), point_ll.end()) - point_ll.begin());
        mu[k].assign(x.row(worst).begin(), x.row(worst).end());
        var[k] = data_var;
        w[k] = 1.0 / static_cast<double>(n);
        point_ll[worst] = std::numeric_limits<double>::infinity();
        ++fit.reseeds;
        prev_avg = -std::numeric_limits<double>::infinity();
        continue;
      }
      Vector m(d, 0.0), v(d, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp[i * K + k];
        for (std::size_t j = 0; j < d; ++j) m[j] += r * x(i, j);
      }
      for (double& mj : m) mj /= nk;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp[i * K + k];
        for (std::size_t j = 0; j < d; ++j) {
          const double dev = x(i, j) - m[j];
          v[j] += r * dev * dev;
        }
      }
      for (double& vj : v) vj = std::max(vj / nk, kVarianceFloor);
      mu[k] = std::move(m);
      var[k] = std::move(v);
      w[k] = nk / static_cast<double>(n);
    }
    const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& wk : w) wk /= wsum;
  }

  std::vector<Component> comps;
  comps.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    Vector sd(d);
    for (std::size_t j = 0; j < d; ++j) sd[j] = std::sqrt(var[k][j]);
    comps.push_back(Component::gaussian(mu[k], std::move(sd)));
  }
  fit.model = make_mixture(std::move(comps), w);
  return fit;
}

/// Ground-truth-label moments: one finite-discrete component per label with uniform point mass.
/// The result does not depend on the row order of `data`.
inline MixtureModel empirical_moments(const LabeledDataset& data, std::size_t K) {
  require(data.has_labels(), "dataset has no labels");
  require(data.labels.size() == data.size(), "one label per row required");
  require(detail::all_finite(data.points.data), "non-finite input data");
  std::vector<std::vector<Vector>> groups(K);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int lab = data.labels[i];
    require(lab >= 0 && static_cast<std::size_t>(lab) < K, "label out of range");
    const auto r = data.points.row(i);
    groups[static_cast<std::size_t>(lab)].emplace_back(r.begin(), r.end());
  }
  std::vector<Component> comps;
  Vector weights;
  for (std::size_t k = 0; k < K; ++k) {
    auto& g = groups[k];
    require(!g.empty(), "missing label class " + std::to_string(k + 1));
    std::sort(g.begin(), g.end());
    std::vector<Vector> support;
    Vector mass;
    const double unit = 1.0 / static_cast<double>(g.size());
    for (auto& p : g) {
      if (!support.empty() && support.back() == p) {
        mass.back() += unit;
      } else {
        support.push_back(p);
        mass.push_back(unit);
      }
    }
    comps.push_back(Component::discrete(std::move(support), std::move(mass)));
    weights.push_back(static_cast<double>(g.size()) / static_cast<double>(data.size()));
  }
  return make_mixture(std::move(comps), std::move(weights));
}

}  // namespace mmdt
