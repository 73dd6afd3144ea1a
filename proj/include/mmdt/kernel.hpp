#pragma once

// Product kernels, kernel mean embedding statistics and the kernel decision tree.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "mmdt/error.hpp"
#include "mmdt/evaluate.hpp"
#include "mmdt/io.hpp"
#include "mmdt/mixture.hpp"
#include "mmdt/rng.hpp"

namespace mmdt {

enum class Profile { gaussian, laplace };

inline const char* profile_name(Profile p) { return p == Profile::gaussian ? "gaussian" : "laplace"; }

inline Profile parse_profile(const std::string& s) {
  if (s == "gaussian") return Profile::gaussian;
  if (s == "laplace") return Profile::laplace;
  fail(ErrorKind::validation, "unknown kernel profile \"" + s + "\"");
}

/// kappa(x, y) = prod_i g_i(|x_i - y_i|) with g_i(t) = exp(-gamma_i t^2) or exp(-gamma_i t).
struct KernelSpec {
  std::vector<Profile> profiles;
  Vector gamma;

  static KernelSpec uniform(Profile p, Vector gamma) {
    KernelSpec k;
    k.profiles.assign(gamma.size(), p);
    k.gamma = std::move(gamma);
    return k;
  }

  std::size_t dim() const { return gamma.size(); }

  void validate() const {
    require(!gamma.empty() && profiles.size() == gamma.size(), "one kernel profile per axis required");
    for (double g : gamma) require(std::isfinite(g) && g > 0.0, "kernel scales must be positive");
  }

  double profile(std::size_t i, double t) const {
    return profiles[i] == Profile::gaussian ? std::exp(-gamma[i] * t * t) : std::exp(-gamma[i] * t);
  }
  double axis(std::size_t i, double a, double b) const { return profile(i, std::abs(a - b)); }

  double operator()(std::span<const double> x, std::span<const double> y) const {
    double v = 1.0;
    for (std::size_t i = 0; i < dim(); ++i) v *= axis(i, x[i], y[i]);
    return v;
  }

  /// Distance r with g_i(r) = theta, for theta in (0, 1].
  double inverse(std::size_t i, double theta) const {
    const double s = -std::log(theta) / gamma[i];
    return profiles[i] == Profile::gaussian ? std::sqrt(s) : s;
  }
};

enum class EstimationMode { exact, mc };

struct KernelStats {
  std::size_t num_components = 0;
  std::size_t dim = 0;
  Vector sigma2_per_component;  // E kappa(x, x') with x, x' iid from component k
  double sigma2 = 0.0;          // min over components
  double sigma2_spread = 0.0;   // max - min over components
  double eps2 = 0.0;            // max over i, k, l of Var kappa_i(x, y)
  double tau = 0.0;             // max over k != l of min over i of xi(i, k, l)
  std::vector<double> xi_table; // [i][k][l]
  EstimationMode mode = EstimationMode::exact;
  std::size_t mc_samples = 0;
  std::uint64_t seed = 0;

  double xi(std::size_t i, std::size_t k, std::size_t l) const {
    return xi_table[(i * num_components + k) * num_components + l];
  }
};

namespace detail {

/// E[kappa_i(x, y)^power] for x ~ comp a, y ~ comp b, exact where a closed form exists.
inline bool axis_moment_exact(const KernelSpec& kernel, const Component& a, const Component& b, std::size_t i,
                              int power, double& out) {
  if (a.is_discrete() && b.is_discrete()) {
    double s = 0.0;
    for (std::size_t p = 0; p < a.support.size(); ++p)
      for (std::size_t q = 0; q < b.support.size(); ++q)
        s += a.mass[p] * b.mass[q] * std::pow(kernel.axis(i, a.support[p][i], b.support[q][i]), power);
    out = s;
    return true;
  }
  if (a.is_gaussian() && b.is_gaussian() && kernel.profiles[i] == Profile::gaussian) {
    // x_i - y_i ~ N(m, s2); E exp(-c t^2) = exp(-c m^2 / (1 + 2 c s2)) / sqrt(1 + 2 c s2).
    const double c = kernel.gamma[i] * power;
    const double m = a.mean[i] - b.mean[i];
    const double s2 = a.stddev[i] * a.stddev[i] + b.stddev[i] * b.stddev[i];
    const double z = 1.0 + 2.0 * c * s2;
    out = std::exp(-c * m * m / z) / std::sqrt(z);
    return true;
  }
  return false;
}

inline bool full_moment_exact(const KernelSpec& kernel, const Component& a, const Component& b, double& out) {
  if (a.is_discrete() && b.is_discrete()) {
    double s = 0.0;
    for (std::size_t p = 0; p < a.support.size(); ++p)
      for (std::size_t q = 0; q < b.support.size(); ++q) s += a.mass[p] * b.mass[q] * kernel(a.support[p], b.support[q]);
    out = s;
    return true;
  }
  if (a.is_gaussian() && b.is_gaussian()) {
    double v = 1.0;
    for (std::size_t i = 0; i < kernel.dim(); ++i) {
      double f = 0.0;
      if (!axis_moment_exact(kernel, a, b, i, 1, f)) return false;
      v *= f;
    }
    out = v;
    return true;
  }
  return false;
}

struct PairSampler {
  const Component& a;
  const Component& b;
  std::size_t n;
  std::uint64_t seed;

  /// Averages f(x, y) over n independent pairs.
  template <typename F>
  double mean(F&& f) const {
    Rng rng = make_rng(seed);
    Vector x(a.dim()), y(b.dim());
    double s = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      a.draw(rng, x);
      b.draw(rng, y);
      s += f(x, y);
    }
    return s / static_cast<double>(n);
  }
};

inline std::uint64_t pair_seed(std::uint64_t seed, std::size_t tag, std::size_t k, std::size_t l) {
  return derive_seed(derive_seed(seed, tag), std::min(k, l) * 65536 + std::max(k, l));
}

inline void check_kernel_fits(const MixtureModel& model, const KernelSpec& kernel) {
  kernel.validate();
  require(kernel.dim() == model.dim(), "kernel/mixture dimension mismatch", ErrorKind::incompatible);
}

}  // namespace detail

inline constexpr std::size_t kDefaultKernelSamples = 10000;

/// xi(i, k, l) = E kappa_i(x, y), x ~ component k, y ~ component l. Symmetric in (k, l).
inline double xi(const MixtureModel& model, const KernelSpec& kernel, std::size_t i, std::size_t k, std::size_t l,
                 EstimationMode mode = EstimationMode::exact, std::size_t samples = kDefaultKernelSamples,
                 std::uint64_t seed = 0) {
  detail::check_kernel_fits(model, kernel);
  require(i < model.dim() && k < model.size() && l < model.size(), "index out of range");
  const std::size_t a = std::min(k, l), b = std::max(k, l);
  const Component& ca = model.components[a];
  const Component& cb = model.components[b];
  double v = 0.0;
  if (mode == EstimationMode::exact) {
    require(detail::axis_moment_exact(kernel, ca, cb, i, 1, v), "no exact form for this component pair",
            ErrorKind::incompatible);
    return v;
  }
  return detail::PairSampler{ca, cb, samples, detail::pair_seed(seed, i, a, b)}.mean(
      [&](const Vector& x, const Vector& y) { return kernel.axis(i, x[i], y[i]); });
}

namespace detail {

inline double full_moment(const KernelSpec& kernel, const Component& a, const Component& b, EstimationMode mode,
                          std::size_t samples, std::uint64_t seed) {
  double v = 0.0;
  if (mode == EstimationMode::exact) {
    require(full_moment_exact(kernel, a, b, v), "no exact form for this component pair", ErrorKind::incompatible);
    return v;
  }
  return PairSampler{a, b, samples, seed}.mean([&](const Vector& x, const Vector& y) { return kernel(x, y); });
}

}  // namespace detail

/// Maximum mean discrepancy between components k and l.
inline double mmd(const MixtureModel& model, const KernelSpec& kernel, std::size_t k, std::size_t l,
                  EstimationMode mode = EstimationMode::exact, std::size_t samples = kDefaultKernelSamples,
                  std::uint64_t seed = 0) {
  detail::check_kernel_fits(model, kernel);
  if (k == l) return 0.0;
  const auto& ck = model.components[k];
  const auto& cl = model.components[l];
  const std::size_t tag = 1u << 20;
  const double kk = detail::full_moment(kernel, ck, ck, mode, samples, detail::pair_seed(seed, tag, k, k));
  const double ll = detail::full_moment(kernel, cl, cl, mode, samples, detail::pair_seed(seed, tag, l, l));
  const double kl = detail::full_moment(kernel, ck, cl, mode, samples, detail::pair_seed(seed, tag, k, l));
  return std::sqrt(std::max(0.0, kk + ll - 2.0 * kl));
}

inline KernelStats kernel_stats(const MixtureModel& model, const KernelSpec& kernel,
                                EstimationMode mode = EstimationMode::exact,
                                std::size_t samples = kDefaultKernelSamples, std::uint64_t seed = 0) {
  detail::check_kernel_fits(model, kernel);
  const std::size_t K = model.size(), d = model.dim();
  KernelStats st;
  st.num_components = K;
  st.dim = d;
  st.mode = mode;
  st.mc_samples = mode == EstimationMode::mc ? samples : 0;
  st.seed = seed;
  st.xi_table.assign(d * K * K, 0.0);

  const std::size_t tag = 1u << 20;
  for (std::size_t k = 0; k < K; ++k) {
    const auto& c = model.components[k];
    st.sigma2_per_component.push_back(
        detail::full_moment(kernel, c, c, mode, samples, detail::pair_seed(seed, tag, k, k)));
  }
  st.sigma2 = *std::min_element(st.sigma2_per_component.begin(), st.sigma2_per_component.end());
  st.sigma2_spread = *std::max_element(st.sigma2_per_component.begin(), st.sigma2_per_component.end()) - st.sigma2;

  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t l = k; l < K; ++l) {
        const auto& a = model.components[k];
        const auto& b = model.components[l];
        double mean = 0.0, second = 0.0;
        if (mode == EstimationMode::exact) {
          require(detail::axis_moment_exact(kernel, a, b, i, 1, mean) &&
                      detail::axis_moment_exact(kernel, a, b, i, 2, second),
                  "no exact form for this component pair", ErrorKind::incompatible);
        } else {
          const detail::PairSampler sampler{a, b, samples, detail::pair_seed(seed, i, k, l)};
          mean = sampler.mean([&](const Vector& x, const Vector& y) { return kernel.axis(i, x[i], y[i]); });
          second = sampler.mean([&](const Vector& x, const Vector& y) {
            const double v = kernel.axis(i, x[i], y[i]);
            return v * v;
          });
        }
        st.xi_table[(i * K + k) * K + l] = mean;
        st.xi_table[(i * K + l) * K + k] = mean;
        st.eps2 = std::max(st.eps2, std::max(0.0, second - mean * mean));
      }

  st.tau = 0.0;
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t l = 0; l < K; ++l) {
      if (k == l) continue;
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < d; ++i) m = std::min(m, st.xi(i, k, l));
      st.tau = std::max(st.tau, m);
    }
  return st;
}

inline double thm5_bound(double alpha, std::size_t K, double sigma2, double eps2, double tau) {
  require(sigma2 > 0.0 && sigma2 < 1.0, "sigma2 must lie in (0, 1)");
  require(tau < sigma2, "similarity exceeds self-similarity");
  const double k = static_cast<double>(K);
  const double inner = kSeparationConstant * alpha * eps2 * k * (k - 1.0) / (sigma2 - tau);
  return 1.0 + (1.0 + sigma2) / (1.0 - sigma2) * std::max(1.0, inner);
}

// ---- kernel tree -------------------------------------------------------------

/// Internal node: kappa_axis(x, prototype) < theta goes left, otherwise right.
struct KernelNode {
  int axis = -1;
  int prototype_component = -1;
  Vector prototype;
  double theta = 0.0;
  int left = -1;
  int right = -1;
  int component = -1;

  bool is_leaf() const { return component >= 0; }
};

struct KernelTree {
  std::vector<KernelNode> nodes;  // pre-order, root at 0
  std::size_t dim = 0;
  std::size_t num_components = 0;
  KernelSpec kernel;
  std::uint64_t seed = 0;
  std::string model_fingerprint;

  int leaf_of(std::span<const double> x) const {
    int t = 0;
    while (!nodes[static_cast<std::size_t>(t)].is_leaf()) {
      const auto& n = nodes[static_cast<std::size_t>(t)];
      const auto i = static_cast<std::size_t>(n.axis);
      t = kernel.axis(i, x[i], n.prototype[i]) < n.theta ? n.left : n.right;
    }
    return t;
  }

  std::size_t num_leaves() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const KernelNode& n) { return n.is_leaf(); }));
  }
};

inline int kernel_predict(const KernelTree& tree, std::span<const double> x) {
  require(x.size() == tree.dim, "dimension mismatch: tree expects " + std::to_string(tree.dim) + ", got " +
                                    std::to_string(x.size()),
          ErrorKind::incompatible);
  return tree.nodes[static_cast<std::size_t>(tree.leaf_of(x))].component;
}

/// Same routing expressed as input-space intervals: left iff |x_i - p_i| > g_i^{-1}(theta).
inline int interval_predict(const KernelTree& tree, std::span<const double> x) {
  int t = 0;
  while (!tree.nodes[static_cast<std::size_t>(t)].is_leaf()) {
    const auto& n = tree.nodes[static_cast<std::size_t>(t)];
    const auto i = static_cast<std::size_t>(n.axis);
    t = std::abs(x[i] - n.prototype[i]) > tree.kernel.inverse(i, n.theta) ? n.left : n.right;
  }
  return tree.nodes[static_cast<std::size_t>(t)].component;
}

namespace detail {

inline int build_kernel_node(KernelTree& tree, const MixtureModel& model, const KernelStats& st,
                             const ComponentSet& node) {
  if (node.size() == 1) {
    KernelNode leaf;
    leaf.component = static_cast<int>(node.front());
    tree.nodes.push_back(std::move(leaf));
    return static_cast<int>(tree.nodes.size()) - 1;
  }
  // (axis, k, l) minimizing xi; first minimum in (axis, k, l) order wins ties.
  std::size_t best_i = 0, best_k = node[0];
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < st.dim; ++i)
    for (std::size_t k : node)
      for (std::size_t l : node) {
        if (k == l) continue;
        if (st.xi(i, k, l) < best) {
          best = st.xi(i, k, l);
          best_i = i;
          best_k = k;
        }
      }
  Vector values;
  for (std::size_t m : node) values.push_back(st.xi(best_i, best_k, m));
  Vector sorted = values;
  std::sort(sorted.begin(), sorted.end());
  double gap = 0.0, theta = 0.0;
  for (std::size_t t = 0; t + 1 < sorted.size(); ++t)
    if (sorted[t + 1] - sorted[t] > gap) {
      gap = sorted[t + 1] - sorted[t];
      theta = 0.5 * (sorted[t] + sorted[t + 1]);
    }
  require(gap > 0.0, "cannot split: all similarities at the node coincide");

  ComponentSet left, right;
  for (std::size_t n = 0; n < node.size(); ++n) {
    require(values[n] != theta, "internal error: similarity equals the threshold");
    (values[n] < theta ? left : right).push_back(node[n]);
  }

  const auto id = tree.nodes.size();
  KernelNode kn;
  kn.axis = static_cast<int>(best_i);
  kn.prototype_component = static_cast<int>(best_k);
  kn.theta = theta;
  kn.prototype.resize(model.dim());
  Rng rng = make_rng(derive_seed(tree.seed, id));
  model.components[best_k].draw(rng, kn.prototype);
  tree.nodes.push_back(std::move(kn));
  const int l = build_kernel_node(tree, model, st, left);
  const int r = build_kernel_node(tree, model, st, right);
  tree.nodes[id].left = l;
  tree.nodes[id].right = r;
  return static_cast<int>(id);
}

}  // namespace detail

/// Kernel decision tree. Prototype seeds derive from (seed, pre-order node index).
inline KernelTree build_kernel_mmdt(const MixtureModel& model, const KernelSpec& kernel, const KernelStats& stats,
                                    std::uint64_t seed) {
  model.validate();
  detail::check_kernel_fits(model, kernel);
  require(stats.num_components == model.size() && stats.dim == model.dim(),
          "kernel statistics were computed for a different model", ErrorKind::incompatible);
  KernelTree tree;
  tree.dim = model.dim();
  tree.num_components = model.size();
  tree.kernel = kernel;
  tree.seed = seed;
  tree.model_fingerprint = fingerprint(model);
  ComponentSet all(model.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  detail::build_kernel_node(tree, model, stats, all);
  return tree;
}

/// Structural invariants (leaf bijection, children present, theta in (0, 1)).
inline std::string check_kernel_tree(const KernelTree& tree) {
  const std::size_t K = tree.num_components;
  if (tree.nodes.empty()) return "empty tree";
  if (tree.num_leaves() != K) return "leaf count != K";
  std::vector<int> seen(K, 0);
  for (const auto& n : tree.nodes) {
    if (n.is_leaf()) {
      if (n.component >= static_cast<int>(K)) return "leaf component out of range";
      ++seen[static_cast<std::size_t>(n.component)];
      continue;
    }
    if (n.left <= 0 || n.right <= 0) return "internal node without two children";
    if (!(n.theta > 0.0 && n.theta < 1.0)) return "theta outside (0, 1)";
    if (n.prototype.size() != tree.dim) return "prototype dimension mismatch";
    if (n.axis < 0 || n.axis >= static_cast<int>(tree.dim)) return "axis out of range";
  }
  for (int s : seen)
    if (s != 1) return "leaf map is not a bijection";
  return {};
}

struct KernelPriceReport {
  double price = 0.0;      // leaf-conditional embeddings
  double price_hat = 0.0;  // embeddings of the assigned components
  double error_rate = 0.0;
  double baseline_cost = 0.0;
  double tree_cost = 0.0;
  double tree_cost_hat = 0.0;
  bool exact = false;
  std::size_t mc_samples = 0;
  std::uint64_t mc_seed = 0;
};

namespace detail {

struct WeightedPoint {
  Vector x;
  double w;
  std::size_t truth;
  std::size_t leaf;
};

/// Hilbert-space costs for a weighted point set, given E_{y~comp l} kappa(x_a, y) for
/// every point a and component l, and the component self-similarities.
inline KernelPriceReport kernel_costs(const std::vector<WeightedPoint>& pts, const std::vector<Vector>& comp_sim,
                                      const Vector& sigma2, const KernelSpec& kernel, std::size_t K) {
  KernelPriceReport r;
  std::vector<std::vector<std::size_t>> members(K);
  for (std::size_t a = 0; a < pts.size(); ++a) members[pts[a].leaf].push_back(a);

  // Leaf-conditional embedding: norm^2 and E_{y ~ leaf} kappa(x_a, y).
  Vector leaf_norm2(K, 0.0);
  std::vector<double> leaf_sim(pts.size(), 0.0);
  for (std::size_t l = 0; l < K; ++l) {
    double W = 0.0;
    for (std::size_t a : members[l]) W += pts[a].w;
    if (W <= 0.0) continue;
    double norm2 = 0.0;
    for (std::size_t a : members[l]) {
      double s = 0.0;
      for (std::size_t b : members[l]) s += pts[b].w * kernel(pts[a].x, pts[b].x);
      leaf_sim[a] = s / W;
      norm2 += pts[a].w * s;
    }
    leaf_norm2[l] = norm2 / (W * W);
  }
  double total_w = 0.0;
  for (std::size_t a = 0; a < pts.size(); ++a) {
    const auto& p = pts[a];
    total_w += p.w;
    r.baseline_cost += p.w * (1.0 + sigma2[p.truth] - 2.0 * comp_sim[a][p.truth]);
    r.tree_cost_hat += p.w * (1.0 + sigma2[p.leaf] - 2.0 * comp_sim[a][p.leaf]);
    r.tree_cost += p.w * (1.0 + leaf_norm2[p.leaf] - 2.0 * leaf_sim[a]);
    if (p.leaf != p.truth) r.error_rate += p.w;
  }
  r.baseline_cost /= total_w;
  r.tree_cost_hat /= total_w;
  r.tree_cost /= total_w;
  r.error_rate /= total_w;
  r.price = safe_ratio(r.tree_cost, r.baseline_cost);
  r.price_hat = safe_ratio(r.tree_cost_hat, r.baseline_cost);
  return r;
}

}  // namespace detail

/// Kernel price of explainability. Exact for all-discrete mixtures; otherwise Monte Carlo
/// with n evaluation points and min(n, 1000)-point plug-in embeddings.
inline KernelPriceReport kernel_price(const MixtureModel& model, const KernelSpec& kernel, const KernelTree& tree,
                                      std::size_t n = 20000, std::uint64_t seed = 0) {
  detail::check_kernel_fits(model, kernel);
  require(tree.dim == model.dim() && tree.num_components == model.size(), "tree/mixture mismatch",
          ErrorKind::incompatible);
  const std::size_t K = model.size();

  if (model.all_discrete()) {
    std::vector<detail::WeightedPoint> pts;
    for (std::size_t k = 0; k < K; ++k) {
      const auto& c = model.components[k];
      for (std::size_t s = 0; s < c.support.size(); ++s)
        pts.push_back({c.support[s], model.weights[k] * c.mass[s], k,
                       static_cast<std::size_t>(kernel_predict(tree, c.support[s]))});
    }
    std::vector<Vector> comp_sim(pts.size(), Vector(K, 0.0));
    for (std::size_t a = 0; a < pts.size(); ++a)
      for (std::size_t l = 0; l < K; ++l) {
        const auto& c = model.components[l];
        for (std::size_t s = 0; s < c.support.size(); ++s) comp_sim[a][l] += c.mass[s] * kernel(pts[a].x, c.support[s]);
      }
    Vector sigma2(K);
    for (std::size_t k = 0; k < K; ++k) {
      const auto& c = model.components[k];
      double v = 0.0;
      for (std::size_t s = 0; s < c.support.size(); ++s)
        for (std::size_t t = 0; t < c.support.size(); ++t) v += c.mass[s] * c.mass[t] * kernel(c.support[s], c.support[t]);
      sigma2[k] = v;
    }
    auto r = detail::kernel_costs(pts, comp_sim, sigma2, kernel, K);
    r.exact = true;
    return r;
  }

  require(n >= 100, "Monte-Carlo evaluation needs n >= 100");
  const std::size_t m = std::min<std::size_t>(n, 1000);
  Rng rng = make_rng(seed);
  std::vector<std::vector<Vector>> refs(K, std::vector<Vector>(m, Vector(model.dim())));
  for (std::size_t k = 0; k < K; ++k)
    for (auto& y : refs[k]) model.components[k].draw(rng, y);
  Vector sigma2(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    double s = 0.0;
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b)
        if (a != b) s += kernel(refs[k][a], refs[k][b]);
    sigma2[k] = s / static_cast<double>(m * (m - 1));
  }
  // Evaluation points: the leaf plug-in uses up to m of them with rescaled weights.
  std::discrete_distribution<int> pick(model.weights.begin(), model.weights.end());
  std::vector<detail::WeightedPoint> pts;
  const std::size_t eval_n = std::min<std::size_t>(n, 4 * m);
  for (std::size_t t = 0; t < eval_n; ++t) {
    const auto k = static_cast<std::size_t>(pick(rng));
    Vector x(model.dim());
    model.components[k].draw(rng, x);
    const auto leaf = static_cast<std::size_t>(kernel_predict(tree, x));
    pts.push_back({std::move(x), 1.0, k, leaf});
  }
  std::vector<Vector> comp_sim(pts.size(), Vector(K, 0.0));
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t l = 0; l < K; ++l) {
      double s = 0.0;
      for (const auto& y : refs[l]) s += kernel(pts[a].x, y);
      comp_sim[a][l] = s / static_cast<double>(m);
    }
  auto r = detail::kernel_costs(pts, comp_sim, sigma2, kernel, K);
  r.mc_samples = eval_n;
  r.mc_seed = seed;
  return r;
}

}  // namespace mmdt
