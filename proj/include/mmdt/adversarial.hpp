#pragma once

// Lower-bound and counterexample instances with exact analytic targets.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mmdt/error.hpp"
#include "mmdt/evaluate.hpp"
#include "mmdt/io.hpp"
#include "mmdt/mixture.hpp"
#include "mmdt/rng.hpp"
#include "mmdt/tree.hpp"

namespace mmdt {

struct AdversarialInstance {
  MixtureModel model;
  std::string construction;                // thm2-logk | thm4-basis | b3-constprice
  std::map<std::string, double> params;    // K, M, q, d, eps
  std::map<std::string, double> targets;   // analytic values
  std::vector<std::size_t> verified_subset_sizes;  // thm2 only
};

namespace detail {

inline Vector unit(std::size_t d, std::size_t j, double scale = 1.0) {
  Vector v(d, 0.0);
  v[j] = scale;
  return v;
}

inline Vector plus(Vector a, const Vector& b) {
  for (std::size_t j = 0; j < a.size(); ++j) a[j] += b[j];
  return a;
}

inline std::size_t hamming(const Vector& a, const Vector& b) {
  std::size_t h = 0;
  for (std::size_t j = 0; j < a.size(); ++j) h += a[j] != b[j];
  return h;
}

inline bool next_combination(std::vector<std::size_t>& c, std::size_t n) {
  const std::size_t l = c.size();
  for (std::size_t i = l; i-- > 0;) {
    if (c[i] < n - l + i) {
      ++c[i];
      for (std::size_t j = i + 1; j < l; ++j) c[j] = c[j - 1] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Pairwise Hamming distance >= d/4.
inline bool thm2_property1(const std::vector<Vector>& centers) {
  const double d = static_cast<double>(centers.front().size());
  for (std::size_t k = 0; k < centers.size(); ++k)
    for (std::size_t l = k + 1; l < centers.size(); ++l)
      if (static_cast<double>(detail::hamming(centers[k], centers[l])) < d / 4.0) return false;
  return true;
}

/// For every axis subset of size l and every sign pattern on it, at least K(2^-l - eps) centers agree.
inline bool thm2_property2(const std::vector<Vector>& centers, std::size_t l, double eps) {
  const std::size_t d = centers.front().size();
  const double K = static_cast<double>(centers.size());
  const double need = K * (std::ldexp(1.0, -static_cast<int>(l)) - eps);
  if (l == 0 || l > d) return true;
  std::vector<std::size_t> subset(l);
  for (std::size_t i = 0; i < l; ++i) subset[i] = i;
  do {
    std::vector<std::size_t> counts(std::size_t{1} << l, 0);
    for (const auto& c : centers) {
      std::size_t pattern = 0;
      for (std::size_t i = 0; i < l; ++i) pattern |= static_cast<std::size_t>(c[subset[i]] > 0) << i;
      ++counts[pattern];
    }
    for (std::size_t n : counts)
      if (static_cast<double>(n) < need) return false;
  } while (detail::next_combination(subset, d));
  return true;
}

/// log K construction: d = K^3 sign-vector centers, each cluster M copies of its center plus center +- e_i.
inline AdversarialInstance gen_thm2(std::size_t K, std::size_t M, std::uint64_t seed, std::size_t max_retries = 1000) {
  require(K >= 2, "thm2 construction needs K >= 2");
  require(K <= 12, "thm2 construction needs K <= 12 at this scale (d = K^3)");
  const std::size_t d = K * K * K;
  const double eps = std::log(static_cast<double>(K)) / std::sqrt(static_cast<double>(K));
  const auto cap = std::min<std::size_t>(3, static_cast<std::size_t>(std::floor(std::log(static_cast<double>(K)) / 50.0)));

  Rng rng = make_rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::vector<Vector> centers;
  std::string last_failure = "pairwise Hamming distance >= d/4";
  bool ok = false;
  for (std::size_t attempt = 0; attempt < max_retries && !ok; ++attempt) {
    centers.assign(K, Vector(d));
    for (auto& c : centers)
      for (auto& v : c) v = coin(rng) ? 1.0 : -1.0;
    if (!thm2_property1(centers)) {
      last_failure = "pairwise Hamming distance >= d/4";
      continue;
    }
    ok = true;
    for (std::size_t l = 1; l <= cap && ok; ++l)
      if (!thm2_property2(centers, l, eps)) {
        ok = false;
        last_failure = "axis-subset agreement for l = " + std::to_string(l);
      }
  }
  if (!ok) fail(ErrorKind::validation, "thm2 generation exhausted retries; failing property: " + last_failure);

  const double total = static_cast<double>(M + 2 * d);
  std::vector<Component> comps;
  for (const auto& mu : centers) {
    std::vector<Vector> support;
    Vector mass;
    if (M > 0) {
      support.push_back(mu);
      mass.push_back(static_cast<double>(M) / total);
    }
    for (std::size_t j = 0; j < d; ++j) {
      support.push_back(detail::plus(mu, detail::unit(d, j, 1.0)));
      mass.push_back(1.0 / total);
      support.push_back(detail::plus(mu, detail::unit(d, j, -1.0)));
      mass.push_back(1.0 / total);
    }
    comps.push_back(Component::discrete(std::move(support), std::move(mass), mu));
  }
  AdversarialInstance inst;
  inst.model = make_mixture(std::move(comps), Vector(K, 1.0 / static_cast<double>(K)));
  inst.construction = "thm2-logk";
  inst.params = {{"K", double(K)}, {"M", double(M)}, {"d", double(d)}, {"eps", eps}};
  // Per-axis variance 2/(M+2d) against a mean gap of 2.
  inst.targets = {{"enr", 2.0 * total},
                  {"baseline_l1", 2.0 * static_cast<double>(d) / total},
                  {"beta", std::sqrt(total / 2.0)}};
  for (std::size_t l = 1; l <= cap; ++l) inst.verified_subset_sizes.push_back(l);
  return inst;
}

/// Basis-vector means; each draw deviates by +-1 on at most one axis, eps = 1/(2q) per event.
inline AdversarialInstance gen_thm4(std::size_t K, std::size_t q) {
  require(K >= 2, "thm4 construction needs K >= 2");
  require(q >= K, "thm4 construction requires q >= K");
  const std::size_t d = K;
  const double eps = 1.0 / (2.0 * static_cast<double>(q));
  const double centre = static_cast<double>(q - K) / static_cast<double>(q);  // 1 - 2 eps K
  std::vector<Component> comps;
  for (std::size_t k = 0; k < K; ++k) {
    const Vector mu = detail::unit(d, k);
    std::vector<Vector> support;
    Vector mass;
    if (q > K) {
      support.push_back(mu);
      mass.push_back(centre);
    }
    for (std::size_t j = 0; j < d; ++j) {
      support.push_back(detail::plus(mu, detail::unit(d, j, 1.0)));
      mass.push_back(eps);
      support.push_back(detail::plus(mu, detail::unit(d, j, -1.0)));
      mass.push_back(eps);
    }
    comps.push_back(Component::discrete(std::move(support), std::move(mass), mu));
  }
  AdversarialInstance inst;
  inst.model = make_mixture(std::move(comps), Vector(K, 1.0 / static_cast<double>(K)));
  inst.construction = "thm4-basis";
  inst.params = {{"K", double(K)}, {"q", double(q)}, {"d", double(d)}, {"eps", eps}};
  inst.targets = {{"enr", static_cast<double>(q)}, {"variance", 1.0 / static_cast<double>(q)},
                  {"floor", thm4_floor(K, static_cast<double>(q))}};
  return inst;
}

/// Two shifted copies of a +-e_i variable: exact recovery is possible yet the price stays 1.5 - 1/d.
inline AdversarialInstance gen_b3(std::size_t d) {
  require(d >= 2, "b3 construction needs d >= 2");
  const double eps = 1.0 / (2.0 * static_cast<double>(d));
  std::vector<Component> comps;
  for (double shift : {0.5, -0.5}) {
    const Vector mu(d, shift);
    std::vector<Vector> support;
    Vector mass;
    for (std::size_t j = 0; j < d; ++j) {
      support.push_back(detail::plus(mu, detail::unit(d, j, 1.0)));
      mass.push_back(eps);
      support.push_back(detail::plus(mu, detail::unit(d, j, -1.0)));
      mass.push_back(eps);
    }
    comps.push_back(Component::discrete(std::move(support), std::move(mass), mu));
  }
  AdversarialInstance inst;
  inst.model = make_mixture(std::move(comps), {0.5, 0.5});
  inst.construction = "b3-constprice";
  inst.params = {{"d", double(d)}, {"eps", eps}};
  inst.targets = {{"price", 1.5 - 1.0 / static_cast<double>(d)}, {"error", eps}, {"baseline_l1", 1.0}};
  return inst;
}

namespace detail {

inline AxisTree empty_tree_for(const MixtureModel& model) {
  AxisTree t;
  t.dim = model.dim();
  t.num_components = model.size();
  t.model_fingerprint = fingerprint(model);
  return t;
}

}  // namespace detail

/// Root cut x1 <= 0: component 1 (mean -0.5) left, component 0 right.
inline AxisTree b3_canonical_tree(const MixtureModel& model) {
  AxisTree t = detail::empty_tree_for(model);
  const int root = t.add_cut(0, 0.0);
  t.nodes[static_cast<std::size_t>(root)].left = t.add_leaf(1);
  t.nodes[static_cast<std::size_t>(root)].right = t.add_leaf(0);
  return t;
}

/// Ordered separation: node j cuts axis j at 0.5, sending component j right.
inline AxisTree thm4_canonical_tree(const MixtureModel& model) {
  AxisTree t = detail::empty_tree_for(model);
  const std::size_t K = model.size();
  std::vector<int> cuts;
  for (std::size_t j = 0; j + 1 < K; ++j) {
    const int cut = t.add_cut(static_cast<int>(j), 0.5);
    if (!cuts.empty()) t.nodes[static_cast<std::size_t>(cuts.back())].left = cut;
    cuts.push_back(cut);
    t.nodes[static_cast<std::size_t>(cut)].right = -1;
  }
  // Pre-order: cut0, cut1, ..., last leaf, then the right leaves bottom-up.
  t.nodes[static_cast<std::size_t>(cuts.back())].left = t.add_leaf(static_cast<int>(K - 1));
  for (std::size_t j = cuts.size(); j-- > 0;)
    t.nodes[static_cast<std::size_t>(cuts[j])].right = t.add_leaf(static_cast<int>(j));
  return t;
}

inline constexpr std::size_t kMaxEnumerationSupport = 200;
inline constexpr std::size_t kMaxEnumerationComponents = 3;

namespace detail {

using Fragment = std::vector<AxisNode>;  // pre-order, child links relative to the fragment start

inline void shift_into(Fragment& out, const Fragment& part, int offset) {
  for (AxisNode n : part) {
    if (!n.is_leaf()) {
      n.left += offset;
      n.right += offset;
    }
    out.push_back(n);
  }
}

inline std::vector<Fragment> valid_subtrees(const MixtureModel& model, const std::vector<Vector>& cuts,
                                            const ComponentSet& node);

template <typename F>
void for_each_split(const MixtureModel& model, const std::vector<Vector>& cuts, const ComponentSet& node, F&& f) {
  for (std::size_t j = 0; j < model.dim(); ++j)
    for (double theta : cuts[j]) {
      ComponentSet left, right;
      for (std::size_t k : node) (model.mean(k)[j] <= theta ? left : right).push_back(k);
      if (!left.empty() && !right.empty()) f(j, theta, left, right);
    }
}

inline std::vector<Fragment> valid_subtrees(const MixtureModel& model, const std::vector<Vector>& cuts,
                                            const ComponentSet& node) {
  if (node.size() == 1) {
    AxisNode leaf;
    leaf.component = static_cast<int>(node.front());
    return {Fragment{leaf}};
  }
  std::vector<Fragment> out;
  for_each_split(model, cuts, node, [&](std::size_t j, double theta, const ComponentSet& l, const ComponentSet& r) {
    const auto lefts = valid_subtrees(model, cuts, l);
    const auto rights = valid_subtrees(model, cuts, r);
    for (const auto& lt : lefts)
      for (const auto& rt : rights) {
        Fragment f;
        AxisNode root;
        root.axis = static_cast<int>(j);
        root.theta = theta;
        root.left = 1;
        root.right = 1 + static_cast<int>(lt.size());
        f.push_back(root);
        shift_into(f, lt, 1);
        shift_into(f, rt, root.right);
        out.push_back(std::move(f));
      }
  });
  return out;
}

}  // namespace detail

/// Calls f(tree) for every valid tree whose thresholds are midpoints between consecutive
/// distinct support projections. Order: root axis, root threshold, then left and right subtrees.
inline std::size_t for_each_valid_tree(const MixtureModel& model, const std::function<void(const AxisTree&)>& f) {
  model.validate();
  require(model.all_discrete(), "enumeration requires an all-discrete mixture", ErrorKind::incompatible);
  std::size_t support = 0;
  for (const auto& c : model.components) support += c.support.size();
  require(model.size() <= kMaxEnumerationComponents && support <= kMaxEnumerationSupport,
          "instance too large to enumerate: K = " + std::to_string(model.size()) + ", support = " +
              std::to_string(support) + " (limits 3 and 200)");

  std::vector<Vector> cuts(model.dim());
  for (std::size_t j = 0; j < model.dim(); ++j) {
    std::set<double> values;
    for (const auto& c : model.components)
      for (const auto& x : c.support) values.insert(x[j]);
    for (auto it = values.begin(); std::next(it) != values.end(); ++it) cuts[j].push_back(0.5 * (*it + *std::next(it)));
  }
  ComponentSet all(model.size());
  std::iota(all.begin(), all.end(), std::size_t{0});

  AxisTree tree = detail::empty_tree_for(model);
  std::size_t count = 0;
  for (auto& frag : detail::valid_subtrees(model, cuts, all)) {
    tree.nodes = std::move(frag);
    f(tree);
    ++count;
  }
  return count;
}

inline std::vector<AxisTree> enumerate_valid_trees(const MixtureModel& model) {
  std::vector<AxisTree> out;
  for_each_valid_tree(model, [&](const AxisTree& t) { out.push_back(t); });
  return out;
}

}  // namespace mmdt
