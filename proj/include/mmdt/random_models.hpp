#pragma once

// Seeded random mixtures for property batteries and benchmarks.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "mmdt/error.hpp"
#include "mmdt/mixture.hpp"
#include "mmdt/rng.hpp"

namespace mmdt {

/// Diagonal Gaussians sharing per-axis deviations drawn from [0.5, 1.5], with means rescaled so
/// that enr(model) is log-uniform in [enr_lo, enr_hi].
inline MixtureModel random_gaussian_mixture(std::size_t K, std::size_t d, double enr_lo, double enr_hi,
                                            std::uint64_t seed) {
  require(K >= 2 && d >= 1, "need K >= 2 and d >= 1");
  require(enr_lo > 0.0 && enr_lo <= enr_hi, "need 0 < enr_lo <= enr_hi");
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Vector weights(K);
  for (auto& w : weights) w = 0.5 + unit(rng);
  double total = 0.0;
  for (double w : weights) total += w;
  for (auto& w : weights) w /= total;

  Vector stddev(d);
  for (auto& s : stddev) s = 0.5 + unit(rng);
  std::vector<Vector> means(K, Vector(d));
  for (auto& m : means)
    for (auto& v : m) v = normal(rng);
  const double target = std::exp(std::log(enr_lo) + unit(rng) * (std::log(enr_hi) - std::log(enr_lo)));

  std::vector<Component> comps;
  for (std::size_t k = 0; k < K; ++k) comps.push_back(Component::gaussian(means[k], stddev));
  const double current = enr(make_mixture(comps, weights));
  require(current > 0.0, "degenerate random means");
  const double scale = std::sqrt(target / current);
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t j = 0; j < d; ++j) comps[k].mean[j] = means[k][j] * scale;
  return make_mixture(std::move(comps), std::move(weights));
}

/// Finite-discrete components. With `translate`, every component is the same random shape
/// shifted to its own center; otherwise each draws its own shape. Offsets lie in [-spread, spread].
inline MixtureModel random_discrete_mixture(std::size_t K, std::size_t d, std::size_t support, double spread,
                                            bool translate, std::uint64_t seed) {
  require(K >= 2 && d >= 1 && support >= 1, "need K >= 2, d >= 1, support >= 1");
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto draw_shape = [&] {
    std::vector<Vector> offsets(support, Vector(d));
    Vector mass(support);
    double total = 0.0;
    for (std::size_t s = 0; s < support; ++s) {
      for (auto& v : offsets[s]) v = spread * (2.0 * unit(rng) - 1.0);
      mass[s] = 0.2 + unit(rng);
      total += mass[s];
    }
    for (auto& m : mass) m /= total;
    return std::pair{offsets, mass};
  };

  auto shape = draw_shape();
  std::vector<Component> comps;
  for (std::size_t k = 0; k < K; ++k) {
    Vector center(d);
    for (auto& v : center) v = 4.0 * unit(rng) - 2.0;
    if (!translate && k > 0) shape = draw_shape();
    std::vector<Vector> pts = shape.first;
    for (auto& p : pts)
      for (std::size_t j = 0; j < d; ++j) p[j] += center[j];
    comps.push_back(Component::discrete(std::move(pts), shape.second));
  }
  Vector weights(K);
  for (auto& w : weights) w = 0.5 + unit(rng);
  double total = 0.0;
  for (double w : weights) total += w;
  for (auto& w : weights) w /= total;
  return make_mixture(std::move(comps), std::move(weights));
}

}  // namespace mmdt
