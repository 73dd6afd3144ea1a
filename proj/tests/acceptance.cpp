// Acceptance checks. Usage: acceptance <criterion 1..11 | all>
// Prints one "criterion N: PASS|FAIL ..." line per criterion; exit status 1 on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "commands.hpp"
#include "mmdt/mmdt.hpp"

#ifndef MMDT_DATA_DIR
#define MMDT_DATA_DIR "data"
#endif

using namespace mmdt;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 6) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

unsigned threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// Average ranks, ties shared.
std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t t = i; t <= j; ++t) r[idx[t]] = 0.5 * static_cast<double>(i + j);
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// ---- 1 ------------------------------------------------------------------------

Outcome c1() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::size_t d : {2, 4, 8, 16, 64}) {
    const auto inst = gen_b3(d);
    const auto r = exact_eval_discrete(inst.model, b3_canonical_tree(inst.model));
    worst = std::max(worst, std::abs(r.price_l1 - (1.5 - 1.0 / static_cast<double>(d))));
  }
  const double secs = since(t0);
  return {worst <= 1e-12 && secs < 1.0, "max |price - (1.5 - 1/d)| = " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// ---- 2 ------------------------------------------------------------------------

Outcome c2() {
  const auto t0 = Clock::now();
  bool floor_ok = true, attained = true;
  std::string detail;
  for (auto [K, q] : std::vector<std::pair<std::size_t, std::size_t>>{{2, 2}, {2, 8}, {3, 3}, {3, 12}}) {
    const auto inst = gen_thm4(K, q);
    double best = 1.0;
    const std::size_t count = for_each_valid_tree(inst.model, [&](const AxisTree& t) {
      best = std::min(best, exact_eval_discrete(inst.model, t).error_rate);
    });
    const double floor = thm4_floor(K, static_cast<double>(q));
    const double canon = exact_eval_discrete(inst.model, thm4_canonical_tree(inst.model)).error_rate;
    floor_ok = floor_ok && best >= floor - 1e-12;
    attained = attained && std::abs(canon - floor) <= 1e-12;
    detail += "(K=" + std::to_string(K) + ",q=" + std::to_string(q) + ": trees " + std::to_string(count) +
              ", min " + fmt(best) + ", canonical " + fmt(canon) + ", floor " + fmt(floor) + ") ";
  }
  const double secs = since(t0);
  detail += fmt(secs) + " s";
  if (!floor_ok) detail = "min below floor; " + detail;
  if (!attained) detail = "canonical tree misses floor; " + detail;
  return {floor_ok && attained && secs < 60.0, detail};
}

// ---- 3, 4, 11: gaussian battery -------------------------------------------------

struct BatteryRow {
  MixtureModel model;
  AxisTree tree;
  EvalReport report;
  double q = 0.0;
  double exact_error = 0.0;
};

const std::vector<BatteryRow>& battery() {
  static const std::vector<BatteryRow> rows = [] {
    std::vector<BatteryRow> out;
    for (std::uint64_t s = 0; s < 50; ++s) {
      const std::size_t K = 2 + s % 4;
      const std::size_t d = 2 + (s * 7 + 3) % 7;
      BatteryRow r;
      r.model = random_gaussian_mixture(K, d, 1e2, 1e6, 1000 + s);
      BuildOptions opt;
      opt.objective = Objective::chebyshev;
      r.tree = build_mmdt(r.model, opt);
      r.report = mc_eval(r.model, r.tree, 200000, derive_seed(77, s), threads());
      r.q = enr(r.model);
      r.exact_error = exact_error_gaussian(r.model, r.tree);
      out.push_back(std::move(r));
    }
    return out;
  }();
  return rows;
}

Outcome c3() {
  const auto t0 = Clock::now();
  const auto& rows = battery();
  std::size_t ok = 0;
  double worst = 0.0;
  for (const auto& r : rows) {
    const double bound = thm1_bound(r.model.alpha, std::sqrt(M_PI / 2.0), r.model.size(), r.q);
    const double lo = r.report.price_l1 - 3.0 * r.report.confidence_radius;
    if (lo <= bound) ++ok;
    worst = std::max(worst, lo / bound);
  }
  const double secs = since(t0);
  return {ok == rows.size() && secs < 300.0, std::to_string(ok) + "/" + std::to_string(rows.size()) +
                                                 " within bound, max (price - 3r)/bound = " + fmt(worst) + ", " +
                                                 fmt(secs) + " s"};
}

Outcome c4() {
  const auto& rows = battery();
  std::size_t ok = 0;
  for (const auto& r : rows) {
    const double lo = r.report.error_rate - 3.0 * r.report.error_confidence_radius;
    if (lo <= thm3_bound(r.model.alpha, r.model.size(), r.q)) ++ok;
  }
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rows[a].q < rows[b].q; });
  std::vector<double> decile, mean_err;
  for (std::size_t g = 0; g < 10; ++g) {
    const std::size_t b = g * rows.size() / 10, e = (g + 1) * rows.size() / 10;
    double s = 0.0;
    for (std::size_t t = b; t < e; ++t) s += rows[order[t]].exact_error;
    decile.push_back(static_cast<double>(g));
    mean_err.push_back(s / static_cast<double>(e - b));
  }
  const double rho = spearman(decile, mean_err);
  return {ok == rows.size() && rho < 0.0,
          std::to_string(ok) + "/" + std::to_string(rows.size()) + " within bound, decile rank correlation " + fmt(rho)};
}

Outcome c11() {
  const auto& rows = battery();
  std::size_t ok = 0;
  double worst = 0.0;
  for (const auto& r : rows) {
    const double env = l2sq_envelope(r.model.alpha, r.model.size());
    if (r.report.price_l2sq <= env) ++ok;
    worst = std::max(worst, r.report.price_l2sq);
  }
  return {ok == rows.size(), std::to_string(ok) + "/" + std::to_string(rows.size()) +
                                 " within envelope, max squared-cost price " + fmt(worst)};
}

// ---- 5 ------------------------------------------------------------------------

Outcome c5() {
  const auto t0 = Clock::now();
  Rng rng = make_rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t ok = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t K = 2 + static_cast<std::size_t>(trial % 7);
    std::vector<double> mu{0.0, 1.0};
    while (mu.size() < K) mu.push_back(unit(rng));
    std::sort(mu.begin(), mu.end());
    const auto f = [&](double t) {
      double s = 0.0;
      for (double m : mu) s += 1.0 / ((t - m) * (t - m));
      return s;
    };
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g + 1 < K; ++g) {
      double a = mu[g], b = mu[g + 1];
      if (!(b > a)) continue;
      // f is convex on each open gap
      const int grid = 64;
      double arg = 0.5 * (a + b), val = f(arg);
      for (int i = 1; i < grid; ++i) {
        const double t = a + (b - a) * i / grid;
        if (f(t) < val) val = f(arg = t);
      }
      double lo = std::max(a, arg - (b - a) / grid), hi = std::min(b, arg + (b - a) / grid);
      for (int it = 0; it < 200; ++it) {
        const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (f(m1) < f(m2)) hi = m2;
        else lo = m1;
      }
      best = std::min({best, val, f(0.5 * (lo + hi))});
    }
    const double delta = 1.0 / (2.0 * static_cast<double>(K - 1));
    double bound = 0.0;
    for (std::size_t k = 1; k <= (K + 1) / 2; ++k) {
      const double o = static_cast<double>(2 * k - 1) * delta;
      bound += 2.0 / (o * o);
    }
    if (best <= bound * (1.0 + 1e-9)) ++ok;
    worst = std::max(worst, best / bound);
  }
  const double secs = since(t0);
  return {ok == 1000 && secs < 30.0,
          std::to_string(ok) + "/1000 configurations, max min f / bound = " + fmt(worst, 12) + ", " + fmt(secs) + " s"};
}

// ---- 6 ------------------------------------------------------------------------

Outcome c6() {
  std::size_t ok = 0;
  double worst = -1e300;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const std::size_t K = 2 + s % 3, d = 1 + s % 3, support = 1 + s % 4;
    const auto model = random_discrete_mixture(K, d, support, 1.0, true, 6000 + s);
    const auto kernel = KernelSpec::uniform(Profile::gaussian, Vector(d, 1.0));
    const auto st = kernel_stats(model, kernel);
    double gamma = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t l = k + 1; l < K; ++l) gamma = std::min(gamma, mmd(model, kernel, k, l));
    const double rhs = st.sigma2 - gamma * gamma / (2.0 * static_cast<double>(d));
    if (st.tau <= rhs + 1e-9) ++ok;
    worst = std::max(worst, st.tau - rhs);
  }
  return {ok == 200, std::to_string(ok) + "/200 satisfy tau <= sigma2 - gamma^2/(2d), max excess " + fmt(worst)};
}

// ---- 7 ------------------------------------------------------------------------

Outcome c7() {
  const auto t0 = Clock::now();
  std::size_t ok = 0, draws = 0;
  double worst = 0.0;
  std::uint64_t seed = 7000;
  for (int m = 0; m < 30; ++m) {
    for (;; ++seed) {
      ++draws;
      const std::size_t K = 2 + seed % 3, d = 1 + seed % 3, support = 1 + seed % 3;
      const auto model = random_discrete_mixture(K, d, support, 0.5, true, seed);
      const auto kernel = KernelSpec::uniform(Profile::gaussian, Vector(d, 1.0));
      const auto st = kernel_stats(model, kernel);
      if (!(st.tau < st.sigma2 && st.sigma2 < 1.0)) continue;
      double total = 0.0;
      bool built = true;
      for (std::uint64_t p = 0; p < 20 && built; ++p) {
        try {
          total += kernel_price(model, kernel, build_kernel_mmdt(model, kernel, st, p)).price;
        } catch (const Error&) {
          built = false;
        }
      }
      if (!built) continue;
      const double avg = total / 20.0;
      const double bound = thm5_bound(model.alpha, K, st.sigma2, st.eps2, st.tau);
      if (avg <= bound) ++ok;
      worst = std::max(worst, avg / bound);
      ++seed;
      break;
    }
  }
  const double secs = since(t0);
  return {ok == 30 && secs < 300.0, std::to_string(ok) + "/30 within bound (" + std::to_string(draws) +
                                        " draws), max avg price / bound = " + fmt(worst) + ", " + fmt(secs) + " s"};
}

// ---- 8 ------------------------------------------------------------------------

GmmFit best_fit(const LabeledDataset& data, std::size_t K) {
  GmmFit best;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (std::uint64_t s = 0; s < 5; ++s) {
    GmmFit f = fit_gmm(data, K, s);
    if (!f.log_likelihood.empty() && f.log_likelihood.back() > best_ll) {
      best_ll = f.log_likelihood.back();
      best = std::move(f);
    }
  }
  return best;
}

std::pair<double, double> mmdt_and_imm_price(const LabeledDataset& data, std::size_t K) {
  const GmmFit fit = best_fit(data, K);
  BuildOptions opt;
  opt.objective = Objective::gaussian;
  const AxisTree tree = build_mmdt(fit.model, opt);
  const auto centered = make_centered(data.points, component_means(fit.model));
  return {empirical_price(centered, tree, Norm::l2sq), empirical_price(centered, build_imm(centered), Norm::l2sq)};
}

LabeledDataset standardized(LabeledDataset data) {
  Points& x = data.points;
  for (std::size_t j = 0; j < x.cols; ++j) {
    double m = 0.0, v = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) m += x(i, j);
    m /= static_cast<double>(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) v += (x(i, j) - m) * (x(i, j) - m);
    const double sd = std::sqrt(v / static_cast<double>(x.rows));
    for (std::size_t i = 0; i < x.rows; ++i) x(i, j) = (x(i, j) - m) / sd;
  }
  return data;
}

Outcome c8() {
  const auto wine = load_csv(std::string(MMDT_DATA_DIR) + "/wine.csv");
  const auto [mw, iw] = mmdt_and_imm_price(wine, 3);
  // diagnostic only
  const auto [ms, is] = mmdt_and_imm_price(standardized(wine), 3);
  const auto truth = random_gaussian_mixture(5, 2, 1e2, 1e3, 8);
  const auto [mg, ig] = mmdt_and_imm_price(sample(truth, 10000, 8), 5);
  const bool ok = mw >= 1.0 && mw <= 1.12 && std::abs(iw - mw) <= 0.05 && mg <= 1.05;
  return {ok, "wine: MMDT " + fmt(mw) + ", IMM " + fmt(iw) + " (standardized: MMDT " + fmt(ms) + ", IMM " +
                  fmt(is) + "); gaussians (N=1e4): MMDT " + fmt(mg) + ", IMM " + fmt(ig)};
}

// ---- 9 ------------------------------------------------------------------------

template <typename F>
double median_time(int repeats, int inner, F&& f) {
  std::vector<double> t;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = Clock::now();
    for (int i = 0; i < inner; ++i) f();
    t.push_back(since(t0) / inner);
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

Outcome c9() {
  const auto truth = random_gaussian_mixture(5, 2, 1e2, 1e3, 9);
  std::vector<double> mm, imm;
  for (std::size_t n : {1000, 10000, 100000}) {
    const auto data = sample(truth, n, 9);
    const GmmFit fit = fit_gmm(data, 5, 9, 100, 1e-6);
    mm.push_back(median_time(31, 200, [&] { (void)build_mmdt(fit.model); }));
    const auto centered = make_centered(data.points, component_means(fit.model));
    imm.push_back(median_time(n >= 100000 ? 5 : 11, 1, [&] { (void)build_imm(centered); }));
  }
  const double spread = *std::max_element(mm.begin(), mm.end()) / *std::min_element(mm.begin(), mm.end());
  const bool monotone = imm[0] < imm[1] && imm[1] < imm[2];
  const double factor = imm[2] / mm[2];
  std::string detail = "MMDT s:";
  for (double v : mm) detail += " " + fmt(v, 3);
  detail += " (max/min " + fmt(spread, 3) + "); IMM s:";
  for (double v : imm) detail += " " + fmt(v, 3);
  detail += "; IMM/MMDT at 1e5 = " + fmt(factor, 4);
  return {spread < 2.0 && monotone && factor >= 10.0, detail};
}

// ---- 10 -----------------------------------------------------------------------

std::string call(const std::vector<std::string>& args, int& code) {
  std::ostringstream out, err;
  code = cli::run(args, out, err);
  return out.str();
}

Outcome c10() {
  std::size_t axis_ok = 0, kernel_ok = 0, kernel_refused = 0;
  std::string first_issue;
  for (std::uint64_t s = 0; s < 1000; ++s) {
    const std::size_t K = 2 + s % 5, d = 1 + s % 6;
    MixtureModel model;
    BuildOptions opt;
    opt.seed = s;
    if (s % 3 == 0) {
      model = random_discrete_mixture(K, d, 1 + s % 4, 0.5, s % 2 == 0, s);
      opt.objective = Objective::exact_discrete;
    } else {
      model = random_gaussian_mixture(K, d, 1.0, 1e4, s);
      opt.objective = s % 3 == 1 ? Objective::chebyshev : Objective::gaussian;
    }
    const auto tree = build_mmdt(model, opt);
    const std::string issue = check_tree(tree, component_means(model));
    if (issue.empty()) ++axis_ok;
    else if (first_issue.empty()) first_issue = "axis seed " + std::to_string(s) + ": " + issue;

    const auto dm = random_discrete_mixture(std::min<std::size_t>(K, 4), std::min<std::size_t>(d, 3), 1 + s % 3, 0.5,
                                            true, 50000 + s);
    const auto kernel = KernelSpec::uniform(s % 2 ? Profile::laplace : Profile::gaussian, Vector(dm.dim(), 1.0));
    try {
      const auto kt = build_kernel_mmdt(dm, kernel, kernel_stats(dm, kernel), s);
      const std::string kissue = check_kernel_tree(kt);
      if (kissue.empty()) ++kernel_ok;
      else if (first_issue.empty()) first_issue = "kernel seed " + std::to_string(s) + ": " + kissue;
    } catch (const Error&) {
      ++kernel_refused;
      ++kernel_ok;
    }
  }

  const fs::path dir = fs::temp_directory_path() / "mmdt_acceptance_c10";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto p = [&](const std::string& n) { return (dir / n).string(); };
  int code = 0, bad = 0;
  const auto run_ok = [&](const std::vector<std::string>& a) {
    const std::string out = call(a, code);
    if (code != 0) ++bad;
    return out;
  };
  run_ok({"gen", "gaussian", "--K", "4", "--d", "3", "--seed", "10", "-o", p("g.json")});
  run_ok({"gen", "discrete", "--K", "3", "--d", "2", "--support", "3", "--seed", "10", "-o", p("d.json")});
  std::vector<std::string> a1, a2;
  for (int rep = 0; rep < 2; ++rep) {
    auto& a = rep == 0 ? a1 : a2;
    a.push_back(run_ok({"build", "--model", p("g.json"), "--seed", "3"}));
    a.push_back(run_ok({"build-kernel", "--model", p("d.json"), "--seed", "3"}));
    a.push_back(run_ok({"build-kernel", "--model", p("d.json"), "--estimation", "mc", "--samples", "2000", "--seed", "3"}));
  }
  mmdt::write_file(p("t.json"), a1[0]);
  const std::string e1 = run_ok({"eval", "--model", p("g.json"), "--tree", p("t.json"), "--samples", "50000", "--json",
                                 "--seed", "4", "--threads", "1"});
  const std::string e8 = run_ok({"eval", "--model", p("g.json"), "--tree", p("t.json"), "--samples", "50000", "--json",
                                 "--seed", "4", "--threads", "8"});
  const std::string e8b = run_ok({"eval", "--model", p("g.json"), "--tree", p("t.json"), "--samples", "50000", "--json",
                                  "--seed", "4", "--threads", "8"});
  fs::remove_all(dir);
  const bool identical = a1 == a2 && e1 == e8 && e8 == e8b && !e1.empty();

  std::string detail = "axis " + std::to_string(axis_ok) + "/1000, kernel " + std::to_string(kernel_ok) +
                       "/1000 (" + std::to_string(kernel_refused) + " refused as unsplittable), artifacts " +
                       (identical ? "byte-identical" : "DIFFER") + ", cli failures " + std::to_string(bad);
  if (!first_issue.empty()) detail += "; " + first_issue;
  return {axis_ok == 1000 && kernel_ok == 1000 && identical && bad == 0, detail};
}

const std::vector<std::function<Outcome()>> kCriteria = {c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11};

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::size_t> which;
  const std::string arg = argc > 1 ? argv[1] : "all";
  if (arg == "all") {
    for (std::size_t i = 1; i <= kCriteria.size(); ++i) which.push_back(i);
  } else {
    const std::size_t n = std::stoul(arg);
    if (n < 1 || n > kCriteria.size()) {
      std::cerr << "criterion must be 1.." << kCriteria.size() << " or all\n";
      return 2;
    }
    which.push_back(n);
  }
  bool all = true;
  for (std::size_t n : which) {
    Outcome o;
    try {
      o = kCriteria[n - 1]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << " " << o.detail << std::endl;
  }
  return all ? 0 : 1;
}
