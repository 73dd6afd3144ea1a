#pragma once

// The mmdt command-line surface. `run` is the whole program minus process plumbing.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mmdt/mmdt.hpp"

namespace mmdt::cli {

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::io:
    case ErrorKind::parse:
      return 2;
    case ErrorKind::validation:
      return 3;
    case ErrorKind::incompatible:
      return 4;
  }
  return 3;
}

inline std::uint64_t default_seed() {
  if (const char* s = std::getenv("MMDT_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      fail(ErrorKind::validation, "MMDT_SEED is not an unsigned integer");
    }
  }
  return 0;
}

struct Config {
  std::string construction;
  std::size_t K = 2, M = 0, q = 2, d = 2, support = 3;
  std::size_t max_retries = 1000;
  double enr_lo = 100.0, enr_hi = 1e6, spread = 0.3;
  std::string model_path, tree_path, data_path, centers_path, out_path, meta_path, sample_path;
  std::size_t sample_n = 0;
  std::uint64_t seed = 0;
  std::size_t samples = 200000;
  unsigned threads = 1;
  std::string objective = "chebyshev";
  int intervals = 16;
  std::string kernel = "gaussian";
  std::vector<double> gamma;
  std::string estimation = "exact";
  std::optional<double> alpha, beta;
  std::string norm = "l1";
  std::vector<std::size_t> sizes{1000, 10000, 100000};
  int repeats = 3;
  bool json = false;
  bool timing = false;
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void emit(const Config& c, std::ostream& out, const std::string& text) {
  if (c.out_path.empty())
    out << text;
  else
    write_file(c.out_path, text);
}

inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

/// Centers from a mixture JSON (component means) or {"centers": [[...], ...]}.
inline std::vector<Vector> load_centers(const std::string& path) {
  const Json j = load_json(path);
  if (j.is_object() && j.contains("centers")) return detail::get_field<std::vector<Vector>>(j, "centers");
  return component_means(mixture_from_json(j));
}

inline KernelSpec kernel_from(const Config& c, std::size_t d) {
  Vector gamma = c.gamma.empty() ? Vector(d, 1.0) : Vector(c.gamma);
  if (gamma.size() == 1 && d > 1) gamma.assign(d, gamma.front());
  require(gamma.size() == d, "--gamma needs one value or one per axis", ErrorKind::incompatible);
  return KernelSpec::uniform(parse_profile(c.kernel), gamma);
}

inline EstimationMode estimation_from(const std::string& s) {
  if (s == "exact") return EstimationMode::exact;
  if (s == "mc") return EstimationMode::mc;
  fail(ErrorKind::validation, "unknown estimation mode \"" + s + "\"");
}

// ---- subcommands --------------------------------------------------------------

inline int cmd_gen(const Config& c, std::ostream& out) {
  MixtureModel model;
  std::optional<AdversarialInstance> inst;
  if (c.construction == "thm2") {
    inst = gen_thm2(c.K, c.M, c.seed, c.max_retries);
  } else if (c.construction == "thm4") {
    inst = gen_thm4(c.K, c.q);
  } else if (c.construction == "b3") {
    inst = gen_b3(c.d);
  } else if (c.construction == "gaussian") {
    model = random_gaussian_mixture(c.K, c.d, c.enr_lo, c.enr_hi, c.seed);
  } else if (c.construction == "discrete") {
    model = random_discrete_mixture(c.K, c.d, c.support, c.spread, true, c.seed);
  } else {
    fail(ErrorKind::validation, "unknown construction \"" + c.construction + "\"");
  }
  if (inst) model = inst->model;
  emit(c, out, dump_json(to_json(model)));
  if (!c.meta_path.empty()) {
    Json meta = inst ? to_json(*inst) : Json{{"format_version", kFormatVersion}, {"construction", c.construction}};
    write_file(c.meta_path, dump_json(meta));
  }
  if (!c.sample_path.empty()) {
    require(c.sample_n >= 1, "--sample needs a positive size");
    write_file(c.sample_path, to_csv(sample(model, c.sample_n, c.seed)));
  }
  return 0;
}

inline int cmd_fit_gmm(const Config& c, std::ostream& out, std::ostream& err) {
  const auto data = load_csv(c.data_path);
  const GmmFit fit = fit_gmm(data, c.K, c.seed);
  err << "log-likelihood " << (fit.log_likelihood.empty() ? 0.0 : fit.log_likelihood.back()) << " after "
      << fit.iterations << " iterations" << (fit.converged ? "" : " (not converged)") << "\n";
  emit(c, out, dump_json(to_json(fit.model)));
  return 0;
}

inline int cmd_moments(const Config& c, std::ostream& out) {
  const auto data = load_csv(c.data_path);
  std::size_t K = 0;
  for (int l : data.labels) K = std::max(K, static_cast<std::size_t>(l) + 1);
  emit(c, out, dump_json(to_json(empirical_moments(data, K))));
  return 0;
}

inline int cmd_build(const Config& c, std::ostream& out, std::ostream& err) {
  const auto model = load_mixture(c.model_path);
  BuildOptions opt;
  opt.objective = parse_objective(c.objective);
  opt.seed = c.seed;
  opt.intervals_per_gap = c.intervals;
  const auto t0 = std::chrono::steady_clock::now();
  const AxisTree tree = build_mmdt(model, opt);
  err << "build_seconds " << seconds_since(t0) << "\n";
  emit(c, out, dump_json(to_json(tree)));
  return 0;
}

inline int cmd_build_kernel(const Config& c, std::ostream& out, std::ostream& err) {
  const auto model = load_mixture(c.model_path);
  const KernelSpec kernel = kernel_from(c, model.dim());
  const auto t0 = std::chrono::steady_clock::now();
  const KernelStats stats = kernel_stats(model, kernel, estimation_from(c.estimation), c.samples, c.seed);
  if (stats.sigma2_spread > 1e-6)
    err << "warning: self-similarity differs across components (spread " << stats.sigma2_spread
        << "); bounds use the minimum\n";
  const KernelTree tree = build_kernel_mmdt(model, kernel, stats, c.seed);
  err << "build_seconds " << seconds_since(t0) << "\n";
  emit(c, out, dump_json(to_json(tree)));
  return 0;
}

inline std::string eval_table(const EvalReport& r) {
  std::ostringstream s;
  s << "mode          " << (r.exact ? "exact" : "monte-carlo") << "\n";
  s << "price         " << fixed(r.price_l1) << "\n";
  s << "price_hat     " << fixed(r.price_l1_hat) << "\n";
  s << "price_l2sq    " << fixed(r.price_l2sq) << "\n";
  s << "error_rate    " << fixed(r.error_rate, 6) << "\n";
  s << "baseline_cost " << fixed(r.baseline_cost, 6) << "\n";
  s << "tree_cost     " << fixed(r.tree_cost, 6) << "\n";
  if (!r.exact) {
    s << "samples       " << r.mc_samples << "\n";
    s << "seed          " << r.mc_seed << "\n";
    s << "radius        " << fixed(r.confidence_radius, 6) << "\n";
  }
  if (r.thm1) s << "thm1_bound    " << fixed(*r.thm1) << "\n";
  if (r.thm3) s << "thm3_bound    " << fixed(*r.thm3, 6) << "\n";
  return s.str();
}

inline int cmd_eval(const Config& c, std::ostream& out) {
  const auto model = load_mixture(c.model_path);
  const Json tj = load_json(c.tree_path);
  if (is_kernel_tree_json(tj)) {
    const KernelTree tree = kernel_tree_from_json(tj);
    const auto r = kernel_price(model, tree.kernel, tree, c.samples, c.seed);
    if (c.json) {
      emit(c, out, dump_json(to_json(r)));
    } else {
      emit(c, out,
           "mode          " + std::string(r.exact ? "exact" : "monte-carlo") + "\nprice         " + fixed(r.price) +
               "\nprice_hat     " + fixed(r.price_hat) + "\nerror_rate    " + fixed(r.error_rate, 6) + "\n");
    }
    return 0;
  }
  const AxisTree tree = axis_tree_from_json(tj);
  EvalReport r = evaluate(model, tree, c.samples, c.seed, c.threads);
  attach_bounds(r, model, c.alpha, c.beta);
  emit(c, out, c.json ? dump_json(to_json(r)) : eval_table(r));
  return 0;
}

inline Norm norm_from(const std::string& s) {
  if (s == "l1") return Norm::l1;
  if (s == "l2sq") return Norm::l2sq;
  fail(ErrorKind::validation, "unknown norm \"" + s + "\"");
}

inline int cmd_eval_data(const Config& c, std::ostream& out) {
  auto data = load_csv(c.data_path);
  const auto tree = axis_tree_from_json(load_json(c.tree_path));
  const auto centered = make_centered(std::move(data.points), load_centers(c.centers_path));
  const auto r = empirical_price_report(centered, tree, norm_from(c.norm));
  if (c.json) {
    Json j{{"format_version", kFormatVersion}, {"norm", c.norm}, {"price", r.price},
           {"baseline_cost", r.baseline_cost}, {"tree_cost", r.tree_cost}, {"empty_leaves", r.empty_leaves}};
    emit(c, out, dump_json(j));
  } else {
    emit(c, out, "price         " + fixed(r.price) + "\nbaseline_cost " + fixed(r.baseline_cost, 6) +
                     "\ntree_cost     " + fixed(r.tree_cost, 6) + "\nempty_leaves  " +
                     std::to_string(r.empty_leaves) + "\n");
  }
  return 0;
}

inline int cmd_baseline_imm(const Config& c, std::ostream& out, std::ostream& err) {
  auto t0 = std::chrono::steady_clock::now();
  auto data = load_csv(c.data_path);
  auto centered = make_centered(std::move(data.points), load_centers(c.centers_path));
  const double load = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  const AxisTree tree = build_imm(centered);
  const double build = seconds_since(t0);
  if (c.timing) err << "load_seconds " << load << "\nbuild_seconds " << build << "\n";
  emit(c, out, dump_json(to_json(tree)));
  return 0;
}

/// Median wall-clock over `repeats` runs of f.
template <typename F>
double median_seconds(int repeats, F&& f) {
  std::vector<double> t;
  for (int r = 0; r < std::max(1, repeats); ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    t.push_back(seconds_since(t0));
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

struct BenchRow {
  std::string method;
  std::size_t n;
  double seconds;
};

/// Timings of MMDT build (given the fitted model), EM fitting and IMM build per dataset size.
inline std::vector<BenchRow> run_bench(const MixtureModel& truth, const std::vector<std::size_t>& sizes,
                                       std::uint64_t seed, int repeats) {
  std::vector<BenchRow> rows;
  for (std::size_t n : sizes) {
    const auto data = sample(truth, n, seed);
    GmmFit fit;
    const double fit_s = median_seconds(1, [&] { fit = fit_gmm(data, truth.size(), seed, 100, 1e-6); });
    const double mmdt_s = median_seconds(repeats, [&] { (void)build_mmdt(fit.model); });
    const auto centered = make_centered(data.points, component_means(fit.model));
    const double imm_s = median_seconds(repeats, [&] { (void)build_imm(centered); });
    rows.push_back({"mmdt", n, mmdt_s});
    rows.push_back({"fit-gmm", n, fit_s});
    rows.push_back({"imm", n, imm_s});
  }
  return rows;
}

inline int cmd_bench(const Config& c, std::ostream& out) {
  const MixtureModel truth = c.model_path.empty() ? random_gaussian_mixture(c.K, c.d, c.enr_lo, c.enr_hi, c.seed)
                                                  : load_mixture(c.model_path);
  require(truth.all_gaussian(), "bench samples from a gaussian mixture");
  std::string csv = "method,n,seconds\n";
  for (const auto& r : run_bench(truth, c.sizes, c.seed, c.repeats))
    csv += r.method + "," + std::to_string(r.n) + "," + format_double(r.seconds) + "\n";
  emit(c, out, csv);
  return 0;
}

inline int cmd_export_dot(const Config& c, std::ostream& out) {
  const Json tj = load_json(c.tree_path);
  emit(c, out, is_kernel_tree_json(tj) ? to_dot(kernel_tree_from_json(tj)) : to_dot(axis_tree_from_json(tj)));
  return 0;
}

// ---- wiring -------------------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Config c;
  CLI::App app{"Explainable clustering with mixture model decision trees", "mmdt"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto seed_opt = [&](CLI::App* s) {
    s->add_option("--seed", c.seed, "random seed (default: $MMDT_SEED or 0)");
  };
  auto out_opt = [&](CLI::App* s) { s->add_option("-o,--out", c.out_path, "output file (default: stdout)"); };

  auto* gen = app.add_subcommand("gen", "generate a mixture: thm2 | thm4 | b3 | gaussian | discrete");
  gen->add_option("construction", c.construction)->required();
  gen->add_option("--K", c.K, "number of components");
  gen->add_option("--M", c.M, "thm2: copies of each center");
  gen->add_option("--q", c.q, "thm4: target ENR");
  gen->add_option("--d", c.d, "dimension (b3, gaussian, discrete)");
  gen->add_option("--support", c.support, "discrete: support size per component");
  gen->add_option("--spread", c.spread, "discrete: offset half-width");
  gen->add_option("--enr-min", c.enr_lo, "gaussian: lower ENR");
  gen->add_option("--enr-max", c.enr_hi, "gaussian: upper ENR");
  gen->add_option("--max-retries", c.max_retries, "thm2: rejection sampling budget");
  gen->add_option("--meta", c.meta_path, "write analytic targets here");
  gen->add_option("--sample", c.sample_n, "also draw this many labeled points");
  gen->add_option("--data", c.sample_path, "CSV path for --sample");
  seed_opt(gen);
  out_opt(gen);

  auto* fit = app.add_subcommand("fit-gmm", "fit a diagonal gaussian mixture by EM");
  fit->add_option("--data", c.data_path)->required();
  fit->add_option("--K", c.K)->required();
  seed_opt(fit);
  out_opt(fit);

  auto* mom = app.add_subcommand("moments", "empirical mixture from ground-truth labels");
  mom->add_option("--data", c.data_path)->required();
  out_opt(mom);

  auto* build = app.add_subcommand("build", "build an axis-aligned tree from a mixture");
  build->add_option("--model", c.model_path)->required();
  build->add_option("--objective", c.objective, "chebyshev | gaussian | exact-discrete");
  build->add_option("--intervals", c.intervals, "grid intervals per gap (>= 3)");
  seed_opt(build);
  out_opt(build);

  auto* bk = app.add_subcommand("build-kernel", "build a kernel-similarity tree");
  bk->add_option("--model", c.model_path)->required();
  bk->add_option("--kernel", c.kernel, "gaussian | laplace");
  bk->add_option("--gamma", c.gamma, "one scale or one per axis")->delimiter(',');
  bk->add_option("--estimation", c.estimation, "exact | mc");
  bk->add_option("--samples", c.samples, "Monte-Carlo pairs");
  seed_opt(bk);
  out_opt(bk);

  auto* ev = app.add_subcommand("eval", "price of explainability and error rate of a tree");
  ev->add_option("--model", c.model_path)->required();
  ev->add_option("--tree", c.tree_path)->required();
  ev->add_option("--samples", c.samples, "Monte-Carlo samples");
  ev->add_option("--threads", c.threads, "worker threads (results do not depend on it)");
  ev->add_option("--alpha", c.alpha);
  ev->add_option("--beta", c.beta);
  ev->add_flag("--json", c.json);
  seed_opt(ev);
  out_opt(ev);

  auto* ed = app.add_subcommand("eval-data", "empirical price of a tree on a dataset");
  ed->add_option("--data", c.data_path)->required();
  ed->add_option("--tree", c.tree_path)->required();
  ed->add_option("--centers", c.centers_path, "mixture JSON or {\"centers\": [...]}")->required();
  ed->add_option("--norm", c.norm, "l1 | l2sq");
  ed->add_flag("--json", c.json);
  out_opt(ed);

  auto* imm = app.add_subcommand("baseline-imm", "IMM tree from a dataset and reference centers");
  imm->add_option("--data", c.data_path)->required();
  imm->add_option("--centers", c.centers_path)->required();
  imm->add_flag("--timing", c.timing, "print per-phase wall-clock to stderr");
  out_opt(imm);

  auto* bench = app.add_subcommand("bench", "timing CSV for MMDT, EM and IMM over dataset sizes");
  bench->add_option("--model", c.model_path, "gaussian mixture to sample from");
  bench->add_option("--K", c.K);
  bench->add_option("--d", c.d);
  bench->add_option("--sizes", c.sizes)->delimiter(',');
  bench->add_option("--repeats", c.repeats);
  seed_opt(bench);
  out_opt(bench);

  auto* dot = app.add_subcommand("export-dot", "Graphviz rendering of a tree");
  dot->add_option("--tree", c.tree_path)->required();
  out_opt(dot);

  try {
    c.seed = default_seed();
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      err << "error: " << e.what() << "\n";
      return 2;
    }
    if (c.threads == 0) c.threads = 1;

    if (gen->parsed()) return cmd_gen(c, out);
    if (fit->parsed()) return cmd_fit_gmm(c, out, err);
    if (mom->parsed()) return cmd_moments(c, out);
    if (build->parsed()) return cmd_build(c, out, err);
    if (bk->parsed()) return cmd_build_kernel(c, out, err);
    if (ev->parsed()) return cmd_eval(c, out);
    if (ed->parsed()) return cmd_eval_data(c, out);
    if (imm->parsed()) return cmd_baseline_imm(c, out, err);
    if (bench->parsed()) return cmd_bench(c, out);
    if (dot->parsed()) return cmd_export_dot(c, out);
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace mmdt::cli
