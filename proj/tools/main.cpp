#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "earlystop/complexity.hpp"
#include "earlystop/errors.hpp"
#include "earlystop/experiments.hpp"
#include "earlystop/report.hpp"
#include "earlystop/ridge.hpp"
#include "earlystop/verify.hpp"
#include "options.hpp"

namespace fs = std::filesystem;
using namespace earlystop;
using earlystop::cli::Options;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitCheck = 4;

struct Outcome {
  std::vector<std::string> files;
  bool check_passed = true;
};

class Outputs {
 public:
  explicit Outputs(const Options& o) : dir_(o.out) {}
  void write(const std::string& name, const std::string& content) {
    write_text_file(dir_ / name, content);
    files_.push_back(name);
  }
  const fs::path& dir() const { return dir_; }
  std::vector<std::string> files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

void report_check(bool ok, const std::string& what) {
  fmt::print("check {}: {}\n", ok ? "PASS" : "FAIL", what);
}

// ---------------------------------------------------------------------------

Outcome cmd_path(const Options& o) {
  const ExperimentConfig cfg = make_config(o);
  const ExperimentContext ctx(cfg);
  const std::size_t iters = *o.iters;

  struct Rows {
    std::vector<double> err, bias, var, sure;
  };
  std::vector<Rows> per_trial(cfg.trials);
  parallel_for(cfg.trials, [&](std::size_t trial) {
    const TrialData d = generate_data(cfg, trial);
    std::optional<EmpiricalKernel> local;
    const EmpiricalKernel* k = ctx.fixed_kernel();
    if (!k) {
      local.emplace(build_empirical_kernel(cfg.kernel, d.x));
      k = &*local;
    }
    const double sigma =
        cfg.sigma_source == SigmaSource::kKnown ? cfg.sigma_true : std::sqrt(estimate_noise_variance(d.y));
    SpectralPath path(*k, cfg.schedule, d.y);
    path.set_truth(d.fstar);
    path.set_noise(d.noise);
    Rows r;
    for (std::size_t t = 1; t <= iters; ++t) {
      path.advance();
      const BiasVarianceSplit bv = path.split();
      r.err.push_back(path.empirical_error());
      r.bias.push_back(bv.squared_bias);
      r.var.push_back(bv.variance);
      r.sure.push_back(path.sure_risk(sigma));
    }
    per_trial[trial] = std::move(r);
  });

  Rows avg{std::vector<double>(iters, 0.0), std::vector<double>(iters, 0.0), std::vector<double>(iters, 0.0),
           std::vector<double>(iters, 0.0)};
  for (const Rows& r : per_trial) {
    for (std::size_t i = 0; i < iters; ++i) {
      avg.err[i] += r.err[i];
      avg.bias[i] += r.bias[i];
      avg.var[i] += r.var[i];
      avg.sure[i] += r.sure[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(cfg.trials);
  CsvTable table({"t", "eta_t", "emp_error", "bias_sq", "variance", "sure_risk"});
  std::vector<double> ts;
  for (std::size_t i = 0; i < iters; ++i) {
    avg.err[i] *= inv;
    avg.bias[i] *= inv;
    avg.var[i] *= inv;
    avg.sure[i] *= inv;
    ts.push_back(static_cast<double>(i + 1));
    table.add_row({static_cast<std::int64_t>(i + 1), cfg.schedule.eta(i + 1), avg.err[i], avg.bias[i], avg.var[i],
                   avg.sure[i]});
  }
  Outputs out(o);
  out.write("path.csv", table.render());
  if (o.svg) {
    out.write("path.svg", render_line_chart({{"empirical error", ts, avg.err},
                                             {"squared bias", ts, avg.bias},
                                             {"variance", ts, avg.var}},
                                            {"Error along the descent path", "iteration t", "error"}));
  }
  Outcome res{out.files()};
  if (o.check) {
    bool ok = iters > 0;
    if (ok) {
      const auto it = std::min_element(avg.err.begin(), avg.err.end());
      const std::size_t t_min = static_cast<std::size_t>(it - avg.err.begin()) + 1;
      ok = t_min >= 5 && t_min <= 40;
      report_check(ok, fmt::format("emp_error minimum at t = {} (want 5..40)", t_min));
    } else {
      report_check(false, "no iterations recorded");
    }
    res.check_passed = ok;
  }
  return res;
}

Outcome cmd_compare_rules(const Options& o) {
  const ExperimentConfig cfg = make_config(o);
  const auto summary = compare_rules(cfg, o.n_list);
  CsvTable table({"n", "rule", "mean_mse", "stderr_mse", "mean_T"});
  for (const auto& s : summary)
    table.add_row({static_cast<std::int64_t>(s.n), std::string(rule_name(s.rule)), s.mean_mse,
                   optional_cell(s.stderr_mse), s.mean_T});
  Outputs out(o);
  out.write("compare.csv", table.render());
  if (o.svg) {
    std::vector<ChartSeries> series;
    for (StoppingRuleKind rule : cfg.rules) {
      ChartSeries cs{std::string(rule_name(rule)), {}, {}};
      for (const auto& s : summary)
        if (s.rule == rule) {
          cs.x.push_back(static_cast<double>(s.n));
          cs.y.push_back(s.mean_mse);
        }
      series.push_back(std::move(cs));
    }
    ChartOptions co{"Mean squared error by stopping rule", "sample size n", "mean squared error"};
    co.log_x = co.log_y = true;
    out.write("compare.svg", render_line_chart(series, co));
  }
  Outcome res{out.files()};
  if (o.check) {
    bool ok = true;
    bool any = false;
    for (std::size_t n : o.n_list) {
      std::optional<double> dd, best;
      for (const auto& s : summary) {
        if (s.n != n) continue;
        if (s.rule == StoppingRuleKind::kDataDependent) dd = s.mean_mse;
        if (s.rule == StoppingRuleKind::kHoldOut || s.rule == StoppingRuleKind::kSure)
          best = best ? std::min(*best, s.mean_mse) : s.mean_mse;
      }
      if (!dd || !best) continue;
      any = true;
      const bool pass = *dd <= 1.1 * *best;
      ok &= pass;
      report_check(pass, fmt::format("n = {}: data-dependent {:.6g} vs 1.1 x {:.6g}", n, *dd, *best));
    }
    if (!any) report_check(false, "comparison needs data_dependent and holdout or sure");
    res.check_passed = ok && any;
  }
  return res;
}

Outcome cmd_rate(const Options& o) {
  ExperimentConfig cfg = make_config(o);
  const StoppingRuleKind rule = parse_rule(o.rule);
  const RateSweep sweep = rate_sweep(cfg, o.n_list, rule);
  CsvTable table({"n", "mean_mse", "stderr_mse", "mse_pow_neg_1_5", "n_times_mse"});
  for (const auto& r : sweep.rows)
    table.add_row({static_cast<std::int64_t>(r.n), r.mean_mse, optional_cell(r.stderr_mse), r.inv_pow,
                   static_cast<double>(r.n) * r.mean_mse});
  CsvTable fit({"slope", "intercept", "r_squared", "no_fit"});
  if (sweep.fit)
    fit.add_row({sweep.fit->slope, sweep.fit->intercept, sweep.fit->r_squared, std::int64_t{0}});
  else
    fit.add_row({std::monostate{}, std::monostate{}, std::monostate{}, std::int64_t{1}});
  Outputs out(o);
  out.write("rate.csv", table.render());
  out.write("rate_fit.csv", fit.render());
  if (sweep.fit)
    fmt::print("fit: slope {:.6g} intercept {:.6g} R^2 {:.6f}\n", sweep.fit->slope, sweep.fit->intercept,
               sweep.fit->r_squared);
  else
    fmt::print("fit: none (single sample size)\n");
  if (o.svg) {
    ChartSeries cs{"MSE^-3/2", {}, {}};
    for (const auto& r : sweep.rows) {
      cs.x.push_back(static_cast<double>(r.n));
      cs.y.push_back(r.inv_pow);
    }
    out.write("rate.svg", render_line_chart({cs}, {"Rate law", "sample size n", "MSE^(-3/2)"}));
  }
  Outcome res{out.files()};
  if (o.check) {
    const bool finite_rank = cfg.kernel.population_decay() && cfg.kernel.population_decay()->rank().has_value();
    bool ok;
    if (finite_rank) {
      double lo = INFINITY, hi = 0;
      for (const auto& r : sweep.rows) {
        lo = std::min(lo, static_cast<double>(r.n) * r.mean_mse);
        hi = std::max(hi, static_cast<double>(r.n) * r.mean_mse);
      }
      ok = hi <= 2.0 * lo;
      report_check(ok, fmt::format("n*MSE spread {:.4g} (want <= 2)", hi / lo));
    } else {
      ok = sweep.fit && sweep.fit->r_squared >= 0.95;
      report_check(ok, fmt::format("R^2 {} (want >= 0.95)", sweep.fit ? format_real(sweep.fit->r_squared) : "NA"));
    }
    res.check_passed = ok;
  }
  return res;
}

Outcome cmd_krr(const Options& o) {
  const ExperimentConfig cfg = make_config(o);
  const ExperimentContext ctx(cfg);
  const std::size_t iters = *o.iters;
  if (o.nu_points < 1) throw ConfigError("--nu-points must be at least 1");
  if (!(o.nu_min > 0.0) || o.nu_max < o.nu_min) throw ConfigError("need 0 < nu-min <= nu-max");
  std::vector<double> nus;
  for (std::size_t k = 0; k < o.nu_points; ++k)
    nus.push_back(o.nu_points == 1 ? o.nu_min
                                   : o.nu_min + (o.nu_max - o.nu_min) * static_cast<double>(k) /
                                                    static_cast<double>(o.nu_points - 1));

  std::vector<std::vector<double>> krr_err(cfg.trials), gd_err(cfg.trials);
  parallel_for(cfg.trials, [&](std::size_t trial) {
    const TrialData d = generate_data(cfg, trial);
    std::optional<EmpiricalKernel> local;
    const EmpiricalKernel* k = ctx.fixed_kernel();
    if (!k) {
      local.emplace(build_empirical_kernel(cfg.kernel, d.x));
      k = &*local;
    }
    const RidgePath rp = krr_path(*k, d.y, nus, std::span<const double>(d.fstar));
    krr_err[trial] = rp.errors;
    SpectralPath path(*k, cfg.schedule, d.y);
    path.set_truth(d.fstar);
    for (std::size_t t = 1; t <= iters; ++t) {
      path.advance();
      gd_err[trial].push_back(path.empirical_error());
    }
  });
  std::vector<double> krr_mean(nus.size(), 0.0), gd_mean(iters, 0.0);
  for (std::size_t tr = 0; tr < cfg.trials; ++tr) {
    for (std::size_t k = 0; k < nus.size(); ++k) krr_mean[k] += krr_err[tr][k];
    for (std::size_t t = 0; t < iters; ++t) gd_mean[t] += gd_err[tr][t];
  }
  for (double& v : krr_mean) v /= static_cast<double>(cfg.trials);
  for (double& v : gd_mean) v /= static_cast<double>(cfg.trials);

  CsvTable table({"index", "nu", "krr_error", "t", "eta_t", "descent_error"});
  const std::size_t rows = std::max(nus.size(), iters);
  std::vector<double> ts;
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<CsvCell> row{static_cast<std::int64_t>(i + 1)};
    if (i < nus.size()) {
      row.push_back(nus[i]);
      row.push_back(krr_mean[i]);
    } else {
      row.push_back(std::monostate{});
      row.push_back(std::monostate{});
    }
    if (i < iters) {
      row.push_back(static_cast<std::int64_t>(i + 1));
      row.push_back(cfg.schedule.eta(i + 1));
      row.push_back(gd_mean[i]);
      ts.push_back(static_cast<double>(i + 1));
    } else {
      row.push_back(std::monostate{});
      row.push_back(std::monostate{});
      row.push_back(std::monostate{});
    }
    table.add_row(std::move(row));
  }
  std::optional<double> rho;
  if (nus.size() == iters && iters >= 2) rho = spearman(krr_mean, gd_mean);
  CsvTable summary({"spearman", "nu_points", "iterations", "trials"});
  summary.add_row({optional_cell(rho), static_cast<std::int64_t>(nus.size()), static_cast<std::int64_t>(iters),
                   static_cast<std::int64_t>(cfg.trials)});
  Outputs out(o);
  out.write("krr.csv", table.render());
  out.write("krr_summary.csv", summary.render());
  fmt::print("spearman: {}\n", rho ? format_real(*rho) : "NA");
  if (o.svg) {
    std::vector<double> t_as_eta;
    for (std::size_t t = 1; t <= iters; ++t) t_as_eta.push_back(cfg.schedule.eta(t));
    out.write("krr.svg", render_line_chart({{"ridge (nu)", nus, krr_mean}, {"descent (eta_t)", t_as_eta, gd_mean}},
                                           {"Ridge path vs descent path", "nu or eta_t", "error"}));
  }
  Outcome res{out.files()};
  if (o.check) {
    res.check_passed = rho && *rho >= 0.8;
    report_check(res.check_passed, fmt::format("spearman {} (want >= 0.8)", rho ? format_real(*rho) : "NA"));
  }
  return res;
}

Outcome cmd_critical_radius(const Options& o) {
  const ExperimentConfig cfg = make_config(o);
  const ExperimentContext ctx(cfg);
  const TrialData d = generate_data(cfg, 0);
  std::optional<EmpiricalKernel> local;
  const EmpiricalKernel* k = ctx.fixed_kernel();
  if (!k) {
    local.emplace(build_empirical_kernel(cfg.kernel, d.x));
    k = &*local;
  }
  const double sigma =
      cfg.sigma_source == SigmaSource::kKnown ? cfg.sigma_true : std::sqrt(estimate_noise_variance(d.y));
  const EmpiricalComplexity ec(*k);
  const CriticalRadius cr = critical_empirical_radius(ec, sigma);
  const StoppingRecord rec = stop_data_dependent(cfg.schedule, ec, sigma, cfg.effective_cap());
  fmt::print("sigma: {}\neps_hat: {}\nresidual: {}\nT_hat: {}{}\n", format_real(sigma), format_real(cr.value),
             format_real(cr.residual), rec.T, rec.triggered ? "" : " (cap reached)");
  Outputs out(o);
  if (o.csv) {
    CsvTable t({"n", "sigma", "eps_hat", "residual", "T_hat", "triggered"});
    t.add_row({static_cast<std::int64_t>(cfg.n), sigma, cr.value, cr.residual, static_cast<std::int64_t>(rec.T),
               static_cast<std::int64_t>(rec.triggered ? 1 : 0)});
    out.write("critical_radius.csv", t.render());
  }
  Outcome res{out.files()};
  if (o.check) {
    res.check_passed = cr.residual <= 1e-10;
    report_check(res.check_passed, fmt::format("fixed-point residual {} (want <= 1e-10)", format_real(cr.residual)));
  }
  return res;
}

Outcome cmd_verify(const Options& o) {
  const auto reports = run_property_suite(o.samples, o.seed);
  CsvTable t({"property", "instances", "violations", "worst_margin", "pass"});
  bool ok = true;
  for (const auto& r : reports) {
    ok &= r.pass;
    t.add_row({r.name, static_cast<std::int64_t>(r.instances), static_cast<std::int64_t>(r.violations),
               r.worst_margin, static_cast<std::int64_t>(r.pass ? 1 : 0)});
    fmt::print("{:<28} instances {:>6} violations {:>4} worst margin {:.3e} {}\n", r.name, r.instances,
               r.violations, r.worst_margin, r.pass ? "ok" : "VIOLATED");
  }
  Outputs out(o);
  out.write("verify.csv", t.render());
  Outcome res{out.files()};
  if (o.check) res.check_passed = ok;
  return res;
}

Outcome dispatch(Options o) {
  cli::resolve_defaults(o);
  const auto start = std::chrono::steady_clock::now();
  Outcome res;
  if (o.command == "path") res = cmd_path(o);
  else if (o.command == "compare-rules") res = cmd_compare_rules(o);
  else if (o.command == "rate") res = cmd_rate(o);
  else if (o.command == "krr") res = cmd_krr(o);
  else if (o.command == "critical-radius") res = cmd_critical_radius(o);
  else if (o.command == "verify") res = cmd_verify(o);
  else throw ConfigError(fmt::format("unknown command '{}'", o.command));
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  nlohmann::json manifest;
  manifest["tool_version"] = cli::kToolVersion;
  manifest["subcommand"] = o.command;
  manifest["seed"] = o.seed;
  manifest["config"] = cli::to_json(o);
  manifest["outputs"] = res.files;
  manifest["wall_clock_seconds"] = seconds;
  write_text_file(fs::path(o.out) / "manifest.json", manifest.dump(2) + "\n");
  return res;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--kernel", o.kernel, "sobolev1 | gaussian:<bw> | poly:<d>");
  sub->add_option("--target", o.target, "abs_shift | quadratic");
  sub->add_option("--design", o.design, "fixed | random");
  sub->add_option("--sigma-source", o.sigma_source, "estimated | known");
  sub->add_option("--n", o.n, "sample size")->check(CLI::PositiveNumber);
  sub->add_option("--sigma", o.sigma, "noise standard deviation")->check(CLI::NonNegativeNumber);
  sub->add_option("--step", o.step, "constant step size")->check(CLI::PositiveNumber);
  sub->add_option("--seed", o.seed, "64-bit seed");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--cap", o.cap, "iteration cap (default 10 n)")->check(CLI::PositiveNumber);
  sub->add_flag("--check", o.check, "exit 4 if the acceptance threshold is missed");
}

void add_trials(CLI::App* sub, Options& o) {
  sub->add_option("--trials", o.trials, "Monte Carlo trials")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Early-stopped kernel gradient descent experiments"};
  app.require_subcommand(1);
  Options o;
  std::string manifest_path;
  std::optional<std::string> replay_out;

  auto* path = app.add_subcommand("path", "error, bias, variance and SURE along one descent path");
  add_common(path, o);
  add_trials(path, o);
  path->add_option("--iters", o.iters, "iterations")->check(CLI::NonNegativeNumber);
  path->add_flag("--svg", o.svg, "also write an SVG plot");

  auto* cmp = app.add_subcommand("compare-rules", "mean squared error of the four stopping rules");
  add_common(cmp, o);
  add_trials(cmp, o);
  cmp->add_option("--n-list", o.n_list, "sample sizes")->delimiter(',');
  cmp->add_option("--rules", o.rules, "data_dependent,holdout,sure,oracle")->delimiter(',');
  cmp->add_flag("--svg", o.svg, "also write an SVG plot");

  auto* rate = app.add_subcommand("rate", "mean squared error at the stopping time against n");
  add_common(rate, o);
  add_trials(rate, o);
  rate->add_option("--n-list", o.n_list, "sample sizes, ascending")->delimiter(',');
  rate->add_option("--rule", o.rule, "stopping rule to evaluate");
  rate->add_flag("--svg", o.svg, "also write an SVG plot");

  auto* krr = app.add_subcommand("krr", "kernel ridge path against the descent path");
  add_common(krr, o);
  add_trials(krr, o);
  krr->add_option("--iters", o.iters, "descent iterations")->check(CLI::NonNegativeNumber);
  krr->add_option("--nu-min", o.nu_min, "smallest ridge parameter");
  krr->add_option("--nu-max", o.nu_max, "largest ridge parameter");
  krr->add_option("--nu-points", o.nu_points, "ridge grid size");
  krr->add_flag("--svg", o.svg, "also write an SVG plot");

  auto* crit = app.add_subcommand("critical-radius", "critical empirical radius and stopping time");
  add_common(crit, o);
  crit->add_flag("--csv", o.csv, "also write critical_radius.csv");

  auto* ver = app.add_subcommand("verify", "randomized property suite");
  ver->add_option("--samples", o.samples, "instances per property")->check(CLI::PositiveNumber);
  ver->add_option("--seed", o.seed, "64-bit seed");
  ver->add_option("--out", o.out, "output directory");
  ver->add_flag("--check", o.check, "exit 4 on any violation");

  auto* replay = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  replay->add_option("--manifest", manifest_path, "manifest.json written by an earlier run")->required();
  replay->add_option("--out", replay_out, "write outputs here instead of the recorded directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    Outcome res;
    if (replay->parsed()) {
      std::ifstream in(manifest_path);
      if (!in) throw ConfigError(fmt::format("cannot read manifest '{}'", manifest_path));
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("malformed manifest: {}", e.what()));
      }
      if (!j.contains("config")) throw ConfigError("manifest has no config section");
      Options recorded = cli::options_from_json(j.at("config"));
      if (replay_out) recorded.out = *replay_out;
      res = dispatch(recorded);
    } else {
      o.command = app.get_subcommands().front()->get_name();
      res = dispatch(o);
    }
    return res.check_passed ? kExitOk : kExitCheck;
  } catch (const ConfigError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const InvalidStep& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    fmt::print(stderr, "numerical error: {}\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitNumerical;
  }
}
