#include "earlystop/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include <fmt/format.h>

#include "earlystop/complexity.hpp"
#include "earlystop/errors.hpp"
#include "earlystop/rng.hpp"
#include "earlystop/simd.hpp"

namespace earlystop {

TargetFunction TargetFunction::abs_shift() {
  return {"abs_shift", [](double x) { return std::abs(x - 0.5) - 0.5; }};
}

TargetFunction TargetFunction::quadratic() {
  return {"quadratic", [](double x) {
            const double u = 1.0 + 0.5 * x;
            return 0.5 * u * u - 0.7;
          }};
}

TargetFunction TargetFunction::parse(const std::string& name) {
  if (name == "abs_shift") return abs_shift();
  if (name == "quadratic") return quadratic();
  throw ConfigError(fmt::format("unknown target function '{}'", name));
}

void ExperimentConfig::validate() const {
  if (n < 4) throw ConfigError(fmt::format("n must be at least 4; got {}", n));
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (!(sigma_true >= 0.0) || !std::isfinite(sigma_true))
    throw ConfigError(fmt::format("sigma must be nonnegative; got {}", sigma_true));
  if (rules.empty()) throw ConfigError("no stopping rules selected");
  if (!fstar.f) throw ConfigError("target function is empty");
}

TrialData generate_data(const ExperimentConfig& config, std::uint64_t trial_id) {
  const std::size_t n = config.n;
  TrialData d;
  d.x.resize(n);
  if (config.design == DesignKind::kFixed) {
    for (std::size_t i = 0; i < n; ++i) d.x[i] = static_cast<double>(i + 1) / static_cast<double>(n);
  } else {
    CounterRng rng(config.seed, trial_id, static_cast<std::uint64_t>(RngStream::kDesign));
    for (double& v : d.x) v = rng.uniform();
    std::sort(d.x.begin(), d.x.end());
  }
  CounterRng noise_rng(config.seed, trial_id, static_cast<std::uint64_t>(RngStream::kNoise));
  d.fstar.resize(n);
  d.noise.resize(n);
  d.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.fstar[i] = config.fstar.f(d.x[i]);
    d.noise[i] = config.sigma_true * noise_rng.normal();
    d.y[i] = d.fstar[i] + d.noise[i];
  }
  return d;
}

double estimate_noise_variance(std::span<const double> sorted_y) {
  const std::size_t n = sorted_y.size();
  if (n < 4) throw ConfigError(fmt::format("noise estimate needs at least 4 responses; got {}", n));
  double acc = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double d = sorted_y[i] - sorted_y[i - 1];
    acc += d * d;
  }
  return acc / (2.0 * static_cast<double>(n - 1));
}

const RuleOutcome* TrialResult::find(StoppingRuleKind rule) const {
  for (const auto& o : outcomes)
    if (o.record.rule == rule) return &o;
  return nullptr;
}

struct ExperimentContext::Cache {
  std::optional<EmpiricalKernel> kernel;
  std::optional<PopulationErrorEvaluator> population;
};

ExperimentContext::ExperimentContext(ExperimentConfig config)
    : config_(std::move(config)), cache_(std::make_unique<Cache>()) {
  config_.validate();
  if (config_.design == DesignKind::kFixed) {
    const TrialData d = generate_data(config_, 0);
    cache_->kernel.emplace(build_empirical_kernel(config_.kernel, d.x));
    config_.schedule.validate(cache_->kernel->top_eigenvalue());
    if (config_.population_error)
      cache_->population.emplace(config_.kernel, cache_->kernel->design(), config_.fstar.f, config_.grid);
  }
}

ExperimentContext::~ExperimentContext() = default;
ExperimentContext::ExperimentContext(ExperimentContext&&) noexcept = default;
ExperimentContext& ExperimentContext::operator=(ExperimentContext&&) noexcept = default;

const EmpiricalKernel* ExperimentContext::fixed_kernel() const noexcept {
  return cache_->kernel ? &*cache_->kernel : nullptr;
}

namespace {

// Representer weights of the spectral fit U (I - S) U^T y: omega = U diag((1 - S_j)/lambda_j) U^T y / sqrt(n).
Vector spectral_weights(const EmpiricalKernel& kernel, const StepSchedule& schedule, std::span<const double> ry,
                        std::size_t t) {
  const auto& lam = kernel.eigenvalues();
  Vector z(lam.size(), 0.0);
  for (std::size_t j = 0; j < kernel.rank(); ++j) {
    double one_minus_s;
    if (schedule.is_constant()) {
      // 1 - (1 - a l)^t without cancellation for small a l.
      one_minus_s = -std::expm1(static_cast<double>(t) * std::log1p(-schedule.constant_value() * lam[j]));
    } else {
      double s = 1.0;
      for (std::size_t tau = 0; tau < t; ++tau) s *= 1.0 - schedule.alpha(tau) * lam[j];
      one_minus_s = 1.0 - s;
    }
    z[j] = one_minus_s / lam[j] * ry[j];
  }
  Vector omega = kernel.reconstruct(z);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(kernel.size()));
  for (double& v : omega) v *= inv_sqrt_n;
  return omega;
}

// Risk values along one shared spectral path, extended on demand.
class SharedTraces {
 public:
  SharedTraces(const EmpiricalKernel& kernel, const StepSchedule& schedule, std::span<const double> y,
               std::span<const double> fstar, double sigma)
      : path_(kernel, schedule, y), sigma_(sigma) {
    path_.set_truth(fstar);
    record();
  }

  double error(std::size_t t) {
    extend(t);
    return error_[t];
  }
  double sure(std::size_t t) {
    extend(t);
    return sure_[t];
  }

 private:
  void record() {
    error_.push_back(path_.empirical_error());
    sure_.push_back(path_.sure_risk(sigma_));
  }
  void extend(std::size_t t) {
    while (error_.size() <= t) {
      path_.advance();
      record();
    }
  }

  SpectralPath path_;
  double sigma_;
  std::vector<double> error_;
  std::vector<double> sure_;
};

template <class E>
[[noreturn]] void rethrow_as(const E& e, std::uint64_t trial_id) {
  throw E(fmt::format("trial {}: {}", trial_id, e.what()));
}

}  // namespace

TrialResult ExperimentContext::run(std::uint64_t trial_id) const {
  try {
    const ExperimentConfig& cfg = config_;
    const TrialData data = generate_data(cfg, trial_id);
    std::optional<EmpiricalKernel> local;
    const EmpiricalKernel* kernel = fixed_kernel();
    if (kernel == nullptr) {
      local.emplace(build_empirical_kernel(cfg.kernel, data.x));
      cfg.schedule.validate(local->top_eigenvalue());
      kernel = &*local;
    }
    const std::size_t cap = cfg.effective_cap();

    TrialResult out;
    out.trial_id = trial_id;
    out.sigma_hat =
        cfg.sigma_source == SigmaSource::kKnown ? cfg.sigma_true : std::sqrt(estimate_noise_variance(data.y));
    if (!(out.sigma_hat > 0.0)) throw ConfigError("noise level is zero; the stopping rules are undefined");

    const EmpiricalComplexity ec(*kernel);
    out.eps_hat = critical_empirical_radius(ec, out.sigma_hat).value;

    SharedTraces traces(*kernel, cfg.schedule, data.y, data.fstar, out.sigma_hat);
    const Vector ry = kernel->project(data.y);

    auto population = [&](std::span<const double> omega, std::span<const double> design) -> std::optional<double> {
      if (!cfg.population_error) return std::nullopt;
      if (cache_->population && design.data() == kernel->design().data()) return (*cache_->population)(omega);
      return population_norm_error(Representer{&cfg.kernel, design, omega}, cfg.fstar.f, cfg.grid);
    };

    for (StoppingRuleKind rule : cfg.rules) {
      RuleOutcome o;
      switch (rule) {
        case StoppingRuleKind::kDataDependent:
          o.record = stop_data_dependent(cfg.schedule, ec, out.sigma_hat, cap);
          break;
        case StoppingRuleKind::kSure:
          o.record = first_increase(rule, [&](std::size_t t) { return traces.sure(t); }, cap);
          break;
        case StoppingRuleKind::kOracle:
          o.record = first_increase(rule, [&](std::size_t t) { return traces.error(t); }, cap);
          break;
        case StoppingRuleKind::kHoldOut:
          break;
      }
      if (rule == StoppingRuleKind::kHoldOut) {
        CounterRng rng(cfg.seed, trial_id, static_cast<std::uint64_t>(RngStream::kHoldoutSplit));
        const auto perm = random_permutation(cfg.n, rng);
        const HoldoutSplit split = split_holdout(Sample{data.x, data.y}, perm);
        HoldoutResult ho = stop_holdout(split, cfg.kernel, cfg.schedule, cap);
        const Matrix sections = cross_gram(cfg.kernel, data.x, ho.train_x);
        const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(ho.train_x.size()));
        double acc = 0.0;
        for (std::size_t i = 0; i < cfg.n; ++i) {
          const double d = simd::dot(sections.row(i), ho.omega) * inv_sqrt_m - data.fstar[i];
          acc += d * d;
        }
        o.record = std::move(ho.record);
        o.empirical_error = acc / static_cast<double>(cfg.n);
        o.population_error = population(ho.omega, ho.train_x);
      } else {
        o.empirical_error = traces.error(o.record.T);
        if (cfg.population_error) {
          const Vector omega = spectral_weights(*kernel, cfg.schedule, ry, o.record.T);
          o.population_error = population(omega, kernel->design());
        }
      }
      out.outcomes.push_back(std::move(o));
    }
    return out;
  } catch (const ConfigError& e) {
    rethrow_as(e, trial_id);
  } catch (const NumericalError& e) {
    throw NumericalError(fmt::format("trial {}: {}", trial_id, e.what()), e.iterations());
  } catch (const PsdViolation& e) {
    rethrow_as(e, trial_id);
  } catch (const DegenerateKernel& e) {
    rethrow_as(e, trial_id);
  } catch (const InvalidStep& e) {
    rethrow_as(e, trial_id);
  } catch (const DimensionMismatch& e) {
    rethrow_as(e, trial_id);
  }
}

std::vector<double> ExperimentContext::error_trace(std::uint64_t trial_id, std::size_t iterations) const {
  const TrialData data = generate_data(config_, trial_id);
  std::optional<EmpiricalKernel> local;
  const EmpiricalKernel* kernel = fixed_kernel();
  if (kernel == nullptr) {
    local.emplace(build_empirical_kernel(config_.kernel, data.x));
    config_.schedule.validate(local->top_eigenvalue());
    kernel = &*local;
  }
  SpectralPath path(*kernel, config_.schedule, data.y);
  path.set_truth(data.fstar);
  std::vector<double> trace;
  trace.reserve(iterations + 1);
  trace.push_back(path.empirical_error());
  for (std::size_t t = 0; t < iterations; ++t) {
    path.advance();
    trace.push_back(path.empirical_error());
  }
  return trace;
}

TrialResult run_trial(const ExperimentConfig& config, std::uint64_t trial_id) {
  return ExperimentContext(config).run(trial_id);
}

std::size_t worker_threads() {
  std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("EARLYSTOP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
      throw ConfigError(fmt::format("EARLYSTOP_THREADS must be a positive integer; got '{}'", env));
    return static_cast<std::size_t>(v);
  }
  return hw;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min(worker_threads(), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::size_t first_index = count;
  std::mutex mu;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        // Keep the error of the lowest index so failures are reproducible.
        std::lock_guard lock(mu);
        if (i < first_index) {
          first_index = i;
          first_error = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<TrialResult> run_trials(const ExperimentConfig& config) {
  const ExperimentContext ctx(config);
  std::vector<TrialResult> results(config.trials);
  parallel_for(config.trials, [&](std::size_t i) { results[i] = ctx.run(i); });
  return results;
}

std::vector<double> mean_error_trace(const ExperimentConfig& config, std::size_t iterations) {
  const ExperimentContext ctx(config);
  std::vector<std::vector<double>> per_trial(config.trials);
  parallel_for(config.trials, [&](std::size_t i) { per_trial[i] = ctx.error_trace(i, iterations); });
  // Summed in trial order so the result does not depend on scheduling.
  std::vector<double> acc(iterations + 1, 0.0);
  for (const auto& tr : per_trial)
    for (std::size_t t = 0; t <= iterations; ++t) acc[t] += tr[t];
  for (double& v : acc) v /= static_cast<double>(config.trials);
  return acc;
}

double mean(std::span<const double> v) {
  if (v.empty()) throw DimensionMismatch("mean of an empty sequence");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::optional<double> standard_error(std::span<const double> v) {
  if (v.size() < 2) return std::nullopt;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double k = static_cast<double>(v.size());
  return std::sqrt(ss / (k - 1.0) / k);
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionMismatch("linear_fit: length mismatch");
  if (x.size() < 2) throw ConfigError("linear_fit needs at least two points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw ConfigError("linear_fit: all x values coincide");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return fit;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("spearman: length mismatch");
  if (a.size() < 2) throw ConfigError("spearman needs at least two points");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double ma = mean(ra), mb = mean(rb);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw ConfigError("spearman: constant sequence");
  return sab / std::sqrt(saa * sbb);
}

RateSweep rate_sweep(const ExperimentConfig& base, std::span<const std::size_t> n_values, StoppingRuleKind rule) {
  if (n_values.empty()) throw ConfigError("rate sweep needs at least one sample size");
  for (std::size_t i = 1; i < n_values.size(); ++i)
    if (n_values[i] <= n_values[i - 1]) throw ConfigError("sample sizes must be strictly ascending");
  RateSweep sweep;
  for (std::size_t n : n_values) {
    ExperimentConfig cfg = base;
    cfg.n = n;
    cfg.rules = {rule};
    const auto results = run_trials(cfg);
    std::vector<double> mse;
    mse.reserve(results.size());
    for (const auto& r : results) mse.push_back(r.outcomes.front().empirical_error);
    RateRow row;
    row.n = n;
    row.mean_mse = mean(mse);
    row.stderr_mse = standard_error(mse);
    row.inv_pow = std::pow(row.mean_mse, -1.5);
    sweep.rows.push_back(row);
  }
  if (sweep.rows.size() < 2) {
    sweep.no_fit = true;
  } else {
    std::vector<double> xs, ys;
    for (const auto& r : sweep.rows) {
      xs.push_back(static_cast<double>(r.n));
      ys.push_back(r.inv_pow);
    }
    sweep.fit = linear_fit(xs, ys);
  }
  return sweep;
}

std::vector<RuleSummary> compare_rules(const ExperimentConfig& base, std::span<const std::size_t> n_values) {
  std::vector<RuleSummary> out;
  for (std::size_t n : n_values) {
    ExperimentConfig cfg = base;
    cfg.n = n;
    const auto results = run_trials(cfg);
    for (std::size_t k = 0; k < cfg.rules.size(); ++k) {
      std::vector<double> mse, ts;
      for (const auto& r : results) {
        mse.push_back(r.outcomes[k].empirical_error);
        ts.push_back(static_cast<double>(r.outcomes[k].record.T));
      }
      RuleSummary s;
      s.n = n;
      s.rule = cfg.rules[k];
      s.mean_mse = mean(mse);
      s.stderr_mse = standard_error(mse);
      s.mean_T = mean(ts);
      out.push_back(s);
    }
  }
  return out;
}

}  // namespace earlystop
