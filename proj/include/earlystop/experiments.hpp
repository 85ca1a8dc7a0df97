#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "earlystop/descent.hpp"
#include "earlystop/kernels.hpp"
#include "earlystop/stopping.hpp"

namespace earlystop {

enum class DesignKind { kFixed, kRandomUniform };
enum class SigmaSource { kKnown, kEstimated };

struct TargetFunction {
  std::string name;
  std::function<double(double)> f;

  // |x - 1/2| - 1/2; unit Hilbert norm for the first-order Sobolev kernel.
  static TargetFunction abs_shift();
  // 0.5 (1 + x/2)^2 - 0.7, inside the span of the degree-2 polynomial kernel.
  static TargetFunction quadratic();
  // "abs_shift" or "quadratic".
  static TargetFunction parse(const std::string& name);
};

struct ExperimentConfig {
  std::size_t n = 100;
  DesignKind design = DesignKind::kFixed;
  TargetFunction fstar = TargetFunction::abs_shift();
  double sigma_true = 1.0;
  Kernel kernel = Kernel::sobolev();
  StepSchedule schedule = StepSchedule::constant(0.25);
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  SigmaSource sigma_source = SigmaSource::kEstimated;
  std::vector<StoppingRuleKind> rules = {StoppingRuleKind::kDataDependent, StoppingRuleKind::kHoldOut,
                                         StoppingRuleKind::kSure, StoppingRuleKind::kOracle};
  // Iteration cap for every rule; 10 n when unset.
  std::optional<std::size_t> cap;
  bool population_error = false;
  QuadratureGrid grid;

  // ConfigError on n < 4, trials < 1, negative sigma, empty rule list.
  void validate() const;
  std::size_t effective_cap() const { return cap.value_or(10 * n); }
};

// Design points sorted ascending with aligned responses.
struct TrialData {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> fstar;
  std::vector<double> noise;
};

TrialData generate_data(const ExperimentConfig& config, std::uint64_t trial_id);

// First-order difference estimator (1/(2(n-1))) sum (y_i - y_{i-1})^2 on
// responses ordered by design point.
double estimate_noise_variance(std::span<const double> sorted_y);

struct RuleOutcome {
  StoppingRecord record;
  double empirical_error = 0.0;
  std::optional<double> population_error;
};

struct TrialResult {
  std::uint64_t trial_id = 0;
  std::vector<RuleOutcome> outcomes;  // same order as config.rules
  double eps_hat = 0.0;
  double sigma_hat = 0.0;  // noise level actually used by the rules

  const RuleOutcome* find(StoppingRuleKind rule) const;
};

// Holds what every trial of one configuration shares: the eigendecomposition
// for a fixed design and the quadrature sections for population errors.
class ExperimentContext {
 public:
  explicit ExperimentContext(ExperimentConfig config);
  ~ExperimentContext();
  ExperimentContext(ExperimentContext&&) noexcept;
  ExperimentContext& operator=(ExperimentContext&&) noexcept;

  const ExperimentConfig& config() const noexcept { return config_; }
  // Kernel for the fixed design, or nullptr for random designs.
  const EmpiricalKernel* fixed_kernel() const noexcept;

  TrialResult run(std::uint64_t trial_id) const;
  // ||f^t - f*||_n^2 of one trial for t = 0..iterations.
  std::vector<double> error_trace(std::uint64_t trial_id, std::size_t iterations) const;

 private:
  struct Cache;
  ExperimentConfig config_;
  std::unique_ptr<Cache> cache_;
};

TrialResult run_trial(const ExperimentConfig& config, std::uint64_t trial_id);

// All trials of a configuration, indexed by trial id, fanned across
// EARLYSTOP_THREADS worker threads (default: hardware concurrency).
std::vector<TrialResult> run_trials(const ExperimentConfig& config);

// Trial average of the empirical error trace for t = 0..iterations.
std::vector<double> mean_error_trace(const ExperimentConfig& config, std::size_t iterations);

std::size_t worker_threads();

// Runs body(i) for i in [0, count) on worker_threads() threads.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

// Statistics helpers.
double mean(std::span<const double> v);
// Sample standard deviation over sqrt(count); nullopt for fewer than 2 values.
std::optional<double> standard_error(std::span<const double> v);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y);
// Pearson correlation of tie-averaged ranks.
double spearman(std::span<const double> a, std::span<const double> b);

struct RateRow {
  std::size_t n = 0;
  double mean_mse = 0.0;
  std::optional<double> stderr_mse;
  double inv_pow = 0.0;  // mean_mse^(-3/2)
};

struct RateSweep {
  std::vector<RateRow> rows;
  std::optional<LinearFit> fit;  // MSE^(-3/2) on n
  bool no_fit = false;           // fewer than two sample sizes
};

// Mean squared error at the `rule` stopping time for each n.
RateSweep rate_sweep(const ExperimentConfig& base, std::span<const std::size_t> n_values,
                     StoppingRuleKind rule = StoppingRuleKind::kDataDependent);

struct RuleSummary {
  std::size_t n = 0;
  StoppingRuleKind rule = StoppingRuleKind::kDataDependent;
  double mean_mse = 0.0;
  std::optional<double> stderr_mse;
  double mean_T = 0.0;
};

std::vector<RuleSummary> compare_rules(const ExperimentConfig& base, std::span<const std::size_t> n_values);

}  // namespace earlystop
