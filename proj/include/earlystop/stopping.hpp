#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "earlystop/complexity.hpp"
#include "earlystop/descent.hpp"
#include "earlystop/kernels.hpp"

namespace earlystop {

enum class StoppingRuleKind { kDataDependent, kHoldOut, kSure, kOracle };

std::string_view rule_name(StoppingRuleKind rule);
StoppingRuleKind parse_rule(std::string_view name);

struct StoppingRecord {
  StoppingRuleKind rule = StoppingRuleKind::kDataDependent;
  std::size_t T = 0;
  // Oracle/SURE/hold-out: risk at t = 0, 1, ... as far as it was evaluated.
  // Data-dependent: margin R_hat(1/sqrt(eta_t)) - 1/(2 e sigma eta_t) for t = 1, 2, ...
  std::vector<double> risk_trace;
  bool triggered = false;
  // First-increase rule fired at t = 0, i.e. the literal stopping time was -1.
  bool clamped = false;
};

// T_hat = (first t >= 1 with R_hat(1/sqrt(eta_t)) > 1/(factor sigma eta_t)) - 1.
// DegenerateKernel if every eigenvalue is zero; triggered = false at the cap.
StoppingRecord stop_data_dependent(const StepSchedule& schedule, const EmpiricalComplexity& ec, double sigma,
                                   std::size_t cap, double factor = kEmpiricalCriticalFactor);

// Literal first-increase rule over a risk sequence produced on demand:
// T = (first t with risk(t+1) > risk(t)) - 1, evaluated for t + 1 <= cap.
StoppingRecord first_increase(StoppingRuleKind rule, const std::function<double(std::size_t)>& risk,
                              std::size_t cap);

// R_SU = (1/n) { n sigma^2 + y^T (S~^t)^2 y - 2 sigma^2 trace(S~^t) }, S~^t = U S^t U^T.
double sure_risk(const StepSchedule& schedule, const EmpiricalKernel& kernel, std::span<const double> y,
                 double sigma, std::size_t t);

StoppingRecord stop_sure(const StepSchedule& schedule, const EmpiricalKernel& kernel, std::span<const double> y,
                         double sigma, std::size_t cap);

StoppingRecord stop_oracle(const StepSchedule& schedule, const EmpiricalKernel& kernel, std::span<const double> y,
                           std::span<const double> fstar_vals, std::size_t cap);

struct Sample {
  std::vector<double> x;
  std::vector<double> y;
};

struct HoldoutSplit {
  Sample train;
  Sample test;
};

// Shuffles indices with `permutation` applied (a permutation of 0..n-1) and
// takes the first floor(n/2) as training data; both halves sorted by x.
HoldoutSplit split_holdout(const Sample& full, std::span<const std::size_t> permutation);

struct HoldoutResult {
  StoppingRecord record;
  std::vector<double> train_x;  // sorted training design
  Vector omega;                 // training representer weights at T
};

// Gradient descent on the training half; R_HO(f^t) = (1/n) sum_{test} (y_i - f_tr^t(x_i))^2
// with n the full sample size.
HoldoutResult stop_holdout(const HoldoutSplit& split, const Kernel& kernel, const StepSchedule& schedule,
                           std::size_t cap);

// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double top_eigenvalue_power(const Matrix& symmetric, int max_iterations = 1000, double tolerance = 1e-13);

}  // namespace earlystop
