#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "earlystop/kernels.hpp"
#include "earlystop/linalg.hpp"

namespace earlystop {

// Step sizes alpha_0, alpha_1, ... and running sums eta_t = sum_{tau<t} alpha_tau.
//
// A custom list is continued with its last entry, so a positive last entry
// gives infinite travel.
class StepSchedule {
 public:
  static StepSchedule constant(double alpha);
  static StepSchedule custom(std::vector<double> steps);

  double alpha(std::size_t t) const;
  double eta(std::size_t t) const;
  bool is_constant() const noexcept { return steps_.empty(); }
  double constant_value() const noexcept { return constant_; }
  const std::vector<double>& steps() const noexcept { return steps_; }

  // Boundedness against this kernel: 0 <= alpha <= min(1, 1/lambda_1).
  // Throws InvalidStep naming the first offending index.
  void validate(double top_eigenvalue) const;

 private:
  StepSchedule() = default;
  double constant_ = 0.0;
  std::vector<double> steps_;
  std::vector<double> prefix_;  // prefix_[t] = eta_t for t <= steps_.size()
};

// Largest admissible step for a kernel with top eigenvalue `top`.
double max_valid_step(double top_eigenvalue);

struct DescentState {
  std::size_t t = 0;
  Vector fvals;  // f^t(x_1..x_n) = sqrt(n) K omega
  Vector omega;  // representer weights
  double eta = 0.0;

  static DescentState initial(std::size_t n);
};

// One gradient step: omega <- omega - alpha (K omega - y/sqrt(n)) and
// f <- (I - alpha K) f + alpha K y. Both stay consistent with f = sqrt(n) K omega.
DescentState descend_step(const DescentState& state, const EmpiricalKernel& kernel,
                          std::span<const double> y, double alpha);

// Same recursion using only the kernel matrix (no eigendecomposition).
// `top_eigenvalue` is used for the step-size check.
DescentState descend_step(const DescentState& state, const Matrix& kernel_matrix,
                          double top_eigenvalue, std::span<const double> y, double alpha);

// S^t_jj = prod_{tau<t} (1 - alpha_tau lambda_j) for all n eigenvalues.
Vector shrinkage_factors(const StepSchedule& schedule, std::span<const double> eigenvalues,
                         std::size_t t);

struct ShrinkageDiagnostics {
  std::size_t t = 0;
  double eta = 0.0;
  Vector diag;  // length r: entries for the nonzero eigenvalues
};

ShrinkageDiagnostics shrinkage_diagonal(const StepSchedule& schedule, const EmpiricalKernel& kernel,
                                        std::size_t t);

double empirical_norm_error(std::span<const double> fvals, std::span<const double> fstar_vals);

struct BiasVarianceSplit {
  double squared_bias = 0.0;
  double variance = 0.0;
};

BiasVarianceSplit bias_variance_split(const StepSchedule& schedule, const EmpiricalKernel& kernel,
                                      std::size_t t, std::span<const double> fstar_vals,
                                      std::span<const double> noise);

// f^t in spectral form, U (I - S^t) U^T y.
Vector spectral_fit(const StepSchedule& schedule, const EmpiricalKernel& kernel,
                    std::span<const double> y, std::size_t t);

// Off-design evaluation f(x) = (1/sqrt(n)) sum_j omega_j K(x, x_j).
struct Representer {
  const Kernel* kernel = nullptr;
  std::span<const double> design;
  std::span<const double> omega;

  double operator()(double x) const;
};

struct QuadratureGrid {
  double lower = 0.0;
  double upper = 1.0;
  std::size_t points = 10001;
};

// Trapezoid approximation of E[(f(X) - f*(X))^2] for X ~ Uniform[lower, upper].
double population_norm_error(const Representer& f, const std::function<double(double)>& fstar,
                             const QuadratureGrid& grid = {});

// Same quadrature with the kernel sections on the grid cached; reused across
// many weight vectors for one design.
class PopulationErrorEvaluator {
 public:
  PopulationErrorEvaluator(const Kernel& kernel, std::span<const double> design,
                           const std::function<double(double)>& fstar, const QuadratureGrid& grid = {});

  double operator()(std::span<const double> omega) const;

 private:
  Matrix sections_;  // grid x design, scaled by 1/sqrt(n)
  Vector fstar_on_grid_;
  Vector weights_;
};

// ||f||_H^2 = (1/n) f^T K^+ f for f in the span of the kernel sections, using
// the eigen-pseudoinverse on eigenvalues above the rank threshold.
double hilbert_norm_squared(const EmpiricalKernel& kernel, std::span<const double> fvals);

// Incremental spectral view of the descent path: steps S^t one iteration at a
// time and evaluates errors, SURE and the bias/variance split in O(n) per step.
class SpectralPath {
 public:
  SpectralPath(const EmpiricalKernel& kernel, const StepSchedule& schedule, std::span<const double> y);

  void set_truth(std::span<const double> fstar_vals);
  void set_noise(std::span<const double> noise);

  std::size_t t() const noexcept { return t_; }
  double eta() const noexcept { return eta_; }
  void advance();

  const Vector& shrinkage() const noexcept { return shrink_; }
  Vector fvals() const;
  // ||f^t - f*||_n^2 from the rotated coordinates; needs set_truth.
  double empirical_error() const;
  double sure_risk(double sigma) const;
  BiasVarianceSplit split() const;

 private:
  const EmpiricalKernel* kernel_;
  const StepSchedule* schedule_;
  Vector ry_;      // U^T y
  Vector rfstar_;  // U^T f*
  Vector rnoise_;  // U^T w
  Vector shrink_;
  std::size_t t_ = 0;
  double eta_ = 0.0;
};

}  // namespace earlystop
