#include "earlystop/descent.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "earlystop/errors.hpp"
#include "earlystop/simd.hpp"

namespace earlystop {

namespace {
// Slack on the step-size bound so alpha = 1/lambda_1 computed in floating point passes.
constexpr double kStepSlack = 1e-12;
}  // namespace

// ---------------------------------------------------------------------------
// StepSchedule

StepSchedule StepSchedule::constant(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw ConfigError(fmt::format("constant step must be positive (infinite travel); got {}", alpha));
  }
  StepSchedule s;
  s.constant_ = alpha;
  return s;
}

StepSchedule StepSchedule::custom(std::vector<double> steps) {
  if (steps.empty()) throw ConfigError("custom step schedule is empty");
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!(steps[i] >= 0.0) || !std::isfinite(steps[i])) {
      throw ConfigError(fmt::format("step {} is negative or not finite", i));
    }
    if (i > 0 && steps[i] > steps[i - 1]) {
      throw ConfigError(fmt::format("steps must be non-increasing (step {} > step {})", i, i - 1));
    }
  }
  if (!(steps.back() > 0.0)) throw ConfigError("last custom step must be positive for infinite travel");
  StepSchedule s;
  s.constant_ = steps.back();
  s.prefix_.assign(steps.size() + 1, 0.0);
  for (std::size_t i = 0; i < steps.size(); ++i) s.prefix_[i + 1] = s.prefix_[i] + steps[i];
  s.steps_ = std::move(steps);
  return s;
}

double StepSchedule::alpha(std::size_t t) const {
  if (steps_.empty() || t >= steps_.size()) return constant_;
  return steps_[t];
}

double StepSchedule::eta(std::size_t t) const {
  if (steps_.empty()) return constant_ * static_cast<double>(t);
  if (t < prefix_.size()) return prefix_[t];
  return prefix_.back() + constant_ * static_cast<double>(t - steps_.size());
}

double max_valid_step(double top_eigenvalue) {
  return top_eigenvalue > 1.0 ? 1.0 / top_eigenvalue : 1.0;
}

void StepSchedule::validate(double top_eigenvalue) const {
  const double bound = max_valid_step(top_eigenvalue) * (1.0 + kStepSlack);
  const double first = steps_.empty() ? constant_ : steps_.front();
  if (first > bound) {
    throw InvalidStep(fmt::format("step size {} exceeds min(1, 1/lambda_1) = {}", first,
                                  max_valid_step(top_eigenvalue)));
  }
}

// ---------------------------------------------------------------------------
// Recursion

DescentState DescentState::initial(std::size_t n) {
  DescentState s;
  s.fvals.assign(n, 0.0);
  s.omega.assign(n, 0.0);
  return s;
}

DescentState descend_step(const DescentState& state, const Matrix& kernel_matrix, double top_eigenvalue,
                          std::span<const double> y, double alpha) {
  const std::size_t n = kernel_matrix.rows();
  if (y.size() != n || state.fvals.size() != n || state.omega.size() != n) {
    throw DimensionMismatch("descend_step: state, kernel and response sizes differ");
  }
  const double bound = max_valid_step(top_eigenvalue);
  if (!(alpha >= 0.0) || alpha > bound * (1.0 + kStepSlack)) {
    throw InvalidStep(fmt::format("step {} outside [0, {}]", alpha, bound));
  }

  DescentState next;
  next.t = state.t + 1;
  next.eta = state.eta + alpha;

  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  // omega^{t+1} = omega^t - alpha (K omega^t - y / sqrt(n))
  Vector k_omega = multiply(kernel_matrix, state.omega);
  next.omega = state.omega;
  simd::axpy(next.omega, -alpha, k_omega);
  simd::axpy(next.omega, alpha * inv_sqrt_n, y);

  // f^{t+1} = f^t - alpha K (f^t - y)
  Vector resid = state.fvals;
  simd::axpy(resid, -1.0, y);
  Vector k_resid = multiply(kernel_matrix, resid);
  next.fvals = state.fvals;
  simd::axpy(next.fvals, -alpha, k_resid);
  return next;
}

DescentState descend_step(const DescentState& state, const EmpiricalKernel& kernel, std::span<const double> y,
                          double alpha) {
  return descend_step(state, kernel.matrix(), kernel.top_eigenvalue(), y, alpha);
}

// ---------------------------------------------------------------------------
// Shrinkage

Vector shrinkage_factors(const StepSchedule& schedule, std::span<const double> eigenvalues, std::size_t t) {
  Vector s(eigenvalues.size(), 1.0);
  if (schedule.is_constant()) {
    const double a = schedule.constant_value();
    const double tt = static_cast<double>(t);
    for (std::size_t j = 0; j < s.size(); ++j) s[j] = std::pow(1.0 - a * eigenvalues[j], tt);
    return s;
  }
  for (std::size_t tau = 0; tau < t; ++tau) {
    const double a = schedule.alpha(tau);
    for (std::size_t j = 0; j < s.size(); ++j) s[j] *= 1.0 - a * eigenvalues[j];
  }
  return s;
}

ShrinkageDiagnostics shrinkage_diagonal(const StepSchedule& schedule, const EmpiricalKernel& kernel,
                                        std::size_t t) {
  std::span<const double> lam(kernel.eigenvalues().data(), kernel.rank());
  return ShrinkageDiagnostics{t, schedule.eta(t), shrinkage_factors(schedule, lam, t)};
}

double empirical_norm_error(std::span<const double> fvals, std::span<const double> fstar_vals) {
  if (fvals.size() != fstar_vals.size()) {
    throw DimensionMismatch(
        fmt::format("empirical_norm_error: lengths {} and {} differ", fvals.size(), fstar_vals.size()));
  }
  if (fvals.empty()) throw DimensionMismatch("empirical_norm_error: empty vectors");
  return simd::squared_distance(fvals, fstar_vals) / static_cast<double>(fvals.size());
}

BiasVarianceSplit bias_variance_split(const StepSchedule& schedule, const EmpiricalKernel& kernel, std::size_t t,
                                      std::span<const double> fstar_vals, std::span<const double> noise) {
  const std::size_t n = kernel.size();
  const Vector s = shrinkage_factors(schedule, kernel.eigenvalues(), t);
  const Vector rf = kernel.project(fstar_vals);
  const Vector rw = kernel.project(noise);
  const std::size_t r = kernel.rank();
  double bias = 0.0;
  double var = 0.0;
  for (std::size_t j = 0; j < r; ++j) {
    bias += s[j] * s[j] * rf[j] * rf[j];
    var += (1.0 - s[j]) * (1.0 - s[j]) * rw[j] * rw[j];
  }
  for (std::size_t j = r; j < n; ++j) bias += rf[j] * rf[j];
  const double scale = 2.0 / static_cast<double>(n);
  return {scale * bias, scale * var};
}

Vector spectral_fit(const StepSchedule& schedule, const EmpiricalKernel& kernel, std::span<const double> y,
                    std::size_t t) {
  const Vector s = shrinkage_factors(schedule, kernel.eigenvalues(), t);
  Vector z = kernel.project(y);
  for (std::size_t j = 0; j < z.size(); ++j) z[j] *= 1.0 - s[j];
  return kernel.reconstruct(z);
}

// ---------------------------------------------------------------------------
// Off-design evaluation and population error

double Representer::operator()(double x) const {
  const Kernel& k = *kernel;
  double acc = 0.0;
  for (std::size_t j = 0; j < design.size(); ++j) acc += omega[j] * k(x, design[j]);
  return acc / std::sqrt(static_cast<double>(design.size()));
}

namespace {

Vector trapezoid_nodes(const QuadratureGrid& grid) {
  if (grid.points < 2) throw ConfigError("quadrature grid needs at least 2 points");
  if (!(grid.upper > grid.lower)) throw ConfigError("quadrature grid has empty range");
  Vector x(grid.points);
  const double h = (grid.upper - grid.lower) / static_cast<double>(grid.points - 1);
  for (std::size_t i = 0; i < grid.points; ++i) x[i] = grid.lower + h * static_cast<double>(i);
  x.back() = grid.upper;
  return x;
}

// Weights for the mean over Uniform[lower, upper] (integral / length).
Vector trapezoid_weights(std::size_t points) {
  Vector w(points, 1.0 / static_cast<double>(points - 1));
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

}  // namespace

double population_norm_error(const Representer& f, const std::function<double(double)>& fstar,
                             const QuadratureGrid& grid) {
  if (grid.points == 0) throw ConfigError("empty quadrature grid");
  const Vector x = trapezoid_nodes(grid);
  const Vector w = trapezoid_weights(grid.points);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = f(x[i]) - fstar(x[i]);
    acc += w[i] * d * d;
  }
  return acc;
}

PopulationErrorEvaluator::PopulationErrorEvaluator(const Kernel& kernel, std::span<const double> design,
                                                   const std::function<double(double)>& fstar,
                                                   const QuadratureGrid& grid) {
  if (grid.points == 0) throw ConfigError("empty quadrature grid");
  const Vector x = trapezoid_nodes(grid);
  weights_ = trapezoid_weights(grid.points);
  sections_ = cross_gram(kernel, x, design);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(design.size()));
  for (std::size_t i = 0; i < sections_.rows(); ++i)
    for (double& v : sections_.row(i)) v *= inv_sqrt_n;
  fstar_on_grid_.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) fstar_on_grid_[i] = fstar(x[i]);
}

double PopulationErrorEvaluator::operator()(std::span<const double> omega) const {
  if (omega.size() != sections_.cols()) throw DimensionMismatch("weight vector length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < sections_.rows(); ++i) {
    const double d = simd::dot(sections_.row(i), omega) - fstar_on_grid_[i];
    acc += weights_[i] * d * d;
  }
  return acc;
}

double hilbert_norm_squared(const EmpiricalKernel& kernel, std::span<const double> fvals) {
  const Vector z = kernel.project(fvals);
  double acc = 0.0;
  for (std::size_t j = 0; j < kernel.rank(); ++j) acc += z[j] * z[j] / kernel.eigenvalues()[j];
  return acc / static_cast<double>(kernel.size());
}

// ---------------------------------------------------------------------------
// SpectralPath

SpectralPath::SpectralPath(const EmpiricalKernel& kernel, const StepSchedule& schedule, std::span<const double> y)
    : kernel_(&kernel), schedule_(&schedule), ry_(kernel.project(y)), shrink_(kernel.size(), 1.0) {
  schedule.validate(kernel.top_eigenvalue());
}

void SpectralPath::set_truth(std::span<const double> fstar_vals) { rfstar_ = kernel_->project(fstar_vals); }
void SpectralPath::set_noise(std::span<const double> noise) { rnoise_ = kernel_->project(noise); }

void SpectralPath::advance() {
  const double a = schedule_->alpha(t_);
  const auto& lam = kernel_->eigenvalues();
  for (std::size_t j = 0; j < shrink_.size(); ++j) shrink_[j] *= 1.0 - a * lam[j];
  ++t_;
  eta_ = schedule_->eta(t_);
}

Vector SpectralPath::fvals() const {
  Vector z = ry_;
  for (std::size_t j = 0; j < z.size(); ++j) z[j] *= 1.0 - shrink_[j];
  return kernel_->reconstruct(z);
}

double SpectralPath::empirical_error() const {
  if (rfstar_.empty()) throw ConfigError("SpectralPath: truth not set");
  double acc = 0.0;
  for (std::size_t j = 0; j < ry_.size(); ++j) {
    const double d = (1.0 - shrink_[j]) * ry_[j] - rfstar_[j];
    acc += d * d;
  }
  return acc / static_cast<double>(ry_.size());
}

double SpectralPath::sure_risk(double sigma) const {
  const double n = static_cast<double>(ry_.size());
  double quad = 0.0;
  double trace = 0.0;
  for (std::size_t j = 0; j < ry_.size(); ++j) {
    quad += shrink_[j] * shrink_[j] * ry_[j] * ry_[j];
    trace += shrink_[j];
  }
  const double s2 = sigma * sigma;
  return (n * s2 + quad - 2.0 * s2 * trace) / n;
}

BiasVarianceSplit SpectralPath::split() const {
  if (rfstar_.empty() || rnoise_.empty()) throw ConfigError("SpectralPath: truth/noise not set");
  const std::size_t r = kernel_->rank();
  double bias = 0.0;
  double var = 0.0;
  for (std::size_t j = 0; j < ry_.size(); ++j) {
    if (j < r) {
      bias += shrink_[j] * shrink_[j] * rfstar_[j] * rfstar_[j];
      var += (1.0 - shrink_[j]) * (1.0 - shrink_[j]) * rnoise_[j] * rnoise_[j];
    } else {
      bias += rfstar_[j] * rfstar_[j];
    }
  }
  const double scale = 2.0 / static_cast<double>(ry_.size());
  return {scale * bias, scale * var};
}

}  // namespace earlystop
