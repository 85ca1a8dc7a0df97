#pragma once

#include <cstddef>
#include <span>

#include "earlystop/kernels.hpp"

namespace earlystop {

inline constexpr double kEmpiricalCriticalFactor = 2.0 * 2.718281828459045235360287471352662;
inline constexpr double kPopulationCriticalFactor = 40.0;

// R_hat(eps) = sqrt( (1/n) sum_i min(lambda_i, eps^2) ) over empirical eigenvalues.
class EmpiricalComplexity {
 public:
  // `eigenvalues` must outlive this object.
  explicit EmpiricalComplexity(std::span<const double> eigenvalues);
  explicit EmpiricalComplexity(const EmpiricalKernel& kernel)
      : EmpiricalComplexity(std::span<const double>(kernel.eigenvalues())) {}

  double operator()(double eps) const;
  std::size_t n() const noexcept { return eigenvalues_.size(); }
  double top_eigenvalue() const noexcept { return top_; }
  std::span<const double> eigenvalues() const noexcept { return eigenvalues_; }

 private:
  std::span<const double> eigenvalues_;
  double top_ = 0.0;
};

// R(eps) = sqrt( (1/n) sum_{j>=1} min(lambda_j, eps^2) ) over a population decay model.
class PopulationComplexity {
 public:
  PopulationComplexity(EigendecayModel decay, std::size_t n, std::size_t truncation = 100000);

  double operator()(double eps) const;
  std::size_t n() const noexcept { return n_; }
  const EigendecayModel& decay() const noexcept { return decay_; }

 private:
  EigendecayModel decay_;
  std::size_t n_;
  std::size_t truncation_;
};

double empirical_complexity(const EmpiricalComplexity& ec, double eps);
double population_complexity(const PopulationComplexity& pc, double eps);

struct RootOptions {
  double tolerance = 1e-10;  // on |lhs - rhs| and on bracket width
  int max_iterations = 200;
};

struct CriticalRadius {
  double value = 0.0;
  double residual = 0.0;
  int solver_iterations = 0;
};

// Unique eps > 0 with R_hat(eps) = eps^2 / (factor * sigma), factor = 2e by default.
// DegenerateKernel when every eigenvalue vanishes.
CriticalRadius critical_empirical_radius(const EmpiricalComplexity& ec, double sigma,
                                         double factor = kEmpiricalCriticalFactor,
                                         const RootOptions& options = {});

// Unique eps > 0 with factor * R(eps) = eps^2 / sigma, factor = 40 by default.
CriticalRadius critical_population_radius(const PopulationComplexity& pc, double sigma,
                                          double factor = kPopulationCriticalFactor,
                                          const RootOptions& options = {});

// Bisection for the sign change of an increasing-crossing function g on
// (lo, inf): g(lo) <= 0, bracket upper end doubled from `hi` until g(hi) > 0.
// Returns the right end of the final bracket (g > 0 there) and the residual |g|.
template <class F>
CriticalRadius bisect_crossing(F&& g, double lo, double hi, const RootOptions& options);

}  // namespace earlystop

#include "earlystop/detail/bisect.inl"
