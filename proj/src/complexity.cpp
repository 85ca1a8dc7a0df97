#include "earlystop/complexity.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "earlystop/errors.hpp"
#include "earlystop/simd.hpp"

namespace earlystop {

EmpiricalComplexity::EmpiricalComplexity(std::span<const double> eigenvalues)
    : eigenvalues_(eigenvalues) {
  if (eigenvalues_.empty()) throw ConfigError("empirical complexity needs eigenvalues");
  top_ = *std::max_element(eigenvalues_.begin(), eigenvalues_.end());
}

double EmpiricalComplexity::operator()(double eps) const {
  if (!(eps >= 0.0)) throw ConfigError("complexity radius must be nonnegative");
  const double s = simd::sum_min(eigenvalues_, eps * eps);
  return std::sqrt(std::max(s, 0.0) / static_cast<double>(eigenvalues_.size()));
}

PopulationComplexity::PopulationComplexity(EigendecayModel decay, std::size_t n, std::size_t truncation)
    : decay_(std::move(decay)), n_(n), truncation_(truncation) {
  if (n_ == 0) throw ConfigError("population complexity needs n >= 1");
  if (truncation_ == 0) throw ConfigError("truncation must be positive");
}

double PopulationComplexity::operator()(double eps) const {
  if (!(eps >= 0.0)) throw ConfigError("complexity radius must be nonnegative");
  const double e2 = eps * eps;
  double total = 0.0;
  std::size_t upto = truncation_;
  if (auto r = decay_.rank()) upto = *r;
  for (std::size_t k = 1; k <= upto; ++k) total += std::min(decay_.eigenvalue(k), e2);

  if (const auto* p = std::get_if<PolynomialDecay>(&decay_.kind())) {
    // int_J^inf min(C t^{-2nu}, e2) dt, split at the crossover t* = (C/e2)^{1/(2nu)}.
    const double j = static_cast<double>(truncation_);
    const double a = 2.0 * p->nu;
    double start = j;
    if (e2 > 0.0) {
      const double cross = std::pow(p->c / e2, 1.0 / a);
      if (cross > j) {
        total += (cross - j) * e2;
        start = cross;
      }
      total += p->c * std::pow(start, 1.0 - a) / (a - 1.0);
    }
  }
  return std::sqrt(total / static_cast<double>(n_));
}

double empirical_complexity(const EmpiricalComplexity& ec, double eps) { return ec(eps); }
double population_complexity(const PopulationComplexity& pc, double eps) { return pc(eps); }

CriticalRadius critical_empirical_radius(const EmpiricalComplexity& ec, double sigma, double factor,
                                         const RootOptions& options) {
  if (!(sigma > 0.0)) throw ConfigError(fmt::format("sigma must be positive; got {}", sigma));
  if (!(ec.top_eigenvalue() > 0.0)) {
    throw DegenerateKernel("all empirical eigenvalues are zero; no critical radius exists");
  }
  const double denom = factor * sigma;
  auto g = [&](double eps) { return eps * eps / denom - ec(eps); };
  return bisect_crossing(g, 1e-12, std::sqrt(ec.top_eigenvalue()) + 1.0, options);
}

CriticalRadius critical_population_radius(const PopulationComplexity& pc, double sigma, double factor,
                                          const RootOptions& options) {
  if (!(sigma > 0.0)) throw ConfigError(fmt::format("sigma must be positive; got {}", sigma));
  const double top = pc.decay().eigenvalue(1);
  if (!(top > 0.0)) throw DegenerateKernel("population eigenvalues are all zero");
  auto g = [&](double eps) { return eps * eps / sigma - factor * pc(eps); };
  return bisect_crossing(g, 1e-12, std::sqrt(top) + 1.0, options);
}

}  // namespace earlystop
