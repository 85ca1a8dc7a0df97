#include "earlystop/ridge.hpp"

#include <cmath>

#include <fmt/format.h>

#include "earlystop/descent.hpp"
#include "earlystop/errors.hpp"

namespace earlystop {

RidgeShrinkage ridge_shrinkage(const EmpiricalKernel& kernel, double nu) {
  if (!(nu > 0.0)) throw ConfigError(fmt::format("nu must be positive; got {}", nu));
  RidgeShrinkage out{nu, Vector(kernel.rank())};
  for (std::size_t j = 0; j < kernel.rank(); ++j) out.diag[j] = 1.0 / (1.0 + nu * kernel.eigenvalues()[j]);
  return out;
}

namespace {

Vector krr_from_projection(const EmpiricalKernel& kernel, const Vector& ry, double nu) {
  Vector z(ry.size(), 0.0);
  const auto& lam = kernel.eigenvalues();
  for (std::size_t j = 0; j < kernel.rank(); ++j) {
    const double nl = nu * lam[j];
    z[j] = ry[j] * nl / (1.0 + nl);
  }
  return kernel.reconstruct(z);
}

}  // namespace

Vector solve_krr(const EmpiricalKernel& kernel, std::span<const double> y, double nu) {
  if (!(nu > 0.0) || !std::isfinite(nu)) throw ConfigError(fmt::format("nu must be positive; got {}", nu));
  if (y.size() != kernel.size()) throw DimensionMismatch("solve_krr: response length mismatch");
  return krr_from_projection(kernel, kernel.project(y), nu);
}

double choose_nu(const EmpiricalComplexity& ec, double sigma, const RootOptions& options) {
  if (!(sigma > 0.0)) throw ConfigError(fmt::format("sigma must be positive; got {}", sigma));
  if (!(ec.top_eigenvalue() > 0.0)) {
    throw DegenerateKernel("all empirical eigenvalues are zero; no regularization parameter satisfies the rule");
  }
  const double threshold = 1.0 / (4.0 * sigma);
  auto g = [&](double nu) { return nu * ec(1.0 / std::sqrt(nu)) - threshold; };
  return bisect_crossing(g, 1e-12, 1.0, options).value;
}

RidgePath krr_path(const EmpiricalKernel& kernel, std::span<const double> y, std::span<const double> nu_grid,
                   std::optional<std::span<const double>> fstar_vals) {
  if (nu_grid.empty()) throw ConfigError("nu grid is empty");
  for (std::size_t i = 0; i < nu_grid.size(); ++i) {
    if (!(nu_grid[i] > 0.0)) throw ConfigError("nu grid must be positive");
    if (i > 0 && !(nu_grid[i] > nu_grid[i - 1])) throw ConfigError("nu grid must be ascending");
  }
  const Vector ry = kernel.project(y);
  RidgePath path;
  path.nus.assign(nu_grid.begin(), nu_grid.end());
  for (double nu : nu_grid) {
    path.fvals_per_nu.push_back(krr_from_projection(kernel, ry, nu));
    if (fstar_vals) path.errors.push_back(empirical_norm_error(path.fvals_per_nu.back(), *fstar_vals));
  }
  return path;
}

}  // namespace earlystop
