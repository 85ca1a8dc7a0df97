#pragma once

#include <optional>
#include <span>
#include <vector>

#include "earlystop/complexity.hpp"
#include "earlystop/kernels.hpp"

namespace earlystop {

// R^nu_jj = 1 / (1 + nu lambda_j) over the nonzero eigenvalues.
struct RidgeShrinkage {
  double nu = 0.0;
  Vector diag;
};

RidgeShrinkage ridge_shrinkage(const EmpiricalKernel& kernel, double nu);

// Design-point values of the kernel ridge estimate, U (I - R^nu) U^T y,
// i.e. the solution of (K + I/nu) f = K y.
Vector solve_krr(const EmpiricalKernel& kernel, std::span<const double> y, double nu);

// Smallest nu with (4 sigma nu)^{-1} < R_hat(1/sqrt(nu)).
double choose_nu(const EmpiricalComplexity& ec, double sigma, const RootOptions& options = {});

struct RidgePath {
  std::vector<double> nus;
  std::vector<Vector> fvals_per_nu;
  std::vector<double> errors;  // empty unless f* was supplied
};

RidgePath krr_path(const EmpiricalKernel& kernel, std::span<const double> y, std::span<const double> nu_grid,
                   std::optional<std::span<const double>> fstar_vals = std::nullopt);

}  // namespace earlystop
