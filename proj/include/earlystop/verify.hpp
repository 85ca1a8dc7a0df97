#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace earlystop {

struct PropertyReport {
  std::string name;
  std::size_t instances = 0;
  std::size_t violations = 0;
  // Smallest (rhs - lhs) margin seen, in absolute terms; negative beyond
  // -slack means a violation.
  double worst_margin = 0.0;
  double slack = 0.0;
  bool pass = true;
};

// Gradient shrinkage: 0 <= S_jj^2 <= 1/(2 e eta lambda_j) and
// (1/2) min{1, eta lambda_j} <= 1 - S_jj <= min{1, eta lambda_j};
// ridge shrinkage: R_jj^2 <= 1/(4 nu lambda_j) and the same two-sided bound.
PropertyReport check_shrinkage_bounds(std::size_t samples, std::uint64_t seed, double slack = 1e-12);

// Per-realization ||f^t - f*||_n^2 <= B_t^2 + V_t, and over `draws` noise
// draws mean error >= (1 - lower_slack) E[V_t] / 2.
PropertyReport check_decomposition(std::size_t samples, std::uint64_t seed, std::size_t draws = 500,
                                   double lower_slack = 0.10);

// f-recursion, representer-weight recursion and spectral form agree to
// `tolerance` over `steps` iterations.
PropertyReport check_recursion_equivalence(std::size_t samples, std::uint64_t seed, std::size_t steps = 200,
                                           double tolerance = 1e-8);

// Fixed-point residual <= residual_tol and agreement with a nested grid scan
// <= scan_tol.
PropertyReport check_critical_radius(std::size_t samples, std::uint64_t seed, double residual_tol = 1e-10,
                                     double scan_tol = 1e-5);

// 1/eta_{T+1} <= eps_hat^2 <= 1/eta_T, compared with relative slack.
PropertyReport check_stopping_sandwich(std::size_t samples, std::uint64_t seed, double slack = 1e-8);

// The five suites above, run concurrently, in that order.
std::vector<PropertyReport> run_property_suite(std::size_t samples, std::uint64_t seed);

}  // namespace earlystop
