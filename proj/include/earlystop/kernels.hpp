#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "earlystop/linalg.hpp"

namespace earlystop {

struct Tolerances {
  double psd = 1e-10;
  double rank = 1e-12;
  double recon = 1e-8;
  double ortho = 1e-10;
};

// Population eigenvalue sequences.
struct PolynomialDecay {
  double c = 1.0;
  double nu = 1.0;  // lambda_k = c * k^(-2 nu), summable for nu > 1/2
};
struct FiniteRank {
  std::vector<double> values;  // lambda_1..lambda_m, zero afterwards
};
struct ExplicitDecay {
  std::vector<double> values;  // nonincreasing; zero beyond the list
};

class EigendecayModel {
 public:
  using Kind = std::variant<PolynomialDecay, FiniteRank, ExplicitDecay>;

  // Validates the model; ConfigError on nu <= 1/2, nonpositive values, etc.
  explicit EigendecayModel(Kind kind);

  const Kind& kind() const noexcept { return kind_; }
  // lambda_k for k >= 1.
  double eigenvalue(std::size_t k) const;
  // Number of nonzero eigenvalues, or nullopt for an infinite sequence.
  std::optional<std::size_t> rank() const;

 private:
  Kind kind_;
};

struct SobolevFirstOrder {};
struct GaussianKernel {
  double bandwidth = 1.0;
};
struct PolynomialKernel {
  int degree = 2;
};
struct CustomKernel {
  std::string name;
  std::function<double(double, double)> evaluator;
};

class Kernel {
 public:
  using Family = std::variant<SobolevFirstOrder, GaussianKernel, PolynomialKernel, CustomKernel>;

  explicit Kernel(Family family, std::optional<EigendecayModel> decay = std::nullopt);

  // min{x, x'} on [0,1]; population decay lambda_k <= (4/pi^2) k^-2.
  static Kernel sobolev();
  // exp(-(x-x')^2 / (2 h^2)).
  static Kernel gaussian(double bandwidth);
  // (1 + x x')^d; finite rank d+1 with population eigenvalues for Uniform[0,1].
  static Kernel polynomial(int degree);

  // Parses "sobolev1", "gaussian:<bw>", "poly:<d>".
  static Kernel parse(const std::string& text);

  double operator()(double x, double xp) const;

  const Family& family() const noexcept { return family_; }
  const std::optional<EigendecayModel>& population_decay() const noexcept { return decay_; }
  std::string name() const;
  // sup_x K(x,x) over [0,1] where known.
  std::optional<double> sup_diagonal() const;

 private:
  Family family_;
  std::optional<EigendecayModel> decay_;
};

double evaluate_kernel(const Kernel& kernel, double x, double xp);

// K_ij = kernel(x_i, x_j) / n with its sorted eigendecomposition.
//
// Design points are stored sorted ascending; `order[k]` is the index in the
// caller's original sequence of the k-th sorted point. All vectors handed to
// the other modules are in sorted order (use to_sorted / to_original).
class EmpiricalKernel {
 public:
  std::size_t size() const noexcept { return design_.size(); }
  const std::vector<double>& design() const noexcept { return design_; }
  const std::vector<std::size_t>& order() const noexcept { return order_; }
  const Matrix& matrix() const noexcept { return matrix_; }
  const Vector& eigenvalues() const noexcept { return eigenvalues_; }
  // Row j is the eigenvector u_j (i.e. this stores U^T).
  const Matrix& eigenvectors_t() const noexcept { return eigenvectors_t_; }
  std::size_t rank() const noexcept { return rank_; }
  double top_eigenvalue() const noexcept { return eigenvalues_.empty() ? 0.0 : eigenvalues_[0]; }
  const Kernel& kernel() const noexcept { return kernel_; }
  int solver_sweeps() const noexcept { return sweeps_; }

  // U^T v
  Vector project(std::span<const double> v) const;
  // U z
  Vector reconstruct(std::span<const double> z) const;
  // K v
  Vector apply(std::span<const double> v) const;

  Vector to_sorted(std::span<const double> original) const;
  Vector to_original(std::span<const double> sorted) const;

 private:
  friend EmpiricalKernel build_empirical_kernel(const Kernel&, std::span<const double>,
                                               const Tolerances&);
  explicit EmpiricalKernel(Kernel kernel) : kernel_(std::move(kernel)) {}

  Kernel kernel_;
  std::vector<double> design_;
  std::vector<std::size_t> order_;
  Matrix matrix_;
  Vector eigenvalues_;
  Matrix eigenvectors_t_;
  std::size_t rank_ = 0;
  int sweeps_ = 0;
};

// Throws ConfigError for n < 2 or out-of-domain points, NumericalError if
// the eigensolver stalls, PsdViolation if an eigenvalue is below -tol_psd*lambda_1.
EmpiricalKernel build_empirical_kernel(const Kernel& kernel, std::span<const double> design,
                                       const Tolerances& tol = {});

// Gram block G_ij = kernel(rows_i, cols_j), unscaled.
Matrix cross_gram(const Kernel& kernel, std::span<const double> rows, std::span<const double> cols);

}  // namespace earlystop
