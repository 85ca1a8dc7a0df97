#include "earlystop/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "earlystop/errors.hpp"

namespace earlystop {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// ---------------------------------------------------------------------------
// EigendecayModel

EigendecayModel::EigendecayModel(Kind kind) : kind_(std::move(kind)) {
  std::visit(Overloaded{
                 [](const PolynomialDecay& p) {
                   if (!(p.c > 0.0)) throw ConfigError("polynomial decay needs C > 0");
                   if (!(p.nu > 0.5)) {
                     throw ConfigError(fmt::format(
                         "polynomial decay with nu = {} is not summable (need nu > 1/2)", p.nu));
                   }
                 },
                 [](const FiniteRank& f) {
                   if (f.values.empty()) throw ConfigError("finite-rank model needs m >= 1");
                   for (double v : f.values)
                     if (!(v > 0.0)) throw ConfigError("finite-rank eigenvalues must be positive");
                 },
                 [](const ExplicitDecay& e) {
                   for (std::size_t i = 0; i < e.values.size(); ++i) {
                     if (e.values[i] < 0.0) throw ConfigError("explicit eigenvalues must be >= 0");
                     if (i > 0 && e.values[i] > e.values[i - 1]) {
                       throw ConfigError("explicit eigenvalues must be nonincreasing");
                     }
                   }
                 },
             },
             kind_);
}

double EigendecayModel::eigenvalue(std::size_t k) const {
  if (k == 0) throw ConfigError("eigenvalue index starts at 1");
  return std::visit(Overloaded{
                        [k](const PolynomialDecay& p) {
                          return p.c * std::pow(static_cast<double>(k), -2.0 * p.nu);
                        },
                        [k](const FiniteRank& f) { return k <= f.values.size() ? f.values[k - 1] : 0.0; },
                        [k](const ExplicitDecay& e) { return k <= e.values.size() ? e.values[k - 1] : 0.0; },
                    },
                    kind_);
}

std::optional<std::size_t> EigendecayModel::rank() const {
  return std::visit(Overloaded{
                        [](const PolynomialDecay&) -> std::optional<std::size_t> { return std::nullopt; },
                        [](const FiniteRank& f) -> std::optional<std::size_t> { return f.values.size(); },
                        [](const ExplicitDecay& e) -> std::optional<std::size_t> {
                          std::size_t r = 0;
                          while (r < e.values.size() && e.values[r] > 0.0) ++r;
                          return r;
                        },
                    },
                    kind_);
}

// ---------------------------------------------------------------------------
// Kernel

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Eigenvalues of the integral operator of (1 + x x')^d under Uniform[0,1]:
// K = phi^T D phi with phi = (1, x, ..., x^d), so the operator spectrum equals
// that of D^{1/2} M D^{1/2}, M_ij = int_0^1 x^{i+j} dx.
std::vector<double> polynomial_population_eigenvalues(int degree) {
  const std::size_t m = static_cast<std::size_t>(degree) + 1;
  Matrix g(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double di = std::sqrt(binomial(degree, static_cast<int>(i)));
      const double dj = std::sqrt(binomial(degree, static_cast<int>(j)));
      g(i, j) = di * dj / static_cast<double>(i + j + 1);
    }
  auto eig = jacobi_eigen(g);
  std::vector<double> values;
  for (double v : eig.eigenvalues)
    if (v > 0.0) values.push_back(v);
  return values;
}

void require_unit_interval(const char* family, double x) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw ConfigError(fmt::format("{} kernel is defined on [0,1]; got x = {}", family, x));
  }
}

}  // namespace

Kernel::Kernel(Family family, std::optional<EigendecayModel> decay)
    : family_(std::move(family)), decay_(std::move(decay)) {
  std::visit(Overloaded{
                 [](const SobolevFirstOrder&) {},
                 [](const GaussianKernel& g) {
                   if (!(g.bandwidth > 0.0) || !std::isfinite(g.bandwidth)) {
                     throw ConfigError(fmt::format("Gaussian bandwidth must be positive; got {}", g.bandwidth));
                   }
                 },
                 [](const PolynomialKernel& p) {
                   if (p.degree < 1) throw ConfigError("polynomial kernel degree must be >= 1");
                 },
                 [](const CustomKernel& c) {
                   if (!c.evaluator) throw ConfigError("custom kernel has no evaluator");
                 },
             },
             family_);
}

Kernel Kernel::sobolev() {
  return Kernel(SobolevFirstOrder{},
                EigendecayModel(PolynomialDecay{4.0 / (std::numbers::pi * std::numbers::pi), 1.0}));
}

Kernel Kernel::gaussian(double bandwidth) { return Kernel(GaussianKernel{bandwidth}); }

Kernel Kernel::polynomial(int degree) {
  if (degree < 1) throw ConfigError("polynomial kernel degree must be >= 1");
  return Kernel(PolynomialKernel{degree},
                EigendecayModel(FiniteRank{polynomial_population_eigenvalues(degree)}));
}

Kernel Kernel::parse(const std::string& text) {
  if (text == "sobolev1" || text == "sobolev") return sobolev();
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  try {
    if (head == "gaussian") return gaussian(arg.empty() ? 1.0 : std::stod(arg));
    if (head == "poly") {
      std::size_t used = 0;
      const int d = std::stoi(arg, &used);
      if (used != arg.size()) throw ConfigError("bad degree");
      return polynomial(d);
    }
  } catch (const std::logic_error&) {
    throw ConfigError("cannot parse kernel '" + text + "'");
  }
  throw ConfigError("unknown kernel '" + text + "' (expected sobolev1 | gaussian:<bw> | poly:<d>)");
}

double Kernel::operator()(double x, double xp) const {
  return std::visit(Overloaded{
                        [&](const SobolevFirstOrder&) {
                          require_unit_interval("first-order Sobolev", x);
                          require_unit_interval("first-order Sobolev", xp);
                          return std::min(x, xp);
                        },
                        [&](const GaussianKernel& g) {
                          const double d = (x - xp) / g.bandwidth;
                          return std::exp(-0.5 * d * d);
                        },
                        [&](const PolynomialKernel& p) {
                          require_unit_interval("polynomial", x);
                          require_unit_interval("polynomial", xp);
                          return std::pow(1.0 + x * xp, p.degree);
                        },
                        [&](const CustomKernel& c) { return c.evaluator(x, xp); },
                    },
                    family_);
}

std::string Kernel::name() const {
  return std::visit(Overloaded{
                        [](const SobolevFirstOrder&) { return std::string("sobolev1"); },
                        [](const GaussianKernel& g) { return fmt::format("gaussian:{}", g.bandwidth); },
                        [](const PolynomialKernel& p) { return fmt::format("poly:{}", p.degree); },
                        [](const CustomKernel& c) { return "custom:" + c.name; },
                    },
                    family_);
}

std::optional<double> Kernel::sup_diagonal() const {
  return std::visit(Overloaded{
                        [](const SobolevFirstOrder&) -> std::optional<double> { return 1.0; },
                        [](const GaussianKernel&) -> std::optional<double> { return 1.0; },
                        [](const PolynomialKernel& p) -> std::optional<double> {
                          return std::pow(2.0, p.degree);
                        },
                        [](const CustomKernel&) -> std::optional<double> { return std::nullopt; },
                    },
                    family_);
}

double evaluate_kernel(const Kernel& kernel, double x, double xp) { return kernel(x, xp); }

Matrix cross_gram(const Kernel& kernel, std::span<const double> rows, std::span<const double> cols) {
  Matrix g(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) g(i, j) = kernel(rows[i], cols[j]);
  return g;
}

// ---------------------------------------------------------------------------
// EmpiricalKernel

Vector EmpiricalKernel::project(std::span<const double> v) const { return multiply(eigenvectors_t_, v); }

Vector EmpiricalKernel::reconstruct(std::span<const double> z) const {
  return multiply_transposed(eigenvectors_t_, z);
}

Vector EmpiricalKernel::apply(std::span<const double> v) const { return multiply(matrix_, v); }

Vector EmpiricalKernel::to_sorted(std::span<const double> original) const {
  if (original.size() != size()) throw DimensionMismatch("to_sorted: length mismatch");
  Vector out(size());
  for (std::size_t k = 0; k < size(); ++k) out[k] = original[order_[k]];
  return out;
}

Vector EmpiricalKernel::to_original(std::span<const double> sorted) const {
  if (sorted.size() != size()) throw DimensionMismatch("to_original: length mismatch");
  Vector out(size());
  for (std::size_t k = 0; k < size(); ++k) out[order_[k]] = sorted[k];
  return out;
}

EmpiricalKernel build_empirical_kernel(const Kernel& kernel, std::span<const double> design,
                                       const Tolerances& tol) {
  const std::size_t n = design.size();
  if (n < 2) throw ConfigError("empirical kernel needs at least 2 design points");

  EmpiricalKernel ek(kernel);
  ek.order_.resize(n);
  std::iota(ek.order_.begin(), ek.order_.end(), 0);
  std::stable_sort(ek.order_.begin(), ek.order_.end(),
                   [&](std::size_t a, std::size_t b) { return design[a] < design[b]; });
  ek.design_.resize(n);
  for (std::size_t k = 0; k < n; ++k) ek.design_[k] = design[ek.order_[k]];

  ek.matrix_ = Matrix(n, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = kernel(ek.design_[i], ek.design_[j]) * inv_n;
      ek.matrix_(i, j) = v;
      ek.matrix_(j, i) = v;
    }
  }

  auto eig = jacobi_eigen(ek.matrix_);
  ek.sweeps_ = eig.sweeps;
  const double top = std::max(eig.eigenvalues.front(), 0.0);
  for (double v : eig.eigenvalues) {
    if (v < -tol.psd * top) {
      throw PsdViolation(fmt::format("kernel {} produced eigenvalue {} below -{} * lambda_1 = {}",
                                     kernel.name(), v, tol.psd, -tol.psd * top));
    }
  }
  ek.rank_ = 0;
  for (double& v : eig.eigenvalues) {
    if (v > tol.rank * top) {
      ++ek.rank_;
    } else {
      v = 0.0;
    }
  }
  ek.eigenvalues_ = std::move(eig.eigenvalues);
  ek.eigenvectors_t_ = std::move(eig.eigenvectors_by_row);
  return ek;
}

}  // namespace earlystop
