#include <doctest.h>

#include <cmath>
#include <vector>

#include "earlystop/descent.hpp"
#include "earlystop/errors.hpp"
#include "earlystop/rng.hpp"

using namespace earlystop;

namespace {

constexpr double kE = 2.718281828459045;

std::vector<double> grid(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i + 1) / static_cast<double>(n);
  return x;
}

double abs_shift(double x) { return std::abs(x - 0.5) - 0.5; }

std::vector<double> noisy(const std::vector<double>& x, std::uint64_t seed, double sigma = 1.0) {
  CounterRng rng(seed, 0, 1);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = abs_shift(x[i]) + sigma * rng.normal();
  return y;
}

}  // namespace

TEST_SUITE("descent") {
  TEST_CASE("step schedules") {
    const auto c = StepSchedule::constant(0.25);
    CHECK(c.eta(0) == 0.0);
    CHECK(c.eta(8) == 2.0);
    CHECK(c.alpha(1000) == 0.25);
    const auto s = StepSchedule::custom({0.5, 0.3, 0.2});
    CHECK(s.eta(2) == doctest::Approx(0.8));
    CHECK(s.eta(3) == doctest::Approx(1.0));
    CHECK(s.eta(5) == doctest::Approx(1.4));
    CHECK(s.alpha(10) == 0.2);
    for (std::size_t t = 1; t < 20; ++t) CHECK(s.eta(t) > s.eta(t - 1));
    CHECK_THROWS_AS(StepSchedule::constant(0.0), ConfigError);
    CHECK_THROWS_AS(StepSchedule::custom({0.1, 0.2}), ConfigError);
    CHECK_THROWS_AS(StepSchedule::custom({0.1, 0.0}), ConfigError);
    CHECK_THROWS_AS(StepSchedule::custom({}), ConfigError);
    CHECK_THROWS_AS(StepSchedule::constant(0.6).validate(2.0), InvalidStep);
    CHECK_NOTHROW(StepSchedule::constant(0.5).validate(2.0));
    CHECK_THROWS_AS(StepSchedule::constant(1.5).validate(0.3), InvalidStep);
    CHECK(max_valid_step(0.4) == 1.0);
    CHECK(max_valid_step(4.0) == 0.25);
  }

  TEST_CASE("first step and zero step") {
    const auto x = grid(10);
    const auto k = build_empirical_kernel(Kernel::sobolev(), x);
    const auto y = noisy(x, 1);
    const auto s1 = descend_step(DescentState::initial(10), k, y, 0.25);
    const auto ky = k.apply(y);
    for (std::size_t i = 0; i < 10; ++i) CHECK(s1.fvals[i] == doctest::Approx(0.25 * ky[i]).epsilon(1e-14));
    CHECK(s1.t == 1);
    CHECK(s1.eta == 0.25);
    const auto s2 = descend_step(s1, k, y, 0.0);
    CHECK(s2.fvals == s1.fvals);
    CHECK(s2.omega == s1.omega);
    CHECK(s2.t == 2);
    CHECK(s2.eta == 0.25);
    CHECK_THROWS_AS(descend_step(s1, k, y, -0.1), InvalidStep);
    CHECK_THROWS_AS(descend_step(s1, k, y, 1.5), InvalidStep);
    CHECK_THROWS_AS(descend_step(s1, k, std::vector<double>(9, 0.0), 0.1), DimensionMismatch);
  }

  TEST_CASE("three recursions agree over 50 steps") {
    const std::size_t n = 10;
    const auto x = grid(n);
    const auto k = build_empirical_kernel(Kernel::sobolev(), x);
    const auto y = noisy(x, 2);
    const auto schedule = StepSchedule::constant(0.25);
    DescentState st = DescentState::initial(n);
    for (std::size_t t = 1; t <= 50; ++t) {
      st = descend_step(st, k, y, 0.25);
      const auto spectral = spectral_fit(schedule, k, y, t);
      const auto via_omega = k.apply(st.omega);
      for (std::size_t i = 0; i < n; ++i) {
        CHECK(std::abs(st.fvals[i] - spectral[i]) < 1e-8);
        CHECK(std::abs(st.fvals[i] - std::sqrt(double(n)) * via_omega[i]) < 1e-8);
      }
    }
    // Off-design evaluation reproduces the design values.
    const Kernel kern = Kernel::sobolev();
    const Representer f{&kern, k.design(), st.omega};
    for (std::size_t i = 0; i < n; ++i) CHECK(f(x[i]) == doctest::Approx(st.fvals[i]).epsilon(1e-10));
  }

  TEST_CASE("shrinkage diagonal") {
    const auto k = build_empirical_kernel(Kernel::sobolev(), grid(30));
    const auto schedule = StepSchedule::constant(0.5);
    const auto d0 = shrinkage_diagonal(schedule, k, 0);
    CHECK(d0.diag.size() == k.rank());
    for (double v : d0.diag) CHECK(v == 1.0);
    const auto d7 = shrinkage_diagonal(schedule, k, 7);
    CHECK(d7.eta == 3.5);
    for (std::size_t j = 0; j < k.rank(); ++j) {
      const double lam = k.eigenvalues()[j];
      CHECK(d7.diag[j] == doctest::Approx(std::pow(1.0 - 0.5 * lam, 7)).epsilon(1e-14));
      CHECK(d7.diag[j] <= 1.0);
      CHECK(d7.diag[j] >= 0.0);
      CHECK(d7.diag[j] * d7.diag[j] <= 1.0 / (2.0 * kE * 3.5 * lam));
      CHECK(1.0 - d7.diag[j] >= 0.5 * std::min(1.0, 3.5 * lam));
      CHECK(1.0 - d7.diag[j] <= std::min(1.0, 3.5 * lam));
    }
    // Custom schedule: product form, and monotone in t.
    const auto custom = StepSchedule::custom({1.0, 0.5, 0.25});
    const auto a = shrinkage_factors(custom, k.eigenvalues(), 4);
    const auto b = shrinkage_factors(custom, k.eigenvalues(), 5);
    for (std::size_t j = 0; j < k.rank(); ++j) {
      const double l = k.eigenvalues()[j];
      CHECK(a[j] == doctest::Approx((1 - l) * (1 - 0.5 * l) * (1 - 0.25 * l) * (1 - 0.25 * l)));
      CHECK(b[j] <= a[j]);
    }
  }

  TEST_CASE("empirical norm error") {
    const std::vector<double> a = {1, 2, 3};
    CHECK(empirical_norm_error(a, a) == 0.0);
    CHECK(empirical_norm_error(std::vector<double>{1.5, 2.5, 3.5}, a) == doctest::Approx(0.25));
    CounterRng rng(9, 0, 0);
    std::vector<double> u(7), v(7);
    for (auto& q : u) q = rng.normal();
    for (auto& q : v) q = rng.normal();
    double ref = 0.0;
    for (int i = 0; i < 7; ++i) ref += (u[i] - v[i]) * (u[i] - v[i]);
    CHECK(empirical_norm_error(u, v) == doctest::Approx(ref / 7.0).epsilon(1e-14));
    CHECK_THROWS_AS(empirical_norm_error(std::vector<double>{1}, a), DimensionMismatch);
  }

  TEST_CASE("population norm error") {
    const Kernel kern = Kernel::sobolev();
    const std::vector<double> design = {0.25, 0.5, 0.75, 1.0};
    const std::vector<double> zero(4, 0.0);
    const Representer f0{&kern, design, zero};
    CHECK(population_norm_error(f0, [](double) { return 0.0; }) == 0.0);

    // Closed form 1/12 and a 1e6-point midpoint sum agree with the trapezoid value.
    double brute = 0.0;
    const std::size_t m = 1000000;
    for (std::size_t i = 0; i < m; ++i) {
      const double xx = (static_cast<double>(i) + 0.5) / m;
      brute += abs_shift(xx) * abs_shift(xx);
    }
    brute /= m;
    const double q = population_norm_error(f0, abs_shift);
    CHECK(q == doctest::Approx(1.0 / 12.0).epsilon(1e-7));
    CHECK(brute == doctest::Approx(1.0 / 12.0).epsilon(1e-9));

    // Refinement 1e3 -> 1e4 changes a Lipschitz integrand by < 1e-4.
    const std::vector<double> omega = {0.3, -0.2, 0.5, 0.1};
    const Representer f{&kern, design, omega};
    const double coarse = population_norm_error(f, abs_shift, QuadratureGrid{0, 1, 1001});
    const double fine = population_norm_error(f, abs_shift, QuadratureGrid{0, 1, 10001});
    CHECK(std::abs(coarse - fine) < 1e-4);

    const PopulationErrorEvaluator eval(kern, design, abs_shift);
    CHECK(eval(omega) == doctest::Approx(fine).epsilon(1e-12));
    CHECK_THROWS_AS(population_norm_error(f, abs_shift, QuadratureGrid{0, 1, 0}), ConfigError);
  }

  TEST_CASE("bias variance split") {
    const std::size_t n = 40;
    const auto x = grid(n);
    const auto k = build_empirical_kernel(Kernel::sobolev(), x);
    const auto schedule = StepSchedule::constant(0.5);
    std::vector<double> fs(n), w(n, 0.0), y(n);
    for (std::size_t i = 0; i < n; ++i) fs[i] = abs_shift(x[i]);
    const auto b0 = bias_variance_split(schedule, k, 0, fs, w);
    double norm = 0.0;
    for (double v : fs) norm += v * v / n;
    CHECK(b0.variance == 0.0);
    CHECK(b0.squared_bias == doctest::Approx(2.0 * norm).epsilon(1e-12));
    for (std::size_t t : {1u, 5u, 50u}) CHECK(bias_variance_split(schedule, k, t, fs, w).variance == 0.0);

    CounterRng rng(11, 0, 0);
    for (auto& v : w) v = 0.7 * rng.normal();
    for (std::size_t i = 0; i < n; ++i) y[i] = fs[i] + w[i];
    SpectralPath path(k, schedule, y);
    path.set_truth(fs);
    path.set_noise(w);
    for (std::size_t t = 0; t <= 80; ++t) {
      const auto bv = bias_variance_split(schedule, k, t, fs, w);
      const double err = empirical_norm_error(spectral_fit(schedule, k, y, t), fs);
      CHECK(err <= bv.squared_bias + bv.variance + 1e-12);
      CHECK(path.empirical_error() == doctest::Approx(err).epsilon(1e-10));
      CHECK(path.split().squared_bias == doctest::Approx(bv.squared_bias).epsilon(1e-10));
      CHECK(path.split().variance == doctest::Approx(bv.variance).epsilon(1e-10));
      path.advance();
    }
  }

  TEST_CASE("squared bias bound for a unit-norm target") {
    const std::size_t n = 60;
    const auto x = grid(n);
    const auto k = build_empirical_kernel(Kernel::sobolev(), x);
    CounterRng rng(12, 0, 0);
    std::vector<double> omega(n);
    for (auto& v : omega) v = rng.normal();
    auto fs = k.apply(omega);
    for (auto& v : fs) v *= std::sqrt(double(n));
    // ||f||_H^2 for f = (1/sqrt n) sum omega_i K(., x_i) is omega^T K omega.
    double h2 = 0.0;
    const auto ko = k.apply(omega);
    for (std::size_t i = 0; i < n; ++i) h2 += omega[i] * ko[i];
    CHECK(hilbert_norm_squared(k, fs) == doctest::Approx(h2).epsilon(1e-6));
    const double scale = 1.0 / std::sqrt(hilbert_norm_squared(k, fs));
    for (auto& v : fs) v *= scale;
    CHECK(hilbert_norm_squared(k, fs) == doctest::Approx(1.0).epsilon(1e-9));
    const std::vector<double> w(n, 0.0);
    const auto schedule = StepSchedule::constant(1.0);
    for (std::size_t t = 1; t <= 300; ++t) {
      const auto bv = bias_variance_split(schedule, k, t, fs, w);
      CHECK(bv.squared_bias <= 1.0 / (kE * schedule.eta(t)) + 1e-12);
    }
  }

  TEST_CASE("spectral path sure matches direct evaluation") {
    const std::size_t n = 25;
    const auto x = grid(n);
    const auto k = build_empirical_kernel(Kernel::gaussian(0.2), x);
    const auto y = noisy(x, 13);
    const auto schedule = StepSchedule::constant(max_valid_step(k.top_eigenvalue()));
    SpectralPath path(k, schedule, y);
    for (std::size_t t = 0; t < 30; ++t) {
      const auto f = path.fvals();
      const auto ref = spectral_fit(schedule, k, y, t);
      for (std::size_t i = 0; i < n; ++i) CHECK(f[i] == doctest::Approx(ref[i]).epsilon(1e-10));
      CHECK(path.eta() == schedule.eta(t));
      path.advance();
    }
    CHECK_THROWS_AS(SpectralPath(k, StepSchedule::constant(1.0 / k.top_eigenvalue() * 2.0), y), InvalidStep);
  }
}
