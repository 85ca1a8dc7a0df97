#include <doctest.h>

#include <cmath>
#include <vector>

#include "earlystop/errors.hpp"
#include "earlystop/rng.hpp"
#include "earlystop/stopping.hpp"
#include "oracles.hpp"

using namespace earlystop;

namespace {

constexpr double kE = 2.718281828459045;

std::vector<double> grid(std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i + 1) / static_cast<double>(n);
  return x;
}

double abs_shift(double x) { return std::abs(x - 0.5) - 0.5; }

struct Instance {
  std::vector<double> x, fs, y;
};

Instance overfit_instance(std::uint64_t seed, std::size_t n = 100) {
  Instance in;
  in.x = grid(n);
  CounterRng rng(seed, 0, 1);
  for (double xi : in.x) {
    in.fs.push_back(abs_shift(xi));
    in.y.push_back(in.fs.back() + rng.normal());
  }
  return in;
}

std::size_t scan_data_dependent(const std::vector<double>& lam, double sigma, const StepSchedule& s) {
  const EmpiricalComplexity ec(lam);
  for (std::size_t t = 1;; ++t)
    if (ec(1.0 / std::sqrt(s.eta(t))) > 1.0 / (2.0 * kE * sigma * s.eta(t))) return t - 1;
}

}  // namespace

TEST_SUITE("stopping") {
  TEST_CASE("rule names") {
    for (auto r : {StoppingRuleKind::kDataDependent, StoppingRuleKind::kHoldOut, StoppingRuleKind::kSure,
                   StoppingRuleKind::kOracle})
      CHECK(parse_rule(rule_name(r)) == r);
    CHECK_THROWS_AS(parse_rule("cv"), ConfigError);
  }

  TEST_CASE("data-dependent rule against a literal scan") {
    const std::vector<double> lam = {1.0, 0.25};
    const auto s = StepSchedule::constant(0.25);
    const EmpiricalComplexity ec(lam);
    const auto rec = stop_data_dependent(s, ec, 1.0, 10000);
    CHECK(rec.triggered);
    CHECK(rec.T == scan_data_dependent(lam, 1.0, s));
    CHECK(rec.risk_trace.size() == rec.T + 1);
    CHECK(rec.risk_trace.back() > 0.0);

    // Sandwich against the critical radius.
    const double eps2 = std::pow(critical_empirical_radius(ec, 1.0).value, 2);
    CHECK(1.0 / s.eta(rec.T + 1) <= eps2);
    if (rec.T > 0) CHECK(eps2 <= 1.0 / s.eta(rec.T));
    if (rec.T >= 1) CHECK(s.eta(rec.T + 1) <= 2.0 * s.eta(rec.T));

    // Larger sigma never stops later.
    std::size_t prev = rec.T;
    for (double sigma : {2.0, 4.0, 8.0}) {
      const auto r2 = stop_data_dependent(s, ec, sigma, 10000);
      CHECK(r2.T <= prev);
      prev = r2.T;
    }
  }

  TEST_CASE("data-dependent rule on kernel spectra") {
    const auto k = build_empirical_kernel(Kernel::sobolev(), grid(100));
    const EmpiricalComplexity ec(k);
    for (double sigma : {0.3, 1.0, 3.0}) {
      const auto s = StepSchedule::constant(0.25);
      const auto rec = stop_data_dependent(s, ec, sigma, 1000);
      CHECK(rec.T == scan_data_dependent(k.eigenvalues(), sigma, s));
      const double eps2 = std::pow(critical_empirical_radius(ec, sigma).value, 2);
      CHECK(1.0 / s.eta(rec.T + 1) <= eps2);
      CHECK(eps2 <= 1.0 / s.eta(rec.T));
    }
  }

  TEST_CASE("data-dependent errors and cap") {
    const std::vector<double> zeros(4, 0.0);
    CHECK_THROWS_AS(stop_data_dependent(StepSchedule::constant(0.5), EmpiricalComplexity(zeros), 1.0, 100),
                    DegenerateKernel);
    const std::vector<double> lam = {1.0, 0.25};
    // Tiny sigma puts the threshold far above R_hat, so only the cap ends the scan.
    const auto rec = stop_data_dependent(StepSchedule::constant(0.25), EmpiricalComplexity(lam), 0.01, 2);
    CHECK_FALSE(rec.triggered);
    CHECK(rec.T == 2);
  }

  TEST_CASE("first-increase rule") {
    const auto inc = first_increase(StoppingRuleKind::kSure, [](std::size_t t) { return double(t); }, 50);
    CHECK(inc.T == 0);
    CHECK(inc.clamped);
    CHECK(inc.triggered);
    const auto flat = first_increase(StoppingRuleKind::kOracle, [](std::size_t) { return 0.0; }, 30);
    CHECK_FALSE(flat.triggered);
    CHECK(flat.T == 30);
    const std::vector<double> v = {5, 4, 3, 3, 2, 2.5, 1};
    const auto r = first_increase(StoppingRuleKind::kOracle, [&](std::size_t t) { return v[t]; }, 6);
    CHECK(r.T == 3);
    CHECK_FALSE(r.clamped);
    CHECK(static_cast<long>(r.T) == oracle::first_increase_scan(v));
  }

  TEST_CASE("SURE formula") {
    const std::size_t n = 30;
    const auto in = overfit_instance(3, n);
    const auto k = build_empirical_kernel(Kernel::sobolev(), in.x);
    const double alpha = 0.9;
    const auto s = StepSchedule::constant(alpha);
    double yy = 0.0;
    for (double v : in.y) yy += v * v;
    CHECK(sure_risk(s, k, in.y, 1.0, 0) == doctest::Approx(yy / n - 1.0).epsilon(1e-12));
    CHECK(k.rank() == n);
    CHECK(sure_risk(s, k, in.y, 0.8, 200000) == doctest::Approx(0.64).epsilon(1e-6));

    // Dense product S~ = prod (I - alpha K) with no eigendecomposition.
    Matrix st = Matrix::identity(n);
    Matrix step = Matrix::identity(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) step(i, j) -= alpha * k.matrix()(i, j);
    for (std::size_t t = 0; t <= 25; ++t) {
      const Vector sy = multiply(st, in.y);
      double quad = 0.0, trace = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        quad += sy[i] * sy[i];
        trace += st(i, i);
      }
      const double ref = (n * 0.49 + quad - 2.0 * 0.49 * trace) / n;
      CHECK(std::abs(sure_risk(s, k, in.y, 0.7, t) - ref) < 1e-8);
      st = multiply(step, st);
    }
  }

  TEST_CASE("SURE and oracle rules reproduce a scan of their traces") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto in = overfit_instance(seed);
      const auto k = build_empirical_kernel(Kernel::sobolev(), in.x);
      const auto s = StepSchedule::constant(0.25);
      const auto su = stop_sure(s, k, in.y, 1.0, 1000);
      const auto orc = stop_oracle(s, k, in.y, in.fs, 1000);
      REQUIRE(su.triggered);
      REQUIRE(orc.triggered);
      std::vector<double> sure_tr, err_tr;
      for (std::size_t t = 0; t < su.risk_trace.size(); ++t) sure_tr.push_back(sure_risk(s, k, in.y, 1.0, t));
      for (std::size_t t = 0; t < orc.risk_trace.size(); ++t)
        err_tr.push_back(empirical_norm_error(spectral_fit(s, k, in.y, t), in.fs));
      CHECK(static_cast<long>(su.T) == std::max(0L, oracle::first_increase_scan(sure_tr)));
      CHECK(static_cast<long>(orc.T) == std::max(0L, oracle::first_increase_scan(err_tr)));
      for (std::size_t t = 0; t < err_tr.size(); ++t)
        CHECK(orc.risk_trace[t] == doctest::Approx(err_tr[t]).epsilon(1e-9));
    }
  }

  TEST_CASE("oracle on zero data never triggers") {
    const auto k = build_empirical_kernel(Kernel::sobolev(), grid(10));
    const std::vector<double> zero(10, 0.0);
    const auto rec = stop_oracle(StepSchedule::constant(0.5), k, zero, zero, 40);
    CHECK_FALSE(rec.triggered);
    CHECK(rec.T == 40);
  }

  TEST_CASE("hold-out split") {
    Sample s;
    for (int i = 0; i < 9; ++i) {
      s.x.push_back(i / 10.0 + 0.05);
      s.y.push_back(i);
    }
    CounterRng rng(1, 0, 3);
    const auto perm = random_permutation(9, rng);
    const auto split = split_holdout(s, perm);
    CHECK(split.train.x.size() == 4);
    CHECK(split.test.x.size() == 5);
    CHECK(std::is_sorted(split.train.x.begin(), split.train.x.end()));
    CHECK(std::is_sorted(split.test.x.begin(), split.test.x.end()));
    for (std::size_t i = 0; i < split.train.x.size(); ++i)
      CHECK(split.train.y[i] == doctest::Approx(10.0 * (split.train.x[i] - 0.05)));
  }

  TEST_CASE("hold-out rule matches a brute-force scan") {
    const auto in = overfit_instance(21);
    CounterRng rng(21, 0, 3);
    const auto perm = random_permutation(in.x.size(), rng);
    const auto split = split_holdout(Sample{in.x, in.y}, perm);
    const auto s = StepSchedule::constant(0.25);
    const Kernel kern = Kernel::sobolev();
    const auto res = stop_holdout(split, kern, s, 1000);
    REQUIRE(res.record.triggered);

    // Independent recomputation via the spectral fit on the training half.
    const auto ktr = build_empirical_kernel(kern, split.train.x);
    std::vector<double> trace;
    const std::size_t m = split.train.x.size();
    for (std::size_t t = 0; t < res.record.risk_trace.size(); ++t) {
      const auto ftr = spectral_fit(s, ktr, split.train.y, t);
      // Weights of the training fit, then off-design evaluation on the test half.
      const auto z = ktr.project(ftr);
      std::vector<double> zz(m, 0.0);
      for (std::size_t j = 0; j < ktr.rank(); ++j) zz[j] = z[j] / ktr.eigenvalues()[j];
      auto omega = ktr.reconstruct(zz);
      for (auto& w : omega) w /= std::sqrt(double(m));
      const Representer f{&kern, split.train.x, omega};
      double acc = 0.0;
      for (std::size_t i = 0; i < split.test.x.size(); ++i) {
        const double d = split.test.y[i] - f(split.test.x[i]);
        acc += d * d;
      }
      trace.push_back(acc / static_cast<double>(in.x.size()));
    }
    for (std::size_t t = 0; t < trace.size(); ++t)
      CHECK(res.record.risk_trace[t] == doctest::Approx(trace[t]).epsilon(1e-6));
    CHECK(static_cast<long>(res.record.T) == std::max(0L, oracle::first_increase_scan(trace)));

    // Returned weights are the training iterate at T.
    DescentState st = DescentState::initial(m);
    for (std::size_t t = 0; t < res.record.T; ++t) st = descend_step(st, ktr, split.train.y, 0.25);
    for (std::size_t j = 0; j < m; ++j) CHECK(res.omega[j] == doctest::Approx(st.omega[j]).epsilon(1e-9));
  }

  TEST_CASE("hold-out degenerate cases") {
    const Kernel kern = Kernel::sobolev();
    const auto s = StepSchedule::constant(0.5);
    // Train and test responses pull in opposite directions: risk rises at once.
    HoldoutSplit opp;
    opp.train = Sample{{0.1, 0.3, 0.5, 0.7}, {10, 10, 10, 10}};
    opp.test = Sample{{0.2, 0.4, 0.6, 0.8}, {-10, -10, -10, -10}};
    const auto r1 = stop_holdout(opp, kern, s, 100);
    CHECK(r1.record.T == 0);
    CHECK(r1.record.clamped);

    // Noiseless linear target inside the span: the risk keeps falling on a short cap.
    HoldoutSplit clean;
    for (int i = 0; i < 10; ++i) {
      const double xt = (2 * i + 1) / 20.0, xs = (2 * i + 2) / 20.0;
      clean.train.x.push_back(xt);
      clean.train.y.push_back(0.5 * xt);
      clean.test.x.push_back(xs);
      clean.test.y.push_back(0.5 * xs);
    }
    const auto r2 = stop_holdout(clean, kern, s, 15);
    CHECK_FALSE(r2.record.triggered);
    CHECK(r2.record.T == 15);
  }

  TEST_CASE("power iteration top eigenvalue") {
    const auto k = build_empirical_kernel(Kernel::gaussian(0.3), grid(40));
    CHECK(top_eigenvalue_power(k.matrix()) == doctest::Approx(k.top_eigenvalue()).epsilon(1e-10));
  }
}
