#include "earlystop/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "earlystop/complexity.hpp"
#include "earlystop/descent.hpp"
#include "earlystop/experiments.hpp"
#include "earlystop/rng.hpp"
#include "earlystop/stopping.hpp"

namespace earlystop {

namespace {

constexpr double kE = 2.718281828459045235360287471352662;

// Stream ids for the instance generators, disjoint from the experiment streams.
enum : std::uint64_t {
  kShrinkStream = 101,
  kDecompStream = 102,
  kDecompNoiseStream = 103,
  kRecursionStream = 104,
  kRadiusStream = 105,
  kSandwichStream = 106,
};

class Tally {
 public:
  Tally(std::string name, double slack) {
    report_.name = std::move(name);
    report_.slack = slack;
    report_.worst_margin = std::numeric_limits<double>::infinity();
  }
  // Records margin = rhs - lhs; violation below -slack.
  bool observe(double margin) { return observe(margin, report_.slack); }
  bool observe(double margin, double slack) {
    report_.worst_margin = std::min(report_.worst_margin, margin);
    return margin >= -slack;
  }
  void instance(bool ok) {
    ++report_.instances;
    if (!ok) ++report_.violations;
  }
  PropertyReport finish() {
    report_.pass = report_.violations == 0;
    return report_;
  }

 private:
  PropertyReport report_;
};

double log_uniform(CounterRng& rng, double lo, double hi) {
  return std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * rng.uniform());
}

std::size_t uniform_int(CounterRng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

// Descending nonnegative spectrum of one of several shapes.
Vector random_spectrum(CounterRng& rng, std::size_t n) {
  Vector lam(n, 0.0);
  const double top = log_uniform(rng, 1e-2, 2.0);
  switch (rng.below(4)) {
    case 0: {
      const double nu = 0.6 + 2.4 * rng.uniform();
      for (std::size_t k = 0; k < n; ++k) lam[k] = top * std::pow(static_cast<double>(k + 1), -2.0 * nu);
      break;
    }
    case 1: {
      const double b = log_uniform(rng, 0.05, 2.0);
      for (std::size_t k = 0; k < n; ++k) lam[k] = top * std::exp(-b * static_cast<double>(k));
      break;
    }
    case 2: {
      const std::size_t m = uniform_int(rng, 1, std::min<std::size_t>(n, 6));
      for (std::size_t k = 0; k < m; ++k) lam[k] = top * rng.uniform();
      lam[0] = top;
      break;
    }
    default:
      for (std::size_t k = 0; k < n; ++k) lam[k] = top * rng.uniform();
      lam[0] = top;
      break;
  }
  std::sort(lam.begin(), lam.end(), std::greater<>());
  return lam;
}

StepSchedule random_schedule(CounterRng& rng, double top) {
  const double amax = max_valid_step(top);
  if (rng.below(2) == 0) return StepSchedule::constant(amax * (0.05 + 0.95 * rng.uniform()));
  const std::size_t len = uniform_int(rng, 1, 50);
  std::vector<double> steps(len);
  double a = amax * (0.2 + 0.8 * rng.uniform());
  for (auto& s : steps) {
    s = a;
    a *= 0.9 + 0.1 * rng.uniform();
  }
  return StepSchedule::custom(std::move(steps));
}

Kernel random_kernel(CounterRng& rng) {
  switch (rng.below(3)) {
    case 0:
      return Kernel::sobolev();
    case 1:
      return Kernel::gaussian(0.1 + 0.9 * rng.uniform());
    default:
      return Kernel::polynomial(static_cast<int>(uniform_int(rng, 1, 4)));
  }
}

std::vector<double> random_design(CounterRng& rng, std::size_t n) {
  std::vector<double> x(n);
  for (auto& v : x) v = rng.uniform();
  std::sort(x.begin(), x.end());
  return x;
}

std::function<double(double)> random_target(CounterRng& rng) {
  const double a = 2.0 * rng.uniform() - 1.0;
  const double b = 2.0 * rng.uniform() - 1.0;
  const double c = rng.uniform();
  const double k = 1.0 + 6.0 * rng.uniform();
  return [=](double x) { return a * std::abs(x - c) + b * std::sin(k * x); };
}

}  // namespace

PropertyReport check_shrinkage_bounds(std::size_t samples, std::uint64_t seed, double slack) {
  Tally tally("shrinkage_bounds", slack);
  for (std::size_t i = 0; i < samples; ++i) {
    CounterRng rng(seed, i, kShrinkStream);
    const std::size_t n = uniform_int(rng, 1, 200);
    const Vector lam = random_spectrum(rng, n);
    const StepSchedule schedule = random_schedule(rng, lam[0]);
    const std::size_t t = uniform_int(rng, 0, 500);
    const double eta = schedule.eta(t);
    const double nu = log_uniform(rng, 1e-3, 1e4);
    const Vector s = shrinkage_factors(schedule, lam, t);
    bool ok = true;
    for (std::size_t j = 0; j < n; ++j) {
      if (!(lam[j] > 0.0)) continue;
      const double el = eta * lam[j];
      ok &= tally.observe(s[j] * s[j]);
      if (el > 0.0) ok &= tally.observe(1.0 / (2.0 * kE * el) - s[j] * s[j]);
      ok &= tally.observe((1.0 - s[j]) - 0.5 * std::min(1.0, el));
      ok &= tally.observe(std::min(1.0, el) - (1.0 - s[j]));

      const double nl = nu * lam[j];
      const double r = 1.0 / (1.0 + nl);
      ok &= tally.observe(1.0 / (4.0 * nl) - r * r);
      ok &= tally.observe((1.0 - r) - 0.5 * std::min(1.0, nl));
      ok &= tally.observe(std::min(1.0, nl) - (1.0 - r));
    }
    tally.instance(ok);
  }
  return tally.finish();
}

PropertyReport check_decomposition(std::size_t samples, std::uint64_t seed, std::size_t draws, double lower_slack) {
  Tally tally("bias_variance_decomposition", 0.0);
  for (std::size_t i = 0; i < samples; ++i) {
    CounterRng rng(seed, i, kDecompStream);
    const std::size_t n = uniform_int(rng, 8, 40);
    const Kernel kernel = random_kernel(rng);
    const std::vector<double> x = random_design(rng, n);
    const auto fstar = random_target(rng);
    const double sigma = log_uniform(rng, 0.05, 2.0);
    const std::size_t t = uniform_int(rng, 0, 300);
    const EmpiricalKernel k = build_empirical_kernel(kernel, x);
    const StepSchedule schedule = random_schedule(rng, k.top_eigenvalue());

    Vector fs(n);
    for (std::size_t j = 0; j < n; ++j) fs[j] = fstar(x[j]);
    const Vector s = shrinkage_factors(schedule, k.eigenvalues(), t);
    const Vector rf = k.project(fs);
    const double inv_n = 1.0 / static_cast<double>(n);

    bool ok = true;
    double err_sum = 0.0;
    double var_sum = 0.0;
    CounterRng noise_rng(seed, i, kDecompNoiseStream);
    for (std::size_t d = 0; d < std::max<std::size_t>(draws, 1); ++d) {
      Vector w(n), y(n);
      for (std::size_t j = 0; j < n; ++j) {
        w[j] = sigma * noise_rng.normal();
        y[j] = fs[j] + w[j];
      }
      double err;
      if (d == 0) {
        // First draw: run the recursion itself rather than the spectral form.
        DescentState st = DescentState::initial(n);
        for (std::size_t tau = 0; tau < t; ++tau) st = descend_step(st, k, y, schedule.alpha(tau));
        err = empirical_norm_error(st.fvals, fs);
      } else {
        const Vector rw = k.project(w);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double e = (1.0 - s[j]) * rw[j] - s[j] * rf[j];
          acc += e * e;
        }
        err = acc * inv_n;
      }
      const BiasVarianceSplit bv = bias_variance_split(schedule, k, t, fs, w);
      const double bound = bv.squared_bias + bv.variance;
      ok &= tally.observe(bound - err, 1e-12 * std::max(1.0, bound));
      err_sum += err;
      var_sum += bv.variance;
    }
    if (draws > 0) {
      const double dd = static_cast<double>(draws);
      // E||f^t - f*||^2 = B^2/2 + E[V]/2 exactly, so E[V]/2 is the sharp lower bound.
      ok &= tally.observe(err_sum / dd - (1.0 - lower_slack) * 0.5 * var_sum / dd, 0.0);
    }
    tally.instance(ok);
  }
  return tally.finish();
}

PropertyReport check_recursion_equivalence(std::size_t samples, std::uint64_t seed, std::size_t steps,
                                           double tolerance) {
  Tally tally("recursion_equivalence", 0.0);
  for (std::size_t i = 0; i < samples; ++i) {
    CounterRng rng(seed, i, kRecursionStream);
    const std::size_t n = uniform_int(rng, 8, 40);
    const Kernel kernel = random_kernel(rng);
    const std::vector<double> x = random_design(rng, n);
    const EmpiricalKernel k = build_empirical_kernel(kernel, x);
    const StepSchedule schedule = random_schedule(rng, k.top_eigenvalue());
    Vector y(n);
    for (auto& v : y) v = rng.normal();

    SpectralPath path(k, schedule, y);
    DescentState st = DescentState::initial(n);
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    double worst = 0.0;
    for (std::size_t t = 0; t <= steps; ++t) {
      const Vector spectral = path.fvals();
      const Vector from_omega = k.apply(st.omega);
      for (std::size_t j = 0; j < n; ++j) {
        worst = std::max(worst, std::abs(st.fvals[j] - spectral[j]));
        worst = std::max(worst, std::abs(st.fvals[j] - sqrt_n * from_omega[j]));
      }
      if (t == steps) break;
      st = descend_step(st, k.matrix(), k.top_eigenvalue(), y, schedule.alpha(t));
      path.advance();
    }
    tally.instance(tally.observe(tolerance - worst));
  }
  return tally.finish();
}

PropertyReport check_critical_radius(std::size_t samples, std::uint64_t seed, double residual_tol, double scan_tol) {
  Tally tally("critical_radius", 0.0);
  for (std::size_t i = 0; i < samples; ++i) {
    CounterRng rng(seed, i, kRadiusStream);
    const std::size_t n = uniform_int(rng, 5, 300);
    const Vector lam = random_spectrum(rng, n);
    const double sigma = log_uniform(rng, 1e-2, 10.0);
    const EmpiricalComplexity ec(lam);
    const CriticalRadius cr = critical_empirical_radius(ec, sigma);
    const double factor = kEmpiricalCriticalFactor * sigma;
    auto g = [&](double e) { return e * e / factor - ec(e); };

    bool ok = tally.observe(residual_tol - std::abs(g(cr.value)));

    // Nested grid scan for the first sign change of g.
    double lo = 0.0;
    double hi = std::sqrt(lam[0]) + 1.0;
    while (g(hi) <= 0.0) hi *= 2.0;
    constexpr int kPoints = 1000;
    while (hi - lo > 1e-9 * std::max(1.0, hi)) {
      const double h = (hi - lo) / kPoints;
      int k = 1;
      while (k < kPoints && g(lo + h * k) <= 0.0) ++k;
      const double new_lo = lo + h * (k - 1);
      hi = k == kPoints ? hi : lo + h * k;
      lo = new_lo;
    }
    ok &= tally.observe(scan_tol - std::abs(hi - cr.value));
    tally.instance(ok);
  }
  return tally.finish();
}

PropertyReport check_stopping_sandwich(std::size_t samples, std::uint64_t seed, double slack) {
  Tally tally("stopping_sandwich", 0.0);
  for (std::size_t i = 0; i < samples; ++i) {
    CounterRng rng(seed, i, kSandwichStream);
    const std::size_t n = uniform_int(rng, 5, 200);
    const Vector lam = random_spectrum(rng, n);
    const double sigma = log_uniform(rng, 0.1, 10.0);
    const StepSchedule schedule = random_schedule(rng, lam[0]);
    const EmpiricalComplexity ec(lam);
    const double eps2 = std::pow(critical_empirical_radius(ec, sigma).value, 2);
    // eta_t grows at least linearly in the tail step, so this cap always suffices.
    const double tail = schedule.is_constant() ? schedule.constant_value() : schedule.steps().back();
    const std::size_t cap =
        schedule.steps().size() + static_cast<std::size_t>(std::ceil(2.0 / (tail * eps2))) + 10;
    const StoppingRecord rec = stop_data_dependent(schedule, ec, sigma, cap);
    bool ok = rec.triggered;
    const double upper_eta = schedule.eta(rec.T);
    const double lower_eta = schedule.eta(rec.T + 1);
    const double upper = upper_eta > 0.0 ? 1.0 / upper_eta : std::numeric_limits<double>::infinity();
    // Margins relative to eps_hat^2.
    ok &= tally.observe((upper - eps2) / eps2, slack);
    ok &= tally.observe((eps2 - 1.0 / lower_eta) / eps2, slack);
    tally.instance(ok);
  }
  return tally.finish();
}

std::vector<PropertyReport> run_property_suite(std::size_t samples, std::uint64_t seed) {
  std::vector<PropertyReport> out(5);
  const std::vector<std::function<PropertyReport()>> checks = {
      [&] { return check_shrinkage_bounds(samples, seed); },
      [&] { return check_decomposition(samples, seed); },
      [&] { return check_recursion_equivalence(samples, seed); },
      [&] { return check_critical_radius(samples, seed); },
      [&] { return check_stopping_sandwich(samples, seed); },
  };
  parallel_for(checks.size(), [&](std::size_t i) { out[i] = checks[i](); });
  return out;
}

}  // namespace earlystop
