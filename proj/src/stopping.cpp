#include "earlystop/stopping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "earlystop/errors.hpp"
#include "earlystop/simd.hpp"

namespace earlystop {

std::string_view rule_name(StoppingRuleKind rule) {
  switch (rule) {
    case StoppingRuleKind::kDataDependent:
      return "data_dependent";
    case StoppingRuleKind::kHoldOut:
      return "holdout";
    case StoppingRuleKind::kSure:
      return "sure";
    case StoppingRuleKind::kOracle:
      return "oracle";
  }
  return "unknown";
}

StoppingRuleKind parse_rule(std::string_view name) {
  if (name == "data_dependent" || name == "dd" || name == "datadependent") return StoppingRuleKind::kDataDependent;
  if (name == "holdout" || name == "ho" || name == "hold-out") return StoppingRuleKind::kHoldOut;
  if (name == "sure" || name == "su") return StoppingRuleKind::kSure;
  if (name == "oracle" || name == "or") return StoppingRuleKind::kOracle;
  throw ConfigError(fmt::format("unknown stopping rule '{}'", name));
}

StoppingRecord stop_data_dependent(const StepSchedule& schedule, const EmpiricalComplexity& ec, double sigma,
                                   std::size_t cap, double factor) {
  if (!(sigma > 0.0)) throw ConfigError(fmt::format("sigma must be positive; got {}", sigma));
  if (!(ec.top_eigenvalue() > 0.0)) {
    throw DegenerateKernel("all empirical eigenvalues are zero; the stopping criterion never fires");
  }
  StoppingRecord rec;
  rec.rule = StoppingRuleKind::kDataDependent;
  for (std::size_t t = 1; t <= cap; ++t) {
    const double eta = schedule.eta(t);
    if (!(eta > 0.0)) {
      rec.risk_trace.push_back(-std::numeric_limits<double>::infinity());
      continue;
    }
    const double margin = ec(1.0 / std::sqrt(eta)) - 1.0 / (factor * sigma * eta);
    rec.risk_trace.push_back(margin);
    if (margin > 0.0) {
      rec.T = t - 1;
      rec.triggered = true;
      return rec;
    }
  }
  rec.T = cap;
  rec.triggered = false;
  return rec;
}

StoppingRecord first_increase(StoppingRuleKind rule, const std::function<double(std::size_t)>& risk,
                              std::size_t cap) {
  StoppingRecord rec;
  rec.rule = rule;
  rec.risk_trace.push_back(risk(0));
  for (std::size_t t = 0; t + 1 <= cap; ++t) {
    rec.risk_trace.push_back(risk(t + 1));
    if (rec.risk_trace[t + 1] > rec.risk_trace[t]) {
      rec.triggered = true;
      if (t == 0) {
        rec.T = 0;
        rec.clamped = true;
      } else {
        rec.T = t - 1;
      }
      return rec;
    }
  }
  rec.T = cap;
  rec.triggered = false;
  return rec;
}

double sure_risk(const StepSchedule& schedule, const EmpiricalKernel& kernel, std::span<const double> y,
                 double sigma, std::size_t t) {
  const Vector s = shrinkage_factors(schedule, kernel.eigenvalues(), t);
  const Vector ry = kernel.project(y);
  double quad = 0.0;
  double trace = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    quad += s[j] * s[j] * ry[j] * ry[j];
    trace += s[j];
  }
  const double n = static_cast<double>(kernel.size());
  const double s2 = sigma * sigma;
  return (n * s2 + quad - 2.0 * s2 * trace) / n;
}

namespace {

// Evaluates a SpectralPath quantity at monotonically increasing t.
template <class F>
std::function<double(std::size_t)> path_trace(SpectralPath& path, F quantity) {
  return [&path, quantity](std::size_t t) {
    while (path.t() < t) path.advance();
    return quantity(path);
  };
}

}  // namespace

StoppingRecord stop_sure(const StepSchedule& schedule, const EmpiricalKernel& kernel, std::span<const double> y,
                         double sigma, std::size_t cap) {
  if (!(sigma > 0.0)) throw ConfigError(fmt::format("sigma must be positive; got {}", sigma));
  SpectralPath path(kernel, schedule, y);
  return first_increase(StoppingRuleKind::kSure,
                        path_trace(path, [sigma](const SpectralPath& p) { return p.sure_risk(sigma); }), cap);
}

StoppingRecord stop_oracle(const StepSchedule& schedule, const EmpiricalKernel& kernel, std::span<const double> y,
                           std::span<const double> fstar_vals, std::size_t cap) {
  SpectralPath path(kernel, schedule, y);
  path.set_truth(fstar_vals);
  return first_increase(StoppingRuleKind::kOracle,
                        path_trace(path, [](const SpectralPath& p) { return p.empirical_error(); }), cap);
}

HoldoutSplit split_holdout(const Sample& full, std::span<const std::size_t> permutation) {
  const std::size_t n = full.x.size();
  if (full.y.size() != n || permutation.size() != n) throw DimensionMismatch("split_holdout: size mismatch");
  if (n < 4) throw ConfigError("hold-out needs at least 4 samples");
  const std::size_t n_train = n / 2;
  std::vector<std::size_t> train(permutation.begin(), permutation.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(permutation.begin() + static_cast<std::ptrdiff_t>(n_train), permutation.end());
  auto by_x = [&](std::size_t a, std::size_t b) { return full.x[a] < full.x[b] || (full.x[a] == full.x[b] && a < b); };
  std::sort(train.begin(), train.end(), by_x);
  std::sort(test.begin(), test.end(), by_x);
  HoldoutSplit split;
  for (std::size_t i : train) {
    split.train.x.push_back(full.x[i]);
    split.train.y.push_back(full.y[i]);
  }
  for (std::size_t i : test) {
    split.test.x.push_back(full.x[i]);
    split.test.y.push_back(full.y[i]);
  }
  return split;
}

double top_eigenvalue_power(const Matrix& symmetric, int max_iterations, double tolerance) {
  const std::size_t n = symmetric.rows();
  Vector v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  double lambda = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    Vector w = multiply(symmetric, v);
    const double norm = std::sqrt(simd::dot(w, w));
    if (norm == 0.0) return 0.0;
    const double next = simd::dot(v, w);
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
    if (std::abs(next - lambda) <= tolerance * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

HoldoutResult stop_holdout(const HoldoutSplit& split, const Kernel& kernel, const StepSchedule& schedule,
                           std::size_t cap) {
  const std::size_t m = split.train.x.size();
  const std::size_t n_total = m + split.test.x.size();
  if (m < 2 || split.test.x.empty()) throw ConfigError("hold-out halves are too small");

  Matrix k_train = cross_gram(kernel, split.train.x, split.train.x);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i)
    for (double& v : k_train.row(i)) v *= inv_m;
  // Power iteration converges from below; the relative slack covers its residual error.
  const double top = top_eigenvalue_power(k_train) * (1.0 + 1e-9);
  schedule.validate(top);

  Matrix sections = cross_gram(kernel, split.test.x, split.train.x);
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));
  for (std::size_t i = 0; i < sections.rows(); ++i)
    for (double& v : sections.row(i)) v *= inv_sqrt_m;

  auto holdout_risk = [&](const Vector& omega) {
    double acc = 0.0;
    for (std::size_t i = 0; i < sections.rows(); ++i) {
      const double d = split.test.y[i] - simd::dot(sections.row(i), omega);
      acc += d * d;
    }
    return acc / static_cast<double>(n_total);
  };

  // omega^{t+1} = omega^t - alpha (K omega^t - y / sqrt(m)); weights kept for t-2..t.
  std::vector<Vector> history;
  Vector omega(m, 0.0);
  std::size_t at = 0;
  auto advance_to = [&](std::size_t t) {
    while (at < t) {
      const double a = schedule.alpha(at);
      Vector k_omega = multiply(k_train, omega);
      simd::axpy(omega, -a, k_omega);
      simd::axpy(omega, a * inv_sqrt_m, split.train.y);
      ++at;
      history.push_back(omega);
      if (history.size() > 3) history.erase(history.begin());
    }
  };
  history.push_back(omega);

  HoldoutResult out;
  out.record = first_increase(
      StoppingRuleKind::kHoldOut,
      [&](std::size_t t) {
        advance_to(t);
        return holdout_risk(omega);
      },
      cap);
  out.train_x = split.train.x;
  // history holds the weights for t = at-2, at-1, at (or fewer near the start).
  const std::size_t T = out.record.T;
  if (T > at || at - T >= history.size()) {
    Vector w(m, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      const double a = schedule.alpha(t);
      Vector k_omega = multiply(k_train, w);
      simd::axpy(w, -a, k_omega);
      simd::axpy(w, a * inv_sqrt_m, split.train.y);
    }
    out.omega = std::move(w);
  } else {
    out.omega = history[history.size() - 1 - (at - T)];
  }
  return out;
}

}  // namespace earlystop
