#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "earlystop/errors.hpp"
#include "earlystop/experiments.hpp"

using namespace earlystop;

namespace {

constexpr double kE = 2.718281828459045;

ExperimentConfig small_config(std::size_t n = 40, std::size_t trials = 20) {
  ExperimentConfig cfg;
  cfg.n = n;
  cfg.trials = trials;
  cfg.seed = 17;
  return cfg;
}

struct ThreadsEnv {
  explicit ThreadsEnv(const char* v) {
    if (const char* old = std::getenv("EARLYSTOP_THREADS")) saved = old;
    setenv("EARLYSTOP_THREADS", v, 1);
  }
  ~ThreadsEnv() {
    if (saved.empty()) unsetenv("EARLYSTOP_THREADS");
    else setenv("EARLYSTOP_THREADS", saved.c_str(), 1);
  }
  std::string saved;
};

}  // namespace

TEST_SUITE("experiments") {
  TEST_CASE("generate_data") {
    ExperimentConfig cfg = small_config(4);
    const auto d = generate_data(cfg, 0);
    CHECK(d.x == std::vector<double>{0.25, 0.5, 0.75, 1.0});
    cfg.sigma_true = 0.0;
    const auto clean = generate_data(cfg, 3);
    CHECK(clean.y == clean.fstar);

    cfg = small_config(50);
    const auto a = generate_data(cfg, 7), b = generate_data(cfg, 7), c = generate_data(cfg, 8);
    CHECK(a.y == b.y);
    CHECK(a.noise == b.noise);
    CHECK(a.y != c.y);

    cfg.design = DesignKind::kRandomUniform;
    const auto r = generate_data(cfg, 1);
    CHECK(std::is_sorted(r.x.begin(), r.x.end()));
    CHECK(r.x.front() > 0.0);
    CHECK(r.x.back() < 1.0);
    CHECK(generate_data(cfg, 1).x == r.x);
  }

  TEST_CASE("config validation") {
    ExperimentConfig cfg = small_config();
    cfg.n = 3;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.trials = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.sigma_true = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.rules.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK(small_config(40).effective_cap() == 400);
  }

  TEST_CASE("noise variance estimator") {
    CHECK(estimate_noise_variance(std::vector<double>(10, 3.0)) == 0.0);
    std::vector<double> alt;
    for (int i = 0; i < 101; ++i) alt.push_back(i % 2 ? 0.3 : -0.3);
    CHECK(estimate_noise_variance(alt) == doctest::Approx(2.0 * 0.09).epsilon(1e-14));
    CHECK_THROWS_AS(estimate_noise_variance(std::vector<double>{1, 2, 3}), ConfigError);

    ExperimentConfig cfg = small_config(1000, 100);
    double acc = 0.0;
    for (std::uint64_t t = 0; t < 100; ++t) acc += estimate_noise_variance(generate_data(cfg, t).y);
    const double avg = acc / 100.0;
    CHECK(avg >= 0.9);
    CHECK(avg <= 1.1);
  }

  TEST_CASE("noiseless trial with the target in the span") {
    ExperimentConfig cfg = small_config(30, 1);
    cfg.kernel = Kernel::polynomial(2);
    cfg.fstar = TargetFunction::quadratic();
    cfg.sigma_true = 0.0;
    cfg.cap = 200;
    const TrialResult r = run_trial(cfg, 0);
    CHECK(r.sigma_hat > 0.0);
    CHECK(r.sigma_hat < 0.05);
    const RuleOutcome* orc = r.find(StoppingRuleKind::kOracle);
    REQUIRE(orc);
    for (std::size_t t = 1; t < orc->record.risk_trace.size(); ++t)
      CHECK(orc->record.risk_trace[t] <= orc->record.risk_trace[t - 1] * (1.0 + 1e-12) + 1e-300);
    const RuleOutcome* dd = r.find(StoppingRuleKind::kDataDependent);
    REQUIRE(dd);
    CHECK(dd->empirical_error <= 12.0 * r.eps_hat * r.eps_hat);
  }

  TEST_CASE("a trial reports every rule") {
    ExperimentConfig cfg = small_config(60, 1);
    cfg.population_error = true;
    const TrialResult r = run_trial(cfg, 2);
    CHECK(r.outcomes.size() == 4);
    CHECK(r.eps_hat > 0.0);
    for (const auto& o : r.outcomes) {
      CHECK(o.empirical_error >= 0.0);
      REQUIRE(o.population_error.has_value());
      CHECK(*o.population_error >= 0.0);
      CHECK(o.record.T <= cfg.effective_cap());
    }
    // Population and empirical errors of the same fit are of the same size.
    const auto* dd = r.find(StoppingRuleKind::kDataDependent);
    CHECK(*dd->population_error < 3.0 * dd->empirical_error + 0.01);
  }

  TEST_CASE("random design trials") {
    ExperimentConfig cfg = small_config(40, 3);
    cfg.design = DesignKind::kRandomUniform;
    cfg.population_error = true;
    const auto res = run_trials(cfg);
    CHECK(res.size() == 3);
    for (const auto& r : res) CHECK(r.outcomes.size() == 4);
  }

  TEST_CASE("trial errors carry the trial id") {
    ExperimentConfig cfg = small_config(20, 1);
    cfg.sigma_true = 0.0;
    cfg.sigma_source = SigmaSource::kKnown;
    try {
      run_trial(cfg, 5);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("trial 5") != std::string::npos);
    }
  }

  TEST_CASE("results do not depend on the thread count") {
    ExperimentConfig cfg = small_config(50, 12);
    std::vector<TrialResult> one, many;
    {
      ThreadsEnv env("1");
      one = run_trials(cfg);
    }
    {
      ThreadsEnv env("4");
      many = run_trials(cfg);
    }
    REQUIRE(one.size() == many.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
      CHECK(one[i].trial_id == i);
      CHECK(one[i].eps_hat == many[i].eps_hat);
      for (std::size_t k = 0; k < one[i].outcomes.size(); ++k) {
        CHECK(one[i].outcomes[k].record.T == many[i].outcomes[k].record.T);
        CHECK(one[i].outcomes[k].empirical_error == many[i].outcomes[k].empirical_error);
      }
    }
    ThreadsEnv bad("zero");
    CHECK_THROWS_AS(worker_threads(), ConfigError);
  }

  TEST_CASE("data-dependent error is comparable to the oracle") {
    ExperimentConfig cfg = small_config(100, 1000);
    cfg.rules = {StoppingRuleKind::kDataDependent, StoppingRuleKind::kOracle};
    const auto res = run_trials(cfg);
    double dd = 0.0, orc = 0.0;
    for (const auto& r : res) {
      dd += r.outcomes[0].empirical_error;
      orc += r.outcomes[1].empirical_error;
    }
    CHECK(dd >= 0.5 * orc);
    CHECK(dd <= 3.0 * orc);
  }

  TEST_CASE("mean error stays below 4/(e eta_t) before the stopping time") {
    ExperimentConfig cfg = small_config(100, 1000);
    cfg.rules = {StoppingRuleKind::kDataDependent};
    const ExperimentContext ctx(cfg);
    std::vector<std::size_t> stop(cfg.trials);
    std::vector<std::vector<double>> traces(cfg.trials);
    std::size_t longest = 0;
    for (std::size_t i = 0; i < cfg.trials; ++i) {
      stop[i] = ctx.run(i).outcomes[0].record.T;
      longest = std::max(longest, stop[i]);
    }
    for (std::size_t i = 0; i < cfg.trials; ++i) traces[i] = ctx.error_trace(i, longest);
    for (std::size_t t = 1; t <= longest; ++t) {
      double acc = 0.0;
      std::size_t count = 0;
      for (std::size_t i = 0; i < cfg.trials; ++i)
        if (t <= stop[i]) {
          acc += traces[i][t];
          ++count;
        }
      if (count < 50) continue;
      CAPTURE(t);
      CHECK(acc / count <= 1.2 * 4.0 / (kE * cfg.schedule.eta(t)));
    }
  }

  TEST_CASE("mean error trace") {
    ExperimentConfig cfg = small_config(30, 5);
    const auto tr = mean_error_trace(cfg, 10);
    CHECK(tr.size() == 11);
    const ExperimentContext ctx(cfg);
    double first = 0.0;
    for (std::size_t i = 0; i < 5; ++i) first += ctx.error_trace(i, 10)[4];
    CHECK(tr[4] == doctest::Approx(first / 5.0).epsilon(1e-14));
  }

  TEST_CASE("statistics helpers") {
    const std::vector<double> v = {1, 2, 3, 4};
    CHECK(mean(v) == 2.5);
    CHECK(*standard_error(v) == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
    CHECK_FALSE(standard_error(std::vector<double>{1.0}).has_value());
    const std::vector<double> x = {1, 2, 3, 4}, y = {3, 5, 7, 9};
    const auto fit = linear_fit(x, y);
    CHECK(fit.slope == doctest::Approx(2.0));
    CHECK(fit.intercept == doctest::Approx(1.0));
    CHECK(fit.r_squared == doctest::Approx(1.0));
    CHECK(spearman(x, std::vector<double>{10, 20, 30, 1000}) == doctest::Approx(1.0));
    CHECK(spearman(x, std::vector<double>{4, 3, 2, 1}) == doctest::Approx(-1.0));
    // Ties get averaged ranks: ranks (1, 2.5, 2.5, 4) vs (1, 2, 3, 4).
    CHECK(spearman(x, std::vector<double>{1, 5, 5, 9}) == doctest::Approx(0.9486832980505138));
  }

  TEST_CASE("rate sweep") {
    ExperimentConfig cfg = small_config(40, 30);
    const std::vector<std::size_t> one = {40};
    const auto single = rate_sweep(cfg, one);
    CHECK(single.no_fit);
    CHECK_FALSE(single.fit.has_value());
    CHECK(single.rows.size() == 1);
    const std::vector<std::size_t> ns = {30, 60, 120};
    const auto sweep = rate_sweep(cfg, ns);
    CHECK_FALSE(sweep.no_fit);
    REQUIRE(sweep.fit.has_value());
    for (const auto& r : sweep.rows) CHECK(r.inv_pow == doctest::Approx(std::pow(r.mean_mse, -1.5)));
    const std::vector<std::size_t> bad = {60, 30};
    CHECK_THROWS_AS(rate_sweep(cfg, bad), ConfigError);
  }

  TEST_CASE("compare rules with a single rule") {
    ExperimentConfig cfg = small_config(40, 1);
    cfg.rules = {StoppingRuleKind::kOracle};
    const std::vector<std::size_t> ns = {40, 80};
    const auto table = compare_rules(cfg, ns);
    CHECK(table.size() == 2);
    for (const auto& row : table) {
      CHECK(row.rule == StoppingRuleKind::kOracle);
      CHECK_FALSE(row.stderr_mse.has_value());
    }
  }
}
