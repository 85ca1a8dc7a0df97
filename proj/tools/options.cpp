#include "options.hpp"

#include <fmt/format.h>

#include "earlystop/errors.hpp"

namespace earlystop::cli {

void resolve_defaults(Options& o) {
  const bool rule_protocol = o.command == "compare-rules" || o.command == "krr";
  if (!o.step) o.step = rule_protocol ? 1.0 : 0.25;
  if (!o.iters) o.iters = 100;
  if (!o.trials) {
    if (o.command == "path" || o.command == "critical-radius") o.trials = 1;
    else if (o.command == "krr") o.trials = 200;
    else o.trials = 1000;
  }
  if (o.n_list.empty()) o.n_list = o.command == "rate" ? std::vector<std::size_t>{50, 100, 200, 300}
                                                       : std::vector<std::size_t>{50, 100, 200};
  if (o.rules.empty()) o.rules = {"data_dependent", "holdout", "sure", "oracle"};
}

ExperimentConfig make_config(const Options& o) {
  ExperimentConfig cfg;
  cfg.n = o.n;
  if (o.design == "fixed") cfg.design = DesignKind::kFixed;
  else if (o.design == "random") cfg.design = DesignKind::kRandomUniform;
  else throw ConfigError(fmt::format("unknown design '{}'", o.design));
  cfg.fstar = TargetFunction::parse(o.target);
  cfg.sigma_true = o.sigma;
  cfg.kernel = Kernel::parse(o.kernel);
  cfg.schedule = StepSchedule::constant(o.step.value_or(0.25));
  cfg.trials = o.trials.value_or(1);
  cfg.seed = o.seed;
  if (o.sigma_source == "known") cfg.sigma_source = SigmaSource::kKnown;
  else if (o.sigma_source == "estimated") cfg.sigma_source = SigmaSource::kEstimated;
  else throw ConfigError(fmt::format("unknown sigma source '{}'", o.sigma_source));
  cfg.rules.clear();
  for (const auto& r : o.rules) cfg.rules.push_back(parse_rule(r));
  if (cfg.rules.empty()) cfg.rules = {StoppingRuleKind::kDataDependent};
  cfg.cap = o.cap;
  cfg.population_error = o.population_error;
  return cfg;
}

nlohmann::json to_json(const Options& o) {
  nlohmann::json j;
  j["command"] = o.command;
  j["kernel"] = o.kernel;
  j["target"] = o.target;
  j["design"] = o.design;
  j["sigma_source"] = o.sigma_source;
  j["n"] = o.n;
  j["sigma"] = o.sigma;
  j["step"] = o.step.value_or(0.25);
  j["iters"] = o.iters.value_or(100);
  j["seed"] = o.seed;
  j["out"] = o.out;
  j["svg"] = o.svg;
  j["n_list"] = o.n_list;
  j["trials"] = o.trials.value_or(1);
  j["rules"] = o.rules;
  j["rule"] = o.rule;
  j["cap"] = o.cap ? nlohmann::json(*o.cap) : nlohmann::json(nullptr);
  j["population_error"] = o.population_error;
  j["nu_min"] = o.nu_min;
  j["nu_max"] = o.nu_max;
  j["nu_points"] = o.nu_points;
  j["samples"] = o.samples;
  j["check"] = o.check;
  j["csv"] = o.csv;
  return j;
}

Options options_from_json(const nlohmann::json& j) {
  Options o;
  try {
    o.command = j.at("command").get<std::string>();
    o.kernel = j.at("kernel").get<std::string>();
    o.target = j.at("target").get<std::string>();
    o.design = j.at("design").get<std::string>();
    o.sigma_source = j.at("sigma_source").get<std::string>();
    o.n = j.at("n").get<std::size_t>();
    o.sigma = j.at("sigma").get<double>();
    o.step = j.at("step").get<double>();
    o.iters = j.at("iters").get<std::size_t>();
    o.seed = j.at("seed").get<std::uint64_t>();
    o.out = j.at("out").get<std::string>();
    o.svg = j.at("svg").get<bool>();
    o.n_list = j.at("n_list").get<std::vector<std::size_t>>();
    o.trials = j.at("trials").get<std::size_t>();
    o.rules = j.at("rules").get<std::vector<std::string>>();
    o.rule = j.at("rule").get<std::string>();
    if (!j.at("cap").is_null()) o.cap = j.at("cap").get<std::size_t>();
    o.population_error = j.at("population_error").get<bool>();
    o.nu_min = j.at("nu_min").get<double>();
    o.nu_max = j.at("nu_max").get<double>();
    o.nu_points = j.at("nu_points").get<std::size_t>();
    o.samples = j.at("samples").get<std::size_t>();
    o.check = j.at("check").get<bool>();
    o.csv = j.at("csv").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("malformed manifest: {}", e.what()));
  }
  return o;
}

}  // namespace earlystop::cli
