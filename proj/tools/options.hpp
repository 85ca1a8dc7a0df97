#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "earlystop/experiments.hpp"

namespace earlystop::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Every flag of every subcommand; unset values are resolved per command
// before the manifest is written, so a manifest is always fully explicit.
struct Options {
  std::string command;
  std::string kernel = "sobolev1";
  std::string target = "abs_shift";
  std::string design = "fixed";
  std::string sigma_source = "estimated";
  std::size_t n = 100;
  double sigma = 1.0;
  std::optional<double> step;
  std::optional<std::size_t> iters;
  std::uint64_t seed = 1;
  std::string out = "out";
  bool svg = false;
  std::vector<std::size_t> n_list;
  std::optional<std::size_t> trials;
  std::vector<std::string> rules;
  std::string rule = "data_dependent";
  std::optional<std::size_t> cap;
  bool population_error = false;
  double nu_min = 1.0;
  double nu_max = 100.0;
  std::size_t nu_points = 100;
  std::size_t samples = 1000;
  bool check = false;
  bool csv = false;
};

// Fills per-command defaults (step, trial count, iteration count, ...).
void resolve_defaults(Options& o);

// Experiment configuration described by the options; ConfigError on bad values.
ExperimentConfig make_config(const Options& o);

nlohmann::json to_json(const Options& o);
Options options_from_json(const nlohmann::json& j);

}  // namespace earlystop::cli
