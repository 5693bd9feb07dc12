#pragma once

#include "stopdeck/datafeed.hpp"
#include "stopdeck/deepstop.hpp"
#include "stopdeck/market.hpp"
#include "stopdeck/simulate.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace stopdeck {

struct LsmcConfig {
  int degree = 3;
  std::size_t paths = 100000;  // fitting paths for simulated generators
};

struct EvaluationConfig {
  std::size_t paths = 100000;
  std::optional<std::uint64_t> seed;
  std::string policy;  // checkpoint for `evaluate`; empty means <out>/policy.ckpt
};

struct DataConfig {
  std::string csv;
  SplitSpec split;
  std::string label;
  std::string sector;
};

// Experiment settings read from `key = value` lines with dotted section
// prefixes. market.s0, market.strike and generator.kind are mandatory; every
// other key has a default (see config_keys()).
struct ExperimentConfig {
  MarketParams market;
  bool discounted = true;
  GeneratorSpec generator;
  TrainingConfig training;
  LsmcConfig lsmc;
  EvaluationConfig evaluation;
  DataConfig data;
  std::string output_dir;
  std::vector<int> sweep_steps;
  std::vector<std::string> report_inputs;
};

struct ConfigKey {
  std::string name;
  std::optional<std::string> default_value;  // nullopt: mandatory
};

const std::vector<ConfigKey>& config_keys();

// Raw key/value pairs; unknown keys are rejected with a suggestion.
std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& source = "<memory>");

// Applies `overrides` (last wins) on top of the parsed file, fills defaults,
// builds and validates the config. Throws ConfigError.
ExperimentConfig build_config(std::map<std::string, std::string> values,
                              const std::vector<std::pair<std::string, std::string>>& overrides = {});

ExperimentConfig parse_config(const std::string& path,
                              const std::vector<std::pair<std::string, std::string>>& overrides = {});
ExperimentConfig parse_config_string(const std::string& text,
                                     const std::vector<std::pair<std::string, std::string>>& overrides = {});

// Every key with its resolved value, one `key = value` per line, sorted.
std::string resolved_config_text(const ExperimentConfig& config);

// Closest known key within edit distance 3, if any.
std::optional<std::string> suggest_key(const std::string& unknown);

}  // namespace stopdeck
