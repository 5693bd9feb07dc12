#include "stopdeck/config.hpp"

#include "stopdeck/error.hpp"
#include "stopdeck/numtext.hpp"

#include <algorithm>
#include <filesystem>
#include <limits>
#include <fstream>
#include <sstream>

namespace stopdeck {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

bool is_known(const std::string& key) {
  const auto& keys = config_keys();
  return std::any_of(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.name == key; });
}

[[noreturn]] void unknown_key(const std::string& key, const std::string& where) {
  std::string msg = where + "unknown key '" + key + "'";
  if (auto s = suggest_key(key)) msg += " (did you mean '" + *s + "'?)";
  throw ConfigError(msg);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class F>
auto field(const std::map<std::string, std::string>& values, const std::string& key, F&& convert) {
  const std::string& text = values.at(key);
  try {
    return convert(text);
  } catch (const ConfigError& e) {
    throw ConfigError(key + " = " + text + ": " + e.what());
  }
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string join_strings(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"market.s0", std::nullopt},
      {"market.strike", std::nullopt},
      {"market.maturity", "3"},
      {"market.rate", "0.05"},
      {"market.dividend", "0"},
      {"market.sigma", "0.1"},
      {"market.steps", "50"},
      {"market.option", "put"},
      {"market.discounted", "true"},
      {"generator.kind", std::nullopt},
      {"generator.hurst", "0.7"},
      {"generator.ampl", "0.2"},
      {"generator.freq1", "0.3"},
      {"generator.freq2", "2"},
      {"generator.noise_std", "0.01"},
      {"generator.random_phase", "true"},
      {"training.epochs", "300"},
      {"training.batch", "8192"},
      {"training.window", "25"},
      {"training.optimizer", "adam"},
      {"training.learning_rate", "0.001"},
      {"training.beta1", "0.9"},
      {"training.beta2", "0.999"},
      {"training.epsilon", "1e-08"},
      {"training.momentum", "0.9"},
      {"lsmc.degree", "3"},
      {"lsmc.paths", "100000"},
      {"evaluation.paths", "100000"},
      {"evaluation.seed", ""},
      {"evaluation.policy", ""},
      {"data.csv", ""},
      {"data.in_sample_frac", "0.8"},
      {"data.train_frac", "0.7"},
      {"data.label", ""},
      {"data.sector", ""},
      {"output.dir", ""},
      {"sweep.steps", ""},
      {"report.inputs", ""},
  };
  return keys;
}

std::optional<std::string> suggest_key(const std::string& unknown) {
  std::optional<std::string> best;
  std::size_t best_d = 4;
  const auto dot = unknown.rfind('.');
  const std::string tail = dot == std::string::npos ? unknown : unknown.substr(dot + 1);
  for (const auto& k : config_keys()) {
    std::size_t d = edit_distance(unknown, k.name);
    if (dot == std::string::npos) {
      // Bare names are compared against the part after the section prefix.
      d = std::min(d, edit_distance(tail, k.name.substr(k.name.find('.') + 1)));
    }
    if (d < best_d) {
      best_d = d;
      best = k.name;
    }
  }
  return best;
}

std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& source) {
  std::map<std::string, std::string> values;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no) + ": ";
    std::string body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    // Trailing comments need a space before '#'.
    for (std::size_t i = 1; i < body.size(); ++i) {
      if (body[i] == '#' && (body[i - 1] == ' ' || body[i - 1] == '\t')) {
        body = trim(body.substr(0, i));
        break;
      }
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (!is_known(key)) unknown_key(key, where);
    values[key] = value;
  }
  return values;
}

ExperimentConfig build_config(std::map<std::string, std::string> values,
                              const std::vector<std::pair<std::string, std::string>>& overrides) {
  for (const auto& [k, v] : overrides) {
    if (!is_known(k)) unknown_key(k, "override: ");
    values[k] = v;
  }
  for (const auto& key : config_keys()) {
    if (values.count(key.name)) continue;
    if (!key.default_value) throw ConfigError("missing mandatory key '" + key.name + "'");
    values[key.name] = *key.default_value;
  }

  const auto as_double = [](const std::string& s) { return parse_double(s); };
  const auto as_bool = [](const std::string& s) { return parse_bool(s); };
  const auto as_int = [](const std::string& s) {
    const auto v = parse_int(s);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      throw ConfigError("integer out of range");
    }
    return static_cast<int>(v);
  };
  const auto as_count = [](const std::string& s) {
    const auto v = parse_uint(s);
    if (v == 0) throw ConfigError("must be >= 1");
    return static_cast<std::size_t>(v);
  };

  ExperimentConfig c;
  c.market.s0 = field(values, "market.s0", as_double);
  c.market.strike = field(values, "market.strike", as_double);
  c.market.maturity = field(values, "market.maturity", as_double);
  c.market.rate = field(values, "market.rate", as_double);
  c.market.dividend = field(values, "market.dividend", as_double);
  c.market.sigma = field(values, "market.sigma", as_double);
  c.market.steps = field(values, "market.steps", as_int);
  c.market.option_kind = field(values, "market.option", [](const std::string& s) { return parse_option_kind(s); });
  c.discounted = field(values, "market.discounted", as_bool);

  c.generator.kind =
      field(values, "generator.kind", [](const std::string& s) { return parse_generator_kind(s); });
  c.generator.hurst = field(values, "generator.hurst", as_double);
  c.generator.ampl = field(values, "generator.ampl", as_double);
  c.generator.freq1 = field(values, "generator.freq1", as_double);
  c.generator.freq2 = field(values, "generator.freq2", as_double);
  c.generator.noise_std = field(values, "generator.noise_std", as_double);
  c.generator.random_phase = field(values, "generator.random_phase", as_bool);

  c.training.epochs = field(values, "training.epochs", as_int);
  c.training.batch = field(values, "training.batch", as_count);
  c.training.window = static_cast<std::size_t>(field(values, "training.window", as_int));
  c.training.discounted = c.discounted;
  c.training.optimizer.kind =
      field(values, "training.optimizer", [](const std::string& s) { return nn::parse_optimizer_kind(s); });
  c.training.optimizer.learning_rate = field(values, "training.learning_rate", as_double);
  c.training.optimizer.beta1 = field(values, "training.beta1", as_double);
  c.training.optimizer.beta2 = field(values, "training.beta2", as_double);
  c.training.optimizer.epsilon = field(values, "training.epsilon", as_double);
  c.training.optimizer.momentum = field(values, "training.momentum", as_double);

  c.lsmc.degree = field(values, "lsmc.degree", as_int);
  c.lsmc.paths = field(values, "lsmc.paths", as_count);
  c.evaluation.paths = field(values, "evaluation.paths", as_count);
  if (!values["evaluation.seed"].empty()) {
    c.evaluation.seed = field(values, "evaluation.seed", [](const std::string& s) { return parse_uint(s); });
  }
  c.evaluation.policy = values["evaluation.policy"];

  c.data.csv = values["data.csv"];
  c.data.split.in_sample_frac = field(values, "data.in_sample_frac", as_double);
  c.data.split.train_frac = field(values, "data.train_frac", as_double);
  c.data.label = values["data.label"];
  c.data.sector = values["data.sector"];
  c.output_dir = values["output.dir"];
  c.sweep_steps = field(values, "sweep.steps", [&](const std::string& s) {
    std::vector<int> out;
    for (const auto& item : split_list(s)) out.push_back(as_int(item));
    return out;
  });
  c.report_inputs = split_list(values["report.inputs"]);

  // Invariants, reported with the offending key.
  const auto check = [&](const std::string& key, bool ok, const std::string& what) {
    if (!ok) throw ConfigError(key + " = " + values[key] + ": " + what);
  };
  check("market.s0", c.market.s0 > 0.0, "must be > 0");
  check("market.strike", c.market.strike > 0.0, "must be > 0");
  check("market.maturity", c.market.maturity > 0.0, "must be > 0");
  check("market.rate", c.market.rate >= 0.0, "must be >= 0");
  check("market.dividend", c.market.dividend >= 0.0, "must be >= 0");
  check("market.sigma", c.market.sigma >= 0.0, "must be >= 0");
  check("market.steps", c.market.steps >= 2, "must be >= 2");
  check("generator.hurst", c.generator.hurst > 0.0 && c.generator.hurst < 1.0, "must lie strictly inside (0,1)");
  check("generator.ampl", c.generator.ampl >= 0.0, "must be >= 0");
  check("generator.freq1", c.generator.freq1 > 0.0, "must be > 0");
  check("generator.freq2", c.generator.freq2 > 0.0, "must be > 0");
  check("generator.noise_std", c.generator.noise_std >= 0.0, "must be >= 0");
  check("training.epochs", c.training.epochs >= 0, "must be >= 0");
  check("training.window", values["training.window"].front() != '-' && c.training.window >= 5, "must be >= 5");
  check("training.learning_rate", c.training.optimizer.learning_rate > 0.0, "must be > 0");
  check("training.beta1", c.training.optimizer.beta1 >= 0.0 && c.training.optimizer.beta1 < 1.0, "must lie in [0,1)");
  check("training.beta2", c.training.optimizer.beta2 >= 0.0 && c.training.optimizer.beta2 < 1.0, "must lie in [0,1)");
  check("training.epsilon", c.training.optimizer.epsilon > 0.0, "must be > 0");
  check("training.momentum", c.training.optimizer.momentum >= 0.0 && c.training.optimizer.momentum < 1.0,
        "must lie in [0,1)");
  check("lsmc.degree", c.lsmc.degree >= 0 && c.lsmc.degree <= 10, "must lie in 0..10");
  check("data.in_sample_frac", c.data.split.in_sample_frac > 0.0 && c.data.split.in_sample_frac < 1.0,
        "must lie strictly inside (0,1)");
  check("data.train_frac", c.data.split.train_frac > 0.0 && c.data.split.train_frac < 1.0,
        "must lie strictly inside (0,1)");
  for (int n : c.sweep_steps) check("sweep.steps", n >= 2, "every entry must be >= 2");
  if (c.generator.kind == GeneratorKind::bootstrap) check("data.csv", !c.data.csv.empty(), "required for bootstrap");
  if (!c.data.csv.empty()) check("data.csv", std::filesystem::exists(c.data.csv), "file does not exist");
  if (!c.evaluation.policy.empty()) {
    check("evaluation.policy", std::filesystem::exists(c.evaluation.policy), "file does not exist");
  }
  for (const auto& input : c.report_inputs) {
    if (!std::filesystem::exists(input)) {
      throw ConfigError("report.inputs = " + values["report.inputs"] + ": '" + input + "' does not exist");
    }
  }
  return c;
}

ExperimentConfig parse_config_string(const std::string& text,
                                     const std::vector<std::pair<std::string, std::string>>& overrides) {
  return build_config(parse_config_text(text), overrides);
}

ExperimentConfig parse_config(const std::string& path,
                              const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot read config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return build_config(parse_config_text(buf.str(), path), overrides);
}

std::string resolved_config_text(const ExperimentConfig& c) {
  std::map<std::string, std::string> v;
  v["market.s0"] = format_double(c.market.s0);
  v["market.strike"] = format_double(c.market.strike);
  v["market.maturity"] = format_double(c.market.maturity);
  v["market.rate"] = format_double(c.market.rate);
  v["market.dividend"] = format_double(c.market.dividend);
  v["market.sigma"] = format_double(c.market.sigma);
  v["market.steps"] = std::to_string(c.market.steps);
  v["market.option"] = to_string(c.market.option_kind);
  v["market.discounted"] = c.discounted ? "true" : "false";
  v["generator.kind"] = to_string(c.generator.kind);
  v["generator.hurst"] = format_double(c.generator.hurst);
  v["generator.ampl"] = format_double(c.generator.ampl);
  v["generator.freq1"] = format_double(c.generator.freq1);
  v["generator.freq2"] = format_double(c.generator.freq2);
  v["generator.noise_std"] = format_double(c.generator.noise_std);
  v["generator.random_phase"] = c.generator.random_phase ? "true" : "false";
  v["training.epochs"] = std::to_string(c.training.epochs);
  v["training.batch"] = std::to_string(c.training.batch);
  v["training.window"] = std::to_string(c.training.window);
  v["training.optimizer"] = nn::to_string(c.training.optimizer.kind);
  v["training.learning_rate"] = format_double(c.training.optimizer.learning_rate);
  v["training.beta1"] = format_double(c.training.optimizer.beta1);
  v["training.beta2"] = format_double(c.training.optimizer.beta2);
  v["training.epsilon"] = format_double(c.training.optimizer.epsilon);
  v["training.momentum"] = format_double(c.training.optimizer.momentum);
  v["lsmc.degree"] = std::to_string(c.lsmc.degree);
  v["lsmc.paths"] = std::to_string(c.lsmc.paths);
  v["evaluation.paths"] = std::to_string(c.evaluation.paths);
  v["evaluation.seed"] = c.evaluation.seed ? std::to_string(*c.evaluation.seed) : "";
  v["evaluation.policy"] = c.evaluation.policy;
  v["data.csv"] = c.data.csv;
  v["data.in_sample_frac"] = format_double(c.data.split.in_sample_frac);
  v["data.train_frac"] = format_double(c.data.split.train_frac);
  v["data.label"] = c.data.label;
  v["data.sector"] = c.data.sector;
  v["output.dir"] = c.output_dir;
  v["sweep.steps"] = join_ints(c.sweep_steps);
  v["report.inputs"] = join_strings(c.report_inputs);
  std::string out;
  for (const auto& [k, val] : v) out += k + " = " + val + "\n";
  return out;
}

}  // namespace stopdeck
