#include "stopdeck/cli.hpp"

#include "stopdeck/bench.hpp"
#include "stopdeck/error.hpp"
#include "stopdeck/numtext.hpp"
#include "stopdeck/parallel.hpp"
#include "stopdeck/rng.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace stopdeck {

namespace fs = std::filesystem;

namespace {

// Generators feeding training/fitting and evaluation. For bootstrap data the
// in-sample training segment feeds the former and the test segment the latter.
struct DataPlan {
  GeneratorSpec fit;
  GeneratorSpec validation;
  GeneratorSpec eval;
  bool has_validation = false;
  double mean_return = 0.0;
  double return_std = 0.0;
  std::string sector;
  std::string label;
};

std::uint64_t stream_seed(std::uint64_t seed, Stream s) { return mix_seed(seed, static_cast<std::uint64_t>(s)); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw RuntimeError(path.string() + ": write failed");
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
}

std::pair<double, double> path_return_stats(const PathBatch& paths) {
  std::vector<double> r;
  r.reserve(paths.batch() * static_cast<std::size_t>(paths.steps()));
  for (Eigen::Index i = 0; i < paths.prices.rows(); ++i) {
    for (Eigen::Index t = 1; t < paths.prices.cols(); ++t) r.push_back(paths.prices(i, t) / paths.prices(i, t - 1) - 1.0);
  }
  return mean_std(r);
}

DataPlan plan_data(const ExperimentConfig& c) {
  DataPlan plan;
  plan.fit = c.generator;
  plan.eval = c.generator;
  plan.sector = c.data.sector;
  plan.label = c.data.label;
  if (c.generator.kind != GeneratorKind::bootstrap) {
    if (plan.sector.empty()) plan.sector = "simulated";
    if (plan.label.empty()) plan.label = to_string(c.generator.kind);
    return plan;
  }
  const PriceSeries prices = load_prices(c.data.csv);
  const ReturnSeries series = to_returns(prices);
  SplitResult parts = split(series, c.data.split);
  const auto need = static_cast<std::size_t>(c.market.steps);
  for (const auto* seg : {&parts.train, &parts.test}) {
    if (seg->size() < need) {
      throw ConfigError("data.csv = " + c.data.csv + ": segment " + seg->label + " has " + std::to_string(seg->size()) +
                        " returns, market.steps requires " + std::to_string(need));
    }
  }
  std::vector<double> rel(series.returns.size());
  for (std::size_t i = 0; i < rel.size(); ++i) rel[i] = series.returns[i] - 1.0;
  std::tie(plan.mean_return, plan.return_std) = mean_std(rel);
  plan.fit.source = std::make_shared<const ReturnSeries>(std::move(parts.train));
  plan.eval.source = std::make_shared<const ReturnSeries>(std::move(parts.test));
  if (parts.validation.size() >= need) {
    plan.validation = c.generator;
    plan.validation.source = std::make_shared<const ReturnSeries>(std::move(parts.validation));
    plan.has_validation = true;
  }
  if (plan.sector.empty()) plan.sector = "unknown";
  if (plan.label.empty()) plan.label = fs::path(c.data.csv).stem().string();
  return plan;
}

nlohmann::json stats_json(const EvalStats& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"n", s.n}, {"ci95", {s.ci_lo, s.ci_hi}}};
}

TrainedPolicy train_logged(const DataPlan& plan, const ExperimentConfig& c, std::uint64_t seed, std::ostream& log) {
  const int epochs = c.training.epochs;
  const int every = std::max(1, epochs / 20);
  return train(plan.fit, c.market, c.training, seed, [&](const EpochRecord& r) {
    if ((r.epoch + 1) % every == 0 || r.epoch + 1 == epochs) {
      log << "epoch " << (r.epoch + 1) << "/" << epochs << " mean_payoff=" << format_double(r.mean_payoff)
          << " loss=" << format_double(r.loss) << '\n';
    }
  });
}

void cmd_simulate(const ExperimentConfig& c, const DataPlan& plan, const fs::path& dir, std::uint64_t seed) {
  const PathBatch paths = generate(plan.eval, c.market, c.evaluation.paths, stream_seed(seed, Stream::evaluation));
  const RowMatrix p = payoff_matrix(paths, c.market, c.discounted);
  std::vector<double> terminal(paths.batch()), log_ret(paths.batch());
  for (std::size_t i = 0; i < paths.batch(); ++i) {
    const double s = paths.prices(static_cast<Eigen::Index>(i), c.market.steps);
    terminal[i] = s;
    log_ret[i] = std::log(s / c.market.s0);
  }
  const auto [t_mean, t_std] = mean_std(terminal);
  const auto [l_mean, l_std] = mean_std(log_ret);
  const auto [r_mean, r_std] = path_return_stats(paths);
  nlohmann::json j = {
      {"generator", to_string(c.generator.kind)},
      {"paths", paths.batch()},
      {"steps", c.market.steps},
      {"dt", c.market.dt()},
      {"seed", seed},
      {"terminal_price",
       {{"mean", t_mean},
        {"std", t_std},
        {"min", *std::min_element(terminal.begin(), terminal.end())},
        {"max", *std::max_element(terminal.begin(), terminal.end())}}},
      {"log_return", {{"mean", l_mean}, {"var", l_std * l_std}}},
      {"step_return", {{"mean", r_mean}, {"std", r_std}}},
      {"european", stats_json(terminal_policy_stats(p))},
      {"clairvoyant", stats_json(clairvoyant_stats(p))},
  };
  write_text(dir / "simulate_summary.json", j.dump(2) + "\n");
}

void cmd_train(const ExperimentConfig& c, const DataPlan& plan, const fs::path& dir, std::uint64_t seed,
               std::ostream& log) {
  const TrainedPolicy policy = train_logged(plan, c, seed, log);
  save_policy((dir / "policy.ckpt").string(), policy);
  write_epoch_trace((dir / "epoch_trace.csv").string(), policy.trace);
}

void cmd_evaluate(const ExperimentConfig& c, const DataPlan& plan, const fs::path& dir, std::uint64_t seed) {
  const std::string ckpt = c.evaluation.policy.empty() ? (dir / "policy.ckpt").string() : c.evaluation.policy;
  if (!fs::exists(ckpt)) throw ConfigError("evaluation.policy: checkpoint '" + ckpt + "' does not exist");
  const TrainedPolicy policy = load_policy(ckpt);
  const PathBatch paths = generate(plan.eval, c.market, c.evaluation.paths, stream_seed(seed, Stream::evaluation));
  const RowMatrix p = payoff_matrix(paths, c.market, policy.discounted);
  nlohmann::json j = {
      {"policy", fs::path(ckpt).filename().string()},
      {"paths", paths.batch()},
      {"seed", seed},
      {"cnn", stats_json(evaluate(policy, paths, c.market))},
      {"european", stats_json(terminal_policy_stats(p))},
      {"clairvoyant", stats_json(clairvoyant_stats(p))},
  };
  write_text(dir / "evaluation.json", j.dump(2) + "\n");
}

void cmd_compare(const ExperimentConfig& c, const DataPlan& plan, const fs::path& dir, std::uint64_t seed,
                 std::ostream& log) {
  const TrainedPolicy policy = train_logged(plan, c, seed, log);
  save_policy((dir / "policy.ckpt").string(), policy);
  write_epoch_trace((dir / "epoch_trace.csv").string(), policy.trace);

  const PathBatch fit_paths = generate(plan.fit, c.market, c.lsmc.paths, stream_seed(seed, Stream::lsmc));
  const LsmcFit fit = lsmc_fit_detailed(fit_paths, c.market, c.lsmc.degree, c.discounted);
  save_lsmc((dir / "lsmc_model.txt").string(), fit.model);

  const PathBatch test = generate(plan.eval, c.market, c.evaluation.paths, stream_seed(seed, Stream::evaluation));
  const EvalStats cnn = evaluate(policy, test, c.market);
  const EvalStats lsmc = lsmc_apply(fit.model, test, c.market);
  const RowMatrix p = payoff_matrix(test, c.market, c.discounted);

  double mean_return = plan.mean_return;
  double return_std = plan.return_std;
  if (c.generator.kind != GeneratorKind::bootstrap) std::tie(mean_return, return_std) = path_return_stats(test);
  const ComparisonRow row = make_row(plan.sector, plan.label, mean_return, return_std, cnn, lsmc);
  log << "cnn mean=" << format_double(cnn.mean) << " lsmc mean=" << format_double(lsmc.mean) << '\n';

  std::vector<PlotSeries> series;
  if (!c.sweep_steps.empty()) {
    series.push_back({"payoff_vs_steps_cnn",
                      payoff_vs_steps(cnn_step_evaluator(plan.fit, plan.eval, c.training, c.evaluation.paths, seed),
                                      c.market, c.sweep_steps)});
    series.push_back({"payoff_vs_steps_lsmc",
                      payoff_vs_steps(lsmc_step_evaluator(plan.fit, plan.eval, c.lsmc.degree, c.lsmc.paths,
                                                          c.evaluation.paths, seed),
                                      c.market, c.sweep_steps)});
  }
  const std::vector<ComparisonRow> rows{row};
  emit_report(rows, series, dir.string());

  nlohmann::json j = {
      {"sector", row.sector},
      {"asset", row.label},
      {"seed", seed},
      {"evaluation_paths", test.batch()},
      {"cnn", stats_json(cnn)},
      {"lsmc", stats_json(lsmc)},
      {"lsmc_in_sample", stats_json(fit.in_sample)},
      {"european", stats_json(terminal_policy_stats(p))},
      {"clairvoyant", stats_json(clairvoyant_stats(p))},
      {"improvement_pct", row.improvement ? nlohmann::json(*row.improvement) : nlohmann::json(nullptr)},
  };
  if (plan.has_validation) {
    const PathBatch val =
        generate(plan.validation, c.market, c.evaluation.paths, stream_seed(seed, Stream::evaluation));
    j["cnn_validation"] = stats_json(evaluate(policy, val, c.market));
  }
  write_text(dir / "compare.json", j.dump(2) + "\n");
}

void cmd_report(const ExperimentConfig& c, const fs::path& dir) {
  if (c.report_inputs.empty()) throw ConfigError("report.inputs: at least one comparison.csv or directory required");
  std::vector<ComparisonRow> rows;
  for (const auto& input : c.report_inputs) {
    const fs::path p = fs::is_directory(input) ? fs::path(input) / "comparison.csv" : fs::path(input);
    auto part = read_comparison_csv(p.string());
    rows.insert(rows.end(), part.begin(), part.end());
  }
  emit_report(rows, {}, dir.string());
}

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return s;
}

}  // namespace

Command parse_command(const std::string& text) {
  if (text == "simulate") return Command::simulate;
  if (text == "train") return Command::train;
  if (text == "evaluate") return Command::evaluate;
  if (text == "compare") return Command::compare;
  if (text == "report") return Command::report;
  throw ConfigError("unknown subcommand '" + text + "'");
}

void run(Command command, const ExperimentConfig& config, std::ostream& log) {
  if (command == Command::compare && !config.evaluation.seed) {
    throw ConfigError("evaluation.seed: compare requires an explicit seed (config key or --seed)");
  }
  const fs::path dir = config.output_dir.empty() ? fs::path("stopdeck_out") : fs::path(config.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeError(dir.string() + ": cannot create output directory: " + ec.message());
  write_text(dir / "resolved_config.txt", resolved_config_text(config));

  const std::uint64_t seed = config.evaluation.seed.value_or(0);
  if (command == Command::report) {
    cmd_report(config, dir);
    return;
  }
  const DataPlan plan = plan_data(config);
  switch (command) {
    case Command::simulate: cmd_simulate(config, plan, dir, seed); break;
    case Command::train: cmd_train(config, plan, dir, seed, log); break;
    case Command::evaluate: cmd_evaluate(config, plan, dir, seed); break;
    case Command::compare: cmd_compare(config, plan, dir, seed, log); break;
    case Command::report: break;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"stopdeck: learned optimal stopping policies benchmarked against least-squares Monte Carlo"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
  std::string out_dir;

  for (const char* name : {"simulate", "train", "evaluate", "compare", "report"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "config file (key = value lines)")->required();
    sub->add_option("--set", sets, "override a config key, key=value (repeatable, last wins)");
    sub->add_option("--seed", seed, "master seed (overrides evaluation.seed)");
    sub->add_option("--threads", threads, "worker thread cap; results do not depend on it");
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
  }

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();  // program name
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "stopdeck: error: config: " << one_line(e.what()) << '\n';
    return kExitConfig;
  }

  try {
    const Command command = parse_command(app.get_subcommands().front()->get_name());
    std::vector<std::pair<std::string, std::string>> overrides;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      auto trim = [](std::string v) {
        const auto a = v.find_first_not_of(" \t");
        const auto b = v.find_last_not_of(" \t");
        return a == std::string::npos ? std::string() : v.substr(a, b - a + 1);
      };
      overrides.emplace_back(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
    if (seed) overrides.emplace_back("evaluation.seed", std::to_string(*seed));
    if (!out_dir.empty()) overrides.emplace_back("output.dir", out_dir);
    ExperimentConfig config = parse_config(config_path, overrides);
    if (config.output_dir.empty()) {
      const char* env = std::getenv("STOPDECK_OUT");
      config.output_dir = env && *env ? env : "stopdeck_out";
    }
    set_thread_count(threads);
    run(command, config, out);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "stopdeck: error: config: " << one_line(e.what()) << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "stopdeck: error: runtime: " << one_line(e.what()) << '\n';
    return kExitRuntime;
  }
}

}  // namespace stopdeck
