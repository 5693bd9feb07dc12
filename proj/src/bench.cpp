#include "stopdeck/bench.hpp"

#include "stopdeck/error.hpp"
#include "stopdeck/numtext.hpp"
#include "stopdeck/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace stopdeck {

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError(path.string() + ": cannot open for writing");
  out << content;
  if (!out) throw RuntimeError(path.string() + ": write failed");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

std::string pct_field(const std::optional<double>& pct) {
  return pct ? std::to_string(display_pct(*pct)) : "undefined";
}

nlohmann::json stats_json(const EvalStats& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"n", s.n}, {"ci95", {s.ci_lo, s.ci_hi}}};
}

nlohmann::json row_json(const ComparisonRow& r) {
  nlohmann::json j = {{"sector", r.sector},         {"asset", r.label},         {"mean_return", r.mean_return},
                      {"return_std", r.return_std}, {"cnn", stats_json(r.cnn)}, {"lsmc", stats_json(r.lsmc)}};
  j["improvement_pct"] = r.improvement ? nlohmann::json(*r.improvement) : nlohmann::json(nullptr);
  return j;
}

}  // namespace

std::optional<double> improvement_pct(double cnn_mean, double lsmc_mean) {
  if (!(lsmc_mean > 0.0) || !std::isfinite(cnn_mean)) return std::nullopt;
  return 100.0 * cnn_mean / lsmc_mean;
}

long display_pct(double pct) { return std::lround(pct); }

ComparisonRow make_row(std::string sector, std::string label, double mean_return, double return_std,
                       const EvalStats& cnn, const EvalStats& lsmc) {
  return {std::move(sector), std::move(label), mean_return, return_std, cnn, lsmc,
          improvement_pct(cnn.mean, lsmc.mean)};
}

SectorRow aggregate_sector(std::span<const ComparisonRow> rows) {
  if (rows.empty()) throw ConfigError("aggregate_sector: empty row list");
  const double k = static_cast<double>(rows.size());
  double mean_return = 0, return_std = 0, cnn_mean = 0, cnn_std = 0, lsmc_mean = 0, lsmc_std = 0;
  double cnn_n = 0, lsmc_n = 0;
  double imp_sum = 0;
  std::size_t imp_count = 0;
  for (const auto& r : rows) {
    mean_return += r.mean_return;
    return_std += r.return_std;
    cnn_mean += r.cnn.mean;
    cnn_std += r.cnn.std;
    cnn_n += static_cast<double>(r.cnn.n);
    lsmc_mean += r.lsmc.mean;
    lsmc_std += r.lsmc.std;
    lsmc_n += static_cast<double>(r.lsmc.n);
    if (r.improvement) {
      imp_sum += *r.improvement;
      ++imp_count;
    }
  }
  SectorRow out;
  out.members = rows.size();
  ComparisonRow& m = out.mean;
  m.sector = rows.front().sector;
  m.label = rows.size() == 1 ? rows.front().label : rows.front().sector;
  m.mean_return = mean_return / k;
  m.return_std = return_std / k;
  m.cnn = make_stats(cnn_mean / k, cnn_std / k, static_cast<std::size_t>(std::llround(cnn_n / k)));
  m.lsmc = make_stats(lsmc_mean / k, lsmc_std / k, static_cast<std::size_t>(std::llround(lsmc_n / k)));
  // An undefined improvement anywhere makes the sector mean undefined too.
  if (imp_count == rows.size()) {
    const double mean_imp = imp_sum / k;
    m.improvement = mean_imp;
    double ss = 0.0;
    for (const auto& r : rows) ss += (*r.improvement - mean_imp) * (*r.improvement - mean_imp);
    out.improvement_std = rows.size() > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
  }
  return out;
}

std::vector<SectorRow> aggregate_by_sector(std::span<const ComparisonRow> rows) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<ComparisonRow>> groups;
  for (const auto& r : rows) {
    auto [it, inserted] = groups.try_emplace(r.sector);
    if (inserted) order.push_back(r.sector);
    it->second.push_back(r);
  }
  std::vector<SectorRow> out;
  for (const auto& s : order) out.push_back(aggregate_sector(groups[s]));
  return out;
}

std::vector<StepPoint> payoff_vs_steps(const StepEvaluator& evaluator, MarketParams params,
                                       std::span<const int> grid) {
  std::vector<StepPoint> out;
  for (int n : grid) {
    if (n < 2) throw ConfigError("payoff_vs_steps: every grid value must be >= 2, got " + std::to_string(n));
    params.steps = n;
    out.push_back({n, evaluator(params)});
  }
  return out;
}

StepEvaluator lsmc_step_evaluator(GeneratorSpec fit_gen, GeneratorSpec eval_gen, int degree,
                                  std::size_t fit_paths, std::size_t eval_paths, std::uint64_t seed) {
  return [=](const MarketParams& params) {
    const PathBatch fit = generate(fit_gen, params, fit_paths, mix_seed(seed, static_cast<std::uint64_t>(Stream::lsmc)));
    const LsmcModel model = lsmc_fit(fit, params, degree);
    const PathBatch test =
        generate(eval_gen, params, eval_paths, mix_seed(seed, static_cast<std::uint64_t>(Stream::evaluation)));
    return lsmc_apply(model, test, params);
  };
}

StepEvaluator cnn_step_evaluator(GeneratorSpec fit_gen, GeneratorSpec eval_gen, TrainingConfig hyper,
                                 std::size_t eval_paths, std::uint64_t seed) {
  return [=](const MarketParams& params) {
    const TrainedPolicy policy = train(fit_gen, params, hyper, seed);
    const PathBatch test =
        generate(eval_gen, params, eval_paths, mix_seed(seed, static_cast<std::uint64_t>(Stream::evaluation)));
    return evaluate(policy, test, params);
  };
}

std::string comparison_csv(std::span<const ComparisonRow> rows) {
  std::ostringstream out;
  out << kComparisonHeader << '\n';
  for (const auto& r : rows) {
    out << csv_field(r.sector) << ',' << csv_field(r.label) << ',' << format_double(r.mean_return) << ','
        << format_double(r.return_std) << ',' << format_double(r.cnn.mean) << ',' << format_double(r.cnn.std)
        << ',' << format_double(r.lsmc.mean) << ',' << format_double(r.lsmc.std) << ','
        << pct_field(r.improvement) << '\n';
  }
  return out.str();
}

std::string sectors_csv(std::span<const SectorRow> sectors) {
  std::ostringstream out;
  out << kSectorHeader << '\n';
  for (const auto& s : sectors) {
    const auto& r = s.mean;
    out << csv_field(r.sector) << ',' << s.members << ',' << format_double(r.mean_return) << ','
        << format_double(r.return_std) << ',' << format_double(r.cnn.mean) << ',' << format_double(r.cnn.std)
        << ',' << format_double(r.lsmc.mean) << ',' << format_double(r.lsmc.std) << ','
        << pct_field(r.improvement) << ',' << format_double(s.improvement_std) << '\n';
  }
  return out.str();
}

std::vector<ComparisonRow> parse_comparison_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<ComparisonRow> rows;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != kComparisonHeader) throw RuntimeError(source + ": unexpected comparison header");
      header = true;
      continue;
    }
    const auto f = parse_csv_line(line);
    if (f.size() != 9) {
      throw RuntimeError(source + ":" + std::to_string(line_no) + ": expected 9 fields, got " +
                         std::to_string(f.size()));
    }
    try {
      ComparisonRow r;
      r.sector = f[0];
      r.label = f[1];
      r.mean_return = parse_double(f[2]);
      r.return_std = parse_double(f[3]);
      r.cnn = make_stats(parse_double(f[4]), parse_double(f[5]), 0);
      r.lsmc = make_stats(parse_double(f[6]), parse_double(f[7]), 0);
      if (f[8] != "undefined") r.improvement = static_cast<double>(parse_int(f[8]));
      rows.push_back(std::move(r));
    } catch (const ConfigError& e) {
      throw RuntimeError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!header) throw RuntimeError(source + ": missing comparison header");
  return rows;
}

std::vector<ComparisonRow> read_comparison_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError(path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_comparison_csv(buf.str(), path);
}

std::vector<std::string> emit_report(std::span<const ComparisonRow> rows, std::span<const PlotSeries> series,
                                     const std::string& out_dir, ReportFormats formats) {
  namespace fs = std::filesystem;
  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw RuntimeError(out_dir + ": cannot create directory: " + ec.message());

  std::vector<std::string> written;
  const auto sectors = aggregate_by_sector(rows);
  if (formats.csv) {
    write_file(dir / "comparison.csv", comparison_csv(rows));
    write_file(dir / "sectors.csv", sectors_csv(sectors));
    written.push_back((dir / "comparison.csv").string());
    written.push_back((dir / "sectors.csv").string());
  }
  if (formats.json) {
    nlohmann::json j;
    j["assets"] = nlohmann::json::array();
    for (const auto& r : rows) j["assets"].push_back(row_json(r));
    j["sectors"] = nlohmann::json::array();
    for (const auto& s : sectors) {
      auto sj = row_json(s.mean);
      sj["members"] = s.members;
      sj["improvement_std"] = s.improvement_std;
      j["sectors"].push_back(sj);
    }
    if (!rows.empty()) {
      const SectorRow all = aggregate_sector(rows);
      j["totals"] = {{"rows", rows.size()},
                     {"cnn_mean", all.mean.cnn.mean},
                     {"lsmc_mean", all.mean.lsmc.mean},
                     {"improvement_pct", all.mean.improvement ? nlohmann::json(*all.mean.improvement)
                                                              : nlohmann::json(nullptr)},
                     {"improvement_std", all.improvement_std}};
    } else {
      j["totals"] = {{"rows", 0}};
    }
    j["dispersion_note"] = "improvement_std is the sample standard deviation of per-asset improvement_pct";
    j["series"] = nlohmann::json::array();
    for (const auto& s : series) j["series"].push_back(s.name);
    write_file(dir / "summary.json", j.dump(2) + "\n");
    written.push_back((dir / "summary.json").string());
  }
  if (formats.dat) {
    for (const auto& s : series) {
      std::ostringstream out;
      out << "# x mean lo hi\n";
      for (const auto& p : s.points) {
        out << p.steps << ' ' << format_double(p.stats.mean) << ' ' << format_double(p.stats.ci_lo) << ' '
            << format_double(p.stats.ci_hi) << '\n';
      }
      const fs::path file = dir / (s.name + ".dat");
      write_file(file, out.str());
      written.push_back(file.string());
    }
  }
  return written;
}

}  // namespace stopdeck
