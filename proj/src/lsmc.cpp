#include "stopdeck/lsmc.hpp"

#include "stopdeck/error.hpp"
#include "stopdeck/numtext.hpp"

#include <Eigen/Dense>
#include <Eigen/QR>

#include <fstream>
#include <sstream>

namespace stopdeck {

namespace {

double basis_dot(const std::vector<double>& beta, double x) {
  // Horner's rule; the same routine serves fitting and application so both
  // make bit-identical decisions.
  double acc = 0.0;
  for (std::size_t j = beta.size(); j-- > 0;) acc = acc * x + beta[j];
  return acc;
}

}  // namespace

std::optional<double> LsmcModel::continuation(int t, double s) const {
  if (t < 1 || t >= steps) throw ConfigError("lsmc: step " + std::to_string(t) + " is not an interior date");
  const auto& step = coefficients[static_cast<std::size_t>(t - 1)];
  if (!step.beta) return std::nullopt;
  return basis_dot(*step.beta, s / strike);
}

bool LsmcModel::exercise(int t, double s, double payoff) const {
  if (!(payoff > 0.0)) return false;
  const auto cont = continuation(t, s);
  return cont && payoff >= *cont;
}

LsmcFit lsmc_fit_detailed(const PathBatch& paths, const MarketParams& params, int degree, bool discounted) {
  params.validate();
  if (degree < 0) throw ConfigError("lsmc: degree must be >= 0");
  if (paths.steps() != params.steps) {
    throw ConfigError("lsmc: paths have " + std::to_string(paths.steps()) + " steps, market expects " +
                      std::to_string(params.steps));
  }
  const std::size_t batch = paths.batch();
  const auto terms = static_cast<std::size_t>(degree + 1);
  if (batch < 10 * terms) {
    throw ConfigError("lsmc: need at least " + std::to_string(10 * terms) + " paths for degree " +
                      std::to_string(degree) + ", got " + std::to_string(batch));
  }
  const int n = params.steps;
  const RowMatrix p = payoff_matrix(paths, params, discounted);

  LsmcFit fit;
  LsmcModel& model = fit.model;
  model.degree = degree;
  model.steps = n;
  model.strike = params.strike;
  model.discounted = discounted;
  model.coefficients.resize(static_cast<std::size_t>(std::max(n - 1, 0)));
  model.fitted_paths = batch;
  model.fitted_seed = paths.seed_info.base_seed;
  model.fitted_generator = paths.seed_info.generator;

  std::vector<double> cashflow(batch);
  fit.stop_step.assign(batch, n);
  for (std::size_t i = 0; i < batch; ++i) cashflow[i] = p(static_cast<Eigen::Index>(i), n);

  std::vector<std::size_t> itm;
  for (int t = n - 1; t >= 1; --t) {
    itm.clear();
    for (std::size_t i = 0; i < batch; ++i) {
      if (p(static_cast<Eigen::Index>(i), t) > 0.0) itm.push_back(i);
    }
    LsmcStep& step = model.coefficients[static_cast<std::size_t>(t - 1)];
    if (itm.empty()) continue;

    const auto rows = static_cast<Eigen::Index>(itm.size());
    Eigen::MatrixXd design(rows, static_cast<Eigen::Index>(terms));
    Eigen::VectorXd target(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto i = static_cast<Eigen::Index>(itm[static_cast<std::size_t>(r)]);
      const double x = paths.prices(i, t) / params.strike;
      double pw = 1.0;
      for (std::size_t j = 0; j < terms; ++j) {
        design(r, static_cast<Eigen::Index>(j)) = pw;
        pw *= x;
      }
      target[r] = cashflow[static_cast<std::size_t>(i)];
    }

    Eigen::VectorXd beta;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() == static_cast<Eigen::Index>(terms)) {
      beta = qr.solve(target);
    } else {
      // Minimum-norm least-squares solution.
      beta = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(design).solve(target);
      step.rank_deficient = true;
    }
    step.beta = std::vector<double>(beta.data(), beta.data() + beta.size());

    for (std::size_t i : itm) {
      const auto r = static_cast<Eigen::Index>(i);
      const double payoff = p(r, t);
      if (model.exercise(t, paths.prices(r, t), payoff)) {
        cashflow[i] = payoff;
        fit.stop_step[i] = t;
      }
    }
  }
  fit.in_sample = make_stats(cashflow);
  return fit;
}

LsmcModel lsmc_fit(const PathBatch& paths, const MarketParams& params, int degree, bool discounted) {
  return lsmc_fit_detailed(paths, params, degree, discounted).model;
}

LsmcApplication lsmc_apply_detailed(const LsmcModel& model, const PathBatch& paths, const MarketParams& params) {
  if (paths.steps() != model.steps || params.steps != model.steps) {
    throw ConfigError("lsmc_apply: model fitted for N=" + std::to_string(model.steps) + ", paths have N=" +
                      std::to_string(paths.steps()));
  }
  const RowMatrix p = payoff_matrix(paths, params, model.discounted);
  const std::size_t batch = paths.batch();
  LsmcApplication out;
  out.stop_step.assign(batch, model.steps);
  std::vector<double> payoff(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (int t = 1; t < model.steps; ++t) {
      if (model.exercise(t, paths.prices(r, t), p(r, t))) {
        out.stop_step[i] = t;
        break;
      }
    }
    payoff[i] = p(r, out.stop_step[i]);
  }
  out.stats = make_stats(payoff);
  return out;
}

EvalStats lsmc_apply(const LsmcModel& model, const PathBatch& paths, const MarketParams& params) {
  return lsmc_apply_detailed(model, paths, params).stats;
}

std::string serialize_lsmc(const LsmcModel& model) {
  std::ostringstream out;
  out << "stopdeck-lsmc 1\n";
  out << "degree " << model.degree << '\n';
  out << "steps " << model.steps << '\n';
  out << "strike " << format_double(model.strike) << '\n';
  out << "discounted " << (model.discounted ? 1 : 0) << '\n';
  out << "fitted_paths " << model.fitted_paths << '\n';
  out << "fitted_seed " << model.fitted_seed << '\n';
  out << "fitted_generator " << (model.fitted_generator.empty() ? "-" : model.fitted_generator) << '\n';
  for (std::size_t k = 0; k < model.coefficients.size(); ++k) {
    const auto& step = model.coefficients[k];
    out << "step " << (k + 1);
    if (!step.beta) {
      out << " continue\n";
      continue;
    }
    out << (step.rank_deficient ? " pinv" : " qr");
    for (double b : *step.beta) out << ' ' << format_double(b);
    out << '\n';
  }
  return out.str();
}

LsmcModel deserialize_lsmc(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto next = [&](const char* key) {
    if (!std::getline(in, line)) throw RuntimeError(std::string("lsmc model: missing '") + key + "' line");
    std::istringstream ls(line);
    std::string k, v;
    ls >> k >> v;
    if (k != key) throw RuntimeError(std::string("lsmc model: expected '") + key + "', got '" + k + "'");
    return v;
  };
  if (!std::getline(in, line) || line != "stopdeck-lsmc 1") throw RuntimeError("lsmc model: bad header");
  LsmcModel m;
  m.degree = static_cast<int>(parse_int(next("degree")));
  m.steps = static_cast<int>(parse_int(next("steps")));
  m.strike = parse_double(next("strike"));
  m.discounted = parse_bool(next("discounted"));
  m.fitted_paths = parse_uint(next("fitted_paths"));
  m.fitted_seed = parse_uint(next("fitted_seed"));
  m.fitted_generator = next("fitted_generator");
  if (m.fitted_generator == "-") m.fitted_generator.clear();
  if (m.degree < 0 || m.steps < 1) throw RuntimeError("lsmc model: invalid degree or steps");
  m.coefficients.resize(static_cast<std::size_t>(m.steps - 1));
  for (auto& step : m.coefficients) {
    if (!std::getline(in, line)) throw RuntimeError("lsmc model: missing step line");
    std::istringstream ls(line);
    std::string tag, index, mode;
    ls >> tag >> index >> mode;
    if (tag != "step") throw RuntimeError("lsmc model: malformed step line '" + line + "'");
    if (mode == "continue") continue;
    if (mode != "qr" && mode != "pinv") throw RuntimeError("lsmc model: unknown step mode '" + mode + "'");
    step.rank_deficient = mode == "pinv";
    std::vector<double> beta;
    std::string v;
    while (ls >> v) beta.push_back(parse_double(v));
    if (beta.size() != static_cast<std::size_t>(m.degree + 1)) {
      throw RuntimeError("lsmc model: step " + index + " has " + std::to_string(beta.size()) + " coefficients");
    }
    step.beta = std::move(beta);
  }
  return m;
}

void save_lsmc(const std::string& path, const LsmcModel& model) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeError(path + ": cannot open for writing");
  out << serialize_lsmc(model);
  if (!out) throw RuntimeError(path + ": write failed");
}

LsmcModel load_lsmc(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeError(path + ": cannot open lsmc model");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_lsmc(buf.str());
}

}  // namespace stopdeck
