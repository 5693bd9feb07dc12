#include "stopdeck/datafeed.hpp"

#include "stopdeck/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace stopdeck {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

bool is_iso_date(std::string_view d) {
  // YYYY-MM-DD, optionally followed by a time part (THH:MM...).
  if (d.size() < 10) return false;
  for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
    if (d[i] < '0' || d[i] > '9') return false;
  }
  if (d[4] != '-' || d[7] != '-') return false;
  const int month = (d[5] - '0') * 10 + (d[6] - '0');
  const int day = (d[8] - '0') * 10 + (d[9] - '0');
  if (month < 1 || month > 12 || day < 1 || day > 31) return false;
  return d.size() == 10 || d[10] == 'T' || d[10] == ' ';
}

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

}  // namespace

void SplitSpec::validate() const {
  if (!(in_sample_frac > 0.0 && in_sample_frac < 1.0)) {
    throw ConfigError("in_sample_frac must lie strictly inside (0,1)");
  }
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw ConfigError("train_frac must lie strictly inside (0,1)");
  }
}

PriceSeries parse_prices(std::string_view text, const std::string& source) {
  PriceSeries out;
  out.source = source;
  std::size_t date_col = std::string_view::npos;
  std::size_t close_col = std::string_view::npos;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    std::string_view line = trim(raw);
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line = trim(line.substr(3));
    if (line.empty() || line.front() == '#') continue;

    const auto fields = split_fields(line);
    if (!have_header) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (fields[i] == "date") date_col = i;
        if (fields[i] == "close") close_col = i;
      }
      if (date_col == std::string_view::npos || close_col == std::string_view::npos) {
        throw RuntimeError(where(source, line_no) + "header must contain 'date' and 'close' columns");
      }
      have_header = true;
      continue;
    }

    if (fields.size() <= std::max(date_col, close_col)) {
      throw RuntimeError(where(source, line_no) + "expected at least " +
                         std::to_string(std::max(date_col, close_col) + 1) + " fields");
    }
    const std::string_view date = fields[date_col];
    if (!is_iso_date(date)) {
      throw RuntimeError(where(source, line_no) + "unparseable date '" + std::string(date) + "'");
    }
    const std::string_view close_text = fields[close_col];
    double close = 0.0;
    const auto [end, ec] = std::from_chars(close_text.data(), close_text.data() + close_text.size(), close);
    if (ec != std::errc{} || end != close_text.data() + close_text.size() || !std::isfinite(close)) {
      throw RuntimeError(where(source, line_no) + "unparseable close '" + std::string(close_text) + "'");
    }
    if (close <= 0.0) {
      throw RuntimeError(where(source, line_no) + "non-positive close price " + std::string(close_text));
    }
    if (!out.dates.empty() && !(out.dates.back() < date)) {
      throw RuntimeError(where(source, line_no) + "date " + std::string(date) +
                         " is not after previous date " + out.dates.back());
    }
    if (out.dates.empty()) out.first_line = line_no;
    out.last_line = line_no;
    out.dates.emplace_back(date);
    out.closes.push_back(close);
  }
  if (out.closes.empty()) throw RuntimeError(source + ": no data rows");
  return out;
}

PriceSeries load_prices(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError(path + ": cannot open file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_prices(buffer.str(), path);
}

ReturnSeries to_returns(std::span<const double> prices, std::string label) {
  if (prices.size() < 2) throw ConfigError("to_returns: need at least 2 prices");
  ReturnSeries out;
  out.label = std::move(label);
  out.returns.reserve(prices.size() - 1);
  for (std::size_t t = 0; t + 1 < prices.size(); ++t) {
    const double rho = prices[t + 1] / prices[t];
    if (!(std::isfinite(rho) && rho > 0.0)) {
      throw ConfigError("to_returns: non-positive or non-finite return at index " + std::to_string(t));
    }
    out.returns.push_back(rho);
  }
  out.provenance.first_row = 0;
  out.provenance.last_row = prices.size() - 1;
  return out;
}

ReturnSeries to_returns(const PriceSeries& prices) {
  auto out = to_returns(prices.closes, prices.source);
  out.provenance = {prices.source, prices.first_line, prices.last_line};
  return out;
}

SplitResult split(const ReturnSeries& series, const SplitSpec& spec) {
  spec.validate();
  const double len = static_cast<double>(series.size());
  // The small slack keeps exact products such as 9573 * (7658 / 9573) from
  // flooring one short.
  const auto cut = [](double x) { return static_cast<std::size_t>(std::floor(x * (1.0 + 1e-12) + 1e-9)); };
  const std::size_t in_end = std::min(series.size(), cut(len * spec.in_sample_frac));
  const std::size_t train_end = std::min(in_end, cut(len * spec.in_sample_frac * spec.train_frac));

  const std::size_t n_train = train_end;
  const std::size_t n_val = in_end - train_end;
  const std::size_t n_test = series.size() - in_end;
  if (n_train == 0 || n_val == 0 || n_test == 0) {
    throw ConfigError("split: empty segment (train=" + std::to_string(n_train) + ", validation=" +
                      std::to_string(n_val) + ", test=" + std::to_string(n_test) + ") for series of length " +
                      std::to_string(series.size()));
  }

  auto segment = [&](std::size_t begin, std::size_t end, const char* suffix) {
    ReturnSeries s;
    s.returns.assign(series.returns.begin() + static_cast<std::ptrdiff_t>(begin),
                     series.returns.begin() + static_cast<std::ptrdiff_t>(end));
    s.label = series.label.empty() ? std::string(suffix) : series.label + "/" + suffix;
    s.provenance = {series.provenance.source, series.provenance.first_row + begin,
                    series.provenance.first_row + end};
    return s;
  };
  return {segment(0, train_end, "train"), segment(train_end, in_end, "validation"),
          segment(in_end, series.size(), "test")};
}

}  // namespace stopdeck
