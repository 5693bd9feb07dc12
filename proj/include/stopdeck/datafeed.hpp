#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace stopdeck {

// Close prices read from a `date,close` CSV file, in ascending date order.
struct PriceSeries {
  std::vector<std::string> dates;
  std::vector<double> closes;
  std::string source;
  std::size_t first_line = 0;  // 1-based line numbers in the source file
  std::size_t last_line = 0;
};

struct Provenance {
  std::string source;
  std::size_t first_row = 0;
  std::size_t last_row = 0;
};

// Relative returns rho_t = S_t / S_{t-1}; every entry is finite and > 0.
struct ReturnSeries {
  std::vector<double> returns;
  std::string label;
  Provenance provenance;

  std::size_t size() const { return returns.size(); }
};

struct SplitSpec {
  double in_sample_frac = 0.8;
  double train_frac = 0.7;

  void validate() const;
};

struct SplitResult {
  ReturnSeries train;
  ReturnSeries validation;
  ReturnSeries test;
};

PriceSeries load_prices(const std::string& path);
PriceSeries parse_prices(std::string_view text, const std::string& source = "<memory>");

ReturnSeries to_returns(std::span<const double> prices, std::string label = {});
ReturnSeries to_returns(const PriceSeries& prices);

// Chronological split into contiguous train / validation / test segments.
// Cut points are floor(len * in_sample_frac * train_frac) and
// floor(len * in_sample_frac); remainders fall to the later segments.
SplitResult split(const ReturnSeries& series, const SplitSpec& spec);

}  // namespace stopdeck
