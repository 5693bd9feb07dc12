#include "stopdeck/error.hpp"
#include "stopdeck/tensornet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stopdeck::nn {

GradCheckReport grad_check(Network net, const Tensor& input, const LossFn& loss, double eps,
                           std::size_t max_params) {
  if (!(eps > 0.0)) throw ConfigError("grad_check: eps must be > 0");

  ForwardCache cache;
  const Tensor output = forward(net, input, &cache);
  Tensor upstream(output.shape());
  loss(output, &upstream);
  const Gradients analytic = backward(net, cache, upstream);

  std::vector<std::pair<std::size_t, std::size_t>> index;  // (tensor, element)
  for (std::size_t p = 0; p < analytic.size(); ++p) {
    for (std::size_t i = 0; i < analytic[p].size(); ++i) index.emplace_back(p, i);
  }
  std::size_t stride = 1;
  if (max_params != 0 && index.size() > max_params) stride = index.size() / max_params;

  auto params = net.parameters();
  GradCheckReport report;
  for (std::size_t k = 0; k < index.size(); k += stride) {
    const auto [p, i] = index[k];
    double& w = params[p][i];
    const double saved = w;
    w = saved + eps;
    const double up = loss(forward(net, input), nullptr);
    w = saved - eps;
    const double down = loss(forward(net, input), nullptr);
    w = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic[p][i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
    double err = std::abs(a - numeric) / denom;
    if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
    if (err > report.max_relative_error || report.checked == 0) {
      report.max_relative_error = err;
      report.worst_parameter = k;
    }
    ++report.checked;
  }
  return report;
}

}  // namespace stopdeck::nn
