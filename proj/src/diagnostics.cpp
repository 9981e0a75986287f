#include "volmix/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "volmix/sv.hpp"

namespace volmix {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double sample_variance(std::span<const double> v, double mean) {
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / (static_cast<double>(v.size()) - 1.0);
}

double mean_of(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

} // namespace

double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  require(m >= 2, "gelman_rubin: need at least two chains");
  const std::size_t n = chains[0].size();
  require(n >= 2, "gelman_rubin: chains must have length >= 2");
  for (const auto& ch : chains) {
    require(ch.size() == n, "gelman_rubin: chains must have equal length");
    for (double x : ch) require(std::isfinite(x), "gelman_rubin: non-finite draw");
  }

  std::vector<double> means(m);
  double w = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    means[j] = mean_of(chains[j]);
    w += sample_variance(chains[j], means[j]);
  }
  w /= static_cast<double>(m);
  require(w > 0.0, "gelman_rubin: degenerate chains (zero within-chain variance)");

  const double grand = mean_of(means);
  const double b = static_cast<double>(n) * sample_variance(means, grand);
  const double nn = static_cast<double>(n);
  return std::sqrt(((nn - 1.0) / nn * w + b / nn) / w);
}

double gelman_rubin_split(const std::vector<std::vector<double>>& chains) {
  std::vector<std::vector<double>> halves;
  halves.reserve(chains.size() * 2);
  for (const auto& ch : chains) {
    const std::size_t half = ch.size() / 2;
    require(half >= 2, "gelman_rubin_split: chains too short to split");
    halves.emplace_back(ch.begin(), ch.begin() + static_cast<std::ptrdiff_t>(half));
    halves.emplace_back(ch.end() - static_cast<std::ptrdiff_t>(half), ch.end());
  }
  return gelman_rubin(halves);
}

double quantile_sorted(std::span<const double> sorted_values, double p) {
  require(!sorted_values.empty(), "quantile_sorted: empty values");
  require(p >= 0.0 && p <= 1.0, "quantile_sorted: p outside [0,1]");
  const std::size_t n = sorted_values.size();
  if (n == 1) return sorted_values[0];
  const double h = (static_cast<double>(n) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= n) return sorted_values[n - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted_values[lo] + frac * (sorted_values[lo + 1] - sorted_values[lo]);
}

SummaryRow summarize(std::string parameter, std::span<const double> values, double rhat) {
  require(!values.empty(), "summarize: empty values");
  for (double x : values) require(std::isfinite(x), "summarize: non-finite value");

  SummaryRow row;
  row.parameter = std::move(parameter);
  row.mean = mean_of(values);
  row.sd = values.size() > 1 ? std::sqrt(sample_variance(values, row.mean)) : 0.0;

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  row.q2_5 = quantile_sorted(sorted, 0.025);
  row.q25 = quantile_sorted(sorted, 0.25);
  row.q50 = quantile_sorted(sorted, 0.50);
  row.q75 = quantile_sorted(sorted, 0.75);
  row.q97_5 = quantile_sorted(sorted, 0.975);
  row.rhat = rhat;
  return row;
}

double deviance(const MixtureState& mix, std::span<const double> h, std::span<const double> y) {
  require(h.size() == y.size(), "deviance: series lengths differ");
  double total = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) total += sv_log_obs_density(y[t], h[t], mix);
  return -2.0 * total;
}

} // namespace volmix
