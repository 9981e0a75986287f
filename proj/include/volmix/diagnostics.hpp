#ifndef VOLMIX_DIAGNOSTICS_HPP
#define VOLMIX_DIAGNOSTICS_HPP

#include <span>
#include <string>
#include <vector>

#include "volmix/mixture.hpp"

// Convergence assessment and posterior summarization: the potential scale
// reduction statistic, quantile summary rows, and the deviance of the
// observation model. Pure functions over immutable chain data.

namespace volmix {

// Plain potential scale reduction, no degrees-of-freedom correction:
// R = sqrt(((n-1)/n W + B/n) / W) with W the mean within-chain sample
// variance (divisor n-1) and B = n * variance of the chain means
// (divisor m-1). Requires m >= 2 chains of equal length n >= 2; throws on
// degenerate chains (W = 0).
double gelman_rubin(const std::vector<std::vector<double>>& chains);

// Split variant: each chain is halved (dropping the middle element of an
// odd-length chain) before the same formula is applied to the 2m halves.
double gelman_rubin_split(const std::vector<std::vector<double>>& chains);

struct SummaryRow {
  std::string parameter;
  double mean = 0.0;
  double sd = 0.0;
  double q2_5 = 0.0;
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
  double q97_5 = 0.0;
  double rhat = 0.0;
};

// Quantile by sorted linear interpolation at h = (n-1) p, 0-indexed.
double quantile_sorted(std::span<const double> sorted_values, double p);

// Mean, sample sd (divisor n-1; 0 for a single value) and the five summary
// quantiles; `rhat` is carried through.
SummaryRow summarize(std::string parameter, std::span<const double> values, double rhat);

// D = -2 sum_t log p(y_t | h_t, mix); h excludes the pre-sample element.
double deviance(const MixtureState& mix, std::span<const double> h, std::span<const double> y);

} // namespace volmix

#endif
