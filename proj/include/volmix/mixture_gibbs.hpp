#ifndef VOLMIX_MIXTURE_GIBBS_HPP
#define VOLMIX_MIXTURE_GIBBS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "volmix/birth_death.hpp"
#include "volmix/mixture.hpp"
#include "volmix/rng.hpp"

// Fixed-k conditional updates for (means, precisions, weights) and the
// hyperparameter beta, via latent allocation augmentation. Allocations are
// resampled at the start of every sweep and discarded; they are never part
// of the reported posterior.

namespace volmix {

// One component index per observation, all in {0,...,k-1}.
struct Allocations {
  std::vector<std::int32_t> z;
};

struct NormalParams {
  double mean = 0.0;
  double variance = 1.0;
};

struct MixtureSweepConfig {
  bool data_free = false; // all conditionals collapse to the prior
  std::optional<BirthDeathConfig> birth_death; // engaged: BD step precedes the updates
};

struct MixtureSweepResult {
  MixtureState state;
  int bd_jumps = 0;
  bool bd_truncated = false;
};

// Per-observation allocation probabilities, proportional to
// w_i N(y_j; mu_i, 1/s_i) and normalized in log space; one row per
// observation.
std::vector<std::vector<double>> allocation_probabilities(const MixtureState& state,
                                                          std::span<const double> data);

// z_j categorical with the probabilities above.
Allocations sample_allocations(const MixtureState& state, std::span<const double> data,
                               RngStream& rng);

// Closed-form conditional for component i's mean given allocations:
// N((s_i Y_i + tau zeta)/(s_i n_i + tau), 1/(s_i n_i + tau)) where n_i and
// Y_i are the count and data sum of the points allocated to i. Empty
// components fall back to the prior N(zeta, 1/tau).
NormalParams mean_full_conditional(const MixtureState& state, std::size_t i,
                                   std::span<const double> data, const Allocations& z,
                                   const MixturePriors& priors);

void update_means(MixtureState& state, std::span<const double> data, const Allocations& z,
                  const MixturePriors& priors, RngStream& rng);

// s_i ~ Gamma(shape 2 alpha + n_i/2, rate 2 beta + 0.5 sum of squared residuals).
void update_precisions(MixtureState& state, std::span<const double> data, const Allocations& z,
                       const MixturePriors& priors, RngStream& rng);

// weights ~ Dirichlet(gamma + n_1, ..., gamma + n_k).
void update_weights(MixtureState& state, const Allocations& z, const MixturePriors& priors,
                    RngStream& rng);

// beta ~ Gamma(shape 2l + 2 k alpha, rate 2m + 2 sum_i s_i); stores the new
// value in priors.beta and returns it.
double update_beta_hyper(const MixtureState& state, MixturePriors& priors, RngStream& rng);

// One full sweep: optional birth-death run, then allocations, means,
// precisions, weights, beta. In data-free mode the allocation step is
// skipped and every conditional reduces to its prior.
MixtureSweepResult mixture_sweep(const MixtureState& state, std::span<const double> data,
                                 MixturePriors& priors, const MixtureSweepConfig& cfg,
                                 RngStream& rng);

} // namespace volmix

#endif
