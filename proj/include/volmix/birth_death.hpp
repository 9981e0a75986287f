#ifndef VOLMIX_BIRTH_DEATH_HPP
#define VOLMIX_BIRTH_DEATH_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "volmix/mixture.hpp"
#include "volmix/rng.hpp"

// Continuous-time birth-death point process over mixture configurations:
// per-component death rates, jump simulation, and the simulation loop run
// between Gibbs sweeps. One engine invocation per chain; nothing shared.

namespace volmix {

struct BirthDeathConfig {
  double lambda_b = 1.0;      // birth rate, researcher-specified
  double virtual_time = 1.0;  // simulated duration per sweep
  int max_jumps = 10000;      // safety cap on applied jumps
  double rate_ceiling = 1e300; // clamp for exponentiated death rates
  bool data_free = false;     // likelihood ratio forced to 1 (prior recovery)
};

enum class JumpKind { birth, death };

struct JumpEvent {
  JumpKind kind = JumpKind::birth;
  std::size_t death_index = 0; // valid when kind == death
  double waiting_time = 0.0;
};

struct BirthDeathResult {
  MixtureState state;
  int jumps = 0;
  bool truncated = false; // max_jumps reached before the virtual clock ran out
};

// delta_j = lambda_b * exp(logL(state without j) - logL(state)) * p(k-1)/(k p(k)).
// Computed in log space and exponentiated; values above cfg.rate_ceiling
// clamp to the ceiling. At k = 1 the single rate is exactly 0 (p(0) = 0).
std::vector<double> death_rates(const MixtureState& state, std::span<const double> data,
                                const MixturePriors& priors, const BirthDeathConfig& cfg);

// Waiting time ~ Exponential(mean 1/(birth rate + total death rate)); the
// event is a birth with probability lambda_b / total, otherwise death of
// component j with probability rates[j] / total. When births_allowed is
// false (k at kmax) the birth rate is treated as 0. If the total rate
// vanishes the returned waiting time is +infinity.
JumpEvent simulate_jump(const MixtureState& state, std::span<const double> rates,
                        const BirthDeathConfig& cfg, RngStream& rng,
                        bool births_allowed = true);

// Weight from density k(1-w)^{k-1} on (0,1) (Beta(1,k)); mean and precision
// independently from the component prior given the current beta.
MixtureComponent sample_birth_point(const MixtureState& state, const MixturePriors& priors,
                                    RngStream& rng);

// Runs the jump process until the accumulated virtual time exceeds
// cfg.virtual_time or max_jumps events were applied. Births are suppressed
// while k = kmax, keeping the process inside the truncated prior's support.
BirthDeathResult run_birth_death(const MixtureState& initial, std::span<const double> data,
                                 const MixturePriors& priors, const BirthDeathConfig& cfg,
                                 RngStream& rng);

} // namespace volmix

#endif
