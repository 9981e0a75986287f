#include "volmix/birth_death.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "volmix/kernels.hpp"

namespace volmix {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

} // namespace

std::vector<double> death_rates(const MixtureState& state, std::span<const double> data,
                                const MixturePriors& priors, const BirthDeathConfig& cfg) {
  const int k = state.k();
  require(k >= 1, "death_rates: empty state");
  require(cfg.data_free || !data.empty(), "death_rates: empty data");

  std::vector<double> rates(static_cast<std::size_t>(k), 0.0);
  if (k == 1) return rates; // p(0) = 0 under the truncated prior

  // Truncated-Poisson ratio p(k-1)/(k p(k)): the factorials and the
  // normalizer cancel, leaving 1/lambda for every interior k.
  const double log_prior_ratio = -std::log(priors.lambda);
  const double log_ceiling = std::log(cfg.rate_ceiling);
  const double log_lambda_b = std::log(cfg.lambda_b);

  const double log_like = cfg.data_free ? 0.0 : log_likelihood(state, data);
  for (int j = 0; j < k; ++j) {
    double delta_log_like = 0.0;
    if (!cfg.data_free) {
      const MixtureState reduced = death(state, static_cast<std::size_t>(j));
      delta_log_like = log_likelihood(reduced, data) - log_like;
    }
    const double lr = log_lambda_b + delta_log_like + log_prior_ratio;
    rates[static_cast<std::size_t>(j)] = lr > log_ceiling ? cfg.rate_ceiling : std::exp(lr);
  }
  return rates;
}

JumpEvent simulate_jump(const MixtureState& state, std::span<const double> rates,
                        const BirthDeathConfig& cfg, RngStream& rng, bool births_allowed) {
  require(rates.size() == static_cast<std::size_t>(state.k()),
          "simulate_jump: rates do not match state");
  const double birth_rate = births_allowed ? cfg.lambda_b : 0.0;
  long double total_l = birth_rate;
  for (double r : rates) total_l += r;
  const double total = static_cast<double>(total_l);

  JumpEvent ev;
  if (!(total > 0.0) || !std::isfinite(total)) {
    // No event can fire within any finite horizon.
    ev.kind = JumpKind::death;
    ev.death_index = 0;
    ev.waiting_time = std::numeric_limits<double>::infinity();
    return ev;
  }

  ev.waiting_time = sample_exponential(1.0 / total, rng);
  const double u = rng.uniform01() * total;
  if (u < birth_rate) {
    ev.kind = JumpKind::birth;
    return ev;
  }
  ev.kind = JumpKind::death;
  double cum = birth_rate;
  std::size_t last_positive = 0;
  for (std::size_t j = 0; j < rates.size(); ++j) {
    if (rates[j] > 0.0) last_positive = j;
    cum += rates[j];
    if (u <= cum && rates[j] > 0.0) {
      ev.death_index = j;
      return ev;
    }
  }
  ev.death_index = last_positive;
  return ev;
}

MixtureComponent sample_birth_point(const MixtureState& state, const MixturePriors& priors,
                                    RngStream& rng) {
  const int k = state.k();
  require(k >= 1, "sample_birth_point: empty state");
  MixtureComponent point;
  point.weight = sample_beta(1.0, static_cast<double>(k), rng);
  point.mean = sample_normal(priors.zeta, 1.0 / priors.tau, rng);
  point.precision = sample_gamma(2.0 * priors.alpha, 1.0 / (2.0 * priors.beta), rng);
  return point;
}

BirthDeathResult run_birth_death(const MixtureState& initial, std::span<const double> data,
                                 const MixturePriors& priors, const BirthDeathConfig& cfg,
                                 RngStream& rng) {
  require(cfg.lambda_b > 0.0, "run_birth_death: lambda_b must be positive");
  require(cfg.virtual_time > 0.0, "run_birth_death: virtual_time must be positive");
  require(cfg.max_jumps >= 1, "run_birth_death: max_jumps must be >= 1");

  BirthDeathResult out;
  out.state = initial;
  double clock = 0.0;
  for (;;) {
    const auto rates = death_rates(out.state, data, priors, cfg);
    const bool births_allowed = out.state.k() < priors.kmax;
    const JumpEvent ev = simulate_jump(out.state, rates, cfg, rng, births_allowed);
    clock += ev.waiting_time;
    if (!(clock <= cfg.virtual_time)) break; // state at the virtual-time horizon
    if (ev.kind == JumpKind::birth) {
      out.state = birth(out.state, sample_birth_point(out.state, priors, rng));
    } else {
      out.state = death(out.state, ev.death_index);
    }
    if (++out.jumps >= cfg.max_jumps) {
      out.truncated = true;
      break;
    }
  }
  return out;
}

} // namespace volmix
