#include "volmix/mixture_gibbs.hpp"

#include <cmath>
#include <stdexcept>

#include "volmix/kernels.hpp"

namespace volmix {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

struct ComponentStats {
  std::vector<int> count;
  std::vector<double> sum;
};

ComponentStats allocation_counts(const MixtureState& state, std::span<const double> data,
                                 const Allocations& z) {
  require(z.z.size() == data.size(), "allocations do not match data length");
  ComponentStats st;
  st.count.assign(state.components.size(), 0);
  st.sum.assign(state.components.size(), 0.0);
  for (std::size_t j = 0; j < data.size(); ++j) {
    const auto i = static_cast<std::size_t>(z.z[j]);
    require(i < state.components.size(), "allocation index out of range");
    ++st.count[i];
    st.sum[i] += data[j];
  }
  return st;
}

} // namespace

std::vector<std::vector<double>> allocation_probabilities(const MixtureState& state,
                                                          std::span<const double> data) {
  const std::size_t k = state.components.size();
  require(k >= 1, "allocation_probabilities: empty state");
  std::vector<double> base(k), mu(k), prec(k), terms(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& c = state.components[i];
    base[i] = std::log(c.weight) + 0.5 * std::log(c.precision);
    mu[i] = c.mean;
    prec[i] = c.precision;
  }
  std::vector<std::vector<double>> prob(data.size(), std::vector<double>(k));
  for (std::size_t j = 0; j < data.size(); ++j) {
    for (std::size_t i = 0; i < k; ++i) {
      const double d = data[j] - mu[i];
      terms[i] = base[i] - 0.5 * prec[i] * d * d;
    }
    const double norm = log_sum_exp(terms);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      prob[j][i] = std::exp(terms[i] - norm);
      sum += prob[j][i];
    }
    // Absorb tiny float drift so the rows are exact categorical inputs.
    for (double& p : prob[j]) p /= sum;
  }
  return prob;
}

Allocations sample_allocations(const MixtureState& state, std::span<const double> data,
                               RngStream& rng) {
  const std::size_t k = state.components.size();
  require(k >= 1, "sample_allocations: empty state");
  Allocations out;
  out.z.resize(data.size());
  if (k == 1) {
    for (auto& zj : out.z) zj = 0;
    return out;
  }
  const auto prob = allocation_probabilities(state, data);
  for (std::size_t j = 0; j < data.size(); ++j)
    out.z[j] = static_cast<std::int32_t>(sample_categorical(prob[j], rng));
  return out;
}

NormalParams mean_full_conditional(const MixtureState& state, std::size_t i,
                                   std::span<const double> data, const Allocations& z,
                                   const MixturePriors& priors) {
  require(i < state.components.size(), "mean_full_conditional: index out of range");
  const auto stats = allocation_counts(state, data, z);
  const double s = state.components[i].precision;
  const double n = static_cast<double>(stats.count[i]);
  const double y_sum = stats.sum[i];
  NormalParams out;
  const double post_prec = s * n + priors.tau;
  out.mean = (s * y_sum + priors.tau * priors.zeta) / post_prec;
  out.variance = 1.0 / post_prec;
  return out;
}

void update_means(MixtureState& state, std::span<const double> data, const Allocations& z,
                  const MixturePriors& priors, RngStream& rng) {
  const auto stats = allocation_counts(state, data, z);
  for (std::size_t i = 0; i < state.components.size(); ++i) {
    const double s = state.components[i].precision;
    const double n = static_cast<double>(stats.count[i]);
    const double post_prec = s * n + priors.tau;
    const double post_mean = (s * stats.sum[i] + priors.tau * priors.zeta) / post_prec;
    state.components[i].mean = sample_normal(post_mean, 1.0 / post_prec, rng);
  }
}

void update_precisions(MixtureState& state, std::span<const double> data, const Allocations& z,
                       const MixturePriors& priors, RngStream& rng) {
  require(z.z.size() == data.size(), "update_precisions: allocations do not match data");
  const std::size_t k = state.components.size();
  std::vector<double> ssq(k, 0.0);
  std::vector<int> count(k, 0);
  for (std::size_t j = 0; j < data.size(); ++j) {
    const auto i = static_cast<std::size_t>(z.z[j]);
    const double d = data[j] - state.components[i].mean;
    ssq[i] += d * d;
    ++count[i];
  }
  for (std::size_t i = 0; i < k; ++i) {
    const double shape = 2.0 * priors.alpha + 0.5 * count[i];
    const double rate = 2.0 * priors.beta + 0.5 * ssq[i];
    state.components[i].precision = sample_gamma_rate(shape, rate, rng);
  }
}

void update_weights(MixtureState& state, const Allocations& z, const MixturePriors& priors,
                    RngStream& rng) {
  const std::size_t k = state.components.size();
  std::vector<double> conc(k, priors.gamma);
  for (std::int32_t zj : z.z) {
    const auto i = static_cast<std::size_t>(zj);
    require(i < k, "update_weights: allocation index out of range");
    conc[i] += 1.0;
  }
  const auto w = sample_dirichlet(conc, rng);
  for (std::size_t i = 0; i < k; ++i) state.components[i].weight = w[i];
  state.renormalize_weights();
}

double update_beta_hyper(const MixtureState& state, MixturePriors& priors, RngStream& rng) {
  require(state.k() >= 1, "update_beta_hyper: empty state");
  double s_sum = 0.0;
  for (const auto& c : state.components) {
    require(c.precision > 0.0, "update_beta_hyper: precisions must be positive");
    s_sum += c.precision;
  }
  const double shape = 2.0 * priors.l + 2.0 * state.k() * priors.alpha;
  const double rate = 2.0 * priors.m + 2.0 * s_sum;
  priors.beta = sample_gamma_rate(shape, rate, rng);
  return priors.beta;
}

MixtureSweepResult mixture_sweep(const MixtureState& state, std::span<const double> data,
                                 MixturePriors& priors, const MixtureSweepConfig& cfg,
                                 RngStream& rng) {
  require(cfg.data_free || !data.empty(), "mixture_sweep: empty data");
  MixtureSweepResult out;
  out.state = state;

  if (cfg.birth_death) {
    BirthDeathConfig bd = *cfg.birth_death;
    bd.data_free = cfg.data_free;
    auto bd_result = run_birth_death(out.state, data, priors, bd, rng);
    out.state = std::move(bd_result.state);
    out.bd_jumps = bd_result.jumps;
    out.bd_truncated = bd_result.truncated;
  }

  Allocations z;
  std::span<const double> effective_data = data;
  if (cfg.data_free) {
    effective_data = {};
  } else {
    z = sample_allocations(out.state, data, rng);
  }
  update_means(out.state, effective_data, z, priors, rng);
  update_precisions(out.state, effective_data, z, priors, rng);
  update_weights(out.state, z, priors, rng);
  update_beta_hyper(out.state, priors, rng);
  return out;
}

} // namespace volmix
