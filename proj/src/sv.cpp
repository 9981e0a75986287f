#include "volmix/sv.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "volmix/kernels.hpp"

namespace volmix {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void check_state(const SVState& st) {
  require(st.h.size() >= 2, "SVState: path must hold h_0 and at least one h_t");
  require(std::abs(st.phi) < 1.0, "SVState: |phi| must be < 1");
  require(st.sigma_eta2 > 0.0, "SVState: sigma_eta^2 must be positive");
}

} // namespace

double sv_log_obs_density(double y, double h, const MixtureState& mix) {
  const std::size_t k = mix.components.size();
  require(k >= 1, "sv_log_obs_density: empty mixture");
  const double scale = std::exp(0.5 * h); // volatility
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& c = mix.components[i];
    const double var = std::exp(h) / c.precision;
    const double d = y - c.mean * scale;
    terms[i] = std::log(c.weight) - 0.5 * (kLogTwoPi + std::log(var) + d * d / var);
    best = std::max(best, terms[i]);
  }
  if (k == 1) return terms[0];
  double s = 0.0;
  for (double t : terms) s += std::exp(t - best);
  return best + std::log(s);
}

std::vector<double> residuals(std::span<const double> y, std::span<const double> h) {
  require(y.size() == h.size(), "residuals: series lengths differ");
  std::vector<double> eps(y.size());
  for (std::size_t t = 0; t < y.size(); ++t) eps[t] = y[t] * std::exp(-0.5 * h[t]);
  return eps;
}

HUpdateStats update_h(SVState& state, const MixtureState& mix, std::span<const double> y,
                      RngStream& rng, bool data_free) {
  check_state(state);
  const std::size_t n = y.size();
  require(state.h.size() == n + 1 || (data_free && state.h.size() >= 2),
          "update_h: path length must be n + 1");
  const double c = state.c;
  const double phi = state.phi;
  const double sig2 = state.sigma_eta2;
  auto& h = state.h;
  const std::size_t last = h.size() - 1;

  HUpdateStats stats;

  // Pre-sample site: stationary prior and the transition to h_1 combine to
  // an exact Gaussian conditional with precision 1/sigma_eta^2.
  h[0] = sample_normal(c + phi * (h[1] - c), sig2, rng);

  const double interior_var = sig2 / (1.0 + phi * phi);
  for (std::size_t t = 1; t <= last; ++t) {
    double prop_mean;
    double prop_var;
    if (t < last) {
      prop_mean = c + phi * ((h[t - 1] - c) + (h[t + 1] - c)) / (1.0 + phi * phi);
      prop_var = interior_var;
    } else {
      prop_mean = c + phi * (h[t - 1] - c);
      prop_var = sig2;
    }
    const double proposal = sample_normal(prop_mean, prop_var, rng);
    if (data_free) {
      h[t] = proposal;
      continue;
    }
    ++stats.proposals;
    const double delta =
        sv_log_obs_density(y[t - 1], proposal, mix) - sv_log_obs_density(y[t - 1], h[t], mix);
    if (std::log(rng.uniform01()) < delta) {
      h[t] = proposal;
      ++stats.accepted;
    }
  }
  return stats;
}

void update_sigma_eta(SVState& state, const SVPriors& priors, RngStream& rng) {
  check_state(state);
  const auto& h = state.h;
  const std::size_t n = h.size() - 1;
  const double c = state.c;
  const double phi = state.phi;
  double ssq = (h[0] - c) * (h[0] - c) * (1.0 - phi * phi);
  for (std::size_t t = 1; t <= n; ++t) {
    const double r = (h[t] - c) - phi * (h[t - 1] - c);
    ssq += r * r;
  }
  const double shape = 0.5 * (priors.sigma_r + static_cast<double>(n) + 1.0);
  const double scale = 0.5 * (priors.s_sigma + ssq);
  state.sigma_eta2 = sample_inverse_gamma(shape, scale, rng);
}

double phi_log_target(double phi, double h0, double c, double sigma_eta2,
                      const SVPriors& priors) {
  if (std::abs(phi) >= 1.0) return -std::numeric_limits<double>::infinity();
  const double one_minus = 1.0 - phi * phi;
  const double d = h0 - c;
  return log_beta_pdf(0.5 * (phi + 1.0), priors.phi1, priors.phi2) +
         0.5 * std::log(one_minus) - d * d * one_minus / (2.0 * sigma_eta2);
}

PhiUpdateResult update_phi(SVState& state, const SVPriors& priors, RngStream& rng,
                           const std::function<double(double)>* log_target_override) {
  check_state(state);
  const auto& h = state.h;
  const std::size_t n = h.size() - 1;
  const double c = state.c;
  double num = 0.0;
  double denom = 0.0;
  for (std::size_t t = 1; t <= n; ++t) {
    num += (h[t] - c) * (h[t - 1] - c);
    denom += (h[t - 1] - c) * (h[t - 1] - c);
  }
  PhiUpdateResult out;
  if (!(denom > 0.0)) {
    out.skipped = true; // degenerate centered path; retain phi
    return out;
  }
  const double phi_hat = num / denom;
  const double prop_var = state.sigma_eta2 / denom;
  const double proposal = sample_normal(phi_hat, prop_var, rng);

  const auto target = [&](double phi) {
    if (log_target_override) return (*log_target_override)(phi);
    return phi_log_target(phi, h[0], c, state.sigma_eta2, priors);
  };
  const double ratio = target(proposal) - target(state.phi);
  if (std::log(rng.uniform01()) < ratio) {
    state.phi = proposal;
    out.accepted = true;
  }
  return out;
}

NormalParams c_full_conditional(const SVState& state, const SVPriors& priors) {
  check_state(state);
  const auto& h = state.h;
  const std::size_t n = h.size() - 1;
  const double phi = state.phi;
  const double sig2 = state.sigma_eta2;
  const double one_minus_sq = 1.0 - phi * phi;
  const double one_minus = 1.0 - phi;
  double trans_sum = 0.0;
  for (std::size_t t = 1; t <= n; ++t) trans_sum += h[t] - phi * h[t - 1];
  // Quadratic-in-c terms of the stationary h_0 density and the n transitions.
  const double data_prec = (one_minus_sq + static_cast<double>(n) * one_minus * one_minus) / sig2;
  const double data_lin = (one_minus_sq * h[0] + one_minus * trans_sum) / sig2;
  const double post_prec = data_prec + 1.0 / priors.c_var;
  NormalParams out;
  out.mean = (data_lin + priors.c_mean / priors.c_var) / post_prec;
  out.variance = 1.0 / post_prec;
  return out;
}

void update_c(SVState& state, const SVPriors& priors, RngStream& rng) {
  const NormalParams post = c_full_conditional(state, priors);
  state.c = sample_normal(post.mean, post.variance, rng);
}

std::pair<std::vector<double>, std::vector<double>> simulate_sv(double c, double phi,
                                                                double sigma_eta2,
                                                                const MixtureState& mix, int n,
                                                                RngStream& rng) {
  require(std::abs(phi) < 1.0, "simulate_sv: |phi| must be < 1");
  require(sigma_eta2 >= 0.0, "simulate_sv: sigma_eta^2 must be non-negative");
  require(n >= 1, "simulate_sv: n must be >= 1");
  require(mix.k() >= 1, "simulate_sv: empty mixture");

  std::vector<double> h(static_cast<std::size_t>(n) + 1);
  if (sigma_eta2 > 0.0) {
    h[0] = sample_normal(c, sigma_eta2 / (1.0 - phi * phi), rng);
    for (int t = 1; t <= n; ++t)
      h[static_cast<std::size_t>(t)] =
          c + phi * (h[static_cast<std::size_t>(t - 1)] - c) + sample_normal(0.0, sigma_eta2, rng);
  } else {
    for (auto& ht : h) ht = c;
  }

  std::vector<double> weights(mix.components.size());
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = mix.components[i].weight;
  std::vector<double> y(static_cast<std::size_t>(n));
  for (int t = 1; t <= n; ++t) {
    const std::size_t i = sample_categorical(weights, rng);
    const auto& comp = mix.components[i];
    const double eps = sample_normal(comp.mean, 1.0 / comp.precision, rng);
    y[static_cast<std::size_t>(t - 1)] = eps * std::exp(0.5 * h[static_cast<std::size_t>(t)]);
  }
  return {std::move(y), std::move(h)};
}

} // namespace volmix
