#ifndef VOLMIX_SV_HPP
#define VOLMIX_SV_HPP

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "volmix/mixture.hpp"
#include "volmix/mixture_gibbs.hpp" // NormalParams
#include "volmix/rng.hpp"

// Gibbs / Metropolis-within-Gibbs updates for the canonical stochastic
// volatility model with mixture innovations: the latent log squared
// volatility path h_0..h_n and the parameters (c, phi, sigma_eta^2).
// One SVState per chain; sweeps are sequential within a chain.

namespace volmix {

struct SVState {
  std::vector<double> h; // h[0] is the pre-sample state; h[t] pairs y[t-1]
  double c = 0.0;
  double phi = 0.9;      // must stay inside (-1, 1)
  double sigma_eta2 = 0.02;
};

struct SVPriors {
  double c_mean = 0.0;
  double c_var = 10.0;
  double phi1 = 20.0;  // Beta(phi1, phi2) on (phi+1)/2
  double phi2 = 1.5;
  double sigma_r = 5.0;
  double s_sigma = 0.05; // inverse-gamma constants: IG(sigma_r/2, s_sigma/2)
};

// log sum_i w_i N(y; mu_i e^{h/2}, e^h / s_i): the law of y = eps e^{h/2}
// with eps drawn from the mixture.
double sv_log_obs_density(double y, double h, const MixtureState& mix);

// eps_t = y_t e^{-h_t/2}; series must have equal length (pass the h path
// without its pre-sample element).
std::vector<double> residuals(std::span<const double> y, std::span<const double> h);

struct HUpdateStats {
  int proposals = 0; // Metropolis sites (the pre-sample site is exact Gibbs)
  int accepted = 0;
};

// Single-site sweep over t = 0..n. The pre-sample site is an exact Gibbs
// draw from N(c + phi (h_1 - c), sigma_eta^2); every observed site proposes
// from its conditional AR prior and accepts on the observation-density
// ratio alone. With data_free set, proposals are always accepted, which is
// an exact draw from the path prior.
HUpdateStats update_h(SVState& state, const MixtureState& mix, std::span<const double> y,
                      RngStream& rng, bool data_free = false);

// sigma_eta^2 ~ IG((sigma_r + n + 1)/2,
//                  (S_sigma + (h_0-c)^2 (1-phi^2) + sum_t ((h_t-c) - phi (h_{t-1}-c))^2)/2).
void update_sigma_eta(SVState& state, const SVPriors& priors, RngStream& rng);

// Unnormalized log target of the phi conditional once the AR sum has been
// absorbed into the Gaussian proposal: Beta prior on (phi+1)/2 times the
// stationary density of h_0. -infinity outside (-1, 1).
double phi_log_target(double phi, double h0, double c, double sigma_eta2, const SVPriors& priors);

struct PhiUpdateResult {
  bool accepted = false;
  bool skipped = false; // degenerate denominator; phi retained
};

// Metropolis-Hastings with proposal N(phi_hat, V) where phi_hat and V are
// the conditional least-squares fit of the centered path; the proposal
// density cancels the AR likelihood so the acceptance ratio is
// phi_log_target(new) - phi_log_target(old). `log_target_override` replaces
// the target evaluation (test hook).
PhiUpdateResult update_phi(SVState& state, const SVPriors& priors, RngStream& rng,
                           const std::function<double(double)>* log_target_override = nullptr);

// Conjugate normal conditional of the level c.
NormalParams c_full_conditional(const SVState& state, const SVPriors& priors);

void update_c(SVState& state, const SVPriors& priors, RngStream& rng);

// Forward simulation: h_0 from the stationary law (h_0 = c when
// sigma_eta2 = 0), AR(1) transitions, innovations from the mixture.
// Returns (y of length n, h of length n+1).
std::pair<std::vector<double>, std::vector<double>> simulate_sv(double c, double phi,
                                                                double sigma_eta2,
                                                                const MixtureState& mix, int n,
                                                                RngStream& rng);

} // namespace volmix

#endif
