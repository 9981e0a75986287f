#ifndef VOLMIX_MIXTURE_HPP
#define VOLMIX_MIXTURE_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "volmix/rng.hpp"

// Point-process state over Gaussian mixture components, its likelihood and
// hierarchical prior, and the birth/death move arithmetic.
//
// The scale parameter of a component is stored as the precision s = 1/sigma^2;
// conjugate updates are natural in precision and posterior reports expose it
// directly (with the implied variance alongside).

namespace volmix {

struct MixtureComponent {
  double weight = 1.0;
  double mean = 0.0;
  double precision = 1.0; // inverse variance
};

// Invariants: weights sum to 1 within 1e-12 after every operation,
// 1 <= k <= kmax, precisions strictly positive, all fields finite.
// Cheap to copy, safe to move across threads.
struct MixtureState {
  std::vector<MixtureComponent> components;

  int k() const { return static_cast<int>(components.size()); }

  // Divides every weight by the current sum, absorbing float drift.
  void renormalize_weights();
};

// Hyperparameters of the hierarchical prior, plus the data-derived constants.
// `beta` is sampled state, not a constant: the precision hyperprior rate.
struct MixturePriors {
  double lambda = 1.0; // truncated Poisson rate for k
  int kmax = 10;
  double gamma = 1.0;  // symmetric Dirichlet concentration for the weights
  double zeta = 0.0;   // component-mean prior mean (midpoint of the data range)
  double tau = 1.0;    // component-mean prior precision, 1/R^2
  double alpha = 2.0;  // precision prior shape constant
  double l = 0.2;      // beta hyperprior shape constant
  double m = 1.0;      // beta hyperprior rate constant, 100 l / (alpha R^2)
  double range = 1.0;  // observed data range R
  double beta = 1.0;   // current hyperparameter value
};

// Sum over observations of log(sum_i w_i N(y; mu_i, 1/s_i)), with a
// log-sum-exp per observation so valid states never produce NaN/-inf.
double log_likelihood(const MixtureState& state, std::span<const double> data);

// log p(k) + log Dirichlet_gamma(weights)
//   + sum_i [ log N(mu_i; zeta, 1/tau) + log Gamma(s_i; shape 2 alpha, scale 1/(2 beta)) ].
// Returns -infinity when k exceeds kmax.
double log_prior(const MixtureState& state, const MixturePriors& priors);

// Per-component prior density p~(mu, s); the factor the birth density and
// the balance condition share.
double log_component_prior(double mean, double precision, const MixturePriors& priors);

// Existing weights shrink by (1 - point.weight), the new component is
// appended. Requires point.weight in (0,1) and k < kmax.
MixtureState birth(const MixtureState& state, const MixtureComponent& point);

// Removes component `index`; remaining weights divide by (1 - w_index).
// Requires k >= 2. Exact inverse of birth on the born component.
MixtureState death(const MixtureState& state, std::size_t index);

// zeta = (min+max)/2, R = max-min, tau = 1/R^2, alpha = 2, l = 0.2,
// m = 100 l / (alpha R^2), gamma = 1; beta initialized by a draw from its
// Gamma(2l, scale 1/(2m)) hyperprior. Constant data is rejected (R = 0).
MixturePriors default_priors_from_data(std::span<const double> data, double lambda, int kmax,
                                       RngStream& rng);

// Fresh k-component state drawn from the prior given current beta.
MixtureState prior_draw(int k, const MixturePriors& priors, RngStream& rng);

} // namespace volmix

#endif
