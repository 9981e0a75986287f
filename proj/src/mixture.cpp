#include "volmix/mixture.hpp"

#include <algorithm>
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

void MixtureState::renormalize_weights() {
  double sum = 0.0;
  for (const auto& c : components) sum += c.weight;
  require(sum > 0.0 && std::isfinite(sum), "MixtureState: weight sum not positive");
  for (auto& c : components) c.weight /= sum;
}

double log_likelihood(const MixtureState& state, std::span<const double> data) {
  require(!data.empty(), "log_likelihood: empty data");
  require(state.k() >= 1, "log_likelihood: empty state");
  const std::size_t k = state.components.size();
  // Per-component constants: log w_i + 0.5 log s_i - 0.5 log 2pi.
  std::vector<double> base(k), mu(k), prec(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& c = state.components[i];
    base[i] = std::log(c.weight) + 0.5 * std::log(c.precision) - 0.5 * kLogTwoPi;
    mu[i] = c.mean;
    prec[i] = c.precision;
  }
  std::vector<double> terms(k);
  double total = 0.0;
  for (double y : data) {
    for (std::size_t i = 0; i < k; ++i) {
      const double d = y - mu[i];
      terms[i] = base[i] - 0.5 * prec[i] * d * d;
    }
    total += log_sum_exp(terms);
  }
  return total;
}

double log_component_prior(double mean, double precision, const MixturePriors& p) {
  return log_normal_pdf(mean, p.zeta, 1.0 / p.tau) +
         log_gamma_pdf(precision, 2.0 * p.alpha, 1.0 / (2.0 * p.beta));
}

double log_prior(const MixtureState& state, const MixturePriors& priors) {
  const int k = state.k();
  require(k >= 1, "log_prior: empty state");
  const double pk = truncated_poisson_pmf(k, priors.lambda, priors.kmax);
  if (pk == 0.0) return -std::numeric_limits<double>::infinity();
  std::vector<double> w(state.components.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = state.components[i].weight;
  double lp = std::log(pk) + log_symmetric_dirichlet_pdf(w, priors.gamma);
  for (const auto& c : state.components)
    lp += log_component_prior(c.mean, c.precision, priors);
  return lp;
}

MixtureState birth(const MixtureState& state, const MixtureComponent& point) {
  require(point.weight > 0.0 && point.weight < 1.0, "birth: weight must lie in (0,1)");
  require(point.precision > 0.0, "birth: precision must be positive");
  require(std::isfinite(point.mean), "birth: mean must be finite");
  MixtureState out = state;
  const double shrink = 1.0 - point.weight;
  for (auto& c : out.components) c.weight *= shrink;
  out.components.push_back(point);
  out.renormalize_weights();
  return out;
}

MixtureState death(const MixtureState& state, std::size_t index) {
  require(state.k() >= 2, "death: state must have at least two components");
  require(index < state.components.size(), "death: index out of range");
  MixtureState out;
  out.components.reserve(state.components.size() - 1);
  for (std::size_t i = 0; i < state.components.size(); ++i) {
    if (i == index) continue;
    out.components.push_back(state.components[i]);
  }
  // The remaining weights sum to 1 - w_index on a closed simplex, so the
  // renormalization divides by exactly that factor while staying stable
  // when w_index is within rounding distance of 1.
  out.renormalize_weights();
  return out;
}

MixturePriors default_priors_from_data(std::span<const double> data, double lambda, int kmax,
                                       RngStream& rng) {
  require(data.size() >= 2, "default_priors_from_data: need at least two observations");
  require(lambda > 0.0, "default_priors_from_data: lambda must be positive");
  require(kmax >= 1, "default_priors_from_data: kmax must be >= 1");
  double lo = data[0], hi = data[0];
  for (double y : data) {
    require(std::isfinite(y), "default_priors_from_data: data must be finite");
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  const double range = hi - lo;
  require(range > 0.0, "default_priors_from_data: constant data has zero range");

  MixturePriors p;
  p.lambda = lambda;
  p.kmax = kmax;
  p.gamma = 1.0;
  p.zeta = 0.5 * (lo + hi);
  p.range = range;
  p.tau = 1.0 / (range * range);
  p.alpha = 2.0;
  p.l = 0.2;
  p.m = 100.0 * p.l / (p.alpha * range * range);
  p.beta = sample_gamma(2.0 * p.l, 1.0 / (2.0 * p.m), rng);
  return p;
}

MixtureState prior_draw(int k, const MixturePriors& priors, RngStream& rng) {
  require(k >= 1 && k <= priors.kmax, "prior_draw: k outside {1..kmax}");
  std::vector<double> conc(static_cast<std::size_t>(k), priors.gamma);
  const std::vector<double> w = sample_dirichlet(conc, rng);
  MixtureState st;
  st.components.resize(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    auto& c = st.components[static_cast<std::size_t>(i)];
    c.weight = w[static_cast<std::size_t>(i)];
    c.mean = sample_normal(priors.zeta, 1.0 / priors.tau, rng);
    c.precision = sample_gamma(2.0 * priors.alpha, 1.0 / (2.0 * priors.beta), rng);
  }
  st.renormalize_weights();
  return st;
}

} // namespace volmix
