#ifndef VOLMIX_KERNELS_HPP
#define VOLMIX_KERNELS_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "volmix/rng.hpp"

// Random variate generation and log-density evaluation for every
// distribution the samplers need. All samplers draw only through
// RngStream::uniform01()/next_u64(), so sequences are reproducible
// bit-for-bit for a fixed (seed, stream_id).
//
// Parameter-domain violations throw std::invalid_argument. Log densities
// are finite on the open support and return -infinity (never throw) at
// points of zero density.

namespace volmix {

inline constexpr double kLogTwoPi = 1.8378770664093454836;

// Gamma in shape/scale form: mean = shape * scale.
double sample_gamma(double shape, double scale, RngStream& rng);
// Gamma in shape/rate form: mean = shape / rate.
double sample_gamma_rate(double shape, double rate, RngStream& rng);
double sample_normal(double mean, double variance, RngStream& rng);
double sample_beta(double a, double b, RngStream& rng);
// Inverse gamma with density ~ x^{-shape-1} exp(-scale/x); mean scale/(shape-1).
double sample_inverse_gamma(double shape, double scale, RngStream& rng);
double sample_exponential(double mean, RngStream& rng);
std::vector<double> sample_dirichlet(std::span<const double> concentrations, RngStream& rng);
// Probabilities must be non-negative and sum to 1 within 1e-9. Single
// uniform + cumulative scan.
std::size_t sample_categorical(std::span<const double> probabilities, RngStream& rng);

double log_normal_pdf(double x, double mean, double variance);
double log_gamma_pdf(double x, double shape, double scale);
double log_gamma_rate_pdf(double x, double shape, double rate);
double log_beta_pdf(double x, double a, double b);
double log_inverse_gamma_pdf(double x, double shape, double scale);
double log_exponential_pdf(double x, double mean);
double log_symmetric_dirichlet_pdf(std::span<const double> weights, double gamma);

// p(k) proportional to lambda^k / k! normalized over k in {1,...,kmax}.
// Returns 0 (not an error) for k outside the support; the death-rate
// formula needs p(0) = 0 at k = 1.
double truncated_poisson_pmf(int k, double lambda, int kmax);

double log_sum_exp(std::span<const double> v);

} // namespace volmix

#endif
