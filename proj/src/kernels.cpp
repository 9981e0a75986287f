#include "volmix/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace volmix {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double standard_normal(RngStream& rng) {
  // Box-Muller, one deviate per call; two uniforms consumed.
  const double u1 = rng.uniform01();
  const double u2 = rng.uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Marsaglia-Tsang squeeze for shape >= 1, unit scale.
double gamma_shape_ge1(double shape, RngStream& rng) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = standard_normal(rng);
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = rng.uniform01();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

} // namespace

double sample_gamma(double shape, double scale, RngStream& rng) {
  require(shape > 0.0 && scale > 0.0, "sample_gamma: shape and scale must be positive");
  if (shape >= 1.0) return scale * gamma_shape_ge1(shape, rng);
  // Boost a shape+1 draw down: G(a) = G(a+1) * U^{1/a}.
  const double g = gamma_shape_ge1(shape + 1.0, rng);
  const double u = rng.uniform01();
  return scale * g * std::pow(u, 1.0 / shape);
}

double sample_gamma_rate(double shape, double rate, RngStream& rng) {
  require(rate > 0.0, "sample_gamma_rate: rate must be positive");
  return sample_gamma(shape, 1.0 / rate, rng);
}

double sample_normal(double mean, double variance, RngStream& rng) {
  require(variance > 0.0, "sample_normal: variance must be positive");
  return mean + std::sqrt(variance) * standard_normal(rng);
}

double sample_beta(double a, double b, RngStream& rng) {
  require(a > 0.0 && b > 0.0, "sample_beta: shapes must be positive");
  for (;;) {
    const double x = sample_gamma(a, 1.0, rng);
    const double y = sample_gamma(b, 1.0, rng);
    const double s = x + y;
    if (s > 0.0) return x / s;
  }
}

double sample_inverse_gamma(double shape, double scale, RngStream& rng) {
  require(shape > 0.0 && scale > 0.0, "sample_inverse_gamma: shape and scale must be positive");
  for (;;) {
    const double g = sample_gamma_rate(shape, scale, rng);
    if (g > 0.0 && std::isfinite(g)) return 1.0 / g;
  }
}

double sample_exponential(double mean, RngStream& rng) {
  require(mean > 0.0, "sample_exponential: mean must be positive");
  return -mean * std::log(rng.uniform01());
}

std::vector<double> sample_dirichlet(std::span<const double> concentrations, RngStream& rng) {
  require(!concentrations.empty(), "sample_dirichlet: need at least one concentration");
  for (double c : concentrations)
    require(c > 0.0, "sample_dirichlet: concentrations must be positive");
  std::vector<double> w(concentrations.size());
  for (;;) {
    double sum = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = sample_gamma(concentrations[i], 1.0, rng);
      sum += w[i];
    }
    if (sum > 0.0) {
      for (double& x : w) x /= sum;
      return w;
    }
  }
}

std::size_t sample_categorical(std::span<const double> probabilities, RngStream& rng) {
  require(!probabilities.empty(), "sample_categorical: empty probability vector");
  double sum = 0.0;
  for (double p : probabilities) {
    require(p >= 0.0, "sample_categorical: negative probability");
    sum += p;
  }
  require(std::abs(sum - 1.0) <= 1e-9, "sample_categorical: probabilities must sum to 1");
  const double u = rng.uniform01() * sum;
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (probabilities[i] > 0.0) last_positive = i;
    cum += probabilities[i];
    if (u <= cum && probabilities[i] > 0.0) return i;
  }
  return last_positive;
}

double log_normal_pdf(double x, double mean, double variance) {
  require(variance > 0.0, "log_normal_pdf: variance must be positive");
  const double d = x - mean;
  return -0.5 * (kLogTwoPi + std::log(variance) + d * d / variance);
}

double log_gamma_pdf(double x, double shape, double scale) {
  require(shape > 0.0 && scale > 0.0, "log_gamma_pdf: shape and scale must be positive");
  if (x <= 0.0) return kNegInf;
  return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) - shape * std::log(scale);
}

double log_gamma_rate_pdf(double x, double shape, double rate) {
  require(rate > 0.0, "log_gamma_rate_pdf: rate must be positive");
  return log_gamma_pdf(x, shape, 1.0 / rate);
}

double log_beta_pdf(double x, double a, double b) {
  require(a > 0.0 && b > 0.0, "log_beta_pdf: shapes must be positive");
  if (x <= 0.0 || x >= 1.0) return kNegInf;
  const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - lbeta;
}

double log_inverse_gamma_pdf(double x, double shape, double scale) {
  require(shape > 0.0 && scale > 0.0, "log_inverse_gamma_pdf: shape and scale must be positive");
  if (x <= 0.0) return kNegInf;
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

double log_exponential_pdf(double x, double mean) {
  require(mean > 0.0, "log_exponential_pdf: mean must be positive");
  if (x < 0.0) return kNegInf;
  return -std::log(mean) - x / mean;
}

double log_symmetric_dirichlet_pdf(std::span<const double> weights, double gamma) {
  require(gamma > 0.0, "log_symmetric_dirichlet_pdf: gamma must be positive");
  require(!weights.empty(), "log_symmetric_dirichlet_pdf: empty weight vector");
  const double k = static_cast<double>(weights.size());
  double logw = 0.0;
  for (double w : weights) {
    if (w <= 0.0 || w > 1.0) return kNegInf;
    logw += std::log(w);
  }
  return std::lgamma(k * gamma) - k * std::lgamma(gamma) + (gamma - 1.0) * logw;
}

double truncated_poisson_pmf(int k, double lambda, int kmax) {
  require(lambda > 0.0, "truncated_poisson_pmf: lambda must be positive");
  require(kmax >= 1, "truncated_poisson_pmf: kmax must be >= 1");
  if (k < 1 || k > kmax) return 0.0;
  const double loglam = std::log(lambda);
  std::vector<double> lp(static_cast<std::size_t>(kmax));
  for (int j = 1; j <= kmax; ++j)
    lp[static_cast<std::size_t>(j - 1)] = j * loglam - std::lgamma(j + 1.0);
  const double norm = log_sum_exp(lp);
  return std::exp(lp[static_cast<std::size_t>(k - 1)] - norm);
}

double log_sum_exp(std::span<const double> v) {
  require(!v.empty(), "log_sum_exp: empty input");
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

} // namespace volmix
