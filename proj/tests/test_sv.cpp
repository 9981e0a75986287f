#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "support/test_stats.hpp"
#include "volmix/kernels.hpp"
#include "volmix/mixture.hpp"
#include "volmix/sv.hpp"

using namespace volmix;
namespace ts = testsupport;

namespace {

MixtureState make_state(std::vector<MixtureComponent> comps) {
  MixtureState st;
  st.components = std::move(comps);
  return st;
}

MixtureState standard_normal() { return make_state({{1.0, 0.0, 1.0}}); }

double lag1_autocorr(std::span<const double> v) {
  const double m = ts::mean_of(v);
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t + 1 < v.size(); ++t) num += (v[t] - m) * (v[t + 1] - m);
  for (double x : v) den += (x - m) * (x - m);
  return num / den;
}

} // namespace

TEST_CASE("sv observation density: reductions and change-of-variables oracle") {
  RngStream rng(41);
  const auto mix = make_state({{0.4, -0.5, 2.0}, {0.6, 0.8, 0.5}});

  // h = 0: the mixture log density itself.
  for (double y : {-1.5, 0.0, 2.2}) {
    const std::vector<double> single{y};
    CHECK(sv_log_obs_density(y, 0.0, mix) ==
          doctest::Approx(log_likelihood(mix, single)).epsilon(1e-13));
  }

  // k = 1 standard component: log N(y; 0, e^h).
  const auto canon = standard_normal();
  for (int rep = 0; rep < 20; ++rep) {
    const double y = sample_normal(0.0, 2.0, rng);
    const double h = sample_normal(0.0, 1.0, rng);
    CHECK(sv_log_obs_density(y, h, canon) ==
          doctest::Approx(log_normal_pdf(y, 0.0, std::exp(h))).epsilon(1e-13));
  }

  // Random inputs: log p_eps(y e^{-h/2}) - h/2.
  for (int rep = 0; rep < 50; ++rep) {
    const double y = sample_normal(0.0, 4.0, rng);
    const double h = sample_normal(0.0, 2.0, rng);
    const std::vector<double> eps{y * std::exp(-0.5 * h)};
    const double oracle = log_likelihood(mix, eps) - 0.5 * h;
    CHECK(sv_log_obs_density(y, h, mix) == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("residuals: identities and round trip") {
  const std::vector<double> h{0.0, 0.0, 0.0};
  const std::vector<double> y{1.0, -2.0, 0.5};
  const auto eps = residuals(y, h);
  CHECK(eps == y);

  const std::vector<double> h2{0.2, -1.0, 3.0};
  std::vector<double> y2(h2.size());
  for (std::size_t t = 0; t < h2.size(); ++t) y2[t] = std::exp(0.5 * h2[t]);
  for (double e : residuals(y2, h2)) CHECK(e == doctest::Approx(1.0).epsilon(1e-14));

  RngStream rng(42);
  std::vector<double> yr(20), hr(20);
  for (auto& v : yr) v = sample_normal(0.0, 1.0, rng);
  for (auto& v : hr) v = sample_normal(-0.5, 0.6, rng);
  const auto er = residuals(yr, hr);
  for (std::size_t t = 0; t < yr.size(); ++t)
    CHECK(er[t] * std::exp(0.5 * hr[t]) == doctest::Approx(yr[t]).epsilon(1e-12));

  CHECK_THROWS_AS(residuals(yr, std::span<const double>(hr).subspan(1)), std::invalid_argument);
}

TEST_CASE("update_h: pre-sample site has the exact conjugate law") {
  // Prior N(c, sig2/(1-phi^2)) combined with the transition to h_1 gives
  // precision exactly 1/sig2 and mean c + phi (h_1 - c).
  RngStream rng(43);
  const double c = 0.4, phi = 0.8, sig2 = 0.09, h1 = 1.3;
  std::vector<double> draws;
  for (int rep = 0; rep < 100000; ++rep) {
    SVState st;
    st.c = c;
    st.phi = phi;
    st.sigma_eta2 = sig2;
    st.h = {0.0, h1};
    update_h(st, standard_normal(), std::vector<double>{0.0}, rng, true);
    draws.push_back(st.h[0]);
  }
  const double want_mean = c + phi * (h1 - c);
  CHECK(std::abs(ts::mean_of(draws) - want_mean) < 3.0 * ts::iid_se(draws));
  CHECK(ts::variance_of(draws) == doctest::Approx(sig2).epsilon(0.03));
}

TEST_CASE("update_h: interior proposal is centered when neighbours sit at c") {
  RngStream rng(44);
  const double c = -0.7;
  std::vector<double> site2;
  for (int rep = 0; rep < 60000; ++rep) {
    SVState st;
    st.c = c;
    st.phi = 0.9;
    st.sigma_eta2 = 0.04;
    st.h = {c, c, c, c};
    update_h(st, standard_normal(), std::vector<double>{0.0, 0.0, 0.0}, rng, true);
    site2.push_back(st.h[2]);
  }
  CHECK(std::abs(ts::mean_of(site2) - c) < 3.0 * ts::iid_se(site2));
}

TEST_CASE("update_h: reduction to the canonical single-normal sampler, shared stream") {
  // With a pinned standard-normal innovation, the sampler must follow an
  // independently written canonical SV path sampler draw for draw.
  const int n = 40;
  RngStream data_rng(45);
  const auto [y, h_true] = simulate_sv(-0.1, 0.9, 0.05, standard_normal(), n, data_rng);

  SVState mine;
  mine.c = -0.1;
  mine.phi = 0.9;
  mine.sigma_eta2 = 0.05;
  mine.h.assign(n + 1, -0.1);
  auto oracle = mine;

  RngStream ra(46, 0), rb(46, 0);
  const auto mix = standard_normal();
  for (int sweep = 0; sweep < 20; ++sweep) {
    update_h(mine, mix, y, ra);

    // Canonical implementation: same proposal mechanics, closed-form
    // standard-normal observation density.
    {
      auto& h = oracle.h;
      const double c = oracle.c, phi = oracle.phi, sig2 = oracle.sigma_eta2;
      h[0] = sample_normal(c + phi * (h[1] - c), sig2, rb);
      for (int t = 1; t <= n; ++t) {
        double pm, pv;
        if (t < n) {
          pm = c + phi * ((h[t - 1] - c) + (h[t + 1] - c)) / (1.0 + phi * phi);
          pv = sig2 / (1.0 + phi * phi);
        } else {
          pm = c + phi * (h[t - 1] - c);
          pv = sig2;
        }
        const double prop = sample_normal(pm, pv, rb);
        const double yt = y[static_cast<std::size_t>(t - 1)];
        const auto obs = [](double yy, double hh) {
          return -0.5 * (std::log(2.0 * M_PI) + hh + yy * yy * std::exp(-hh));
        };
        const double delta = obs(yt, prop) - obs(yt, h[static_cast<std::size_t>(t)]);
        if (std::log(rb.uniform01()) < delta) h[static_cast<std::size_t>(t)] = prop;
      }
    }
    for (int t = 0; t <= n; ++t)
      CHECK(mine.h[static_cast<std::size_t>(t)] == oracle.h[static_cast<std::size_t>(t)]);
  }
}

TEST_CASE("update_sigma_eta: degenerate path and moment check") {
  RngStream rng(47);
  const SVPriors priors;

  // h identically c: scale collapses to S_sigma/2.
  {
    const int n = 10;
    std::vector<double> draws;
    for (int rep = 0; rep < 100000; ++rep) {
      SVState st;
      st.c = 0.3;
      st.phi = 0.5;
      st.sigma_eta2 = 1.0;
      st.h.assign(n + 1, 0.3);
      update_sigma_eta(st, priors, rng);
      draws.push_back(st.sigma_eta2);
    }
    const double shape = 0.5 * (priors.sigma_r + n + 1);
    const double scale = 0.5 * priors.s_sigma;
    CHECK(std::abs(ts::mean_of(draws) - scale / (shape - 1.0)) < 3.0 * ts::iid_se(draws));
  }

  // Fixed random path: mean matches scale/(shape-1) computed by hand.
  {
    const int n = 25;
    SVState proto;
    proto.c = -0.2;
    proto.phi = 0.7;
    proto.sigma_eta2 = 0.5;
    proto.h.resize(n + 1);
    for (auto& v : proto.h) v = sample_normal(-0.2, 0.3, rng);

    double ssq = (proto.h[0] - proto.c) * (proto.h[0] - proto.c) * (1.0 - proto.phi * proto.phi);
    for (int t = 1; t <= n; ++t) {
      const double r = (proto.h[t] - proto.c) - proto.phi * (proto.h[t - 1] - proto.c);
      ssq += r * r;
    }
    const double shape = 0.5 * (priors.sigma_r + n + 1);
    const double scale = 0.5 * (priors.s_sigma + ssq);

    std::vector<double> draws;
    for (int rep = 0; rep < 100000; ++rep) {
      auto st = proto;
      update_sigma_eta(st, priors, rng);
      draws.push_back(st.sigma_eta2);
    }
    CHECK(std::abs(ts::mean_of(draws) - scale / (shape - 1.0)) < 3.0 * ts::iid_se(draws));
  }
}

TEST_CASE("update_phi: stationarity support, forced-unit target, prior constant") {
  RngStream rng(48);
  const SVPriors priors;

  // Proposals beyond |phi| = 1 are always rejected: a geometric path pushes
  // the least-squares fit far above 1 with negligible proposal noise.
  {
    SVState st;
    st.c = 0.0;
    st.phi = 0.5;
    st.sigma_eta2 = 1e-8;
    st.h = {1.0, 2.0, 4.0, 8.0, 16.0, 32.0};
    for (int rep = 0; rep < 200; ++rep) {
      const auto res = update_phi(st, priors, rng);
      CHECK(!res.accepted);
      CHECK(st.phi == 0.5);
    }
  }

  // Test hook: a flat target accepts every proposal.
  {
    const std::function<double(double)> flat = [](double) { return 0.0; };
    for (int rep = 0; rep < 100; ++rep) {
      SVState st;
      st.c = 0.0;
      st.phi = 0.2;
      st.sigma_eta2 = 0.2;
      st.h = {0.1, -0.2, 0.3, 0.05, -0.15};
      const auto res = update_phi(st, priors, rng, &flat);
      CHECK(res.accepted);
      CHECK(st.phi != 0.2);
    }
  }

  // Degenerate centered path: the update is skipped and phi retained.
  {
    SVState st;
    st.c = 0.7;
    st.phi = 0.3;
    st.sigma_eta2 = 0.1;
    st.h = {0.7, 0.7, 0.7};
    const auto res = update_phi(st, priors, rng);
    CHECK(res.skipped);
    CHECK(st.phi == 0.3);
  }

  // Prior mean of phi under Beta(20, 1.5) on (phi+1)/2.
  CHECK(2.0 * (20.0 / 21.5) - 1.0 == doctest::Approx(0.8604651162790697));
}

TEST_CASE("update_phi: empirical law matches the grid conditional") {
  // Fix a path and compare the Markov kernel's stationary draw frequencies
  // against the normalized conditional density on a grid.
  RngStream rng(49);
  const SVPriors priors;
  SVState proto;
  proto.c = 0.1;
  proto.sigma_eta2 = 0.09;
  const int n = 30;
  proto.h.resize(n + 1);
  proto.phi = 0.85;
  {
    // AR(1)-ish path so the conditional concentrates inside (0, 1).
    double prev = proto.c;
    for (auto& v : proto.h) {
      v = proto.c + 0.85 * (prev - proto.c) + sample_normal(0.0, 0.09, rng);
      prev = v;
    }
  }

  // Long MCMC on phi alone with the path held fixed.
  auto st = proto;
  std::vector<double> draws;
  for (int it = 0; it < 200000; ++it) {
    update_phi(st, priors, rng);
    draws.push_back(st.phi);
  }

  // Independent conditional density: Beta prior on (phi+1)/2, stationary
  // h_0 term, AR transition likelihood.
  const auto log_cond = [&](double phi) {
    if (std::abs(phi) >= 1.0) return -1e308;
    double lg = log_beta_pdf(0.5 * (phi + 1.0), priors.phi1, priors.phi2);
    lg += 0.5 * std::log(1.0 - phi * phi);
    lg -= (proto.h[0] - proto.c) * (proto.h[0] - proto.c) * (1.0 - phi * phi) /
          (2.0 * proto.sigma_eta2);
    for (int t = 1; t <= n; ++t) {
      const double r = (proto.h[t] - proto.c) - phi * (proto.h[t - 1] - proto.c);
      lg -= r * r / (2.0 * proto.sigma_eta2);
    }
    return lg;
  };
  const auto gm = ts::grid_moments([&](double x) { return std::exp(log_cond(x)); }, -0.999,
                                   0.999, 20000);
  CHECK(std::abs(ts::mean_of(draws) - gm.mean) < 4.0 * ts::batch_means_se(draws));
  CHECK(ts::variance_of(draws) == doctest::Approx(gm.variance).epsilon(0.10));
}

TEST_CASE("update_c: no-information limit, constant-path shrinkage, grid oracle") {
  const SVPriors priors;

  // Enormous sigma_eta^2: the conditional collapses to the prior N(0, 10).
  {
    SVState st;
    st.c = 0.0;
    st.phi = 0.5;
    st.sigma_eta2 = 1e12;
    st.h = {0.3, -0.2, 0.4, 0.1};
    const auto cond = c_full_conditional(st, priors);
    CHECK(std::abs(cond.mean - 0.0) < 1e-3);
    CHECK(std::abs(cond.variance - 10.0) < 1e-3);
  }

  // phi = 0, path constant at a: the posterior mean shrinks a by
  // P/(P + 0.1) with P = (n+1)/sigma_eta^2.
  {
    const double a = 1.7, sig2 = 0.25;
    const int n = 7;
    SVState st;
    st.c = 0.0;
    st.phi = 0.0;
    st.sigma_eta2 = sig2;
    st.h.assign(n + 1, a);
    const double p = (n + 1) / sig2;
    const auto cond = c_full_conditional(st, priors);
    CHECK(cond.mean == doctest::Approx(p * a / (p + 0.1)).epsilon(1e-12));
    CHECK(cond.variance == doctest::Approx(1.0 / (p + 0.1)).epsilon(1e-12));
  }

  // Ten-point path: closed form against grid integration of the
  // unnormalized conditional.
  {
    RngStream rng(50);
    SVState st;
    st.c = 0.2;
    st.phi = 0.75;
    st.sigma_eta2 = 0.16;
    st.h.resize(10);
    for (auto& v : st.h) v = sample_normal(0.1, 0.4, rng);
    const auto cond = c_full_conditional(st, priors);

    const auto unnorm = [&](double c) {
      double lg = log_normal_pdf(c, 0.0, 10.0);
      lg += log_normal_pdf(st.h[0], c, st.sigma_eta2 / (1.0 - st.phi * st.phi));
      for (std::size_t t = 1; t < st.h.size(); ++t)
        lg += log_normal_pdf(st.h[t], c + st.phi * (st.h[t - 1] - c), st.sigma_eta2);
      return std::exp(lg);
    };
    const auto gm = ts::grid_moments(unnorm, cond.mean - 8.0 * std::sqrt(cond.variance),
                                     cond.mean + 8.0 * std::sqrt(cond.variance), 20000);
    CHECK(std::abs(cond.mean - gm.mean) < 1e-6);
    CHECK(std::abs(cond.variance - gm.variance) < 1e-6);
  }
}

TEST_CASE("simulate_sv: degenerate volatility, independence, AR persistence") {
  RngStream rng(51);
  const auto mix = standard_normal();

  // sigma_eta^2 = 0: constant path, y = eps e^{c/2}.
  {
    const auto [y, h] = simulate_sv(-0.4, 0.9, 0.0, mix, 50, rng);
    for (double v : h) CHECK(v == -0.4);
    CHECK(y.size() == 50);
  }

  // phi = 0: h is iid, lag-1 autocorrelation near zero.
  {
    const auto [y, h] = simulate_sv(0.0, 0.0, 0.3, mix, 10000, rng);
    CHECK(std::abs(lag1_autocorr(h)) < 3.0 / std::sqrt(10000.0));
  }

  // phi = 0.95, sigma_eta = 0.15: lag-1 autocorrelation about 0.95.
  {
    const auto [y, h] = simulate_sv(-0.2, 0.95, 0.15 * 0.15, mix, 10000, rng);
    const double r = lag1_autocorr(h);
    const double se = std::sqrt((1.0 - 0.95 * 0.95) / 10000.0);
    CHECK(std::abs(r - 0.95) < 3.0 * se);
  }

  CHECK_THROWS_AS(simulate_sv(0.0, 1.0, 0.1, mix, 10, rng), std::invalid_argument);
  CHECK_THROWS_AS(simulate_sv(0.0, 0.5, -0.1, mix, 10, rng), std::invalid_argument);
}

TEST_CASE("joint sweep preserves the state invariants") {
  RngStream rng(52);
  const SVPriors priors;
  const auto mix = make_state({{0.6, -0.1, 1.5}, {0.4, 0.2, 0.7}});
  const auto [y, h_true] = simulate_sv(-0.3, 0.9, 0.04, mix, 80, rng);

  SVState st;
  st.c = 0.0;
  st.phi = 0.5;
  st.sigma_eta2 = 0.1;
  st.h.assign(y.size() + 1, 0.0);
  for (int sweep = 0; sweep < 500; ++sweep) {
    update_h(st, mix, y, rng);
    update_sigma_eta(st, priors, rng);
    update_phi(st, priors, rng);
    update_c(st, priors, rng);
    CHECK(std::abs(st.phi) < 1.0);
    CHECK(st.sigma_eta2 > 0.0);
    for (double v : st.h) CHECK(std::isfinite(v));
    CHECK(std::isfinite(st.c));
  }
}
