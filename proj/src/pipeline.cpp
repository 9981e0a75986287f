#include "volmix/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "volmix/birth_death.hpp"
#include "volmix/csv.hpp"
#include "volmix/kernels.hpp"
#include "volmix/mixture_gibbs.hpp"
#include "volmix/sv.hpp"

namespace volmix {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void validate_config(const RunConfig& c) {
  require(c.chains >= 1, "config: chains must be >= 1");
  require(c.burnin >= 0, "config: burnin must be >= 0");
  require(c.iterations > c.burnin, "config: iterations must exceed burnin");
  require(c.thin >= 1, "config: thin must be >= 1");
  require(c.kmax >= 1, "config: kmax must be >= 1");
  require(c.lambda > 0.0, "config: lambda must be positive");
  require(c.lambda_b > 0.0, "config: lambda_b must be positive");
  require(c.virtual_time > 0.0, "config: virtual_time must be positive");
  require(c.max_jumps >= 1, "config: max_jumps must be >= 1");
  if (c.fixed_k) require(*c.fixed_k >= 1 && *c.fixed_k <= c.kmax, "config: fixed_k outside {1..kmax}");
  if (c.k_init) require(*c.k_init >= 1 && *c.k_init <= c.kmax, "config: k_init outside {1..kmax}");
  if (c.fixed_normal && c.fixed_k)
    require(*c.fixed_k == 1, "config: fixed_normal pins k = 1");
  const std::size_t ni = c.init_pi.size();
  require(c.init_mu.size() == ni && c.init_sigma.size() == ni,
          "config: init_pi/init_mu/init_sigma must have equal length");
  if (ni > 0) {
    require(static_cast<int>(ni) <= c.kmax, "config: initial state larger than kmax");
    if (c.fixed_k) require(static_cast<std::size_t>(*c.fixed_k) == ni, "config: initial state length differs from fixed_k");
    if (c.k_init) require(static_cast<std::size_t>(*c.k_init) == ni, "config: initial state length differs from k_init");
    for (double w : c.init_pi) require(w > 0.0, "config: init_pi entries must be positive");
    for (double s : c.init_sigma) require(s > 0.0, "config: init_sigma entries must be positive");
    for (double m : c.init_mu) require(std::isfinite(m), "config: init_mu entries must be finite");
  }
}

void validate_series(const ReturnSeries& data) {
  require(data.values.size() >= 10, "return series must hold at least 10 values");
  double lo = data.values[0], hi = data.values[0];
  for (double y : data.values) {
    require(std::isfinite(y), "return series must be finite");
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  require(hi > lo, "return series must not be constant");
}

MixtureState standard_normal_state() {
  MixtureState st;
  st.components.push_back({1.0, 0.0, 1.0});
  return st;
}

MixtureState initial_mixture(const RunConfig& cfg, const MixturePriors& priors, RngStream& rng) {
  if (cfg.fixed_normal) return standard_normal_state();
  if (!cfg.init_pi.empty()) {
    MixtureState st;
    for (std::size_t i = 0; i < cfg.init_pi.size(); ++i)
      st.components.push_back({cfg.init_pi[i], cfg.init_mu[i], 1.0 / cfg.init_sigma[i]});
    st.renormalize_weights();
    return st;
  }
  const int k0 = cfg.fixed_k ? *cfg.fixed_k : cfg.k_init.value_or(1);
  return prior_draw(k0, priors, rng);
}

SVState initial_sv(std::span<const double> y, std::size_t path_length) {
  SVState sv;
  double mean_sq = 0.0;
  for (double v : y) mean_sq += v * v;
  mean_sq = y.empty() ? 1.0 : std::max(mean_sq / static_cast<double>(y.size()), 1e-12);
  sv.c = std::log(mean_sq);
  sv.phi = 0.9;
  sv.sigma_eta2 = 0.05;
  sv.h.assign(path_length + 1, sv.c);
  return sv;
}

// Smallest k with the strictly largest count.
int modal_k(const std::map<int, long>& counts) {
  require(!counts.empty(), "modal_k: no k draws recorded");
  int best = counts.begin()->first;
  long best_count = counts.begin()->second;
  for (const auto& [k, n] : counts) {
    if (n > best_count) {
      best = k;
      best_count = n;
    }
  }
  return best;
}

void run_parallel(int workers, const std::function<void(int)>& body) {
  if (workers == 1) {
    body(0);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        body(w);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

BirthDeathConfig make_bd_config(const RunConfig& cfg) {
  BirthDeathConfig bd;
  bd.lambda_b = cfg.lambda_b;
  bd.virtual_time = cfg.virtual_time;
  bd.max_jumps = cfg.max_jumps;
  return bd;
}

Draw record_draw(const RunConfig& cfg, const MixtureState& mix, const SVState& sv,
                 std::span<const double> y, bool prior_only) {
  Draw d;
  d.k = mix.k();
  d.c = sv.c;
  d.phi = sv.phi;
  d.sigma_eta = std::sqrt(sv.sigma_eta2);
  d.deviance = prior_only
                   ? kNaN
                   : deviance(mix, std::span<const double>(sv.h).subspan(1), y);
  if (!cfg.fixed_normal) {
    d.pi.reserve(mix.components.size());
    d.mu.reserve(mix.components.size());
    d.sinv.reserve(mix.components.size());
    for (const auto& comp : mix.components) {
      d.pi.push_back(comp.weight);
      d.mu.push_back(comp.mean);
      d.sinv.push_back(comp.precision);
    }
  }
  if (cfg.save_h_quantiles) {
    std::vector<double> sorted(sv.h);
    std::sort(sorted.begin(), sorted.end());
    d.h_quantiles = {quantile_sorted(sorted, 0.025), quantile_sorted(sorted, 0.50),
                     quantile_sorted(sorted, 0.975)};
  }
  return d;
}

// Trans-dimensional stage on the raw returns: birth-death plus mixture
// Gibbs, recording the post-burn-in k chain and the last state seen at
// each k (stage-two starting points).
void stage_bd_init(const RunConfig& cfg, std::span<const double> y, MixturePriors& priors,
                   MixtureState& mix, RngStream& rng, ChainResult& out,
                   std::map<int, MixtureState>& last_at_k) {
  MixtureSweepConfig sweep;
  sweep.birth_death = make_bd_config(cfg);
  for (int it = 0; it < cfg.iterations; ++it) {
    auto res = mixture_sweep(mix, y, priors, sweep, rng);
    mix = std::move(res.state);
    if (res.bd_truncated) ++out.bd_truncations;
    last_at_k[mix.k()] = mix;
    if (it >= cfg.burnin) out.stage1_k.push_back(mix.k());
  }
}

// The joint loop: mixture sweep on the current residuals (with a
// birth-death run first in full-bd mode), then the SV sweep.
void stage_joint(const RunConfig& cfg, std::span<const double> y, const SVPriors& sv_priors,
                 MixturePriors& priors, MixtureState& mix, SVState& sv, RngStream& rng,
                 ChainResult& out, bool prior_only) {
  const bool update_mixture = !cfg.fixed_normal;
  MixtureSweepConfig sweep;
  sweep.data_free = prior_only;
  const bool trans_dimensional = update_mixture && !cfg.fixed_k &&
                                 (cfg.mode == FitMode::full_bd || prior_only);
  if (trans_dimensional) sweep.birth_death = make_bd_config(cfg);

  for (int it = 0; it < cfg.iterations; ++it) {
    if (update_mixture) {
      std::vector<double> eps;
      std::span<const double> mix_data;
      if (!prior_only) {
        eps = residuals(y, std::span<const double>(sv.h).subspan(1));
        mix_data = eps;
      }
      auto res = mixture_sweep(mix, mix_data, priors, sweep, rng);
      mix = std::move(res.state);
      if (res.bd_truncated) ++out.bd_truncations;
    }
    const auto h_stats = update_h(sv, mix, y, rng, prior_only);
    out.h_proposals += h_stats.proposals;
    out.h_accepts += h_stats.accepted;
    update_sigma_eta(sv, sv_priors, rng);
    const auto phi_res = update_phi(sv, sv_priors, rng);
    if (phi_res.skipped) {
      ++out.phi_skips;
    } else {
      ++out.phi_proposals;
      if (phi_res.accepted) ++out.phi_accepts;
    }
    update_c(sv, sv_priors, rng);

    if (it >= cfg.burnin && (it - cfg.burnin) % cfg.thin == 0)
      out.draws.push_back(record_draw(cfg, mix, sv, y, prior_only));
  }
}

void collect_rate_warnings(RunArtifacts& art) {
  for (std::size_t c = 0; c < art.chains.size(); ++c) {
    const auto& ch = art.chains[c];
    std::ostringstream os;
    if (ch.h_proposals > 0) {
      const double rate = static_cast<double>(ch.h_accepts) / static_cast<double>(ch.h_proposals);
      if (rate < 0.1 || rate > 0.9) {
        os.str("");
        os << "chain " << c << ": h acceptance rate " << format_double(rate)
           << " outside [0.1, 0.9]";
        art.warnings.push_back(os.str());
      }
    }
    if (ch.phi_proposals > 0) {
      const double rate =
          static_cast<double>(ch.phi_accepts) / static_cast<double>(ch.phi_proposals);
      if (rate < 0.1 || rate > 0.9) {
        os.str("");
        os << "chain " << c << ": phi acceptance rate " << format_double(rate)
           << " outside [0.1, 0.9]";
        art.warnings.push_back(os.str());
      }
    }
    if (ch.phi_skips > 0) {
      os.str("");
      os << "chain " << c << ": phi update skipped " << ch.phi_skips
         << " times (degenerate centered path)";
      art.warnings.push_back(os.str());
    }
    if (ch.bd_truncations > 0) {
      os.str("");
      os << "chain " << c << ": birth-death run hit max_jumps " << ch.bd_truncations << " times";
      art.warnings.push_back(os.str());
    }
  }
}

} // namespace

RunArtifacts fit(const RunConfig& config, const ReturnSeries& data) {
  validate_config(config);
  validate_series(data);
  const std::span<const double> y(data.values);

  RunArtifacts art;
  art.config = config;
  art.n_obs = y.size();
  art.data_source = data.source;
  art.data_transform = data.transform;
  art.has_mixture_rows = !config.fixed_normal;
  const int m = config.chains;
  art.chains.resize(static_cast<std::size_t>(m));

  std::vector<RngStream> rngs;
  rngs.reserve(static_cast<std::size_t>(m));
  std::vector<MixturePriors> priors(static_cast<std::size_t>(m));
  std::vector<MixtureState> mixes(static_cast<std::size_t>(m));
  std::vector<SVState> svs(static_cast<std::size_t>(m));
  const SVPriors sv_priors;

  for (int c = 0; c < m; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    rngs.emplace_back(config.seed, static_cast<std::uint32_t>(c));
    // Prior constants derive from the observed returns and stay fixed for
    // both stages; only beta evolves with the chain.
    priors[ci] = default_priors_from_data(y, config.lambda, config.kmax, rngs[ci]);
    mixes[ci] = initial_mixture(config, priors[ci], rngs[ci]);
    svs[ci] = initial_sv(y, y.size());
  }

  const bool two_stage =
      config.mode == FitMode::bd_init && !config.fixed_k && !config.fixed_normal;

  if (two_stage) {
    std::vector<std::map<int, MixtureState>> last_at_k(static_cast<std::size_t>(m));
    run_parallel(m, [&](int c) {
      const auto ci = static_cast<std::size_t>(c);
      stage_bd_init(config, y, priors[ci], mixes[ci], rngs[ci], art.chains[ci], last_at_k[ci]);
    });

    std::map<int, long> counts;
    for (const auto& ch : art.chains)
      for (int k : ch.stage1_k) ++counts[k];
    art.summary_k = modal_k(counts);

    RunConfig stage2 = config;
    stage2.fixed_k = art.summary_k;
    for (int c = 0; c < m; ++c) {
      const auto ci = static_cast<std::size_t>(c);
      const auto hit = last_at_k[ci].find(art.summary_k);
      mixes[ci] = hit != last_at_k[ci].end() ? hit->second
                                             : prior_draw(art.summary_k, priors[ci], rngs[ci]);
    }
    run_parallel(m, [&](int c) {
      const auto ci = static_cast<std::size_t>(c);
      stage_joint(stage2, y, sv_priors, priors[ci], mixes[ci], svs[ci], rngs[ci], art.chains[ci],
                  false);
    });
  } else {
    run_parallel(m, [&](int c) {
      const auto ci = static_cast<std::size_t>(c);
      stage_joint(config, y, sv_priors, priors[ci], mixes[ci], svs[ci], rngs[ci], art.chains[ci],
                  false);
    });
    if (config.fixed_normal) {
      art.summary_k = 1;
    } else if (config.fixed_k) {
      art.summary_k = *config.fixed_k;
    } else {
      std::map<int, long> counts;
      for (const auto& ch : art.chains)
        for (const auto& d : ch.draws) ++counts[d.k];
      art.summary_k = modal_k(counts);
    }
  }

  collect_rate_warnings(art);
  return art;
}

RunArtifacts fit_prior_only(const RunConfig& config, int sv_path_length, double zeta,
                            double range) {
  validate_config(config);
  require(sv_path_length >= 1, "fit_prior_only: path length must be >= 1");
  require(range > 0.0, "fit_prior_only: range must be positive");

  RunArtifacts art;
  art.config = config;
  art.n_obs = 0;
  art.prior_only = true;
  art.has_mixture_rows = !config.fixed_normal;
  const int m = config.chains;
  art.chains.resize(static_cast<std::size_t>(m));
  const SVPriors sv_priors;

  run_parallel(m, [&](int c) {
    const auto ci = static_cast<std::size_t>(c);
    RngStream rng(config.seed, static_cast<std::uint32_t>(c));
    MixturePriors priors;
    priors.lambda = config.lambda;
    priors.kmax = config.kmax;
    priors.gamma = 1.0;
    priors.zeta = zeta;
    priors.range = range;
    priors.tau = 1.0 / (range * range);
    priors.alpha = 2.0;
    priors.l = 0.2;
    priors.m = 100.0 * priors.l / (priors.alpha * range * range);
    priors.beta = sample_gamma(2.0 * priors.l, 1.0 / (2.0 * priors.m), rng);

    MixtureState mix = initial_mixture(config, priors, rng);
    SVState sv = initial_sv({}, static_cast<std::size_t>(sv_path_length));
    stage_joint(config, {}, sv_priors, priors, mix, sv, rng, art.chains[ci], true);
  });

  if (config.fixed_normal || config.fixed_k) {
    art.summary_k = config.fixed_k.value_or(1);
  } else {
    std::map<int, long> counts;
    for (const auto& ch : art.chains)
      for (const auto& d : ch.draws) ++counts[d.k];
    art.summary_k = modal_k(counts);
  }
  collect_rate_warnings(art);
  return art;
}

namespace {

struct ParamChains {
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::vector<double>>> chains;
};

void add_param(ParamChains& pc, const std::string& name, std::size_t n_chains) {
  if (!pc.chains.count(name)) {
    pc.order.push_back(name);
    pc.chains[name].resize(n_chains);
  }
}

// Gathers per-chain value sequences in the diagnostic-table row order.
// Component-indexed parameters keep only iterations at k == summary_k.
ParamChains collect_parameters(const RunArtifacts& art) {
  const std::size_t m = art.chains.size();
  ParamChains pc;
  const int k = art.summary_k;
  const bool mix_rows = art.has_mixture_rows;

  add_param(pc, "c", m);
  if (mix_rows)
    for (int i = 1; i <= k; ++i) add_param(pc, "mu" + std::to_string(i), m);
  add_param(pc, "phi", m);
  if (mix_rows)
    for (int i = 1; i <= k; ++i) add_param(pc, "pi" + std::to_string(i), m);
  add_param(pc, "sigma_eta", m);
  if (mix_rows)
    for (int i = 1; i <= k; ++i) add_param(pc, "sinv" + std::to_string(i), m);
  if (!art.prior_only) add_param(pc, "deviance", m);
  if (art.config.save_h_quantiles) {
    add_param(pc, "h_q2.5", m);
    add_param(pc, "h_q50", m);
    add_param(pc, "h_q97.5", m);
  }

  for (std::size_t c = 0; c < m; ++c) {
    for (const auto& d : art.chains[c].draws) {
      pc.chains["c"][c].push_back(d.c);
      pc.chains["phi"][c].push_back(d.phi);
      pc.chains["sigma_eta"][c].push_back(d.sigma_eta);
      if (!art.prior_only) pc.chains["deviance"][c].push_back(d.deviance);
      if (art.config.save_h_quantiles) {
        pc.chains["h_q2.5"][c].push_back(d.h_quantiles[0]);
        pc.chains["h_q50"][c].push_back(d.h_quantiles[1]);
        pc.chains["h_q97.5"][c].push_back(d.h_quantiles[2]);
      }
      if (mix_rows && d.k == k) {
        for (int i = 0; i < k; ++i) {
          const auto idx = static_cast<std::size_t>(i);
          const std::string suffix = std::to_string(i + 1);
          pc.chains["mu" + suffix][c].push_back(d.mu[idx]);
          pc.chains["pi" + suffix][c].push_back(d.pi[idx]);
          pc.chains["sinv" + suffix][c].push_back(d.sinv[idx]);
        }
      }
    }
  }
  return pc;
}

std::vector<SummaryRow> summarize_param_chains(const ParamChains& pc, bool split_rhat,
                                               std::vector<std::string>* warnings) {
  std::vector<SummaryRow> rows;
  for (const auto& name : pc.order) {
    const auto& chains = pc.chains.at(name);
    std::vector<double> pooled;
    std::size_t min_len = std::numeric_limits<std::size_t>::max();
    for (const auto& ch : chains) {
      pooled.insert(pooled.end(), ch.begin(), ch.end());
      min_len = std::min(min_len, ch.size());
    }
    if (pooled.empty()) {
      if (warnings) warnings->push_back("parameter " + name + ": no draws; row skipped");
      continue;
    }
    double rhat = kNaN;
    if (chains.size() >= 2 && min_len >= 2) {
      // Chains filtered by k can differ in length; truncate to the shortest.
      std::vector<std::vector<double>> equal(chains.size());
      for (std::size_t c = 0; c < chains.size(); ++c)
        equal[c].assign(chains[c].begin(),
                        chains[c].begin() + static_cast<std::ptrdiff_t>(min_len));
      try {
        rhat = split_rhat ? gelman_rubin_split(equal) : gelman_rubin(equal);
      } catch (const std::exception& e) {
        if (warnings) warnings->push_back("parameter " + name + ": rhat unavailable (" +
                                          std::string(e.what()) + ")");
      }
    } else if (warnings) {
      warnings->push_back("parameter " + name + ": rhat needs >= 2 chains with >= 2 draws");
    }
    rows.push_back(summarize(name, pooled, rhat));
  }
  return rows;
}

std::vector<std::vector<std::string>> density_rows(const ParamChains& pc) {
  constexpr int kBins = 40;
  std::vector<std::vector<std::string>> rows;
  for (const auto& name : pc.order) {
    std::vector<double> pooled;
    for (const auto& ch : pc.chains.at(name)) pooled.insert(pooled.end(), ch.begin(), ch.end());
    if (pooled.empty()) continue;
    const auto [lo_it, hi_it] = std::minmax_element(pooled.begin(), pooled.end());
    const double lo = *lo_it, hi = *hi_it;
    const double n = static_cast<double>(pooled.size());
    if (hi <= lo) {
      // Degenerate chain: one unit-width bin integrating to 1.
      rows.push_back({name, format_double(lo - 0.5), format_double(lo + 0.5), "1"});
      continue;
    }
    const double width = (hi - lo) / kBins;
    std::vector<long> counts(kBins, 0);
    for (double v : pooled) {
      auto b = static_cast<long>((v - lo) / width);
      b = std::clamp<long>(b, 0, kBins - 1);
      ++counts[static_cast<std::size_t>(b)];
    }
    for (int b = 0; b < kBins; ++b) {
      const double left = lo + b * width;
      const double right = b + 1 == kBins ? hi : lo + (b + 1) * width;
      const double dens = static_cast<double>(counts[static_cast<std::size_t>(b)]) / (n * width);
      rows.push_back({name, format_double(left), format_double(right), format_double(dens)});
    }
  }
  return rows;
}

std::string mode_name(FitMode mode) {
  return mode == FitMode::bd_init ? "bd-init" : "full-bd";
}

} // namespace

std::vector<SummaryRow> build_summary(const RunArtifacts& artifacts,
                                      std::vector<std::string>* warnings) {
  const ParamChains pc = collect_parameters(artifacts);
  return summarize_param_chains(pc, artifacts.config.split_rhat, warnings);
}

std::map<int, long> k_counts(const RunArtifacts& artifacts) {
  std::map<int, long> counts;
  // The two-stage fit records its trans-dimensional k chain in stage one;
  // stage two holds k fixed, so the stage-one chain is the k posterior.
  bool have_stage1 = false;
  for (const auto& ch : artifacts.chains) have_stage1 = have_stage1 || !ch.stage1_k.empty();
  if (have_stage1) {
    for (const auto& ch : artifacts.chains)
      for (int k : ch.stage1_k) ++counts[k];
    return counts;
  }
  for (const auto& ch : artifacts.chains)
    for (const auto& d : ch.draws) ++counts[d.k];
  return counts;
}

void export_artifacts(const RunArtifacts& art, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  std::vector<std::string> warnings = art.warnings;
  const auto summary_rows = build_summary(art, &warnings);

  // summary.csv
  {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(summary_rows.size());
    for (const auto& r : summary_rows)
      rows.push_back({r.parameter, format_double(r.mean), format_double(r.sd),
                      format_double(r.q2_5), format_double(r.q25), format_double(r.q50),
                      format_double(r.q75), format_double(r.q97_5), format_double(r.rhat)});
    write_csv((dir / "summary.csv").string(),
              {"parameter", "mean", "sd", "q2.5", "q25", "q50", "q75", "q97.5", "rhat"}, rows);
  }

  // kposterior.csv
  {
    const auto counts = k_counts(art);
    long total = 0;
    for (const auto& [k, n] : counts) total += n;
    std::vector<std::vector<std::string>> rows;
    for (const auto& [k, n] : counts)
      rows.push_back({std::to_string(k), std::to_string(n),
                      format_double(static_cast<double>(n) / static_cast<double>(total))});
    write_csv((dir / "kposterior.csv").string(), {"k", "count", "probability"}, rows);
  }

  // trace.csv
  {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t c = 0; c < art.chains.size(); ++c) {
      const auto& draws = art.chains[c].draws;
      for (std::size_t i = 0; i < draws.size(); ++i) {
        const auto& d = draws[i];
        const long iter = art.config.burnin + static_cast<long>(i) * art.config.thin;
        const std::string chain = std::to_string(c);
        const std::string iteration = std::to_string(iter);
        auto push = [&](const std::string& param, double value) {
          rows.push_back({chain, iteration, param, format_double(value)});
        };
        push("k", d.k);
        push("c", d.c);
        push("phi", d.phi);
        push("sigma_eta", d.sigma_eta);
        if (!art.prior_only) push("deviance", d.deviance);
        for (std::size_t j = 0; j < d.pi.size(); ++j) {
          const std::string suffix = std::to_string(j + 1);
          push("pi" + suffix, d.pi[j]);
          push("mu" + suffix, d.mu[j]);
          push("sinv" + suffix, d.sinv[j]);
        }
        if (art.config.save_h_quantiles) {
          push("h_q2.5", d.h_quantiles[0]);
          push("h_q50", d.h_quantiles[1]);
          push("h_q97.5", d.h_quantiles[2]);
        }
      }
    }
    write_csv((dir / "trace.csv").string(), {"chain", "iteration", "parameter", "value"}, rows);
  }

  // density.csv
  {
    const ParamChains pc = collect_parameters(art);
    write_csv((dir / "density.csv").string(),
              {"parameter", "bin_left", "bin_right", "density"}, density_rows(pc));
  }

  // runlog.txt
  {
    std::ofstream log((dir / "runlog.txt").string(), std::ios::binary);
    if (!log) throw std::runtime_error("cannot write runlog.txt");
    const auto& cfg = art.config;
    log << "volmix run log\n";
    log << "mode = " << (art.prior_only ? "prior-only" : mode_name(cfg.mode)) << "\n";
    log << "chains = " << cfg.chains << "\n";
    log << "iterations = " << cfg.iterations << "\n";
    log << "burnin = " << cfg.burnin << "\n";
    log << "thin = " << cfg.thin << "\n";
    log << "seed = " << cfg.seed << "\n";
    log << "kmax = " << cfg.kmax << "\n";
    log << "lambda = " << format_double(cfg.lambda) << "\n";
    log << "lambda_b = " << format_double(cfg.lambda_b) << "\n";
    log << "virtual_time = " << format_double(cfg.virtual_time) << "\n";
    log << "max_jumps = " << cfg.max_jumps << "\n";
    log << "fixed_k = " << (cfg.fixed_k ? std::to_string(*cfg.fixed_k) : "none") << "\n";
    log << "k_init = " << (cfg.k_init ? std::to_string(*cfg.k_init) : "none") << "\n";
    log << "fixed_normal = " << (cfg.fixed_normal ? "true" : "false") << "\n";
    log << "n_obs = " << art.n_obs << "\n";
    if (!art.data_source.empty()) log << "data_source = " << art.data_source << "\n";
    if (!art.data_transform.empty()) log << "data_transform = " << art.data_transform << "\n";
    log << "summary_k = " << art.summary_k << "\n";
    for (std::size_t c = 0; c < art.chains.size(); ++c) {
      const auto& ch = art.chains[c];
      log << "chain " << c << ": retained = " << ch.draws.size();
      if (ch.h_proposals > 0)
        log << ", h_accept_rate = "
            << format_double(static_cast<double>(ch.h_accepts) /
                             static_cast<double>(ch.h_proposals));
      if (ch.phi_proposals > 0)
        log << ", phi_accept_rate = "
            << format_double(static_cast<double>(ch.phi_accepts) /
                             static_cast<double>(ch.phi_proposals));
      log << ", phi_skips = " << ch.phi_skips << "\n";
    }
    if (art.has_mixture_rows && !art.chains.empty()) {
      // Posterior-mean implied variances alongside the reported precisions.
      std::vector<double> var_sum(static_cast<std::size_t>(art.summary_k), 0.0);
      long count = 0;
      for (const auto& ch : art.chains)
        for (const auto& d : ch.draws)
          if (d.k == art.summary_k) {
            for (int i = 0; i < art.summary_k; ++i)
              var_sum[static_cast<std::size_t>(i)] += 1.0 / d.sinv[static_cast<std::size_t>(i)];
            ++count;
          }
      if (count > 0) {
        log << "posterior mean implied variance =";
        for (double v : var_sum) log << " " << format_double(v / static_cast<double>(count));
        log << "\n";
      }
    }
    for (const auto& w : warnings) log << "warning: " << w << "\n";
  }
}

ReturnSeries load_returns(const std::string& path, const std::string& column,
                          const std::string& transform) {
  const bool log_returns = transform == "logret" || transform == "log-return-percent";
  require(log_returns || transform == "none",
          "transform must be one of: none, logret, log-return-percent");

  const CsvTable table = read_csv(path);
  const int col = table.column_index(column);
  if (col < 0) throw std::runtime_error("column '" + column + "' not found in " + path);

  std::vector<double> raw;
  raw.reserve(table.rows.size());
  std::vector<std::string> bad;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    // +2: header occupies line 1.
    const std::string where = "line " + std::to_string(r + 2);
    if (static_cast<std::size_t>(col) >= table.rows[r].size()) {
      bad.push_back(where + ": missing cell");
      continue;
    }
    const std::string& cell = table.rows[r][static_cast<std::size_t>(col)];
    double v = 0.0;
    const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
      bad.push_back(where + ": unparseable cell '" + cell + "'");
      continue;
    }
    if (!std::isfinite(v)) {
      bad.push_back(where + ": non-finite value");
      continue;
    }
    if (log_returns && v <= 0.0) {
      bad.push_back(where + ": non-positive price " + cell);
      continue;
    }
    raw.push_back(v);
  }
  if (!bad.empty()) {
    std::string msg = "rejected rows in " + path + ":";
    for (const auto& b : bad) msg += "\n  " + b;
    throw std::runtime_error(msg);
  }

  ReturnSeries out;
  out.source = path;
  out.transform = log_returns ? "log-return-percent" : "none";
  if (log_returns) {
    if (raw.size() >= 2) {
      out.values.reserve(raw.size() - 1);
      for (std::size_t t = 1; t < raw.size(); ++t)
        out.values.push_back(100.0 * std::log(raw[t] / raw[t - 1]));
    }
  } else {
    out.values = std::move(raw);
  }
  if (out.values.size() < 10)
    throw std::runtime_error("fewer than 10 usable rows in " + path);
  validate_series(out);
  return out;
}

void run_simulate(const SimulateConfig& config) {
  require(config.n >= 1, "simulate: n must be >= 1");
  require(!config.out.empty(), "simulate: output path required");
  const std::size_t k = config.pi.size();
  require(k >= 1 && config.mu.size() == k && config.var.size() == k,
          "simulate: pi/mu/var must have equal nonzero length");
  MixtureState mix;
  for (std::size_t i = 0; i < k; ++i) {
    require(config.pi[i] > 0.0, "simulate: weights must be positive");
    require(config.var[i] > 0.0, "simulate: variances must be positive");
    mix.components.push_back({config.pi[i], config.mu[i], 1.0 / config.var[i]});
  }
  mix.renormalize_weights();

  RngStream rng(config.seed, 0);
  std::vector<std::string> header{"t", "y"};
  std::vector<std::vector<std::string>> rows;
  double h0 = config.c;

  if (config.mixture_only) {
    std::vector<double> weights;
    for (const auto& comp : mix.components) weights.push_back(comp.weight);
    for (int t = 1; t <= config.n; ++t) {
      const std::size_t i = sample_categorical(weights, rng);
      const double y =
          sample_normal(mix.components[i].mean, 1.0 / mix.components[i].precision, rng);
      rows.push_back({std::to_string(t), format_double(y)});
    }
  } else {
    const auto [y, h] = simulate_sv(config.c, config.phi, config.sigma_eta2, mix, config.n, rng);
    h0 = h[0];
    if (config.save_latent) {
      header = {"t", "y", "h", "eps"};
      for (int t = 1; t <= config.n; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        rows.push_back({std::to_string(t), format_double(y[ti - 1]), format_double(h[ti]),
                        format_double(y[ti - 1] * std::exp(-0.5 * h[ti]))});
      }
    } else {
      for (int t = 1; t <= config.n; ++t)
        rows.push_back({std::to_string(t), format_double(y[static_cast<std::size_t>(t) - 1])});
    }
  }
  write_csv(config.out, header, rows);

  std::ofstream meta(config.out + ".meta.txt", std::ios::binary);
  if (!meta) throw std::runtime_error("cannot write sidecar metadata");
  auto join = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ",";
      s += format_double(v[i]);
    }
    return s;
  };
  meta << "n = " << config.n << "\n";
  meta << "seed = " << config.seed << "\n";
  meta << "mixture_only = " << (config.mixture_only ? "true" : "false") << "\n";
  meta << "pi = " << join(config.pi) << "\n";
  meta << "mu = " << join(config.mu) << "\n";
  meta << "var = " << join(config.var) << "\n";
  if (!config.mixture_only) {
    meta << "c = " << format_double(config.c) << "\n";
    meta << "phi = " << format_double(config.phi) << "\n";
    meta << "sigma_eta2 = " << format_double(config.sigma_eta2) << "\n";
    meta << "h0 = " << format_double(h0) << "\n";
  }
}

void run_summarize(const std::string& traces_path, const std::string& out_dir, bool split_rhat) {
  const CsvTable table = read_csv(traces_path);
  const int c_chain = table.column_index("chain");
  const int c_iter = table.column_index("iteration");
  const int c_param = table.column_index("parameter");
  const int c_value = table.column_index("value");
  require(c_chain >= 0 && c_iter >= 0 && c_param >= 0 && c_value >= 0,
          "trace CSV must have columns chain,iteration,parameter,value");

  struct Cell {
    long iter;
    double value;
  };
  std::map<std::string, std::map<long, std::vector<Cell>>> by_param;
  std::map<long, std::map<long, int>> k_at; // chain -> iteration -> k

  auto parse_long = [](const std::string& s) {
    long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
      throw std::runtime_error("bad integer in trace: '" + s + "'");
    return v;
  };
  auto parse_double = [](const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
      throw std::runtime_error("bad number in trace: '" + s + "'");
    return v;
  };

  for (const auto& row : table.rows) {
    require(row.size() >= 4, "trace row with missing cells");
    const long chain = parse_long(row[static_cast<std::size_t>(c_chain)]);
    const long iter = parse_long(row[static_cast<std::size_t>(c_iter)]);
    const std::string& param = row[static_cast<std::size_t>(c_param)];
    const double value = parse_double(row[static_cast<std::size_t>(c_value)]);
    if (param == "k") {
      k_at[chain][iter] = static_cast<int>(value);
    } else {
      by_param[param][chain].push_back({iter, value});
    }
  }

  // Modal k (ties to the smaller k) when the trace carries a k chain.
  bool have_k = !k_at.empty();
  int modal = 1;
  if (have_k) {
    std::map<int, long> counts;
    for (const auto& [chain, iters] : k_at)
      for (const auto& [iter, k] : iters) ++counts[k];
    modal = modal_k(counts);
  }

  const auto is_component = [](const std::string& name, std::string* stem, int* index) {
    for (const char* prefix : {"pi", "mu", "sinv"}) {
      const std::size_t len = std::string(prefix).size();
      if (name.size() > len && name.compare(0, len, prefix) == 0 &&
          std::all_of(name.begin() + static_cast<std::ptrdiff_t>(len), name.end(),
                      [](char ch) { return ch >= '0' && ch <= '9'; })) {
        *stem = prefix;
        *index = std::stoi(name.substr(len));
        return true;
      }
    }
    return false;
  };

  // Chain ids in ascending order, shared across parameters.
  std::vector<long> chain_ids;
  for (const auto& [param, chains] : by_param)
    for (const auto& [chain, cells] : chains)
      if (std::find(chain_ids.begin(), chain_ids.end(), chain) == chain_ids.end())
        chain_ids.push_back(chain);
  std::sort(chain_ids.begin(), chain_ids.end());

  ParamChains pc;
  auto add_series = [&](const std::string& name) {
    add_param(pc, name, chain_ids.size());
    std::string stem;
    int index = 0;
    const bool component = is_component(name, &stem, &index);
    const auto& chains = by_param.at(name);
    for (std::size_t ci = 0; ci < chain_ids.size(); ++ci) {
      const auto hit = chains.find(chain_ids[ci]);
      if (hit == chains.end()) continue;
      auto cells = hit->second;
      std::stable_sort(cells.begin(), cells.end(),
                       [](const Cell& a, const Cell& b) { return a.iter < b.iter; });
      for (const auto& cell : cells) {
        if (component && have_k) {
          const auto& kmap = k_at[chain_ids[ci]];
          const auto kit = kmap.find(cell.iter);
          if (kit == kmap.end() || kit->second != modal) continue;
        }
        pc.chains[name][ci].push_back(cell.value);
      }
    }
  };

  // Diagnostic-table order first, then anything else the trace carries.
  auto add_if_present = [&](const std::string& name) {
    if (by_param.count(name)) add_series(name);
  };
  auto add_indexed = [&](const std::string& stem) {
    for (int i = 1;; ++i) {
      const std::string name = stem + std::to_string(i);
      if (!by_param.count(name)) break;
      if (have_k && i > modal) break; // beyond the modal k: never summarized
      add_series(name);
    }
  };
  add_if_present("c");
  add_indexed("mu");
  add_if_present("phi");
  add_indexed("pi");
  add_if_present("sigma_eta");
  add_indexed("sinv");
  add_if_present("deviance");
  for (const auto& [param, chains] : by_param)
    if (!pc.chains.count(param)) add_series(param);

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<std::string> warnings;
  const auto summary_rows = summarize_param_chains(pc, split_rhat, &warnings);
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : summary_rows)
    rows.push_back({r.parameter, format_double(r.mean), format_double(r.sd),
                    format_double(r.q2_5), format_double(r.q25), format_double(r.q50),
                    format_double(r.q75), format_double(r.q97_5), format_double(r.rhat)});
  write_csv((fs::path(out_dir) / "summary.csv").string(),
            {"parameter", "mean", "sd", "q2.5", "q25", "q50", "q75", "q97.5", "rhat"}, rows);

  if (have_k) {
    std::map<int, long> counts;
    long total = 0;
    for (const auto& [chain, iters] : k_at)
      for (const auto& [iter, k] : iters) {
        ++counts[k];
        ++total;
      }
    std::vector<std::vector<std::string>> krows;
    for (const auto& [k, n] : counts)
      krows.push_back({std::to_string(k), std::to_string(n),
                       format_double(static_cast<double>(n) / static_cast<double>(total))});
    write_csv((fs::path(out_dir) / "kposterior.csv").string(), {"k", "count", "probability"},
              krows);
  }
}

} // namespace volmix
