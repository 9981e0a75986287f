#ifndef VOLMIX_PIPELINE_HPP
#define VOLMIX_PIPELINE_HPP

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "volmix/diagnostics.hpp"
#include "volmix/mixture.hpp"

// Data ingestion, multi-chain orchestration of the birth-death + Gibbs fit,
// synthetic-data generation, and artifact export. Chains execute
// concurrently, one worker each; files are written only after every chain
// has finished.

namespace volmix {

struct ReturnSeries {
  std::vector<double> values; // y_1..y_n, at least 10, finite, non-constant
  std::string source;
  std::string transform; // "none" or "log-return-percent"
};

enum class FitMode { bd_init, full_bd };

struct RunConfig {
  int chains = 2;
  int iterations = 1000;
  int burnin = 100;
  int thin = 1;
  std::uint64_t seed = 1;
  int kmax = 10;
  double lambda = 1.0;
  double lambda_b = 1.0;
  double virtual_time = 1.0;
  int max_jumps = 10000;
  FitMode mode = FitMode::bd_init;
  std::optional<int> fixed_k; // set: birth-death stage disabled
  std::optional<int> k_init;
  // Innovation pinned to the standard normal (the plain SV baseline);
  // implies a single untouched component and no mixture updates.
  bool fixed_normal = false;
  bool save_h_quantiles = false;
  bool split_rhat = false;
  // Optional explicit mixture start state; sigma entries are variances.
  std::vector<double> init_pi, init_mu, init_sigma;
};

// One retained iteration of one chain.
struct Draw {
  int k = 1;
  double c = 0.0;
  double phi = 0.0;
  double sigma_eta = 0.0; // sd, not variance
  double deviance = 0.0;  // NaN in prior-recovery runs
  std::vector<double> pi, mu, sinv;
  std::array<double, 3> h_quantiles{}; // 2.5/50/97.5% of the path, if enabled
};

struct ChainResult {
  std::vector<Draw> draws;
  std::vector<int> stage1_k; // post-burn-in k draws of the bd-init stage
  long h_proposals = 0;
  long h_accepts = 0;
  long phi_proposals = 0;
  long phi_accepts = 0;
  long phi_skips = 0;
  long bd_truncations = 0;
};

struct RunArtifacts {
  RunConfig config;
  std::size_t n_obs = 0;
  std::string data_source;
  std::string data_transform;
  int summary_k = 1;           // fixed or modal k used for component summaries
  bool has_mixture_rows = true; // false for the pinned standard-normal fit
  bool prior_only = false;
  std::vector<ChainResult> chains;
  std::vector<std::string> warnings;
};

// Reads one named column from a headed CSV. transform: "none" passes the
// column through as returns; "logret" / "log-return-percent" treats it as a
// price series and emits 100 log(p_t / p_{t-1}). Unparseable or non-finite
// rows abort with a row-indexed report.
ReturnSeries load_returns(const std::string& path, const std::string& column,
                          const std::string& transform);

// The full fit. bd_init: a trans-dimensional stage on the returns picks the
// modal k (ties break to the smaller k, pooled over chains), then the joint
// fixed-k fit interleaves a mixture sweep on the current residuals with the
// SV sweep. full_bd: every iteration runs the birth-death process before
// the Gibbs sweeps.
RunArtifacts fit(const RunConfig& config, const ReturnSeries& data);

// Data-free variant: every likelihood term is constant, so the sampler
// must reproduce its own prior. sv_path_length is the latent path length
// (kept small so the level mixes); zeta/range stand in for the data-derived
// prior constants.
RunArtifacts fit_prior_only(const RunConfig& config, int sv_path_length, double zeta = 0.0,
                            double range = 4.0);

// Summary rows in the diagnostic-table order: c, mu_i.., phi, pi_i..,
// sigma_eta, sinv_i.., deviance. Component rows are computed over
// iterations whose k equals summary_k.
std::vector<SummaryRow> build_summary(const RunArtifacts& artifacts,
                                      std::vector<std::string>* warnings = nullptr);

// Frequencies of k over all retained draws.
std::map<int, long> k_counts(const RunArtifacts& artifacts);

// Writes summary.csv, kposterior.csv, trace.csv, density.csv and
// runlog.txt into out_dir (created if absent).
void export_artifacts(const RunArtifacts& artifacts, const std::string& out_dir);

struct SimulateConfig {
  int n = 500;
  std::uint64_t seed = 1;
  double c = 0.0;
  double phi = 0.95;
  double sigma_eta2 = 0.0225;
  std::vector<double> pi{1.0};
  std::vector<double> mu{0.0};
  std::vector<double> var{1.0}; // component variances
  bool mixture_only = false;    // emit plain mixture draws, no volatility path
  bool save_latent = false;     // add true h and eps columns
  std::string out;              // CSV path; sidecar metadata at <out>.meta.txt
};

void run_simulate(const SimulateConfig& config);

// Rebuilds summary.csv (and kposterior.csv when a k column is present)
// from an existing trace.csv.
void run_summarize(const std::string& traces_path, const std::string& out_dir, bool split_rhat);

} // namespace volmix

#endif
