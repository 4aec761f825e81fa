#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "varis/exact.hpp"
#include "varis/logspace.hpp"
#include "varis/model.hpp"
#include "varis/proposal.hpp"
#include "varis/simplify.hpp"

namespace varis {

struct SamplerConfig {
  std::size_t m = 1000;
  std::optional<std::size_t> k_max;  // defaults to M / m
  double eta0 = 0.12;
  double etaf = 0.03;
  double alpha = 0.1;
  double beta = 0.2;
  int window = 10;
  double w0 = 0.001;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  double significance = 0.05;
  std::optional<int> cooldown;  // defaults to window
  int width_bound = 2;
  int workers = 1;
  FitOptions fit;
  ExactLimits limits;

  /// Throws std::invalid_argument naming the first violated bound.
  void validate() const;
  std::size_t horizon() const;
  int cooldown_batches() const { return cooldown.value_or(window); }
  std::size_t batch_count() const { return (samples + m - 1) / m; }
};

/// eta0 (etaf/eta0)^(k/k_max), held at etaf past the horizon.
double mixing_rate(std::size_t k, const SamplerConfig& cfg);

/// 1 for an improvement (delta < 0), else min(1, e^(-k delta)); 0 for NaN.
double acceptance_probability(std::size_t k, double delta);

/// Negated mean log ratio over the feasible draws of a batch. Draws with
/// P(h, e) = 0 are legitimate under a simplified proposal and are skipped.
/// NaN when no draw is feasible.
double kl_estimate(std::span<const SampleRecord> batch);
double kl_estimate(std::span<const double> log_ratios);

/// max(w0, 1/(cv + 1e-12)); the first batch always gets w0.
double batch_weight(std::size_t k, double cv, const SamplerConfig& cfg);

/// Running sums of the batch-weighted estimator, in log space.
class EstimatorState {
 public:
  void record(double log_ratio_sum, std::size_t count, double weight);
  bool empty() const { return batches_ == 0; }
  std::size_t batches() const { return batches_; }
  double log_numerator() const { return num_.value(); }
  double log_denominator() const { return den_.value(); }

 private:
  LogSumAccumulator num_;
  LogSumAccumulator den_;
  std::size_t batches_ = 0;
};

/// ln of sum_k w_k sum_i ratio / sum_k w_k M_k. Throws std::logic_error when empty.
double combine_batches(const EstimatorState& state);

/// Weighted power mean; r = 0 is the weighted geometric mean.
/// Throws std::invalid_argument unless z > 0, w > 0 and sum(w) = 1.
double power_mean(std::span<const double> z, std::span<const double> w, double r);
/// Same, from ln z; returns ln M^r.
double log_power_mean(std::span<const double> log_z, std::span<const double> w, double r);

/// Pearson correlation; nullopt for a constant series.
/// Throws std::invalid_argument for unequal lengths or fewer than 3 points.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// Smallest |r| significant under a two-sided t-test with n - 2 degrees of freedom.
double correlation_threshold(int n, double significance);

enum class DirectingEvent { none, sharpen, flatten };
std::string to_string(DirectingEvent e);

/// Correlates the mean log ratio (-D_hat) with ln P~ over the window.
/// Significant positive -> sharpen, significant negative -> flatten.
/// Windows shorter than cfg.window and constant series give none.
DirectingEvent correlation_trigger(std::span<const double> d_hat, std::span<const double> ln_p,
                                   const SamplerConfig& cfg);

/// Draws `count` samples for batch `k`. Samples are cut into fixed chunks,
/// each with its own stream derived from (seed, k, chunk), so the batch does
/// not depend on the number of workers.
std::vector<SampleRecord> draw_batch(const ProposalDistribution& q, const BayesianNetwork& net, std::size_t count,
                                     std::uint64_t seed, std::uint64_t k, int workers = 1);
std::vector<SampleRecord> draw_batch_serial(const ProposalDistribution& q, const BayesianNetwork& net,
                                            std::size_t count, std::uint64_t seed, std::uint64_t k);
inline constexpr std::size_t kSampleChunk = 128;

struct BatchStats {
  std::size_t k = 0;
  std::size_t count = 0;
  double ln_p_batch = 0.0;  // ln P~_k
  double ln_p_cum = 0.0;    // combined estimate after this batch
  double d_hat = 0.0;
  double cv = 0.0;          // coefficient of variation of the batch ratios
  double weight = 0.0;
  double eta = 0.0;
  bool accepted = false;
  DirectingEvent event = DirectingEvent::none;
  std::size_t feasible = 0;
};

/// Batch-only quantities (no weight, eta or acceptance).
BatchStats summarize_batch(std::size_t k, std::span<const SampleRecord> batch);

struct RunOptions {
  bool adaptive = true;
  bool directing = true;
};

struct RunReport {
  std::string algorithm;
  SamplerConfig config;
  RunOptions options;
  std::vector<BatchStats> trace;
  double estimate_ln = log_zero;
  std::size_t samples = 0;
  std::size_t feasible_samples = 0;
  double kl_estimate = 0.0;          // pooled over every feasible draw
  double log_sample_variance = 0.0;  // unweighted variance of all ratios
  std::size_t deleted_edges = 0;
  int simplified_width = -1;
  double wall_seconds = 0.0;
  ProposalDistribution final_proposal;
};

/// Mean of importance ratios over M draws from a fixed Q, in batches of
/// cfg.m; same batch path and streams as run_varis.
RunReport estimate_static(const BayesianNetwork& net, const Evidence& ev, const ProposalDistribution& q,
                          const SamplerConfig& cfg);

/// Full pipeline: edge deletion to cfg.width_bound, prior fit, proposal
/// compilation, then the batch loop with optional annealed updates and
/// directing. With both options off the result equals estimate_static on
/// the compiled proposal.
RunReport run_varis(const BayesianNetwork& net, const Evidence& ev, const SamplerConfig& cfg,
                    const RunOptions& options = {});

/// Batch loop on an already compiled proposal; `simp` is edited by directing.
RunReport run_batches(const BayesianNetwork& net, const Evidence& ev, ProposalDistribution q, SimplifiedNetwork simp,
                      const SamplerConfig& cfg, const RunOptions& options);

RunReport likelihood_weighting(const BayesianNetwork& net, const Evidence& ev, const SamplerConfig& cfg);

/// Forward sampling from the feasibility-restricted prior with a table blend
/// toward weighted empirical frequencies at rate eta(k) after every batch.
RunReport sis_star(const BayesianNetwork& net, const Evidence& ev, const SamplerConfig& cfg);

std::string trace_csv(const RunReport& report);
std::string summary_json(const RunReport& report);
/// Shortest decimal that reads back to the same double.
std::string format_real(double x);

}  // namespace varis
