#pragma once

#include <cstddef>
#include <vector>

#include "varis/elimination.hpp"
#include "varis/factor.hpp"
#include "varis/model.hpp"

namespace varis {

class ProposalDistribution;

struct ExactLimits {
  /// Largest joint space of unobserved variables the enumeration oracle visits.
  std::size_t enumeration_cap = std::size_t{1} << 24;
  /// Largest table bucket elimination may build.
  std::size_t table_cap = std::size_t{1} << 24;
  /// Threads for the enumeration kernels; 0 = OpenMP default.
  int threads = 0;
};

/// ln P(e) by summing P(h, e) over every unobserved completion.
/// log_zero iff no consistent instance. Throws CapExceeded.
double enumerate_likelihood(const BayesianNetwork& net, const Evidence& ev, const ExactLimits& limits = {});
/// Single-threaded straight-line version of enumerate_likelihood.
double enumerate_likelihood_serial(const BayesianNetwork& net, const Evidence& ev, const ExactLimits& limits = {});

/// One bucket after elimination of its variable.
struct Bucket {
  VarId var = 0;
  std::vector<int> cpt_ids;            // input CPTs placed in this bucket
  std::vector<VarId> incoming_from;    // buckets whose messages landed here
  std::vector<VarId> context;          // S_i
  Factor combined;                     // lambda_i(S_i, X_i), X_i last
  Factor message;                      // lambda_i(S_i)
  VarId message_target = -1;           // bucket receiving the message; -1 = constant
};

struct BucketScheme {
  EliminationOrder order;
  std::vector<int> position;   // D: 1-based index in the sampling order
  std::vector<Bucket> buckets; // indexed by variable
};

struct EliminationResult {
  double log_likelihood = 0.0;
  BucketScheme scheme;
};

/// Bucket elimination with evidence clamped in the evidence variable's own
/// bucket. Every table goes to the bucket of its earliest-eliminated
/// variable. All intermediate tables are retained. Throws CapExceeded or
/// std::invalid_argument for a bad order.
EliminationResult bucket_eliminate(const BayesianNetwork& net, const Evidence& ev, const EliminationOrder& order,
                                   const ExactLimits& limits = {});

/// Quantities of a proposal against the exact target, from one enumeration
/// pass over the unobserved space.
struct ProposalDiagnostics {
  double log_likelihood = 0.0;      // ln P(e)
  double kl_to_posterior = 0.0;     // D(Q || P(H|e)); +inf when Q leaks onto P(h,e)=0
  double feasible_mass = 0.0;       // Q(F), F = {h : P(h,e) > 0}
  /// -E_{Q restricted to F}[ln P(h,e)/Q(h)], the value the batch KL
  /// estimate converges to when only feasible draws are averaged.
  double feasible_kl_estimate_target = 0.0;
  double log_moment0 = 0.0;         // ln M^0_Q(P/Q)
  double log_moment1 = 0.0;         // ln M^1_Q(P/Q)
  double log_moment2 = 0.0;         // ln M^2_Q(P/Q)
  /// E_Q[Var(P/Q)] = (M^2)^2 - P(e)^2, in log space.
  double log_expected_variance = 0.0;
};

/// Throws DominationError if Q(h) = 0 where P(h, e) > 0; CapExceeded.
ProposalDiagnostics exact_proposal_diagnostics(const ProposalDistribution& q, const BayesianNetwork& net,
                                               const Evidence& ev, const ExactLimits& limits = {});

/// D(Q(H) || P(H | e)) by enumeration; 0 log 0 = 0; +inf if Q puts mass where P(h|e) = 0.
double exact_kl_to_posterior(const ProposalDistribution& q, const BayesianNetwork& net, const Evidence& ev,
                             const ExactLimits& limits = {});

/// ln M^r_Q(P(h,e)/Q(h)), the Q-weighted power mean of importance ratios
/// over the whole support. r = 1 gives ln P(e).
double exact_log_power_moment(const ProposalDistribution& q, const BayesianNetwork& net, const Evidence& ev,
                              double r, const ExactLimits& limits = {});

}  // namespace varis
