#pragma once

#include <span>
#include <string>
#include <vector>

#include "varis/exact.hpp"
#include "varis/model.hpp"
#include "varis/rng.hpp"
#include "varis/simplify.hpp"

namespace varis {

/// Q_i(x_i | s_i): one row per context assignment, first context variable
/// most significant.
struct ConditionalTable {
  VarId var = 0;
  int card = 0;
  std::vector<VarId> context;
  std::vector<int> context_cards;
  std::vector<double> probs;

  std::size_t row_count() const { return probs.size() / static_cast<std::size_t>(card); }
  std::size_t context_index(std::span<const int> x) const;
  std::span<const double> row(std::size_t r) const {
    return {probs.data() + r * static_cast<std::size_t>(card), static_cast<std::size_t>(card)};
  }
  std::span<double> row(std::size_t r) {
    return {probs.data() + r * static_cast<std::size_t>(card), static_cast<std::size_t>(card)};
  }
};

/// f(v, u) = sum over the other parents of v of P(v | pa(v)), for a deleted
/// edge u -> v.
struct ReinstatedFactor {
  VarId parent = 0;
  VarId child = 0;
  int parent_card = 0;
  int child_card = 0;
  std::vector<double> values;  // values[v * parent_card + u]

  double at(int v, int u) const { return values[static_cast<std::size_t>(v * parent_card + u)]; }
};

ReinstatedFactor reinstated_factor(const BayesianNetwork& net, VarId parent, VarId child);

/// Importance function Q(h) = prod_i Q_i(x_i | s_i) with a sampling order.
/// Observed variables sit in the order but are fixed, never drawn.
class ProposalDistribution {
 public:
  ProposalDistribution() = default;
  ProposalDistribution(std::vector<VarId> order, std::vector<ConditionalTable> tables, Evidence evidence,
                       std::vector<ReinstatedFactor> reinstated = {});

  const std::vector<VarId>& order() const { return order_; }
  const ConditionalTable& table(VarId v) const { return tables_[v]; }
  const std::vector<ConditionalTable>& tables() const { return tables_; }
  const Evidence& evidence() const { return evidence_; }
  const std::vector<ReinstatedFactor>& reinstated() const { return reinstated_; }
  std::size_t size() const { return tables_.size(); }

  /// ln Q(h) for a full assignment; log_zero if it contradicts the evidence.
  double log_prob(std::span<const int> full) const;
  /// Largest |sum(row) - 1| over all rows of sampled variables.
  double max_row_deviation() const;

  /// Copy with replaced tables (same order, evidence).
  ProposalDistribution with_tables(std::vector<ConditionalTable> tables) const;

 private:
  std::vector<VarId> order_;
  std::vector<ConditionalTable> tables_;
  Evidence evidence_;
  std::vector<ReinstatedFactor> reinstated_;
};

/// Q from bucket elimination on N' (min-fill order, evidence clamped):
/// Q_i = lambda_i(x_i, s_i) / lambda_i(s_i), uniform where lambda_i(s_i) = 0,
/// sampled in reverse elimination order. Each deleted edge u -> v with u
/// sampled before v multiplies Q_v by f(v, u) and renormalizes.
ProposalDistribution build_proposal(const BayesianNetwork& net, const SimplifiedNetwork& simp, const Evidence& ev,
                                    const ExactLimits& limits = {});

/// The prior in topological order (likelihood weighting).
ProposalDistribution prior_proposal(const BayesianNetwork& net, const Evidence& ev);

/// The prior in topological order, with each local distribution restricted
/// by one-step evidence consistency: when drawing x_i completes the parents
/// of an observed child, states giving that child's observed value
/// probability zero are removed. Rows that lose every state become uniform.
ProposalDistribution feasible_prior_proposal(const BayesianNetwork& net, const Evidence& ev);

/// One importance sample.
struct SampleRecord {
  std::vector<int> assignment;  // full, evidence included
  double log_q = 0.0;
  double log_p = 0.0;           // ln P(h, e)
  double log_ratio = 0.0;       // log_p - log_q; log_zero for infeasible h
};

/// Draws variables in the proposal's order by inverse CDF over Q rows.
/// Throws DominationError if a drawn instance has Q(h) = 0.
SampleRecord draw_sample(const ProposalDistribution& q, const BayesianNetwork& net, Rng& rng);

/// Q'(x|s) = (1 - eta) Q(x|s) + eta N(x,s)/N(s) for every visited context,
/// where N counts draws weighted by their importance ratio. Entries that were
/// positive are floored at `floor` and rows renormalized. Contexts without
/// weighted visits are unchanged.
ProposalDistribution anneal_update(const ProposalDistribution& q, std::span<const SampleRecord> batch, double eta,
                                   double floor = 1e-6);

enum class Direction { sharpen, flatten };

/// Sharpen: q < alpha -> q^(1+beta), q > 1-alpha -> q^(1-beta).
/// Flatten uses the opposite exponents. Every CPT row of N' is renormalized.
/// Throws std::invalid_argument unless 0 < alpha < 0.5 and 0 < beta < 1.
SimplifiedNetwork direct_transform(const SimplifiedNetwork& simp, Direction direction, double alpha, double beta);

/// Debug document: sampling order, evidence, and per-context rows.
std::string proposal_to_json(const ProposalDistribution& q, const BayesianNetwork& net);

}  // namespace varis
