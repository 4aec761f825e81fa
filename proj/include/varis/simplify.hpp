#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "varis/exact.hpp"
#include "varis/model.hpp"

namespace varis {

using Edge = std::pair<VarId, VarId>;  // (parent, child)

/// N' together with the edges removed from N.
struct SimplifiedNetwork {
  BayesianNetwork network;
  std::vector<Edge> deleted_edges;
  bool fitted = false;
  /// Fit objective before the first sweep and after each accepted sweep.
  std::vector<double> fit_trace;
};

/// Min-fill induced width of the moral graph implied by `parents`.
int induced_width(const std::vector<std::vector<VarId>>& parents);
int induced_width(const BayesianNetwork& net);

/// Mutual information between parent `u` and child `v` under v's CPT with
/// uniform weighting of all parent configurations.
double edge_mutual_information(const BayesianNetwork& net, VarId u, VarId v);

/// CPT of `v` with parent `u` averaged out under uniform weighting.
Cpt average_out_parent(const BayesianNetwork& net, VarId u, VarId v);

/// Greedy edge deletion until the min-fill induced width is at most
/// `width_bound`. Each step removes the edge whose deletion gives the
/// smallest width; ties go to the lowest mutual information, then to the
/// earliest (child, parent) in declaration order.
SimplifiedNetwork del_edges(const BayesianNetwork& net, int width_bound);

struct FitOptions {
  int sweeps = 20;
  double tol = 1e-6;
  /// Every fitted entry is floored here and its row renormalized.
  double floor = 1e-6;
  std::size_t table_cap = std::size_t{1} << 22;
};

/// Fit objective: KL(P' || P) over all variables of `net`, with ln 0 in P
/// replaced by ln(floor) so the value stays finite when P has structural
/// zeros. Equals the exact KL when P has none. Computed by elimination on N'.
double fit_objective(const BayesianNetwork& net, const BayesianNetwork& simplified, const FitOptions& opts = {});

/// Coordinate descent over the CPTs of N' on fit_objective. Each update sets
/// P'_i(x | pa'_i) proportional to exp(E[ln P(X) - sum_{j != i} ln P'_j | x, pa'_i]),
/// expectations under the current P'. A sweep that raises the objective is
/// undone and ends the fit. No-op when no edge was deleted.
SimplifiedNetwork var_tech_fit(const BayesianNetwork& net, const SimplifiedNetwork& simp, const FitOptions& opts = {});

/// Exact KL(P'(X) || P(X)) by enumeration over all variables of `net`.
double prior_kl(const BayesianNetwork& net, const SimplifiedNetwork& simp, const ExactLimits& limits = {});

/// Network over the unobserved variables only: observed variables are
/// dropped and their children's CPTs are sliced at the observed values.
/// `kept[i]` is the original id of reduced variable i.
BayesianNetwork condition_out(const BayesianNetwork& net, const Evidence& ev, std::vector<VarId>* kept = nullptr);

/// Runs var_tech_fit on N and N' with the observed variables conditioned
/// out, then writes the fitted tables back into N' (rows at the observed
/// parent values). The prior fit of the VarIS pipeline.
SimplifiedNetwork fit_without_evidence(const BayesianNetwork& net, const SimplifiedNetwork& simp, const Evidence& ev,
                                       const FitOptions& opts = {});

/// Network document of N' plus a "deleted_edges" array.
std::string serialize_simplified(const SimplifiedNetwork& simp, const std::optional<EvidenceLabels>& evidence = std::nullopt);
SimplifiedNetwork parse_simplified(std::string_view text);

}  // namespace varis
