#pragma once

#include <map>
#include <set>
#include <vector>

#include "varis/model.hpp"

namespace varis {

/// A variable elimination order together with the induced cluster sizes.
struct EliminationOrder {
  std::vector<VarId> order;
  /// cluster_sizes[k] = 1 + neighbours of order[k] at the time it is eliminated.
  std::vector<int> cluster_sizes;

  int induced_width() const;
  /// Sampling order: the elimination order reversed.
  std::vector<VarId> reversed() const { return {order.rbegin(), order.rend()}; }
};

/// Undirected moral graph of the network (parents married, directions dropped).
std::vector<std::set<VarId>> moral_graph(const BayesianNetwork& net);

/// Min-fill order over all variables of the moral graph. Ties are broken by
/// (fill count, current degree, declaration index).
EliminationOrder min_fill_order(const BayesianNetwork& net);
EliminationOrder min_fill_order(std::vector<std::set<VarId>> graph);

/// Min-fill sequence for a subset of the vertices of a sparse graph; other
/// vertices stay in the graph and are never picked.
std::vector<VarId> min_fill_sequence(std::map<VarId, std::set<VarId>> graph, const std::vector<VarId>& eliminate);

/// Order is a permutation of 0..n-1.
bool is_permutation_of(const std::vector<VarId>& order, std::size_t n);

}  // namespace varis
