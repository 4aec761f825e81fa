#pragma once

#include <cstdint>
#include <stdexcept>

#include "varis/model.hpp"

namespace varis {

struct GeneratorConfig {
  int nodes = 10;
  int max_parents = 3;
  int states = 2;
  /// Fraction of point-mass CPT rows over the whole network, in [0, 1],
  /// rounded up to a whole row.
  double det_fraction = 0.5;
  /// Number of observed leaves, or kAllLeaves.
  int evidence_leaves = 2;
};

inline constexpr int kAllLeaves = -1;

class InfeasibleConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct GeneratedNetwork {
  BayesianNetwork network;
  EvidenceLabels evidence;
};

/// Random DAG over X0..X{n-1} (parents drawn from lower indices). Evidence is
/// read off one forward sample, so P(e) > 0. Evidence goes on childless
/// nodes first, then on the highest-index remaining nodes if there are too
/// few leaves.
GeneratedNetwork generate_random_network(const GeneratorConfig& cfg, std::uint64_t seed);

}  // namespace varis
