#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace varis {

/// Index of a variable within its network (declaration order).
using VarId = int;

/// Sentinel for an unobserved / unassigned variable in dense assignments.
inline constexpr int kUnassigned = -1;

struct Variable {
  std::string name;
  std::vector<std::string> states;

  int cardinality() const { return static_cast<int>(states.size()); }
  std::optional<int> state_index(std::string_view label) const;
};

/// Conditional probability table P(child | parents).
///
/// Rows are stored contiguously, one row per parent configuration, with the
/// first parent the most significant digit of the row index. Each row is a
/// distribution over the child's states.
struct Cpt {
  VarId child = 0;
  std::vector<VarId> parents;
  std::vector<double> table;  // rows * child_card entries

  int child_card = 0;
  std::vector<int> parent_cards;

  std::size_t row_count() const;
  std::span<const double> row(std::size_t r) const {
    return {table.data() + r * child_card, static_cast<std::size_t>(child_card)};
  }
  std::span<double> row(std::size_t r) {
    return {table.data() + r * child_card, static_cast<std::size_t>(child_card)};
  }
  /// Row index for a dense assignment (indexed by VarId).
  std::size_t row_index(std::span<const int> assignment) const;
  double prob(std::span<const int> assignment) const {
    return table[row_index(assignment) * child_card + assignment[child]];
  }
  bool is_deterministic_row(std::size_t r) const;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Discrete Bayesian network. Immutable after construction through the
/// public API; builders go through the constructor which validates.
class BayesianNetwork {
 public:
  BayesianNetwork() = default;
  /// Throws ValidationError when the result would violate any invariant.
  /// Rows within 1e-6 of unit sum are renormalized.
  BayesianNetwork(std::vector<Variable> variables, std::vector<Cpt> cpts);

  std::size_t size() const { return variables_.size(); }
  const std::vector<Variable>& variables() const { return variables_; }
  const Variable& variable(VarId v) const { return variables_[v]; }
  const std::vector<Cpt>& cpts() const { return cpts_; }
  const Cpt& cpt(VarId v) const { return cpts_[v]; }
  int cardinality(VarId v) const { return variables_[v].cardinality(); }
  std::vector<int> cardinalities() const;

  const std::vector<VarId>& parents(VarId v) const { return cpts_[v].parents; }
  const std::vector<VarId>& children(VarId v) const { return children_[v]; }
  std::optional<VarId> find(std::string_view name) const;
  VarId id(std::string_view name) const;  // throws std::out_of_range

  /// Number of directed edges.
  std::size_t edge_count() const;

 private:
  std::vector<Variable> variables_;
  std::vector<Cpt> cpts_;
  std::vector<std::vector<VarId>> children_;
};

/// Evidence as it appears in documents: variable name -> state label.
using EvidenceLabels = std::map<std::string, std::string>;

/// Evidence resolved against a network.
class Evidence {
 public:
  Evidence() = default;
  explicit Evidence(std::size_t n) : value_(n, kUnassigned) {}
  /// Throws ValidationError on unknown variables or state labels.
  static Evidence resolve(const BayesianNetwork& net, const EvidenceLabels& labels);

  bool observed(VarId v) const { return value_[v] != kUnassigned; }
  int value(VarId v) const { return value_[v]; }
  void set(VarId v, int state) { value_[v] = state; }
  std::size_t size() const { return value_.size(); }
  std::size_t observed_count() const;
  const std::vector<int>& dense() const { return value_; }
  EvidenceLabels labels(const BayesianNetwork& net) const;

 private:
  std::vector<int> value_;
};

/// One finding from validate_network.
struct Finding {
  enum class Kind { cycle, row_sum, bad_entry, reference, duplicate, shape };
  Kind kind;
  std::string message;
  std::vector<std::string> cycle;  // for Kind::cycle
  double deviation = 0.0;          // for Kind::row_sum
};

/// Raw, unvalidated network description (what a parser produces).
struct NetworkSpec {
  std::vector<Variable> variables;
  struct CptSpec {
    std::string child;
    std::vector<std::string> parents;
    std::vector<std::vector<double>> table;
  };
  std::vector<CptSpec> cpts;
};

/// Checks acyclicity, row sums (tolerance 1e-6), entry ranges and reference
/// integrity. Empty result iff the description is a valid network.
std::vector<Finding> validate_network(const NetworkSpec& spec);
std::vector<Finding> validate_network(const BayesianNetwork& net);

/// Builds a network from a validated description.
BayesianNetwork build_network(const NetworkSpec& spec);
NetworkSpec to_spec(const BayesianNetwork& net);

/// Sum of log CPT entries; log_zero when any entry is 0.
/// Throws std::invalid_argument if some variable is unassigned.
double joint_log_prob(const BayesianNetwork& net, std::span<const int> full);

/// Parents before children; ties broken by declaration order.
std::vector<VarId> topological_order(const BayesianNetwork& net);

/// Mixed-radix enumeration helper over a subset of variables.
/// Increments `assignment` at positions `vars` (last var fastest). Returns
/// false after wrapping around.
bool next_assignment(std::vector<int>& assignment, std::span<const VarId> vars,
                     std::span<const int> cards);

}  // namespace varis
