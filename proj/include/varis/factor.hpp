#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "varis/model.hpp"

namespace varis {

/// Nonnegative table over an ordered scope, stored as natural logs with
/// log_zero for exact zeros. The first scope variable is the most
/// significant digit of the flat index.
class Factor {
 public:
  /// The unit factor (empty scope, value 1).
  Factor() : log_values_{0.0} {}
  Factor(std::vector<VarId> scope, std::vector<int> cards, std::vector<double> log_values);

  /// Scope is (parents..., child), matching the CPT row layout.
  static Factor from_cpt(const Cpt& cpt);
  /// All-ones table over the given scope.
  static Factor ones(std::vector<VarId> scope, std::vector<int> cards);

  const std::vector<VarId>& scope() const { return scope_; }
  const std::vector<int>& cards() const { return cards_; }
  const std::vector<double>& log_values() const { return log_values_; }
  std::vector<double>& log_values() { return log_values_; }
  std::size_t size() const { return log_values_.size(); }
  bool contains(VarId v) const;
  int position(VarId v) const;  // -1 when absent

  /// Flat index for a dense assignment covering the scope.
  std::size_t index_of(std::span<const int> assignment) const;
  double log_at(std::span<const int> assignment) const { return log_values_[index_of(assignment)]; }

  /// Pointwise product over the union scope (this scope first, then new
  /// variables of `other` in their order). Throws CapExceeded above max_entries.
  Factor product(const Factor& other, std::size_t max_entries) const;
  /// Sums `v` out of the table.
  Factor sum_out(VarId v) const;
  /// Zeroes every entry where `v` differs from `state`; scope unchanged.
  Factor clamp(VarId v, int state) const;
  /// Same table with the scope permuted to `order` (a permutation of scope()).
  Factor reordered(const std::vector<VarId>& order) const;

 private:
  std::vector<VarId> scope_;
  std::vector<int> cards_;
  std::vector<double> log_values_;
};

/// Product of all factors, then every variable outside `keep` summed out,
/// eliminating in min-fill order over the factors' interaction graph.
/// The result scope is `keep` in the given order.
Factor marginalize_to(std::vector<Factor> factors, const std::vector<VarId>& keep,
                      std::span<const int> cards, std::size_t max_entries);

}  // namespace varis
