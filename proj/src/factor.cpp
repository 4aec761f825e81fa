#include "varis/factor.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "varis/elimination.hpp"
#include "varis/errors.hpp"
#include "varis/logspace.hpp"

namespace varis {

namespace {

std::vector<std::size_t> strides_for(const std::vector<int>& cards) {
  std::vector<std::size_t> s(cards.size());
  std::size_t acc = 1;
  for (std::size_t k = cards.size(); k-- > 0;) {
    s[k] = acc;
    acc *= static_cast<std::size_t>(cards[k]);
  }
  return s;
}

}  // namespace

Factor::Factor(std::vector<VarId> scope, std::vector<int> cards, std::vector<double> log_values)
    : scope_(std::move(scope)), cards_(std::move(cards)), log_values_(std::move(log_values)) {
  std::size_t n = 1;
  for (int c : cards_) n *= static_cast<std::size_t>(c);
  if (scope_.size() != cards_.size() || n != log_values_.size())
    throw std::invalid_argument("factor value count does not match scope");
}

Factor Factor::from_cpt(const Cpt& cpt) {
  std::vector<VarId> scope = cpt.parents;
  scope.push_back(cpt.child);
  std::vector<int> cards = cpt.parent_cards;
  cards.push_back(cpt.child_card);
  std::vector<double> lv(cpt.table.size());
  std::transform(cpt.table.begin(), cpt.table.end(), lv.begin(), safe_log);
  return Factor(std::move(scope), std::move(cards), std::move(lv));
}

Factor Factor::ones(std::vector<VarId> scope, std::vector<int> cards) {
  std::size_t n = 1;
  for (int c : cards) n *= static_cast<std::size_t>(c);
  return Factor(std::move(scope), std::move(cards), std::vector<double>(n, 0.0));
}

bool Factor::contains(VarId v) const { return position(v) >= 0; }

int Factor::position(VarId v) const {
  auto it = std::find(scope_.begin(), scope_.end(), v);
  return it == scope_.end() ? -1 : static_cast<int>(it - scope_.begin());
}

std::size_t Factor::index_of(std::span<const int> assignment) const {
  std::size_t idx = 0;
  for (std::size_t k = 0; k < scope_.size(); ++k)
    idx = idx * static_cast<std::size_t>(cards_[k]) + static_cast<std::size_t>(assignment[scope_[k]]);
  return idx;
}

Factor Factor::product(const Factor& other, std::size_t max_entries) const {
  std::vector<VarId> scope = scope_;
  std::vector<int> cards = cards_;
  for (std::size_t k = 0; k < other.scope_.size(); ++k)
    if (!contains(other.scope_[k])) {
      scope.push_back(other.scope_[k]);
      cards.push_back(other.cards_[k]);
    }
  std::size_t n = 1;
  for (int c : cards) {
    if (n > max_entries / static_cast<std::size_t>(c)) throw CapExceeded("factor product exceeds table size cap");
    n *= static_cast<std::size_t>(c);
  }
  // stride of each result digit inside the two operands
  const auto sa = strides_for(cards_), sb = strides_for(other.cards_);
  std::vector<std::size_t> da(scope.size(), 0), db(scope.size(), 0);
  for (std::size_t k = 0; k < scope.size(); ++k) {
    if (int p = position(scope[k]); p >= 0) da[k] = sa[p];
    if (int p = other.position(scope[k]); p >= 0) db[k] = sb[p];
  }
  std::vector<double> out(n);
  std::vector<int> digit(scope.size(), 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = log_values_[ia], b = other.log_values_[ib];
    out[i] = (is_log_zero(a) || is_log_zero(b)) ? log_zero : a + b;
    for (std::size_t k = scope.size(); k-- > 0;) {
      if (++digit[k] < cards[k]) {
        ia += da[k];
        ib += db[k];
        break;
      }
      digit[k] = 0;
      ia -= da[k] * static_cast<std::size_t>(cards[k] - 1);
      ib -= db[k] * static_cast<std::size_t>(cards[k] - 1);
    }
  }
  return Factor(std::move(scope), std::move(cards), std::move(out));
}

Factor Factor::sum_out(VarId v) const {
  const int p = position(v);
  if (p < 0) return *this;
  const auto strides = strides_for(cards_);
  const std::size_t inner = strides[p];
  const std::size_t card = static_cast<std::size_t>(cards_[p]);
  const std::size_t outer = log_values_.size() / (inner * card);
  std::vector<VarId> scope = scope_;
  std::vector<int> cards = cards_;
  scope.erase(scope.begin() + p);
  cards.erase(cards.begin() + p);
  std::vector<double> out(outer * inner);
  std::vector<double> terms(card);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      for (std::size_t s = 0; s < card; ++s) terms[s] = log_values_[(o * card + s) * inner + in];
      out[o * inner + in] = log_sum_exp(terms);
    }
  return Factor(std::move(scope), std::move(cards), std::move(out));
}

Factor Factor::clamp(VarId v, int state) const {
  const int p = position(v);
  if (p < 0) return *this;
  const auto strides = strides_for(cards_);
  Factor out = *this;
  for (std::size_t i = 0; i < out.log_values_.size(); ++i)
    if (static_cast<int>((i / strides[p]) % static_cast<std::size_t>(cards_[p])) != state) out.log_values_[i] = log_zero;
  return out;
}

Factor Factor::reordered(const std::vector<VarId>& order) const {
  if (order == scope_) return *this;
  if (order.size() != scope_.size()) throw std::invalid_argument("reorder needs a permutation of the scope");
  std::vector<int> cards(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const int p = position(order[k]);
    if (p < 0) throw std::invalid_argument("reorder needs a permutation of the scope");
    cards[k] = cards_[p];
  }
  Factor ones_like = Factor::ones(order, cards);
  // product with a ones table over the target order lays values out in that order
  Factor out = ones_like.product(*this, log_values_.size());
  return out;
}

Factor marginalize_to(std::vector<Factor> factors, const std::vector<VarId>& keep, std::span<const int> cards,
                      std::size_t max_entries) {
  std::set<VarId> keep_set(keep.begin(), keep.end());
  std::map<VarId, std::set<VarId>> adj;
  for (const auto& f : factors)
    for (VarId a : f.scope()) {
      adj[a];
      for (VarId b : f.scope())
        if (a != b) adj[a].insert(b);
    }
  std::vector<VarId> eliminate;
  for (const auto& [v, _] : adj)
    if (!keep_set.count(v)) eliminate.push_back(v);
  const auto order = min_fill_sequence(adj, eliminate);

  for (VarId v : order) {
    Factor joint;
    std::vector<Factor> rest;
    for (auto& f : factors) {
      if (f.contains(v)) joint = joint.product(f, max_entries);
      else rest.push_back(std::move(f));
    }
    rest.push_back(joint.sum_out(v));
    factors = std::move(rest);
  }
  std::vector<int> keep_cards;
  for (VarId v : keep) keep_cards.push_back(cards[v]);
  Factor result = Factor::ones(keep, keep_cards);
  for (const auto& f : factors) result = result.product(f, max_entries);
  return result.reordered(keep);
}

}  // namespace varis
