#include "varis/exact.hpp"

#include <stdexcept>

#include "varis/errors.hpp"
#include "varis/logspace.hpp"
#include "varis/parallel.hpp"

namespace varis {

namespace {

std::vector<VarId> unobserved(const BayesianNetwork& net, const Evidence& ev) {
  std::vector<VarId> out;
  for (std::size_t v = 0; v < net.size(); ++v)
    if (!ev.observed(static_cast<VarId>(v))) out.push_back(static_cast<VarId>(v));
  return out;
}

std::vector<int> base_assignment(const BayesianNetwork& net, const Evidence& ev) {
  std::vector<int> x(net.size(), 0);
  for (std::size_t v = 0; v < net.size(); ++v)
    if (ev.observed(static_cast<VarId>(v))) x[v] = ev.value(static_cast<VarId>(v));
  return x;
}

void check_cap(std::span<const VarId> hidden, std::span<const int> cards, std::size_t cap) {
  std::size_t n = 1;
  for (VarId v : hidden) {
    if (n > cap / static_cast<std::size_t>(cards[v])) throw CapExceeded("unobserved joint space exceeds enumeration cap");
    n *= static_cast<std::size_t>(cards[v]);
  }
  if (n > cap) throw CapExceeded("unobserved joint space exceeds enumeration cap");
}

}  // namespace

double enumerate_likelihood(const BayesianNetwork& net, const Evidence& ev, const ExactLimits& limits) {
  const auto hidden = unobserved(net, ev);
  const auto cards = net.cardinalities();
  check_cap(hidden, cards, limits.enumeration_cap);
  auto parts = map_completion_chunks<LogSumAccumulator>(
      base_assignment(net, ev), hidden, cards,
      [&net](LogSumAccumulator& acc, const std::vector<int>& x) { acc.add(joint_log_prob(net, x)); },
      limits.threads);
  LogSumAccumulator total;
  for (const auto& p : parts) total.merge(p);
  return total.value();
}

double enumerate_likelihood_serial(const BayesianNetwork& net, const Evidence& ev, const ExactLimits& limits) {
  const auto hidden = unobserved(net, ev);
  const auto cards = net.cardinalities();
  check_cap(hidden, cards, limits.enumeration_cap);
  auto x = base_assignment(net, ev);
  LogSumAccumulator total;
  do {
    total.add(joint_log_prob(net, x));
  } while (next_assignment(x, hidden, cards));
  return total.value();
}

EliminationResult bucket_eliminate(const BayesianNetwork& net, const Evidence& ev, const EliminationOrder& order,
                                   const ExactLimits& limits) {
  const std::size_t n = net.size();
  if (!is_permutation_of(order.order, n)) throw std::invalid_argument("elimination order is not a permutation");
  const auto cards = net.cardinalities();

  EliminationResult result;
  BucketScheme& scheme = result.scheme;
  scheme.order = order;
  scheme.position.assign(n, 0);
  // sampling order R is the elimination order reversed; D[R_i] = i
  for (std::size_t k = 0; k < n; ++k) scheme.position[order.order[k]] = static_cast<int>(n - k);
  scheme.buckets.resize(n);
  for (std::size_t v = 0; v < n; ++v) scheme.buckets[v].var = static_cast<VarId>(v);

  auto target_of = [&](const std::vector<VarId>& scope) {
    VarId best = -1;
    for (VarId v : scope)
      if (best < 0 || scheme.position[v] > scheme.position[best]) best = v;
    return best;
  };

  std::vector<std::vector<Factor>> pending(n);
  for (std::size_t i = 0; i < n; ++i) {
    Factor f = Factor::from_cpt(net.cpt(static_cast<VarId>(i)));
    const VarId b = target_of(f.scope());
    scheme.buckets[b].cpt_ids.push_back(static_cast<int>(i));
    pending[b].push_back(std::move(f));
  }

  double log_const = 0.0;
  for (VarId v : order.order) {
    Bucket& bucket = scheme.buckets[v];
    Factor joint = Factor::ones({v}, {cards[v]});
    for (const auto& f : pending[v]) joint = joint.product(f, limits.table_cap);
    pending[v].clear();
    if (ev.observed(v)) joint = joint.clamp(v, ev.value(v));
    Factor message = joint.sum_out(v);
    std::vector<VarId> layout = message.scope();
    layout.push_back(v);
    bucket.combined = joint.reordered(layout);
    bucket.context = message.scope();
    bucket.message_target = target_of(bucket.context);
    if (bucket.message_target < 0) {
      const double c = message.log_values().front();
      log_const = (is_log_zero(c) || is_log_zero(log_const)) ? log_zero : log_const + c;
    } else {
      scheme.buckets[bucket.message_target].incoming_from.push_back(v);
      pending[bucket.message_target].push_back(message);
    }
    bucket.message = std::move(message);
  }
  result.log_likelihood = log_const;
  return result;
}

}  // namespace varis
