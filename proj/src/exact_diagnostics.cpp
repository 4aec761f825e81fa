#include <cmath>
#include <limits>

#include "varis/errors.hpp"
#include "varis/exact.hpp"
#include "varis/logspace.hpp"
#include "varis/parallel.hpp"
#include "varis/proposal.hpp"

namespace varis {

namespace {

struct Space {
  std::vector<VarId> hidden;
  std::vector<int> cards;
  std::vector<int> base;
};

Space hidden_space(const BayesianNetwork& net, const Evidence& ev, std::size_t cap) {
  Space s;
  s.cards = net.cardinalities();
  s.base.assign(net.size(), 0);
  std::size_t n = 1;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto v = static_cast<VarId>(i);
    if (ev.observed(v)) {
      s.base[i] = ev.value(v);
      continue;
    }
    s.hidden.push_back(v);
    const auto c = static_cast<std::size_t>(s.cards[i]);
    if (n > cap / c) throw CapExceeded("unobserved joint space exceeds enumeration cap");
    n *= c;
  }
  return s;
}

struct Pass {
  LogSumAccumulator p;          // sum P(h,e)
  LogSumAccumulator q_feasible; // Q(F)
  LogSumAccumulator m2;         // sum P^2/Q over Q > 0
  double q_log_ratio = 0.0;     // sum over F of Q ln(P/Q)
  bool leak = false;            // Q > 0 where P(h,e) = 0
  bool undominated = false;     // P(h,e) > 0 where Q = 0

  void merge(const Pass& o) {
    p.merge(o.p);
    q_feasible.merge(o.q_feasible);
    m2.merge(o.m2);
    q_log_ratio += o.q_log_ratio;
    leak = leak || o.leak;
    undominated = undominated || o.undominated;
  }
};

Pass enumerate_pass(const ProposalDistribution& q, const BayesianNetwork& net, const Evidence& ev,
                    const ExactLimits& limits) {
  const Space s = hidden_space(net, ev, limits.enumeration_cap);
  auto parts = map_completion_chunks<Pass>(
      s.base, s.hidden, s.cards,
      [&](Pass& acc, const std::vector<int>& x) {
        const double lp = joint_log_prob(net, x);
        const double lq = q.log_prob(x);
        acc.p.add(lp);
        if (is_log_zero(lq)) {
          if (!is_log_zero(lp)) acc.undominated = true;
          return;
        }
        if (is_log_zero(lp)) {
          acc.leak = true;
          return;
        }
        acc.q_feasible.add(lq);
        acc.m2.add(2.0 * lp - lq);
        acc.q_log_ratio += std::exp(lq) * (lp - lq);
      },
      limits.threads);
  Pass total;
  for (const auto& part : parts) total.merge(part);
  if (total.undominated) throw DominationError("proposal gives zero probability to a supported instance");
  return total;
}

}  // namespace

ProposalDiagnostics exact_proposal_diagnostics(const ProposalDistribution& q, const BayesianNetwork& net,
                                               const Evidence& ev, const ExactLimits& limits) {
  const Pass pass = enumerate_pass(q, net, ev, limits);
  constexpr double inf = std::numeric_limits<double>::infinity();
  ProposalDiagnostics d;
  d.log_likelihood = pass.p.value();
  const double log_qf = pass.q_feasible.value();
  d.feasible_mass = std::exp(log_qf);
  // D(Q || P(H|e)) = ln P(e) - E_Q[ln P(h,e)/Q(h)]
  d.kl_to_posterior = pass.leak ? inf : d.log_likelihood - pass.q_log_ratio;
  d.feasible_kl_estimate_target = is_log_zero(log_qf) ? std::nan("") : -pass.q_log_ratio / d.feasible_mass;
  d.log_moment0 = pass.leak ? log_zero : pass.q_log_ratio;
  d.log_moment1 = d.log_likelihood;
  d.log_moment2 = 0.5 * pass.m2.value();
  const double a = 2.0 * d.log_moment2;
  const double b = 2.0 * d.log_likelihood;
  d.log_expected_variance = a > b ? a + std::log1p(-std::exp(b - a)) : log_zero;
  return d;
}

double exact_kl_to_posterior(const ProposalDistribution& q, const BayesianNetwork& net, const Evidence& ev,
                             const ExactLimits& limits) {
  return exact_proposal_diagnostics(q, net, ev, limits).kl_to_posterior;
}

double exact_log_power_moment(const ProposalDistribution& q, const BayesianNetwork& net, const Evidence& ev, double r,
                              const ExactLimits& limits) {
  if (r == 0.0) return exact_proposal_diagnostics(q, net, ev, limits).log_moment0;
  const Space s = hidden_space(net, ev, limits.enumeration_cap);
  auto parts = map_completion_chunks<LogSumAccumulator>(
      s.base, s.hidden, s.cards,
      [&](LogSumAccumulator& acc, const std::vector<int>& x) {
        const double lq = q.log_prob(x);
        if (is_log_zero(lq)) return;
        const double lp = joint_log_prob(net, x);
        if (is_log_zero(lp)) {
          if (r < 0.0) acc.add(std::numeric_limits<double>::infinity());
          return;
        }
        acc.add(lq + r * (lp - lq));
      },
      limits.threads);
  LogSumAccumulator total;
  for (const auto& part : parts) total.merge(part);
  return total.value() / r;
}

}  // namespace varis
