#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "oracle.hpp"
#include "varis/errors.hpp"
#include "varis/logspace.hpp"
#include "varis/proposal.hpp"
#include "varis/rng.hpp"
#include "varis/simplify.hpp"

using namespace varis;

namespace {

SimplifiedNetwork unsimplified(const BayesianNetwork& net) { return {net, {}, true, {}}; }

SimplifiedNetwork fitted(const oracle::Case& c, int bound) {
  auto s = del_edges(c.net, bound);
  if (!s.deleted_edges.empty()) s = fit_without_evidence(c.net, s, c.ev);
  return s;
}

SampleRecord record(std::vector<int> x, double log_ratio) {
  SampleRecord r;
  r.assignment = std::move(x);
  r.log_ratio = log_ratio;
  return r;
}

// Equal logs, with matching infinities counted as equal.
bool same_log(double a, double b) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b));
}

ProposalDistribution coin(double p1) {
  std::vector<ConditionalTable> t(1);
  t[0] = {0, 2, {}, {}, {1 - p1, p1}};
  return ProposalDistribution({0}, std::move(t), Evidence(1));
}

}  // namespace

TEST_CASE("without deleted edges every importance ratio equals P(e)") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto c = oracle::generated(seed, 9 + static_cast<int>(seed % 4), 0.5);
    const auto q = build_proposal(c.net, unsimplified(c.net), c.ev);
    const double ll = oracle::log_likelihood(c.net, c.ev);
    Rng rng(seed);
    for (int i = 0; i < 200; ++i) {
      const auto s = draw_sample(q, c.net, rng);
      CHECK(s.log_ratio == doctest::Approx(ll).epsilon(1e-9));
    }
  }
}

TEST_CASE("reinstated factor sums out the other parents") {
  // pa(V) = {U, W}, P(V=1 | u, w) = 0.1, 0.3, 0.6, 0.9 with U the leading digit
  const BayesianNetwork net({oracle::binary("U"), oracle::binary("W"), oracle::binary("V")},
                            {oracle::cpt(0, {}, {0.5, 0.5}), oracle::cpt(1, {}, {0.5, 0.5}),
                             oracle::cpt(2, {0, 1}, {0.9, 0.1, 0.7, 0.3, 0.4, 0.6, 0.1, 0.9})});
  const auto f = reinstated_factor(net, 0, 2);
  CHECK(f.at(1, 0) == doctest::Approx(0.4));
  CHECK(f.at(1, 1) == doctest::Approx(1.5));
  CHECK(f.at(0, 0) == doctest::Approx(1.6));
  CHECK(f.at(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("or-gate posterior proposals") {
  const auto gate = oracle::or_gate();
  const auto d1 = oracle::observe(gate, {{"D", "1"}});
  const auto q = build_proposal(gate, unsimplified(gate), d1);
  std::vector<int> x{0, 0, 1};
  CHECK(std::isinf(q.log_prob(x)));
  for (auto [a, b] : {std::pair{0, 1}, std::pair{1, 0}, std::pair{1, 1}}) {
    x = {a, b, 1};
    CHECK(std::exp(q.log_prob(x)) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }

  const auto d0 = oracle::observe(gate, {{"D", "0"}});
  const auto q0 = build_proposal(gate, unsimplified(gate), d0);
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const auto s = draw_sample(q0, gate, rng);
    CHECK(s.assignment == std::vector<int>{0, 0, 0});
    CHECK(s.log_q == 0.0);
    CHECK(s.log_ratio == doctest::Approx(std::log(0.25)).epsilon(1e-14));
  }
}

TEST_CASE("draw frequencies match Q") {
  const auto gate = oracle::or_gate();
  const auto d1 = oracle::observe(gate, {{"D", "1"}});
  const auto q = build_proposal(gate, unsimplified(gate), d1);
  Rng rng(2024);
  const int n = 10000;
  std::map<std::vector<int>, int> counts;
  for (int i = 0; i < n; ++i) ++counts[draw_sample(q, gate, rng).assignment];
  CHECK(counts.size() == 3);
  const double p = 1.0 / 3.0;
  const double sigma = std::sqrt(p * (1 - p) / n);
  for (const auto& [x, k] : counts) CHECK(std::abs(k / static_cast<double>(n) - p) < 3 * sigma);
}

TEST_CASE("draws are reproducible from the seed") {
  const auto c = oracle::generated(8, 12, 0.5);
  const auto q = build_proposal(c.net, fitted(c, 1), c.ev);
  Rng a = make_stream(99, 1, 2);
  Rng b = make_stream(99, 1, 2);
  for (int i = 0; i < 100; ++i) {
    const auto x = draw_sample(q, c.net, a);
    const auto y = draw_sample(q, c.net, b);
    CHECK(x.assignment == y.assignment);
    CHECK(x.log_ratio == y.log_ratio);
  }
}

TEST_CASE("fitted proposals dominate the target and have normalized rows") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto c = oracle::generated(seed, 9 + static_cast<int>(seed % 4), 0.5);
    for (int bound : {0, 1, 2}) {
      const auto q = build_proposal(c.net, fitted(c, bound), c.ev);
      CHECK(q.max_row_deviation() <= 1e-9);
      CHECK(oracle::proposal_stats(q, c.net, c.ev).dominated);
      // log_prob agrees with the oracle product of table entries
      Rng rng(seed);
      for (int i = 0; i < 20; ++i) {
        const auto s = draw_sample(q, c.net, rng);
        CHECK(same_log(s.log_q, std::log(static_cast<double>(oracle::proposal_prob(q, s.assignment)))));
        CHECK(same_log(s.log_p, joint_log_prob(c.net, s.assignment)));
      }
    }
  }
}

TEST_CASE("sampling order puts every context variable first") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto c = oracle::generated(seed, 12, 0.5);
    const auto q = build_proposal(c.net, fitted(c, 1), c.ev);
    std::vector<int> pos(q.size());
    for (std::size_t k = 0; k < q.order().size(); ++k) pos[q.order()[k]] = static_cast<int>(k);
    for (VarId v : q.order()) {
      if (c.ev.observed(v)) continue;
      for (VarId u : q.table(v).context) CHECK(pos[u] < pos[v]);
    }
  }
}

TEST_CASE("anneal update examples") {
  const auto q = coin(0.5);
  const std::vector<SampleRecord> batch{record({0}, 0.0), record({0}, 0.0), record({0}, 0.0), record({1}, 0.0)};

  const auto same = anneal_update(q, batch, 0.0);
  CHECK(same.table(0).probs == q.table(0).probs);

  const auto blend = anneal_update(q, batch, 0.12);
  CHECK(blend.table(0).probs[0] == doctest::Approx(0.53).epsilon(1e-12));
  CHECK(blend.table(0).probs[1] == doctest::Approx(0.47).epsilon(1e-12));

  const std::vector<SampleRecord> zeros{record({0}, 0.0), record({0}, 0.0)};
  const auto point = anneal_update(q, zeros, 1.0);
  CHECK(point.table(0).probs[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(point.table(0).probs[1] > 0.0);  // previously positive entries keep the floor

  // counts are weighted by importance ratios
  const std::vector<SampleRecord> weighted{record({0}, std::log(3.0)), record({1}, 0.0)};
  const auto w = anneal_update(q, weighted, 1.0);
  CHECK(w.table(0).probs[0] == doctest::Approx(0.75).epsilon(1e-12));

  // infeasible draws carry no weight
  const std::vector<SampleRecord> dead{record({1}, log_zero)};
  CHECK(anneal_update(q, dead, 0.5).table(0).probs == q.table(0).probs);
}

TEST_CASE("anneal update keeps zeros and row sums") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto c = oracle::generated(seed, 10, 0.5);
    const auto q = build_proposal(c.net, fitted(c, 1), c.ev);
    Rng rng(seed);
    std::vector<SampleRecord> batch;
    for (int i = 0; i < 300; ++i) batch.push_back(draw_sample(q, c.net, rng));
    const auto u = anneal_update(q, batch, 0.3);
    CHECK(u.max_row_deviation() <= 1e-9);
    for (VarId v : q.order()) {
      if (c.ev.observed(v)) continue;
      for (std::size_t i = 0; i < q.table(v).probs.size(); ++i)
        if (q.table(v).probs[i] == 0.0) CHECK(u.table(v).probs[i] == 0.0);
    }
    CHECK(oracle::proposal_stats(u, c.net, c.ev).dominated);
  }
}

TEST_CASE("direct transform examples") {
  const auto net = BayesianNetwork({oracle::binary("A"), oracle::binary("B")},
                                   {oracle::cpt(0, {}, {0.05, 0.95}), oracle::cpt(1, {}, {0.3, 0.7})});
  const SimplifiedNetwork s = unsimplified(net);

  const auto sharp = direct_transform(s, Direction::sharpen, 0.1, 0.2);
  const double lo = std::pow(0.05, 1.2);
  const double hi = std::pow(0.95, 0.8);
  CHECK(lo == doctest::Approx(0.027464).epsilon(1e-4));
  CHECK(hi == doctest::Approx(0.959785).epsilon(1e-4));
  CHECK(sharp.network.cpt(0).table[0] == doctest::Approx(lo / (lo + hi)).epsilon(1e-12));
  CHECK(sharp.network.cpt(0).table[1] == doctest::Approx(hi / (lo + hi)).epsilon(1e-12));
  // entries inside the band are untouched
  CHECK(sharp.network.cpt(1).table == net.cpt(1).table);

  const auto flat = direct_transform(s, Direction::flatten, 0.1, 0.2);
  const double flo = std::pow(0.05, 0.8);
  const double fhi = std::pow(0.95, 1.2);
  CHECK(flat.network.cpt(0).table[0] == doctest::Approx(flo / (flo + fhi)).epsilon(1e-12));
  CHECK(flat.network.cpt(0).table[0] > 0.05);

  CHECK_THROWS_AS(direct_transform(s, Direction::sharpen, 0.0, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(direct_transform(s, Direction::sharpen, 0.5, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(direct_transform(s, Direction::sharpen, 0.1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(direct_transform(s, Direction::sharpen, 0.1, 1.0), std::invalid_argument);
}

TEST_CASE("one-step pruning wastes fewer draws than the plain prior") {
  long prior_dead = 0;
  long pruned_dead = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto c = oracle::generated(seed, 12, 0.6);
    const auto lw = prior_proposal(c.net, c.ev);
    const auto sis = feasible_prior_proposal(c.net, c.ev);
    CHECK(oracle::proposal_stats(sis, c.net, c.ev).dominated);
    CHECK(sis.max_row_deviation() <= 1e-9);
    Rng a(seed);
    Rng b(seed);
    for (int i = 0; i < 500; ++i) {
      prior_dead += std::isinf(draw_sample(lw, c.net, a).log_ratio);
      pruned_dead += std::isinf(draw_sample(sis, c.net, b).log_ratio);
    }
  }
  CHECK(pruned_dead < prior_dead);
}

TEST_CASE("proposal constructor validation") {
  std::vector<ConditionalTable> t(2);
  t[0] = {0, 2, {1}, {2}, {0.5, 0.5, 0.5, 0.5}};
  t[1] = {1, 2, {}, {}, {0.5, 0.5}};
  CHECK_THROWS(ProposalDistribution({0, 1}, t, Evidence(2)));  // context after child
  CHECK_NOTHROW(ProposalDistribution({1, 0}, t, Evidence(2)));
  CHECK_THROWS(ProposalDistribution({1, 1}, t, Evidence(2)));
}

TEST_CASE("proposal json") {
  const auto gate = oracle::or_gate();
  const auto ev = oracle::observe(gate, {{"D", "1"}});
  const auto doc = nlohmann::json::parse(proposal_to_json(build_proposal(gate, unsimplified(gate), ev), gate));
  CHECK(doc.contains("order"));
  CHECK(doc.contains("tables"));
  CHECK(doc.contains("evidence"));
  CHECK(doc["order"].size() == 3);
}
