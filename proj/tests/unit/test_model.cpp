#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "oracle.hpp"
#include "varis/generator.hpp"
#include "varis/logspace.hpp"
#include "varis/model.hpp"
#include "varis/network_io.hpp"

using namespace varis;

namespace {

NetworkSpec spec_of(std::vector<Variable> vars, std::vector<NetworkSpec::CptSpec> cpts) {
  NetworkSpec s;
  s.variables = std::move(vars);
  s.cpts = std::move(cpts);
  return s;
}

const char* kChainDoc = R"({
  "variables": [
    {"name": "A", "states": ["0", "1"]},
    {"name": "B", "states": ["0", "1"]}
  ],
  "cpts": [
    {"child": "A", "parents": [], "table": [[0.7, 0.3]]},
    {"child": "B", "parents": ["A"], "table": [[0.8, 0.2], [0.1, 0.9]]}
  ],
  "evidence": {"B": "1"}
})";

}  // namespace

TEST_CASE("cpt rows follow first-parent-major layout") {
  const auto net = oracle::or_gate();
  const Cpt& d = net.cpt(2);
  CHECK(d.row_count() == 4);
  std::vector<int> x{1, 0, 0};
  CHECK(d.row_index(x) == 2);
  x = {0, 1, 0};
  CHECK(d.row_index(x) == 1);
  CHECK(d.is_deterministic_row(0));
  CHECK(net.edge_count() == 2);
  CHECK(net.children(0) == std::vector<VarId>{2});
}

TEST_CASE("validate accepts a proper chain") {
  auto s = spec_of({oracle::binary("A"), oracle::binary("B")},
                   {{"A", {}, {{0.5, 0.5}}}, {"B", {"A"}, {{0.2, 0.8}, {0.6, 0.4}}}});
  CHECK(validate_network(s).empty());
  CHECK(validate_network(build_network(s)).empty());
}

TEST_CASE("validate reports a two-node cycle") {
  auto s = spec_of({oracle::binary("A"), oracle::binary("B")},
                   {{"A", {"B"}, {{0.5, 0.5}, {0.5, 0.5}}}, {"B", {"A"}, {{0.5, 0.5}, {0.5, 0.5}}}});
  const auto f = validate_network(s);
  REQUIRE(f.size() == 1);
  CHECK(f[0].kind == Finding::Kind::cycle);
  CHECK(std::set<std::string>(f[0].cycle.begin(), f[0].cycle.end()) == std::set<std::string>{"A", "B"});
  CHECK_THROWS_AS(build_network(s), ValidationError);
}

TEST_CASE("validate reports row sum deviation") {
  auto s = spec_of({oracle::binary("A")}, {{"A", {}, {{0.5, 0.6}}}});
  const auto f = validate_network(s);
  REQUIRE(f.size() == 1);
  CHECK(f[0].kind == Finding::Kind::row_sum);
  CHECK(f[0].deviation == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(f[0].message.find("'A'") != std::string::npos);
}

TEST_CASE("validate reports references, duplicates and entries") {
  auto unknown = spec_of({oracle::binary("A")}, {{"A", {"Z"}, {{0.5, 0.5}, {0.5, 0.5}}}});
  CHECK(validate_network(unknown).front().kind == Finding::Kind::reference);
  auto dup = spec_of({oracle::binary("A"), oracle::binary("A")}, {{"A", {}, {{0.5, 0.5}}}});
  CHECK(validate_network(dup).front().kind == Finding::Kind::duplicate);
  auto neg = spec_of({oracle::binary("A")}, {{"A", {}, {{-0.5, 1.5}}}});
  CHECK(validate_network(neg).front().kind == Finding::Kind::bad_entry);
  auto missing = spec_of({oracle::binary("A"), oracle::binary("B")}, {{"A", {}, {{0.5, 0.5}}}});
  CHECK(validate_network(missing).front().kind == Finding::Kind::reference);
}

TEST_CASE("rows within tolerance are renormalized exactly") {
  BayesianNetwork net({oracle::binary("A")}, {oracle::cpt(0, {}, {0.3 + 4e-7, 0.7})});
  const auto row = net.cpt(0).row(0);
  CHECK(std::abs(row[0] + row[1] - 1.0) <= 4e-16);
  CHECK(row[0] != 0.3 + 4e-7);
  CHECK_THROWS_AS(BayesianNetwork({oracle::binary("A")}, {oracle::cpt(0, {}, {0.3, 0.6})}), ValidationError);
}

TEST_CASE("joint_log_prob examples") {
  const auto net = oracle::chain(0.3, 0.2, 0.9);
  std::vector<int> x{1, 1};
  CHECK(joint_log_prob(net, x) == doctest::Approx(std::log(0.27)).epsilon(1e-14));
  const auto gate = oracle::or_gate();
  std::vector<int> bad{1, 0, 0};
  CHECK(is_log_zero(joint_log_prob(gate, bad)));
  BayesianNetwork single({oracle::binary("A")}, {oracle::cpt(0, {}, {0.5, 0.5})});
  for (int s = 0; s < 2; ++s) {
    std::vector<int> y{s};
    CHECK(joint_log_prob(single, y) == doctest::Approx(std::log(0.5)));
  }
  std::vector<int> partial{1, kUnassigned};
  CHECK_THROWS_AS(joint_log_prob(net, partial), std::invalid_argument);
}

TEST_CASE("joint distribution sums to one") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto c = oracle::generated(seed, 8 + static_cast<int>(seed % 9), 0.4, 0);
    LogSumAccumulator acc;
    oracle::for_each_instance(c.net, nullptr, [&](const std::vector<int>& x) { acc.add(joint_log_prob(c.net, x)); });
    CHECK(std::exp(acc.value()) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("topological order") {
  std::vector<Variable> vars{oracle::binary("A"), oracle::binary("B"), oracle::binary("C")};
  BayesianNetwork chain(vars, {oracle::cpt(0, {}, {0.5, 0.5}), oracle::cpt(1, {0}, {0.5, 0.5, 0.5, 0.5}),
                               oracle::cpt(2, {1}, {0.5, 0.5, 0.5, 0.5})});
  CHECK(topological_order(chain) == std::vector<VarId>{0, 1, 2});

  BayesianNetwork indep({oracle::binary("A"), oracle::binary("B")},
                        {oracle::cpt(0, {}, {0.5, 0.5}), oracle::cpt(1, {}, {0.5, 0.5})});
  CHECK(topological_order(indep) == std::vector<VarId>{0, 1});

  // declared child-first: D(A,B,C order scrambled)
  std::vector<Variable> dv{oracle::binary("D"), oracle::binary("B"), oracle::binary("C"), oracle::binary("A")};
  const std::vector<double> u2{0.5, 0.5, 0.5, 0.5};
  BayesianNetwork diamond(dv, {oracle::cpt(0, {1, 2}, {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5}),
                               oracle::cpt(1, {3}, u2), oracle::cpt(2, {3}, u2), oracle::cpt(3, {}, {0.5, 0.5})});
  const auto order = topological_order(diamond);
  CHECK(order.front() == 3);
  CHECK(order.back() == 0);
}

TEST_CASE("evidence resolution") {
  const auto net = oracle::chain(0.3, 0.2, 0.9);
  const auto ev = Evidence::resolve(net, {{"B", "1"}});
  CHECK(ev.observed(1));
  CHECK_FALSE(ev.observed(0));
  CHECK(ev.value(1) == 1);
  CHECK(ev.labels(net) == EvidenceLabels{{"B", "1"}});
  CHECK_THROWS_AS(Evidence::resolve(net, {{"Z", "1"}}), ValidationError);
  CHECK_THROWS_AS(Evidence::resolve(net, {{"B", "7"}}), ValidationError);
}

TEST_CASE("parse a chain document") {
  const auto p = parse_network(kChainDoc);
  CHECK(p.network.size() == 2);
  CHECK(p.network.edge_count() == 1);
  REQUIRE(p.evidence);
  CHECK(p.evidence->at("B") == "1");
  CHECK(p.network.cpt(1).row(1)[1] == 0.9);
}

TEST_CASE("parse errors carry context") {
  std::string bad_sum = kChainDoc;
  bad_sum.replace(bad_sum.find("[0.1, 0.9]"), 10, "[0.1, 0.8]");
  try {
    parse_network(bad_sum);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("'B'") != std::string::npos);
  }

  try {
    parse_network("{\n  \"variables\": [\n  ,\n]}");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  std::string bad_entry = kChainDoc;
  bad_entry.replace(bad_entry.find("[0.8, 0.2]"), 10, "[0.8, \"x\"]");
  try {
    parse_network(bad_entry);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("cpts[1].table[0][1]") != std::string::npos);
  }

  std::string extra = kChainDoc;
  extra.replace(extra.find("\"evidence\""), 10, "\"bogus\"");
  CHECK_THROWS_AS(parse_network(extra), ParseError);
  CHECK_THROWS_AS(parse_network(R"({"variables": [], "cpts": [], "deleted_edges": []})"), ParseError);
}

TEST_CASE("serialize is canonical and round-trips") {
  const auto p = parse_network(kChainDoc);
  const std::string a = serialize_network(p.network, p.evidence);
  const std::string b = serialize_network(p.network, p.evidence);
  CHECK(a == b);
  CHECK(a.find("\"evidence\"") != std::string::npos);
  const auto q = parse_network(a);
  CHECK(serialize_network(q.network, q.evidence) == a);
  CHECK(q.network.cpts()[1].table == p.network.cpts()[1].table);
  CHECK(*q.evidence == *p.evidence);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GeneratorConfig gc;
    gc.nodes = 9;
    gc.states = 2 + static_cast<int>(seed % 2);
    auto g = generate_random_network(gc, seed);
    const std::string doc = serialize_network(g.network, g.evidence);
    const auto back = parse_network(doc);
    for (std::size_t v = 0; v < g.network.size(); ++v) {
      CHECK(back.network.cpt(static_cast<VarId>(v)).table == g.network.cpt(static_cast<VarId>(v)).table);
      CHECK(back.network.parents(static_cast<VarId>(v)) == g.network.parents(static_cast<VarId>(v)));
    }
    CHECK(serialize_network(back.network, back.evidence) == doc);
  }
}

TEST_CASE("evidence keys are serialized sorted") {
  const auto net = oracle::or_gate();
  const std::string doc = serialize_network(net, EvidenceLabels{{"D", "0"}, {"A", "1"}});
  CHECK(doc.find("\"A\": \"1\"") < doc.find("\"D\": \"0\""));
}

TEST_CASE("generator is deterministic and valid") {
  GeneratorConfig gc;
  gc.nodes = 12;
  const auto a = generate_random_network(gc, 5);
  const auto b = generate_random_network(gc, 5);
  CHECK(serialize_network(a.network, a.evidence) == serialize_network(b.network, b.evidence));
  const auto c = generate_random_network(gc, 6);
  CHECK(serialize_network(a.network, a.evidence) != serialize_network(c.network, c.evidence));
}

TEST_CASE("generator meets its deterministic fraction and keeps P(e) > 0") {
  for (double phi : {0.0, 0.3, 0.5, 0.8, 1.0}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      GeneratorConfig gc;
      gc.nodes = 11;
      gc.det_fraction = phi;
      gc.evidence_leaves = 3;
      const auto g = generate_random_network(gc, seed);
      CHECK(validate_network(g.network).empty());
      std::size_t rows = 0, det = 0;
      for (const auto& cpt : g.network.cpts())
        for (std::size_t r = 0; r < cpt.row_count(); ++r) {
          ++rows;
          det += cpt.is_deterministic_row(r);
        }
      CHECK(static_cast<double>(det) >= phi * static_cast<double>(rows) - 1e-9);
      if (phi == 1.0) CHECK(det == rows);
      CHECK(g.evidence.size() == 3);
      const auto ev = Evidence::resolve(g.network, g.evidence);
      CHECK(oracle::likelihood(g.network, ev) > 0.0L);
    }
  }
}

TEST_CASE("generator observes leaves first") {
  GeneratorConfig gc;
  gc.nodes = 12;
  gc.evidence_leaves = kAllLeaves;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = generate_random_network(gc, seed);
    std::size_t leaves = 0;
    for (std::size_t v = 0; v < g.network.size(); ++v)
      if (g.network.children(static_cast<VarId>(v)).empty()) {
        ++leaves;
        CHECK(g.evidence.count(g.network.variable(static_cast<VarId>(v)).name) == 1);
      }
    CHECK(g.evidence.size() == leaves);
  }
}

TEST_CASE("generator rejects infeasible configs") {
  GeneratorConfig gc;
  gc.nodes = 4;
  gc.max_parents = 4;
  CHECK_THROWS_AS(generate_random_network(gc, 1), InfeasibleConfig);
  gc.max_parents = 2;
  gc.det_fraction = 1.5;
  CHECK_THROWS_AS(generate_random_network(gc, 1), InfeasibleConfig);
  gc.det_fraction = 0.5;
  gc.states = 1;
  CHECK_THROWS_AS(generate_random_network(gc, 1), InfeasibleConfig);
}
