#include "varis/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "varis/logspace.hpp"

namespace varis {

namespace {

constexpr double kRowSumTolerance = 1e-6;
// Rows closer than this to unit sum are left untouched, which makes
// renormalization idempotent across serialize/parse round trips.
constexpr double kRenormalizeThreshold = 1e-12;

std::size_t product(std::span<const int> cards) {
  std::size_t n = 1;
  for (int c : cards) n *= static_cast<std::size_t>(c);
  return n;
}

// Returns one directed cycle (as variable indices, first repeated at the end
// omitted) or an empty vector when the parent graph is acyclic.
std::vector<int> find_cycle(const std::vector<std::vector<int>>& parents) {
  const int n = static_cast<int>(parents.size());
  std::vector<int> color(n, 0), via(n, -1);
  for (int root = 0; root < n; ++root) {
    if (color[root] != 0) continue;
    // iterative DFS along parent edges
    std::vector<std::pair<int, std::size_t>> stack{{root, 0}};
    color[root] = 1;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      if (next < parents[v].size()) {
        const int p = parents[v][next++];
        if (color[p] == 1) {
          std::vector<int> cycle{p};
          for (int u = v; u != p; u = via[u]) cycle.push_back(u);
          // cycle is p <- v <- ... ; report in edge direction p -> ... -> v
          std::reverse(cycle.begin() + 1, cycle.end());
          return cycle;
        }
        if (color[p] == 0) {
          color[p] = 1;
          via[p] = v;
          stack.emplace_back(p, 0);
        }
      } else {
        color[v] = 2;
        stack.pop_back();
      }
    }
  }
  return {};
}

}  // namespace

std::optional<int> Variable::state_index(std::string_view label) const {
  for (std::size_t i = 0; i < states.size(); ++i)
    if (states[i] == label) return static_cast<int>(i);
  return std::nullopt;
}

std::size_t Cpt::row_count() const { return product(parent_cards); }

std::size_t Cpt::row_index(std::span<const int> assignment) const {
  std::size_t r = 0;
  for (std::size_t k = 0; k < parents.size(); ++k)
    r = r * static_cast<std::size_t>(parent_cards[k]) + static_cast<std::size_t>(assignment[parents[k]]);
  return r;
}

bool Cpt::is_deterministic_row(std::size_t r) const {
  int ones = 0;
  for (double p : row(r)) {
    if (p == 1.0) ++ones;
    else if (p != 0.0) return false;
  }
  return ones == 1;
}

std::vector<Finding> validate_network(const NetworkSpec& spec) {
  std::vector<Finding> out;
  auto add = [&](Finding::Kind k, std::string msg) { out.push_back({k, std::move(msg), {}, 0.0}); };

  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < spec.variables.size(); ++i) {
    const auto& v = spec.variables[i];
    if (!index.emplace(v.name, static_cast<int>(i)).second)
      add(Finding::Kind::duplicate, "duplicate variable name '" + v.name + "'");
    if (v.states.size() < 2)
      add(Finding::Kind::shape, "variable '" + v.name + "' needs at least 2 states");
    std::set<std::string> seen;
    for (const auto& s : v.states)
      if (!seen.insert(s).second)
        add(Finding::Kind::duplicate, "variable '" + v.name + "' repeats state '" + s + "'");
  }

  std::vector<int> cpt_count(spec.variables.size(), 0);
  std::vector<std::vector<int>> parents(spec.variables.size());
  for (const auto& c : spec.cpts) {
    auto it = index.find(c.child);
    if (it == index.end()) {
      add(Finding::Kind::reference, "cpt for unknown variable '" + c.child + "'");
      continue;
    }
    const int child = it->second;
    ++cpt_count[child];
    bool parents_ok = true;
    std::vector<int> cards;
    std::set<int> seen;
    for (const auto& p : c.parents) {
      auto pit = index.find(p);
      if (pit == index.end()) {
        add(Finding::Kind::reference, "cpt '" + c.child + "' names unknown parent '" + p + "'");
        parents_ok = false;
        continue;
      }
      if (pit->second == child) {
        out.push_back({Finding::Kind::cycle, "'" + c.child + "' is its own parent", {c.child}, 0.0});
        parents_ok = false;
        continue;
      }
      if (!seen.insert(pit->second).second) {
        add(Finding::Kind::duplicate, "cpt '" + c.child + "' repeats parent '" + p + "'");
        parents_ok = false;
        continue;
      }
      parents[child].push_back(pit->second);
      cards.push_back(static_cast<int>(spec.variables[pit->second].states.size()));
    }
    if (!parents_ok) continue;
    const std::size_t rows = product(cards);
    const std::size_t width = spec.variables[child].states.size();
    if (c.table.size() != rows) {
      add(Finding::Kind::shape, "cpt '" + c.child + "' has " + std::to_string(c.table.size()) +
                                    " rows, expected " + std::to_string(rows));
      continue;
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& row = c.table[r];
      if (row.size() != width) {
        add(Finding::Kind::shape, "cpt '" + c.child + "' row " + std::to_string(r) + " has " +
                                      std::to_string(row.size()) + " entries, expected " +
                                      std::to_string(width));
        continue;
      }
      bool entries_ok = true;
      double sum = 0.0;
      for (double p : row) {
        if (!std::isfinite(p) || p < 0.0 || p > 1.0) entries_ok = false;
        sum += p;
      }
      if (!entries_ok) {
        add(Finding::Kind::bad_entry,
            "cpt '" + c.child + "' row " + std::to_string(r) + " has an entry outside [0,1]");
        continue;
      }
      const double dev = std::abs(sum - 1.0);
      if (dev > kRowSumTolerance) {
        std::ostringstream msg;
        msg << "cpt '" << c.child << "' row " << r << " sums to " << sum << " (deviation " << dev << ")";
        out.push_back({Finding::Kind::row_sum, msg.str(), {}, dev});
      }
    }
  }
  for (std::size_t i = 0; i < spec.variables.size(); ++i) {
    if (cpt_count[i] == 0) add(Finding::Kind::reference, "no cpt for variable '" + spec.variables[i].name + "'");
    if (cpt_count[i] > 1) add(Finding::Kind::duplicate, "multiple cpts for variable '" + spec.variables[i].name + "'");
  }
  if (auto cycle = find_cycle(parents); !cycle.empty()) {
    Finding f{Finding::Kind::cycle, "", {}, 0.0};
    std::string msg = "cycle: ";
    for (std::size_t k = 0; k < cycle.size(); ++k) {
      f.cycle.push_back(spec.variables[cycle[k]].name);
      msg += spec.variables[cycle[k]].name + " -> ";
    }
    msg += spec.variables[cycle.front()].name;
    f.message = msg;
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<Finding> validate_network(const BayesianNetwork& net) {
  return validate_network(to_spec(net));
}

BayesianNetwork build_network(const NetworkSpec& spec) {
  if (auto findings = validate_network(spec); !findings.empty())
    throw ValidationError(findings.front().message);
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < spec.variables.size(); ++i) index[spec.variables[i].name] = static_cast<int>(i);
  std::vector<Cpt> cpts(spec.variables.size());
  for (const auto& c : spec.cpts) {
    Cpt cpt;
    cpt.child = index.at(c.child);
    for (const auto& p : c.parents) cpt.parents.push_back(index.at(p));
    for (const auto& row : c.table) cpt.table.insert(cpt.table.end(), row.begin(), row.end());
    cpts[cpt.child] = std::move(cpt);
  }
  return BayesianNetwork(spec.variables, std::move(cpts));
}

NetworkSpec to_spec(const BayesianNetwork& net) {
  NetworkSpec spec;
  spec.variables = net.variables();
  for (const auto& c : net.cpts()) {
    NetworkSpec::CptSpec cs;
    cs.child = net.variable(c.child).name;
    for (VarId p : c.parents) cs.parents.push_back(net.variable(p).name);
    for (std::size_t r = 0; r < c.row_count(); ++r) {
      auto row = c.row(r);
      cs.table.emplace_back(row.begin(), row.end());
    }
    spec.cpts.push_back(std::move(cs));
  }
  return spec;
}

BayesianNetwork::BayesianNetwork(std::vector<Variable> variables, std::vector<Cpt> cpts)
    : variables_(std::move(variables)), cpts_(std::move(cpts)) {
  const std::size_t n = variables_.size();
  if (cpts_.size() != n) throw ValidationError("expected exactly one cpt per variable");
  children_.assign(n, {});
  std::vector<std::vector<int>> parents(n);
  for (std::size_t v = 0; v < n; ++v) {
    Cpt& c = cpts_[v];
    if (c.child != static_cast<VarId>(v)) throw ValidationError("cpt list must be indexed by child");
    c.child_card = variables_[v].cardinality();
    if (c.child_card < 2) throw ValidationError("variable '" + variables_[v].name + "' needs at least 2 states");
    c.parent_cards.clear();
    for (VarId p : c.parents) {
      if (p < 0 || static_cast<std::size_t>(p) >= n || p == c.child)
        throw ValidationError("bad parent reference in cpt '" + variables_[v].name + "'");
      c.parent_cards.push_back(variables_[p].cardinality());
      children_[p].push_back(static_cast<VarId>(v));
    }
    parents[v] = c.parents;
    if (c.table.size() != c.row_count() * static_cast<std::size_t>(c.child_card))
      throw ValidationError("cpt '" + variables_[v].name + "' has the wrong number of entries");
    for (std::size_t r = 0; r < c.row_count(); ++r) {
      auto row = c.row(r);
      double sum = 0.0;
      for (double p : row) {
        if (!std::isfinite(p) || p < 0.0 || p > 1.0)
          throw ValidationError("cpt '" + variables_[v].name + "' has an entry outside [0,1]");
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowSumTolerance)
        throw ValidationError("cpt '" + variables_[v].name + "' row " + std::to_string(r) + " does not sum to 1");
      if (std::abs(sum - 1.0) > kRenormalizeThreshold)
        for (double& p : row) p /= sum;
    }
  }
  if (!find_cycle(parents).empty()) throw ValidationError("parent relation has a cycle");
  for (auto& ch : children_) std::sort(ch.begin(), ch.end());
}

std::vector<int> BayesianNetwork::cardinalities() const {
  std::vector<int> out;
  out.reserve(variables_.size());
  for (const auto& v : variables_) out.push_back(v.cardinality());
  return out;
}

std::optional<VarId> BayesianNetwork::find(std::string_view name) const {
  for (std::size_t i = 0; i < variables_.size(); ++i)
    if (variables_[i].name == name) return static_cast<VarId>(i);
  return std::nullopt;
}

VarId BayesianNetwork::id(std::string_view name) const {
  if (auto v = find(name)) return *v;
  throw std::out_of_range("unknown variable '" + std::string(name) + "'");
}

std::size_t BayesianNetwork::edge_count() const {
  std::size_t e = 0;
  for (const auto& c : cpts_) e += c.parents.size();
  return e;
}

Evidence Evidence::resolve(const BayesianNetwork& net, const EvidenceLabels& labels) {
  Evidence ev(net.size());
  for (const auto& [name, label] : labels) {
    auto v = net.find(name);
    if (!v) throw ValidationError("evidence names unknown variable '" + name + "'");
    auto s = net.variable(*v).state_index(label);
    if (!s) throw ValidationError("evidence gives unknown state '" + label + "' for '" + name + "'");
    ev.set(*v, *s);
  }
  return ev;
}

std::size_t Evidence::observed_count() const {
  return static_cast<std::size_t>(std::count_if(value_.begin(), value_.end(), [](int x) { return x != kUnassigned; }));
}

EvidenceLabels Evidence::labels(const BayesianNetwork& net) const {
  EvidenceLabels out;
  for (std::size_t v = 0; v < value_.size(); ++v)
    if (value_[v] != kUnassigned) out[net.variable(static_cast<VarId>(v)).name] = net.variable(static_cast<VarId>(v)).states[value_[v]];
  return out;
}

double joint_log_prob(const BayesianNetwork& net, std::span<const int> full) {
  if (full.size() != net.size()) throw std::invalid_argument("assignment size does not match network");
  for (std::size_t v = 0; v < full.size(); ++v)
    if (full[v] < 0 || full[v] >= net.cardinality(static_cast<VarId>(v)))
      throw std::invalid_argument("incomplete assignment: '" + net.variable(static_cast<VarId>(v)).name + "' unassigned");
  double lp = 0.0;
  for (const auto& c : net.cpts()) {
    const double p = c.prob(full);
    if (p == 0.0) return log_zero;
    lp += std::log(p);
  }
  return lp;
}

std::vector<VarId> topological_order(const BayesianNetwork& net) {
  const std::size_t n = net.size();
  std::vector<int> pending(n);
  std::set<VarId> ready;
  for (std::size_t v = 0; v < n; ++v) {
    pending[v] = static_cast<int>(net.parents(static_cast<VarId>(v)).size());
    if (pending[v] == 0) ready.insert(static_cast<VarId>(v));
  }
  std::vector<VarId> order;
  order.reserve(n);
  while (!ready.empty()) {
    const VarId v = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(v);
    for (VarId c : net.children(v))
      if (--pending[c] == 0) ready.insert(c);
  }
  if (order.size() != n) throw ValidationError("parent relation has a cycle");
  return order;
}

bool next_assignment(std::vector<int>& assignment, std::span<const VarId> vars, std::span<const int> cards) {
  for (std::size_t k = vars.size(); k-- > 0;) {
    const VarId v = vars[k];
    if (++assignment[v] < cards[v]) return true;
    assignment[v] = 0;
  }
  return false;
}

}  // namespace varis
