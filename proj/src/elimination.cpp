#include "varis/elimination.hpp"

#include <algorithm>
#include <limits>
#include <tuple>

namespace varis {

namespace {

template <typename Graph>
std::size_t fill_count(const Graph& g, VarId v) {
  const auto& nb = g.at(v);
  std::size_t fill = 0;
  for (auto a = nb.begin(); a != nb.end(); ++a)
    for (auto b = std::next(a); b != nb.end(); ++b)
      if (!g.at(*a).count(*b)) ++fill;
  return fill;
}

template <typename Graph>
void eliminate_vertex(Graph& g, VarId v) {
  const std::set<VarId> nb = g.at(v);
  for (VarId a : nb) {
    g.at(a).erase(v);
    for (VarId b : nb)
      if (a != b) g.at(a).insert(b);
  }
  g.at(v).clear();
}

}  // namespace

int EliminationOrder::induced_width() const {
  int w = 1;
  for (int c : cluster_sizes) w = std::max(w, c);
  return w - 1;
}

std::vector<std::set<VarId>> moral_graph(const BayesianNetwork& net) {
  std::vector<std::set<VarId>> g(net.size());
  for (const auto& c : net.cpts()) {
    for (VarId p : c.parents) {
      g[p].insert(c.child);
      g[c.child].insert(p);
      for (VarId q : c.parents)
        if (p != q) g[p].insert(q);
    }
  }
  return g;
}

EliminationOrder min_fill_order(const BayesianNetwork& net) { return min_fill_order(moral_graph(net)); }

EliminationOrder min_fill_order(std::vector<std::set<VarId>> g) {
  const std::size_t n = g.size();
  std::vector<bool> done(n, false);
  EliminationOrder out;
  for (std::size_t step = 0; step < n; ++step) {
    VarId best = -1;
    std::tuple<std::size_t, std::size_t, VarId> best_key{};
    for (std::size_t v = 0; v < n; ++v) {
      if (done[v]) continue;
      std::tuple<std::size_t, std::size_t, VarId> key{fill_count(g, static_cast<VarId>(v)), g[v].size(), static_cast<VarId>(v)};
      if (best < 0 || key < best_key) {
        best = static_cast<VarId>(v);
        best_key = key;
      }
    }
    out.order.push_back(best);
    out.cluster_sizes.push_back(1 + static_cast<int>(g[best].size()));
    eliminate_vertex(g, best);
    done[best] = true;
  }
  return out;
}

std::vector<VarId> min_fill_sequence(std::map<VarId, std::set<VarId>> g, const std::vector<VarId>& eliminate) {
  std::set<VarId> remaining(eliminate.begin(), eliminate.end());
  std::vector<VarId> out;
  while (!remaining.empty()) {
    VarId best = -1;
    std::tuple<std::size_t, std::size_t, VarId> best_key{};
    for (VarId v : remaining) {
      std::tuple<std::size_t, std::size_t, VarId> key{fill_count(g, v), g.at(v).size(), v};
      if (best < 0 || key < best_key) {
        best = v;
        best_key = key;
      }
    }
    out.push_back(best);
    eliminate_vertex(g, best);
    remaining.erase(best);
  }
  return out;
}

bool is_permutation_of(const std::vector<VarId>& order, std::size_t n) {
  if (order.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (VarId v : order) {
    if (v < 0 || static_cast<std::size_t>(v) >= n || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

}  // namespace varis
