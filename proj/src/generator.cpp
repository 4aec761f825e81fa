#include "varis/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "varis/rng.hpp"

namespace varis {

namespace {

template <typename T>
void shuffle(std::vector<T>& xs, Rng& rng) {
  for (std::size_t i = xs.size(); i > 1; --i) std::swap(xs[i - 1], xs[uniform_index(rng, i)]);
}

int sample_row(std::span<const double> row, Rng& rng) {
  const double u = uniform01(rng);
  double cum = 0.0;
  int last = -1;
  for (std::size_t s = 0; s < row.size(); ++s) {
    if (row[s] <= 0.0) continue;
    cum += row[s];
    last = static_cast<int>(s);
    if (u < cum) return last;
  }
  return last;
}

}  // namespace

GeneratedNetwork generate_random_network(const GeneratorConfig& cfg, std::uint64_t seed) {
  if (cfg.nodes < 1) throw InfeasibleConfig("need at least one node");
  if (cfg.max_parents < 0 || cfg.max_parents >= cfg.nodes)
    throw InfeasibleConfig("max parents must be in [0, nodes)");
  if (cfg.states < 2) throw InfeasibleConfig("need at least 2 states per variable");
  if (!(cfg.det_fraction >= 0.0 && cfg.det_fraction <= 1.0))
    throw InfeasibleConfig("deterministic fraction must be in [0, 1]");
  if (cfg.evidence_leaves < -1 || cfg.evidence_leaves > cfg.nodes)
    throw InfeasibleConfig("evidence count must be in [0, nodes]");

  Rng rng(derive_seed(seed, 0x6e6574));
  const int n = cfg.nodes;
  std::vector<Variable> vars;
  for (int i = 0; i < n; ++i) {
    Variable v{"X" + std::to_string(i), {}};
    for (int s = 0; s < cfg.states; ++s) v.states.push_back(std::to_string(s));
    vars.push_back(std::move(v));
  }

  std::vector<Cpt> cpts(n);
  for (int i = 0; i < n; ++i) {
    Cpt& c = cpts[i];
    c.child = i;
    const int k = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(std::min(cfg.max_parents, i)) + 1));
    std::vector<int> pool(i);
    std::iota(pool.begin(), pool.end(), 0);
    shuffle(pool, rng);
    c.parents.assign(pool.begin(), pool.begin() + k);
    std::sort(c.parents.begin(), c.parents.end());
    std::size_t rows = 1;
    for (int p = 0; p < k; ++p) rows *= static_cast<std::size_t>(cfg.states);
    c.table.assign(rows * static_cast<std::size_t>(cfg.states), 0.0);
  }

  // Deterministic rows are spread over the whole network. Rows with a parent
  // configuration are used first; a root only becomes a point mass when
  // there are not enough of them, since a deterministic root fixes its
  // whole subtree.
  std::vector<std::pair<int, std::size_t>> conditional, root;
  std::size_t total_rows = 0;
  for (int i = 0; i < n; ++i) {
    const std::size_t rows = cpts[i].table.size() / static_cast<std::size_t>(cfg.states);
    total_rows += rows;
    for (std::size_t r = 0; r < rows; ++r) (cpts[i].parents.empty() ? root : conditional).emplace_back(i, r);
  }
  shuffle(conditional, rng);
  shuffle(root, rng);
  conditional.insert(conditional.end(), root.begin(), root.end());
  const auto det_rows = std::min(
      total_rows, static_cast<std::size_t>(std::ceil(cfg.det_fraction * static_cast<double>(total_rows) - 1e-12)));
  std::vector<std::vector<bool>> deterministic(n);
  for (int i = 0; i < n; ++i) deterministic[i].assign(cpts[i].table.size() / static_cast<std::size_t>(cfg.states), false);
  for (std::size_t d = 0; d < det_rows; ++d) deterministic[conditional[d].first][conditional[d].second] = true;

  for (int i = 0; i < n; ++i) {
    Cpt& c = cpts[i];
    const std::size_t rows = deterministic[i].size();
    for (std::size_t r = 0; r < rows; ++r) {
      double* row = c.table.data() + r * static_cast<std::size_t>(cfg.states);
      if (deterministic[i][r]) {
        row[uniform_index(rng, static_cast<std::uint64_t>(cfg.states))] = 1.0;
        continue;
      }
      // entries bounded away from zero so stochastic rows stay stochastic
      double sum = 0.0;
      for (int s = 0; s < cfg.states; ++s) sum += row[s] = 0.05 + uniform01(rng);
      for (int s = 0; s < cfg.states; ++s) row[s] /= sum;
    }
  }
  BayesianNetwork net(std::move(vars), std::move(cpts));

  // one forward sample in declaration order (parents have lower indices)
  std::vector<int> x(n, 0);
  for (int i = 0; i < n; ++i) {
    const Cpt& c = net.cpt(i);
    x[i] = sample_row(c.row(c.row_index(x)), rng);
  }

  std::vector<int> leaves, others;
  for (int i = 0; i < n; ++i) (net.children(i).empty() ? leaves : others).push_back(i);
  shuffle(leaves, rng);
  const int wanted = cfg.evidence_leaves == kAllLeaves ? static_cast<int>(leaves.size()) : cfg.evidence_leaves;
  std::vector<int> observed(leaves.begin(), leaves.begin() + std::min<std::ptrdiff_t>(wanted, static_cast<std::ptrdiff_t>(leaves.size())));
  for (auto it = others.rbegin(); it != others.rend() && static_cast<int>(observed.size()) < wanted; ++it)
    observed.push_back(*it);

  GeneratedNetwork out{std::move(net), {}};
  for (int v : observed) out.evidence[out.network.variable(v).name] = out.network.variable(v).states[x[v]];
  return out;
}

}  // namespace varis
