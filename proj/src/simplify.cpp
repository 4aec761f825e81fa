#include "varis/simplify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>

#include "varis/errors.hpp"
#include "varis/logspace.hpp"
#include "varis/network_io.hpp"
#include "varis/parallel.hpp"

namespace varis {

namespace {

std::vector<std::vector<VarId>> parent_lists(const BayesianNetwork& net) {
  std::vector<std::vector<VarId>> out;
  for (const auto& c : net.cpts()) out.push_back(c.parents);
  return out;
}

BayesianNetwork with_cpt(const BayesianNetwork& net, Cpt cpt) {
  std::vector<Cpt> cpts = net.cpts();
  cpts[cpt.child] = std::move(cpt);
  return BayesianNetwork(net.variables(), std::move(cpts));
}

std::vector<bool> descendants(const BayesianNetwork& net, VarId v) {
  std::vector<bool> seen(net.size(), false);
  std::vector<VarId> stack(net.children(v).begin(), net.children(v).end());
  while (!stack.empty()) {
    const VarId u = stack.back();
    stack.pop_back();
    if (seen[u]) continue;
    seen[u] = true;
    for (VarId c : net.children(u)) stack.push_back(c);
  }
  return seen;
}

std::vector<VarId> family(const Cpt& c) {
  std::vector<VarId> f = c.parents;
  f.push_back(c.child);
  return f;
}

double floored_log(double p, double floor) { return p > 0.0 ? std::log(p) : std::log(floor); }

// Visits every entry of `marginal` (log space) with the dense assignment it encodes.
template <typename Visit>
void for_each_entry(const Factor& marginal, std::vector<int>& x, Visit visit) {
  const auto& scope = marginal.scope();
  const auto& cards = marginal.cards();
  std::fill(x.begin(), x.end(), 0);
  for (VarId v : scope) x[v] = 0;
  const auto& values = marginal.log_values();
  for (std::size_t idx = 0; idx < values.size(); ++idx) {
    visit(std::exp(values[idx]), static_cast<const std::vector<int>&>(x));
    for (std::size_t k = scope.size(); k-- > 0;) {
      if (++x[scope[k]] < cards[k]) break;
      x[scope[k]] = 0;
    }
  }
}

void floor_and_normalize(std::span<double> row, double floor) {
  double sum = 0.0;
  for (double p : row) sum += p;
  for (double& p : row) p = std::max(p / sum, floor);
  sum = 0.0;
  for (double p : row) sum += p;
  for (double& p : row) p /= sum;
}

}  // namespace

int induced_width(const std::vector<std::vector<VarId>>& parents) {
  std::vector<std::set<VarId>> g(parents.size());
  for (std::size_t v = 0; v < parents.size(); ++v)
    for (VarId p : parents[v]) {
      g[p].insert(static_cast<VarId>(v));
      g[v].insert(p);
      for (VarId q : parents[v])
        if (p != q) g[p].insert(q);
    }
  return min_fill_order(std::move(g)).induced_width();
}

int induced_width(const BayesianNetwork& net) { return induced_width(parent_lists(net)); }

Cpt average_out_parent(const BayesianNetwork& net, VarId u, VarId v) {
  const Cpt& old = net.cpt(v);
  const auto it = std::find(old.parents.begin(), old.parents.end(), u);
  if (it == old.parents.end()) throw std::invalid_argument("not an edge of the network");
  const std::size_t k = static_cast<std::size_t>(it - old.parents.begin());
  Cpt c;
  c.child = v;
  c.parents = old.parents;
  c.parents.erase(c.parents.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<int> cards = old.parent_cards;
  const int card_u = cards[k];
  cards.erase(cards.begin() + static_cast<std::ptrdiff_t>(k));
  std::size_t rows = 1;
  for (int cd : cards) rows *= static_cast<std::size_t>(cd);
  c.table.assign(rows * static_cast<std::size_t>(old.child_card), 0.0);
  std::vector<int> digit(old.parents.size(), 0);
  for (std::size_t r = 0; r < old.row_count(); ++r) {
    std::size_t nr = 0;
    for (std::size_t d = 0; d < digit.size(); ++d)
      if (d != k) nr = nr * static_cast<std::size_t>(old.parent_cards[d]) + static_cast<std::size_t>(digit[d]);
    auto src = old.row(r);
    for (int s = 0; s < old.child_card; ++s)
      c.table[nr * static_cast<std::size_t>(old.child_card) + static_cast<std::size_t>(s)] += src[s] / card_u;
    for (std::size_t d = digit.size(); d-- > 0;) {
      if (++digit[d] < old.parent_cards[d]) break;
      digit[d] = 0;
    }
  }
  return c;
}

double edge_mutual_information(const BayesianNetwork& net, VarId u, VarId v) {
  const Cpt& c = net.cpt(v);
  const auto it = std::find(c.parents.begin(), c.parents.end(), u);
  if (it == c.parents.end()) throw std::invalid_argument("not an edge of the network");
  const std::size_t k = static_cast<std::size_t>(it - c.parents.begin());
  const int cu = c.parent_cards[k], cv = c.child_card;
  std::size_t inner = 1;
  for (std::size_t d = k + 1; d < c.parents.size(); ++d) inner *= static_cast<std::size_t>(c.parent_cards[d]);
  const double rows = static_cast<double>(c.row_count());
  std::vector<double> joint(static_cast<std::size_t>(cu * cv), 0.0), pv(static_cast<std::size_t>(cv), 0.0);
  for (std::size_t r = 0; r < c.row_count(); ++r) {
    const auto uu = static_cast<std::size_t>((r / inner) % static_cast<std::size_t>(cu));
    auto row = c.row(r);
    for (int s = 0; s < cv; ++s) {
      joint[uu * static_cast<std::size_t>(cv) + static_cast<std::size_t>(s)] += row[s] / rows;
      pv[static_cast<std::size_t>(s)] += row[s] / rows;
    }
  }
  double mi = 0.0;
  for (int a = 0; a < cu; ++a)
    for (int s = 0; s < cv; ++s) {
      const double p = joint[static_cast<std::size_t>(a * cv + s)];
      if (p > 0.0) mi += p * std::log(p / ((1.0 / cu) * pv[static_cast<std::size_t>(s)]));
    }
  return std::max(0.0, mi);
}

SimplifiedNetwork del_edges(const BayesianNetwork& net, int width_bound) {
  if (width_bound < 0) throw std::invalid_argument("width bound must be nonnegative");
  SimplifiedNetwork out{net, {}, false, {}};
  auto parents = parent_lists(net);
  int width = induced_width(parents);
  while (width > width_bound) {
    struct Candidate {
      int width;
      double mi;
      VarId child, parent;
    };
    std::optional<Candidate> best;
    for (std::size_t v = 0; v < parents.size(); ++v) {
      for (std::size_t k = 0; k < parents[v].size(); ++k) {
        const VarId u = parents[v][k];
        auto trial = parents;
        trial[v].erase(trial[v].begin() + static_cast<std::ptrdiff_t>(k));
        Candidate cand{induced_width(trial), edge_mutual_information(out.network, u, static_cast<VarId>(v)),
                       static_cast<VarId>(v), u};
        // (child, parent) declaration order is the scan order, so strict comparisons keep the first
        if (!best || cand.width < best->width ||
            (cand.width == best->width && cand.mi < best->mi - 1e-12))
          best = cand;
      }
    }
    out.network = with_cpt(out.network, average_out_parent(out.network, best->parent, best->child));
    out.deleted_edges.emplace_back(best->parent, best->child);
    parents = parent_lists(out.network);
    width = induced_width(parents);
  }
  return out;
}

double fit_objective(const BayesianNetwork& net, const BayesianNetwork& simplified, const FitOptions& opts) {
  std::vector<Factor> factors;
  for (const auto& c : simplified.cpts()) factors.push_back(Factor::from_cpt(c));
  const auto cards = net.cardinalities();
  std::vector<int> x(net.size(), 0);
  double value = 0.0;
  for (const auto& c : simplified.cpts()) {
    const Factor m = marginalize_to(factors, family(c), cards, opts.table_cap);
    for_each_entry(m, x, [&](double mu, const std::vector<int>& a) {
      if (mu > 0.0) value += mu * std::log(c.prob(a));
    });
  }
  for (const auto& c : net.cpts()) {
    const Factor m = marginalize_to(factors, family(c), cards, opts.table_cap);
    for_each_entry(m, x, [&](double mu, const std::vector<int>& a) {
      if (mu > 0.0) value -= mu * floored_log(c.prob(a), opts.floor);
    });
  }
  return value;
}

namespace {

SimplifiedNetwork run_fit(const BayesianNetwork& net, const SimplifiedNetwork& simp, const FitOptions& opts) {
  SimplifiedNetwork out = simp;
  out.fitted = true;
  if (net.size() != simp.network.size()) throw std::invalid_argument("networks differ in size");

  const auto cards = net.cardinalities();
  const std::size_t n = net.size();
  std::vector<int> x(n, 0);
  double current = fit_objective(net, out.network, opts);
  out.fit_trace = {current};

  for (int sweep = 0; sweep < opts.sweeps; ++sweep) {
    BayesianNetwork work = out.network;
    for (VarId i : topological_order(work)) {
      const Cpt& ci = work.cpt(i);
      const auto desc = descendants(work, i);
      std::vector<Factor> others;
      for (const auto& c : work.cpts())
        if (c.child != i) others.push_back(Factor::from_cpt(c));

      const std::size_t cells = ci.table.size();
      std::vector<double> g(cells, 0.0), mass(cells, 0.0);
      bool mass_recorded = false;

      // expectation of ln(table) under P'(. | x_i, pa'_i), added with `sign`
      auto accumulate = [&](const Cpt& term, double sign, bool surrogate) {
        std::vector<VarId> query = ci.parents;
        query.push_back(i);
        for (VarId v : family(term))
          if (std::find(query.begin(), query.end(), v) == query.end()) query.push_back(v);
        const Factor m = marginalize_to(others, query, cards, opts.table_cap);
        std::vector<double> num(cells, 0.0), den(cells, 0.0);
        for_each_entry(m, x, [&](double mu, const std::vector<int>& a) {
          const std::size_t cell = ci.row_index(a) * static_cast<std::size_t>(ci.child_card) + static_cast<std::size_t>(a[i]);
          den[cell] += mu;
          if (mu <= 0.0) return;
          const double p = term.prob(a);
          num[cell] += mu * (surrogate ? floored_log(p, opts.floor) : (p > 0.0 ? std::log(p) : 0.0));
        });
        for (std::size_t cell = 0; cell < cells; ++cell)
          if (den[cell] > 0.0) g[cell] += sign * num[cell] / den[cell];
        if (!mass_recorded) {
          mass = den;
          mass_recorded = true;
        }
      };

      for (const auto& c : net.cpts()) {
        const auto f = family(c);
        if (std::any_of(f.begin(), f.end(), [&](VarId v) { return v == i || desc[v]; }))
          accumulate(c, +1.0, true);  // + E[ln P_j]
      }
      for (std::size_t j = 0; j < n; ++j)
        if (desc[j]) accumulate(work.cpt(static_cast<VarId>(j)), -1.0, false);  // - E[ln P'_j]

      Cpt updated = ci;
      for (std::size_t r = 0; r < ci.row_count(); ++r) {
        auto row = updated.row(r);
        const std::size_t base = r * static_cast<std::size_t>(ci.child_card);
        if (mass[base] <= 0.0) {
          floor_and_normalize(row, opts.floor);
          continue;  // context unreachable under P'; keep the row
        }
        double hi = -std::numeric_limits<double>::infinity();
        for (int s = 0; s < ci.child_card; ++s) hi = std::max(hi, g[base + static_cast<std::size_t>(s)]);
        for (int s = 0; s < ci.child_card; ++s) row[s] = std::exp(g[base + static_cast<std::size_t>(s)] - hi);
        floor_and_normalize(row, opts.floor);
      }
      work = with_cpt(work, std::move(updated));
    }
    const double next = fit_objective(net, work, opts);
    if (next > current + 1e-12 * std::max(1.0, std::abs(current))) break;  // flooring made it worse
    out.network = std::move(work);
    out.fit_trace.push_back(next);
    const double gain = current - next;
    current = next;
    if (gain < opts.tol) break;
  }
  return out;
}

}  // namespace

SimplifiedNetwork var_tech_fit(const BayesianNetwork& net, const SimplifiedNetwork& simp, const FitOptions& opts) {
  if (simp.deleted_edges.empty()) {
    SimplifiedNetwork out = simp;
    out.fitted = true;
    return out;
  }
  return run_fit(net, simp, opts);
}

double prior_kl(const BayesianNetwork& net, const SimplifiedNetwork& simp, const ExactLimits& limits) {
  std::vector<VarId> all(net.size());
  for (std::size_t v = 0; v < all.size(); ++v) all[v] = static_cast<VarId>(v);
  const auto cards = net.cardinalities();
  std::size_t space = 1;
  for (int c : cards) {
    if (space > limits.enumeration_cap / static_cast<std::size_t>(c)) throw CapExceeded("joint space exceeds enumeration cap");
    space *= static_cast<std::size_t>(c);
  }
  struct Partial {
    double kl = 0.0;
    bool infinite = false;
  };
  const BayesianNetwork& approx = simp.network;
  auto parts = map_completion_chunks<Partial>(
      std::vector<int>(net.size(), 0), all, cards,
      [&](Partial& acc, const std::vector<int>& a) {
        const double lq = joint_log_prob(approx, a);
        if (is_log_zero(lq)) return;
        const double lp = joint_log_prob(net, a);
        if (is_log_zero(lp)) {
          acc.infinite = true;
          return;
        }
        acc.kl += std::exp(lq) * (lq - lp);
      },
      limits.threads);
  double kl = 0.0;
  for (const auto& p : parts) {
    if (p.infinite) return std::numeric_limits<double>::infinity();
    kl += p.kl;
  }
  return std::max(0.0, kl);
}

BayesianNetwork condition_out(const BayesianNetwork& net, const Evidence& ev, std::vector<VarId>* kept_out) {
  std::vector<VarId> kept;
  std::vector<int> new_id(net.size(), -1);
  for (std::size_t v = 0; v < net.size(); ++v)
    if (!ev.observed(static_cast<VarId>(v))) {
      new_id[v] = static_cast<int>(kept.size());
      kept.push_back(static_cast<VarId>(v));
    }
  std::vector<Variable> vars;
  std::vector<Cpt> cpts;
  std::vector<int> x(net.size(), 0);
  for (std::size_t v = 0; v < net.size(); ++v)
    if (ev.observed(static_cast<VarId>(v))) x[v] = ev.value(static_cast<VarId>(v));
  for (VarId v : kept) {
    vars.push_back(net.variable(v));
    const Cpt& old = net.cpt(v);
    Cpt c;
    c.child = new_id[v];
    std::vector<VarId> hidden_parents;
    for (VarId p : old.parents)
      if (!ev.observed(p)) {
        hidden_parents.push_back(p);
        c.parents.push_back(new_id[p]);
      }
    for (VarId p : hidden_parents) x[p] = 0;
    do {
      auto row = old.row(old.row_index(x));
      c.table.insert(c.table.end(), row.begin(), row.end());
    } while (next_assignment(x, hidden_parents, net.cardinalities()));
    cpts.push_back(std::move(c));
  }
  if (kept_out) *kept_out = kept;
  return BayesianNetwork(std::move(vars), std::move(cpts));
}

SimplifiedNetwork fit_without_evidence(const BayesianNetwork& net, const SimplifiedNetwork& simp, const Evidence& ev,
                                       const FitOptions& opts) {
  SimplifiedNetwork out = simp;
  out.fitted = true;
  if (simp.deleted_edges.empty()) return out;
  std::vector<VarId> kept;
  const BayesianNetwork reduced = condition_out(net, ev, &kept);
  SimplifiedNetwork reduced_simp{condition_out(simp.network, ev), {}, false, {}};
  std::vector<int> new_id(net.size(), -1);
  for (std::size_t k = 0; k < kept.size(); ++k) new_id[kept[k]] = static_cast<int>(k);
  for (const auto& [u, v] : simp.deleted_edges)
    if (new_id[u] >= 0 && new_id[v] >= 0) reduced_simp.deleted_edges.emplace_back(new_id[u], new_id[v]);
  // Fit even when every deleted edge touched an observed variable: the
  // averaged rows of N' still differ from the sliced rows of N.
  const SimplifiedNetwork fitted = run_fit(reduced, reduced_simp, opts);

  std::vector<Cpt> cpts = simp.network.cpts();
  std::vector<int> x(net.size(), 0);
  for (std::size_t v = 0; v < net.size(); ++v)
    if (ev.observed(static_cast<VarId>(v))) x[v] = ev.value(static_cast<VarId>(v));
  const auto cards = net.cardinalities();
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const VarId v = kept[k];
    Cpt& target = cpts[v];
    const Cpt& source = fitted.network.cpt(static_cast<VarId>(k));
    std::vector<VarId> hidden_parents;
    for (VarId p : target.parents)
      if (!ev.observed(p)) hidden_parents.push_back(p);
    for (VarId p : hidden_parents) x[p] = 0;
    std::size_t r = 0;
    do {
      auto src = source.row(r++);
      auto dst = target.row(target.row_index(x));
      std::copy(src.begin(), src.end(), dst.begin());
    } while (next_assignment(x, hidden_parents, cards));
  }
  out.network = BayesianNetwork(simp.network.variables(), std::move(cpts));
  out.fit_trace = fitted.fit_trace;
  return out;
}

std::string serialize_simplified(const SimplifiedNetwork& simp, const std::optional<EvidenceLabels>& evidence) {
  std::vector<NamedEdge> edges;
  for (const auto& [u, v] : simp.deleted_edges)
    edges.emplace_back(simp.network.variable(u).name, simp.network.variable(v).name);
  return serialize_network(simp.network, evidence, edges);
}

SimplifiedNetwork parse_simplified(std::string_view text) {
  auto doc = parse_document(text, true);
  SimplifiedNetwork out{std::move(doc.network), {}, false, {}};
  if (doc.deleted_edges)
    for (const auto& [u, v] : *doc.deleted_edges) out.deleted_edges.emplace_back(out.network.id(u), out.network.id(v));
  return out;
}

}  // namespace varis
