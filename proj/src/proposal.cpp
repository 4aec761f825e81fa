#include "varis/proposal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "varis/errors.hpp"
#include "varis/logspace.hpp"

namespace varis {

namespace {

void normalize_or_uniform(std::span<double> row) {
  double sum = 0.0;
  for (double p : row) sum += p;
  if (sum > 0.0) {
    for (double& p : row) p /= sum;
  } else {
    for (double& p : row) p = 1.0 / static_cast<double>(row.size());
  }
}

ConditionalTable point_mass(VarId v, int card, int state) {
  ConditionalTable t{v, card, {}, {}, std::vector<double>(static_cast<std::size_t>(card), 0.0)};
  t.probs[static_cast<std::size_t>(state)] = 1.0;
  return t;
}

// Value of context variable `pos` in context row `r`.
int context_digit(const ConditionalTable& t, std::size_t r, std::size_t pos) {
  std::size_t inner = 1;
  for (std::size_t k = pos + 1; k < t.context.size(); ++k) inner *= static_cast<std::size_t>(t.context_cards[k]);
  return static_cast<int>((r / inner) % static_cast<std::size_t>(t.context_cards[pos]));
}

ConditionalTable with_context_var(const ConditionalTable& t, VarId u, int card_u) {
  if (std::find(t.context.begin(), t.context.end(), u) != t.context.end()) return t;
  ConditionalTable out = t;
  out.context.push_back(u);
  out.context_cards.push_back(card_u);
  out.probs.clear();
  out.probs.reserve(t.probs.size() * static_cast<std::size_t>(card_u));
  for (std::size_t r = 0; r < t.row_count(); ++r)
    for (int k = 0; k < card_u; ++k) out.probs.insert(out.probs.end(), t.row(r).begin(), t.row(r).end());
  return out;
}

}  // namespace

std::size_t ConditionalTable::context_index(std::span<const int> x) const {
  std::size_t r = 0;
  for (std::size_t k = 0; k < context.size(); ++k)
    r = r * static_cast<std::size_t>(context_cards[k]) + static_cast<std::size_t>(x[context[k]]);
  return r;
}

ReinstatedFactor reinstated_factor(const BayesianNetwork& net, VarId parent, VarId child) {
  const Cpt& c = net.cpt(child);
  const auto it = std::find(c.parents.begin(), c.parents.end(), parent);
  if (it == c.parents.end()) throw std::invalid_argument("not an edge of the network");
  const std::size_t k = static_cast<std::size_t>(it - c.parents.begin());
  ReinstatedFactor f{parent, child, c.parent_cards[k], c.child_card, {}};
  f.values.assign(static_cast<std::size_t>(f.parent_card * f.child_card), 0.0);
  std::size_t inner = 1;
  for (std::size_t d = k + 1; d < c.parents.size(); ++d) inner *= static_cast<std::size_t>(c.parent_cards[d]);
  for (std::size_t r = 0; r < c.row_count(); ++r) {
    const int u = static_cast<int>((r / inner) % static_cast<std::size_t>(f.parent_card));
    auto row = c.row(r);
    for (int v = 0; v < f.child_card; ++v) f.values[static_cast<std::size_t>(v * f.parent_card + u)] += row[v];
  }
  return f;
}

ProposalDistribution::ProposalDistribution(std::vector<VarId> order, std::vector<ConditionalTable> tables,
                                           Evidence evidence, std::vector<ReinstatedFactor> reinstated)
    : order_(std::move(order)), tables_(std::move(tables)), evidence_(std::move(evidence)),
      reinstated_(std::move(reinstated)) {
  if (!is_permutation_of(order_, tables_.size())) throw std::invalid_argument("sampling order is not a permutation");
  std::vector<int> pos(order_.size());
  for (std::size_t k = 0; k < order_.size(); ++k) pos[order_[k]] = static_cast<int>(k);
  for (const auto& t : tables_) {
    if (evidence_.observed(t.var)) continue;
    for (VarId c : t.context)
      if (pos[c] >= pos[t.var] && !evidence_.observed(c))
        throw std::invalid_argument("context variable sampled after its child");
  }
}

double ProposalDistribution::log_prob(std::span<const int> full) const {
  double lq = 0.0;
  for (const auto& t : tables_) {
    if (evidence_.observed(t.var)) {
      if (full[t.var] != evidence_.value(t.var)) return log_zero;
      continue;
    }
    const double p = t.row(t.context_index(full))[static_cast<std::size_t>(full[t.var])];
    if (p <= 0.0) return log_zero;
    lq += std::log(p);
  }
  return lq;
}

double ProposalDistribution::max_row_deviation() const {
  double worst = 0.0;
  for (const auto& t : tables_) {
    if (evidence_.observed(t.var)) continue;
    for (std::size_t r = 0; r < t.row_count(); ++r) {
      double s = 0.0;
      for (double p : t.row(r)) s += p;
      worst = std::max(worst, std::abs(s - 1.0));
    }
  }
  return worst;
}

ProposalDistribution ProposalDistribution::with_tables(std::vector<ConditionalTable> tables) const {
  return ProposalDistribution(order_, std::move(tables), evidence_, reinstated_);
}

ProposalDistribution build_proposal(const BayesianNetwork& net, const SimplifiedNetwork& simp, const Evidence& ev,
                                    const ExactLimits& limits) {
  const BayesianNetwork& approx = simp.network;
  const EliminationResult elim = bucket_eliminate(approx, ev, min_fill_order(approx), limits);
  const auto& scheme = elim.scheme;

  std::vector<ConditionalTable> tables(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto v = static_cast<VarId>(i);
    const int card = net.cardinality(v);
    if (ev.observed(v)) {
      tables[i] = point_mass(v, card, ev.value(v));
      continue;
    }
    const Bucket& b = scheme.buckets[i];
    ConditionalTable t{v, card, b.context, {}, {}};
    for (VarId c : b.context) t.context_cards.push_back(net.cardinality(c));
    const auto& lam = b.combined.log_values();  // context digits then x_i
    t.probs.resize(lam.size());
    for (std::size_t r = 0; r < t.row_count(); ++r) {
      const std::span<const double> cell(lam.data() + r * static_cast<std::size_t>(card), static_cast<std::size_t>(card));
      const double total = log_sum_exp(cell);
      auto row = t.row(r);
      if (is_log_zero(total)) {
        for (double& p : row) p = 1.0 / card;
        continue;
      }
      for (int s = 0; s < card; ++s) row[s] = std::exp(cell[s] - total);
    }
    tables[i] = std::move(t);
  }

  std::vector<ReinstatedFactor> reinstated;
  for (const auto& [u, v] : simp.deleted_edges) {
    if (ev.observed(v) || scheme.position[u] >= scheme.position[v]) continue;
    ReinstatedFactor f = reinstated_factor(net, u, v);
    ConditionalTable t = with_context_var(tables[v], u, f.parent_card);
    const std::size_t pos = static_cast<std::size_t>(std::find(t.context.begin(), t.context.end(), u) - t.context.begin());
    for (std::size_t r = 0; r < t.row_count(); ++r) {
      const int uu = context_digit(t, r, pos);
      auto row = t.row(r);
      for (int s = 0; s < t.card; ++s) row[s] *= f.at(s, uu);
      normalize_or_uniform(row);
    }
    tables[v] = std::move(t);
    reinstated.push_back(std::move(f));
  }
  return ProposalDistribution(scheme.order.reversed(), std::move(tables), ev, std::move(reinstated));
}

ProposalDistribution prior_proposal(const BayesianNetwork& net, const Evidence& ev) {
  std::vector<ConditionalTable> tables(net.size());
  for (const auto& c : net.cpts()) {
    if (ev.observed(c.child)) {
      tables[c.child] = point_mass(c.child, c.child_card, ev.value(c.child));
      continue;
    }
    tables[c.child] = ConditionalTable{c.child, c.child_card, c.parents, c.parent_cards, c.table};
  }
  return ProposalDistribution(topological_order(net), std::move(tables), ev);
}

ProposalDistribution feasible_prior_proposal(const BayesianNetwork& net, const Evidence& ev) {
  const auto order = topological_order(net);
  std::vector<int> pos(net.size());
  for (std::size_t k = 0; k < order.size(); ++k) pos[order[k]] = static_cast<int>(k);
  const auto cards = net.cardinalities();

  std::vector<ConditionalTable> tables(net.size());
  for (const auto& c : net.cpts()) {
    const VarId v = c.child;
    if (ev.observed(v)) {
      tables[v] = point_mass(v, c.child_card, ev.value(v));
      continue;
    }
    // observed children whose parents are all known once v is drawn
    std::vector<VarId> checked;
    std::vector<VarId> context = c.parents;
    for (VarId e : net.children(v)) {
      if (!ev.observed(e)) continue;
      const auto& ep = net.parents(e);
      if (!std::all_of(ep.begin(), ep.end(), [&](VarId p) { return p == v || ev.observed(p) || pos[p] < pos[v]; }))
        continue;
      checked.push_back(e);
      for (VarId p : ep)
        if (p != v && !ev.observed(p) && std::find(context.begin(), context.end(), p) == context.end())
          context.push_back(p);
    }
    ConditionalTable t{v, c.child_card, context, {}, {}};
    for (VarId p : context) t.context_cards.push_back(cards[p]);
    std::vector<int> x(net.size(), 0);
    for (std::size_t u = 0; u < net.size(); ++u)
      if (ev.observed(static_cast<VarId>(u))) x[u] = ev.value(static_cast<VarId>(u));
    do {
      auto prior = c.row(c.row_index(x));
      std::vector<double> row(prior.begin(), prior.end());
      for (int s = 0; s < c.child_card; ++s) {
        x[v] = s;
        for (VarId e : checked)
          if (net.cpt(e).prob(x) == 0.0) row[static_cast<std::size_t>(s)] = 0.0;
      }
      x[v] = 0;
      normalize_or_uniform(row);
      t.probs.insert(t.probs.end(), row.begin(), row.end());
    } while (next_assignment(x, context, cards));
    tables[v] = std::move(t);
  }
  return ProposalDistribution(order, std::move(tables), ev);
}

SampleRecord draw_sample(const ProposalDistribution& q, const BayesianNetwork& net, Rng& rng) {
  SampleRecord rec;
  rec.assignment.assign(q.size(), 0);
  const Evidence& ev = q.evidence();
  for (std::size_t v = 0; v < q.size(); ++v)
    if (ev.observed(static_cast<VarId>(v))) rec.assignment[v] = ev.value(static_cast<VarId>(v));
  double lq = 0.0;
  for (VarId v : q.order()) {
    if (ev.observed(v)) continue;
    const ConditionalTable& t = q.table(v);
    const auto row = t.row(t.context_index(rec.assignment));
    const double u = uniform01(rng);
    double cum = 0.0;
    int pick = -1;
    for (int s = 0; s < t.card; ++s) {
      if (row[s] <= 0.0) continue;
      cum += row[s];
      pick = s;
      if (u < cum) break;
    }
    if (pick < 0) throw DominationError("proposal row with no mass");
    rec.assignment[v] = pick;
    lq += std::log(row[pick]);
  }
  rec.log_q = lq;
  rec.log_p = joint_log_prob(net, rec.assignment);
  rec.log_ratio = is_log_zero(rec.log_p) ? log_zero : rec.log_p - rec.log_q;
  return rec;
}

ProposalDistribution anneal_update(const ProposalDistribution& q, std::span<const SampleRecord> batch, double eta,
                                   double floor) {
  if (batch.empty() || eta <= 0.0) return q;
  double hi = log_zero;
  for (const auto& s : batch) hi = std::max(hi, s.log_ratio);
  if (is_log_zero(hi)) return q;
  std::vector<double> weight(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k)
    weight[k] = is_log_zero(batch[k].log_ratio) ? 0.0 : std::exp(batch[k].log_ratio - hi);

  std::vector<ConditionalTable> tables = q.tables();
  for (auto& t : tables) {
    if (q.evidence().observed(t.var)) continue;
    std::vector<double> counts(t.probs.size(), 0.0);
    for (std::size_t k = 0; k < batch.size(); ++k) {
      if (weight[k] == 0.0) continue;
      const auto& x = batch[k].assignment;
      counts[t.context_index(x) * static_cast<std::size_t>(t.card) + static_cast<std::size_t>(x[t.var])] += weight[k];
    }
    for (std::size_t r = 0; r < t.row_count(); ++r) {
      const std::size_t base = r * static_cast<std::size_t>(t.card);
      double visits = 0.0;
      for (int s = 0; s < t.card; ++s) visits += counts[base + static_cast<std::size_t>(s)];
      if (visits <= 0.0) continue;
      auto row = t.row(r);
      double sum = 0.0;
      for (int s = 0; s < t.card; ++s) {
        const double old = row[s];
        double p = (1.0 - eta) * old + eta * counts[base + static_cast<std::size_t>(s)] / visits;
        if (old > 0.0) p = std::max(p, floor);
        row[s] = p;
        sum += p;
      }
      for (double& p : row) p /= sum;
    }
  }
  return q.with_tables(std::move(tables));
}

SimplifiedNetwork direct_transform(const SimplifiedNetwork& simp, Direction direction, double alpha, double beta) {
  if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("alpha must be in (0, 0.5)");
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must be in (0, 1)");
  const double low_exp = direction == Direction::sharpen ? 1.0 + beta : 1.0 - beta;
  const double high_exp = direction == Direction::sharpen ? 1.0 - beta : 1.0 + beta;
  std::vector<Cpt> cpts = simp.network.cpts();
  for (auto& c : cpts) {
    for (std::size_t r = 0; r < c.row_count(); ++r) {
      auto row = c.row(r);
      for (double& p : row) {
        if (p < alpha) p = std::pow(p, low_exp);
        else if (p > 1.0 - alpha) p = std::pow(p, high_exp);
      }
      normalize_or_uniform(row);
    }
  }
  SimplifiedNetwork out = simp;
  out.network = BayesianNetwork(simp.network.variables(), std::move(cpts));
  return out;
}

std::string proposal_to_json(const ProposalDistribution& q, const BayesianNetwork& net) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json order = nlohmann::ordered_json::array();
  for (VarId v : q.order()) order.push_back(net.variable(v).name);
  doc["order"] = std::move(order);
  nlohmann::ordered_json tables = nlohmann::ordered_json::array();
  for (VarId v : q.order()) {
    if (q.evidence().observed(v)) continue;
    const auto& t = q.table(v);
    nlohmann::ordered_json j;
    j["variable"] = net.variable(v).name;
    nlohmann::ordered_json ctx = nlohmann::ordered_json::array();
    for (VarId c : t.context) ctx.push_back(net.variable(c).name);
    j["context"] = std::move(ctx);
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t r = 0; r < t.row_count(); ++r) rows.push_back(std::vector<double>(t.row(r).begin(), t.row(r).end()));
    j["table"] = std::move(rows);
    tables.push_back(std::move(j));
  }
  doc["tables"] = std::move(tables);
  nlohmann::ordered_json ev = nlohmann::ordered_json::object();
  for (const auto& [k, v] : q.evidence().labels(net)) ev[k] = v;
  doc["evidence"] = std::move(ev);
  return doc.dump(2) + "\n";
}

}  // namespace varis
