// varis: exact and sampled likelihood of evidence for discrete Bayesian networks.
//
// Exit codes: 0 success, 2 bad input (parse, validation, flags, infeasible
// generator config), 3 a size cap was exceeded, 4 the proposal failed to
// dominate the target.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "varis/elimination.hpp"
#include "varis/engine.hpp"
#include "varis/errors.hpp"
#include "varis/exact.hpp"
#include "varis/generator.hpp"
#include "varis/network_io.hpp"
#include "varis/rng.hpp"

namespace fs = std::filesystem;
using namespace varis;

namespace {

constexpr std::size_t kEnumerationLimit = std::size_t{1} << 20;

struct Loaded {
  BayesianNetwork net;
  Evidence ev;
  EvidenceLabels labels;
};

EvidenceLabels parse_overrides(const std::vector<std::string>& items) {
  EvidenceLabels out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == item.size())
      throw ValidationError("evidence must look like VAR=STATE: " + item);
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

// --evidence replaces whatever evidence the file carries.
Loaded load(const std::string& path, const std::vector<std::string>& overrides) {
  ParsedNetwork parsed = parse_network(read_text_file(path));
  Loaded l{std::move(parsed.network), {}, {}};
  if (!overrides.empty()) l.labels = parse_overrides(overrides);
  else if (parsed.evidence) l.labels = *parsed.evidence;
  l.ev = Evidence::resolve(l.net, l.labels);
  return l;
}

struct ExactValue {
  double ln_p;
  std::string method;
};

ExactValue exact_value(const BayesianNetwork& net, const Evidence& ev) {
  if (ev.observed_count() == 0) return {0.0, "no evidence"};
  std::size_t space = 1;
  bool small = true;
  for (std::size_t v = 0; v < net.size() && small; ++v) {
    if (ev.observed(static_cast<VarId>(v))) continue;
    space *= static_cast<std::size_t>(net.cardinality(static_cast<VarId>(v)));
    small = space <= kEnumerationLimit;
  }
  if (small) return {enumerate_likelihood(net, ev), "enumeration"};
  return {bucket_eliminate(net, ev, min_fill_order(net)).log_likelihood, "bucket elimination"};
}

struct SampleFlags {
  SamplerConfig cfg;
  std::size_t k_max = 0;
  bool no_adapt = false;
  bool no_direct = false;
};

void add_sampler_flags(CLI::App* cmd, SampleFlags& f) {
  SamplerConfig& c = f.cfg;
  cmd->add_option("--samples", c.samples, "total samples M")->capture_default_str();
  cmd->add_option("--batch", c.m, "batch size m")->capture_default_str();
  cmd->add_option("--kmax", f.k_max, "mixing-rate horizon in batches (0 = M/m)");
  cmd->add_option("--eta0", c.eta0, "initial mixing rate")->capture_default_str();
  cmd->add_option("--etaf", c.etaf, "final mixing rate")->capture_default_str();
  cmd->add_option("--alpha", c.alpha, "directing band")->capture_default_str();
  cmd->add_option("--beta", c.beta, "directing exponent shift")->capture_default_str();
  cmd->add_option("--window", c.window, "correlation window l")->capture_default_str();
  cmd->add_option("--w0", c.w0, "first batch weight")->capture_default_str();
  cmd->add_option("--significance", c.significance, "correlation test level")->capture_default_str();
  cmd->add_option("--width-bound", c.width_bound, "induced width bound for the simplified network")
      ->capture_default_str();
  cmd->add_option("--seed", c.seed, "random seed")->capture_default_str();
  cmd->add_option("--workers", c.workers, "sampling threads")->capture_default_str();
  cmd->add_flag("--no-adapt", f.no_adapt, "disable annealed proposal updates");
  cmd->add_flag("--no-direct", f.no_direct, "disable directing");
}

SamplerConfig finish(const SampleFlags& f) {
  SamplerConfig c = f.cfg;
  if (f.k_max > 0) c.k_max = f.k_max;
  c.validate();
  return c;
}

RunReport run_algorithm(const std::string& algorithm, const BayesianNetwork& net, const Evidence& ev,
                        const SamplerConfig& cfg, const SampleFlags& f) {
  if (algorithm == "varis") return run_varis(net, ev, cfg, {!f.no_adapt, !f.no_direct});
  if (algorithm == "varis-static") return run_varis(net, ev, cfg, {false, false});
  if (algorithm == "lw") return likelihood_weighting(net, ev, cfg);
  if (algorithm == "sis") return sis_star(net, ev, cfg);
  throw std::invalid_argument("unknown algorithm: " + algorithm);
}

int cmd_exact(const std::string& path, const std::vector<std::string>& evidence) {
  const Loaded l = load(path, evidence);
  const ExactValue v = exact_value(l.net, l.ev);
  std::cout << "ln P(e) = " << format_real(v.ln_p) << "\nmethod: " << v.method << "\n";
  return 0;
}

int cmd_sample(const std::string& path, const std::string& algorithm, const std::vector<std::string>& evidence,
               const SampleFlags& flags, const std::string& out, const std::string& dump) {
  const Loaded l = load(path, evidence);
  const SamplerConfig cfg = finish(flags);
  const RunReport report = run_algorithm(algorithm, l.net, l.ev, cfg, flags);
  if (out.empty()) {
    std::cout << summary_json(report);
  } else {
    write_text_file(out + ".csv", trace_csv(report));
    write_text_file(out + ".json", summary_json(report));
    std::cout << "ln P(e) ~ " << format_real(report.estimate_ln) << "\n";
  }
  if (!dump.empty()) write_text_file(dump, proposal_to_json(report.final_proposal, l.net));
  return 0;
}

int cmd_generate(const GeneratorConfig& gc, std::uint64_t seed, const std::string& out) {
  const GeneratedNetwork g = generate_random_network(gc, seed);
  write_text_file(out, serialize_network(g.network, g.evidence));
  const Evidence ev = Evidence::resolve(g.network, g.evidence);
  try {
    const double ln_p = exact_value(g.network, ev).ln_p;
    std::cout << "ln P(e) = " << format_real(ln_p) << "\n";
  } catch (const CapExceeded&) {
    std::cout << "ln P(e) not computed: network too large\n";
  }
  return 0;
}

int cmd_compare(const std::string& dir, const std::vector<std::string>& algorithms, int trials,
                const SampleFlags& flags, const std::string& out) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (trials < 1) throw std::invalid_argument("trials must be at least 1");
  const SamplerConfig base = finish(flags);

  std::string csv = "network,algorithm,trial,ln_exact,ln_estimate,abs_error,pct_error\n";
  for (std::size_t i = 0; i < files.size(); ++i) {
    const Loaded l = load(files[i].string(), {});
    const double exact = exact_value(l.net, l.ev).ln_p;
    for (const auto& alg : algorithms) {
      for (int t = 0; t < trials; ++t) {
        SamplerConfig cfg = base;
        cfg.seed = derive_seed(base.seed, i, static_cast<std::uint64_t>(t));
        const RunReport r = run_algorithm(alg, l.net, l.ev, cfg, flags);
        const double err = std::abs(r.estimate_ln - exact);
        csv += files[i].filename().string() + ',' + alg + ',' + std::to_string(t) + ',' + format_real(exact) + ',' +
               format_real(r.estimate_ln) + ',' + format_real(err) + ',' +
               format_real(100.0 * err / std::abs(exact)) + '\n';
      }
    }
  }
  if (out.empty()) std::cout << csv;
  else write_text_file(out, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Importance sampling for the likelihood of evidence in discrete Bayesian networks"};
  app.require_subcommand(1);

  std::string net_path, algorithm, out, dump, dir;
  std::vector<std::string> evidence;
  SampleFlags sample_flags, compare_flags;
  GeneratorConfig gen;
  std::uint64_t gen_seed = 0;
  std::vector<std::string> algorithms{"varis", "varis-static", "lw", "sis"};
  int trials = 1;

  auto* exact = app.add_subcommand("exact", "exact ln P(e)");
  exact->add_option("network", net_path, "network document")->required();
  exact->add_option("--evidence", evidence, "VAR=STATE, replaces the file's evidence");

  auto* sample = app.add_subcommand("sample", "sampled ln P(e) with trace and summary");
  sample->add_option("network", net_path, "network document")->required();
  sample->add_option("algorithm", algorithm, "varis | varis-static | lw | sis")
      ->required()
      ->check(CLI::IsMember({"varis", "varis-static", "lw", "sis"}));
  sample->add_option("--evidence", evidence, "VAR=STATE, replaces the file's evidence");
  sample->add_option("--out", out, "write OUT.csv and OUT.json");
  sample->add_option("--dump-proposal", dump, "write the final proposal tables");
  add_sampler_flags(sample, sample_flags);

  auto* generate = app.add_subcommand("generate", "random network with evidence");
  generate->add_option("--nodes", gen.nodes)->capture_default_str();
  generate->add_option("--max-parents", gen.max_parents)->capture_default_str();
  generate->add_option("--states", gen.states)->capture_default_str();
  generate->add_option("--det", gen.det_fraction, "fraction of deterministic rows")->capture_default_str();
  generate->add_option("--evidence-leaves", gen.evidence_leaves)->capture_default_str();
  generate->add_option("--seed", gen_seed)->capture_default_str();
  generate->add_option("--out", out, "output document")->required();

  auto* compare = app.add_subcommand("compare", "error table over a directory of networks");
  compare->add_option("dir", dir, "directory of .json network documents")->required()->check(CLI::ExistingDirectory);
  compare->add_option("--algorithms", algorithms)->delimiter(',')->capture_default_str();
  compare->add_option("--trials", trials)->capture_default_str();
  compare->add_option("--out", out, "CSV path (default stdout)");
  add_sampler_flags(compare, compare_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*exact) return cmd_exact(net_path, evidence);
    if (*sample) return cmd_sample(net_path, algorithm, evidence, sample_flags, out, dump);
    if (*generate) return cmd_generate(gen, gen_seed, out);
    if (*compare) return cmd_compare(dir, algorithms, trials, compare_flags, out);
  } catch (const CapExceeded& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DominationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
