#include "varis/engine.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <deque>
#include <exception>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "varis/rng.hpp"

namespace varis {

namespace {

// Stream tags under (seed, k, tag, ...).
constexpr std::uint64_t kDrawTag = 1;
constexpr std::uint64_t kAcceptTag = 2;

[[noreturn]] void bad_config(const std::string& what) { throw std::invalid_argument("invalid sampler config: " + what); }

}  // namespace

void SamplerConfig::validate() const {
  if (m < 1) bad_config("batch size must be at least 1");
  if (samples < 1) bad_config("samples must be at least 1");
  if (!(etaf > 0.0 && etaf <= eta0 && eta0 < 1.0)) bad_config("need 0 < etaf <= eta0 < 1");
  if (!(alpha > 0.0 && alpha < 0.5)) bad_config("alpha must be in (0, 0.5)");
  if (!(beta > 0.0 && beta < 1.0)) bad_config("beta must be in (0, 1)");
  if (window < 3) bad_config("window must be at least 3");
  if (!(w0 > 0.0)) bad_config("w0 must be positive");
  if (!(significance > 0.0 && significance < 1.0)) bad_config("significance must be in (0, 1)");
  if (k_max && *k_max < 1) bad_config("k_max must be at least 1");
  if (cooldown && *cooldown < 0) bad_config("cooldown must be nonnegative");
  if (width_bound < 0) bad_config("width bound must be nonnegative");
  if (workers < 1) bad_config("workers must be at least 1");
}

std::size_t SamplerConfig::horizon() const { return k_max.value_or(std::max<std::size_t>(1, samples / m)); }

double mixing_rate(std::size_t k, const SamplerConfig& cfg) {
  const std::size_t h = cfg.horizon();
  if (k >= h) return cfg.etaf;
  return cfg.eta0 * std::pow(cfg.etaf / cfg.eta0, static_cast<double>(k) / static_cast<double>(h));
}

double acceptance_probability(std::size_t k, double delta) {
  if (std::isnan(delta)) return 0.0;
  if (delta < 0.0) return 1.0;
  return std::min(1.0, std::exp(-static_cast<double>(k) * delta));
}

double kl_estimate(std::span<const double> log_ratios) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double lr : log_ratios) {
    if (is_log_zero(lr)) continue;
    sum += lr;
    ++n;
  }
  return n == 0 ? std::nan("") : -sum / static_cast<double>(n);
}

double kl_estimate(std::span<const SampleRecord> batch) {
  std::vector<double> lr(batch.size());
  std::transform(batch.begin(), batch.end(), lr.begin(), [](const SampleRecord& s) { return s.log_ratio; });
  return kl_estimate(lr);
}

double batch_weight(std::size_t k, double cv, const SamplerConfig& cfg) {
  if (k <= 1) return cfg.w0;
  return std::max(cfg.w0, 1.0 / (cv + 1e-12));
}

void EstimatorState::record(double log_ratio_sum, std::size_t count, double weight) {
  const double lw = std::log(weight);
  num_.add(lw + log_ratio_sum);
  den_.add(lw + std::log(static_cast<double>(count)));
  ++batches_;
}

double combine_batches(const EstimatorState& state) {
  if (state.empty()) throw std::logic_error("no batch recorded");
  return state.log_numerator() - state.log_denominator();
}

double log_power_mean(std::span<const double> log_z, std::span<const double> w, double r) {
  if (log_z.size() != w.size() || log_z.empty()) throw std::invalid_argument("power mean needs matching nonempty inputs");
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(w[i] > 0.0)) throw std::invalid_argument("power mean weights must be positive");
    if (!std::isfinite(log_z[i])) throw std::invalid_argument("power mean inputs must be positive and finite");
    total += w[i];
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("power mean weights must sum to 1");
  if (r == 0.0) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * log_z[i];
    return s;
  }
  std::vector<double> terms(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) terms[i] = std::log(w[i]) + r * log_z[i];
  return log_sum_exp(terms) / r;
}

double power_mean(std::span<const double> z, std::span<const double> w, double r) {
  std::vector<double> lz(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!(z[i] > 0.0)) throw std::invalid_argument("power mean inputs must be positive");
    lz[i] = std::log(z[i]);
  }
  return std::exp(log_power_mean(lz, w, r));
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson needs series of equal length");
  if (x.size() < 3) throw std::invalid_argument("pearson needs at least 3 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0) || !std::isfinite(sxy)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double correlation_threshold(int n, double significance) {
  if (n < 3) throw std::invalid_argument("correlation threshold needs n >= 3");
  const double df = n - 2;
  const boost::math::students_t dist(df);
  const double t = boost::math::quantile(boost::math::complement(dist, significance / 2.0));
  return t / std::sqrt(t * t + df);
}

std::string to_string(DirectingEvent e) {
  switch (e) {
    case DirectingEvent::sharpen: return "sharpen";
    case DirectingEvent::flatten: return "flatten";
    default: return "none";
  }
}

DirectingEvent correlation_trigger(std::span<const double> d_hat, std::span<const double> ln_p,
                                   const SamplerConfig& cfg) {
  if (d_hat.size() != ln_p.size() || d_hat.size() < static_cast<std::size_t>(cfg.window) || d_hat.size() < 3)
    return DirectingEvent::none;
  std::vector<double> mean_log_ratio(d_hat.size());
  for (std::size_t i = 0; i < d_hat.size(); ++i) mean_log_ratio[i] = -d_hat[i];
  for (double v : mean_log_ratio)
    if (!std::isfinite(v)) return DirectingEvent::none;
  for (double v : ln_p)
    if (!std::isfinite(v)) return DirectingEvent::none;
  const auto r = pearson(mean_log_ratio, ln_p);
  if (!r) return DirectingEvent::none;
  const double thr = correlation_threshold(static_cast<int>(d_hat.size()), cfg.significance);
  if (*r > thr) return DirectingEvent::sharpen;
  if (*r < -thr) return DirectingEvent::flatten;
  return DirectingEvent::none;
}

namespace {

void draw_chunk(const ProposalDistribution& q, const BayesianNetwork& net, std::vector<SampleRecord>& out,
                std::size_t chunk, std::uint64_t seed, std::uint64_t k) {
  Rng rng = make_stream(seed, k, kDrawTag, chunk);
  const std::size_t first = chunk * kSampleChunk;
  const std::size_t last = std::min(out.size(), first + kSampleChunk);
  for (std::size_t i = first; i < last; ++i) out[i] = draw_sample(q, net, rng);
}

}  // namespace

std::vector<SampleRecord> draw_batch_serial(const ProposalDistribution& q, const BayesianNetwork& net,
                                            std::size_t count, std::uint64_t seed, std::uint64_t k) {
  std::vector<SampleRecord> out(count);
  const std::size_t chunks = (count + kSampleChunk - 1) / kSampleChunk;
  for (std::size_t c = 0; c < chunks; ++c) draw_chunk(q, net, out, c, seed, k);
  return out;
}

std::vector<SampleRecord> draw_batch(const ProposalDistribution& q, const BayesianNetwork& net, std::size_t count,
                                     std::uint64_t seed, std::uint64_t k, int workers) {
  if (workers <= 1) return draw_batch_serial(q, net, count, seed, k);
  std::vector<SampleRecord> out(count);
  const auto chunks = static_cast<long long>((count + kSampleChunk - 1) / kSampleChunk);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (long long c = 0; c < chunks; ++c) {
    try {
      draw_chunk(q, net, out, static_cast<std::size_t>(c), seed, k);
    } catch (...) {
#pragma omp critical(varis_draw_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

BatchStats summarize_batch(std::size_t k, std::span<const SampleRecord> batch) {
  BatchStats s;
  s.k = k;
  s.count = batch.size();
  std::vector<double> lr(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    lr[i] = batch[i].log_ratio;
    if (!is_log_zero(lr[i])) ++s.feasible;
  }
  const double lsum = log_sum_exp(lr);
  s.ln_p_batch = lsum - std::log(static_cast<double>(batch.size()));
  s.d_hat = kl_estimate(lr);
  if (is_log_zero(lsum)) {
    s.cv = std::numeric_limits<double>::infinity();
    return s;
  }
  double hi = *std::max_element(lr.begin(), lr.end());
  const double n = static_cast<double>(batch.size());
  double mean = 0.0;
  for (double x : lr) mean += std::exp(x - hi);
  mean /= n;
  double ss = 0.0;
  for (double x : lr) ss += (std::exp(x - hi) - mean) * (std::exp(x - hi) - mean);
  s.cv = batch.size() > 1 ? std::sqrt(ss / (n - 1.0)) / mean : 0.0;
  return s;
}

namespace {

struct LoopPolicy {
  bool adapt = false;
  bool accept_test = true;
  bool direct = false;
  bool weighted = false;
};

constexpr double kSettledCv = 1e-9;

RunReport batch_loop(const BayesianNetwork& net, const Evidence& ev, ProposalDistribution q, SimplifiedNetwork simp,
                     const SamplerConfig& cfg, const LoopPolicy& policy) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  report.config = cfg;

  EstimatorState state;
  LogSumAccumulator all_ratios, all_squares;
  double log_ratio_sum = 0.0;
  std::deque<double> window_d, window_p;
  int cooldown = 0;
  double prev_d = std::nan("");

  const std::size_t batches = cfg.batch_count();
  for (std::size_t k = 1; k <= batches; ++k) {
    const std::size_t count = std::min(cfg.m, cfg.samples - (k - 1) * cfg.m);
    const auto batch = draw_batch(q, net, count, cfg.seed, k, cfg.workers);
    BatchStats s = summarize_batch(k, batch);

    for (const auto& rec : batch) {
      if (is_log_zero(rec.log_ratio)) continue;
      all_ratios.add(rec.log_ratio);
      all_squares.add(2.0 * rec.log_ratio);
      log_ratio_sum += rec.log_ratio;
      ++report.feasible_samples;
    }
    report.samples += count;

    s.weight = policy.weighted ? batch_weight(k, s.cv, cfg) : 1.0;
    state.record(s.ln_p_batch + std::log(static_cast<double>(count)), count, s.weight);
    s.ln_p_cum = combine_batches(state);
    s.eta = policy.adapt ? mixing_rate(k, cfg) : 0.0;

    if (policy.adapt) {
      if (!policy.accept_test || k == 1) {
        s.accepted = true;
      } else {
        Rng rng = make_stream(cfg.seed, k, kAcceptTag);
        s.accepted = uniform01(rng) < acceptance_probability(k, s.d_hat - prev_d);
      }
      // Equal ratios across the batch mean Q is proportional to P(h, e) where it
      // was sampled; blending in empirical counts would only add noise.
      if (s.accepted && !(s.cv <= kSettledCv && s.feasible == count)) q = anneal_update(q, batch, s.eta);
    }
    prev_d = s.d_hat;

    if (policy.direct) {
      if (std::isfinite(s.d_hat) && std::isfinite(s.ln_p_batch)) {
        window_d.push_back(s.d_hat);
        window_p.push_back(s.ln_p_batch);
        if (window_d.size() > static_cast<std::size_t>(cfg.window)) {
          window_d.pop_front();
          window_p.pop_front();
        }
      }
      if (cooldown > 0) {
        --cooldown;
      } else if (window_d.size() == static_cast<std::size_t>(cfg.window)) {
        const std::vector<double> d(window_d.begin(), window_d.end());
        const std::vector<double> p(window_p.begin(), window_p.end());
        s.event = correlation_trigger(d, p, cfg);
        if (s.event != DirectingEvent::none) {
          const auto dir = s.event == DirectingEvent::sharpen ? Direction::sharpen : Direction::flatten;
          simp = direct_transform(simp, dir, cfg.alpha, cfg.beta);
          q = build_proposal(net, simp, ev, cfg.limits);
          cooldown = cfg.cooldown_batches();
          window_d.clear();
          window_p.clear();
        }
      }
    }
    report.trace.push_back(s);
  }

  report.estimate_ln = combine_batches(state);
  const double n = static_cast<double>(report.samples);
  report.kl_estimate = report.feasible_samples ? -log_ratio_sum / static_cast<double>(report.feasible_samples)
                                               : std::nan("");
  // (S2 - S1^2/n)/(n-1), zero ratios contributing nothing to either sum
  if (report.samples > 1 && report.feasible_samples > 0) {
    const double a = all_squares.value();
    const double b = 2.0 * all_ratios.value() - std::log(n);
    report.log_sample_variance = a > b ? a + std::log1p(-std::exp(b - a)) - std::log(n - 1.0) : log_zero;
  } else {
    report.log_sample_variance = log_zero;
  }
  report.deleted_edges = simp.deleted_edges.size();
  report.final_proposal = std::move(q);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace

RunReport run_batches(const BayesianNetwork& net, const Evidence& ev, ProposalDistribution q, SimplifiedNetwork simp,
                      const SamplerConfig& cfg, const RunOptions& options) {
  LoopPolicy policy;
  policy.adapt = options.adaptive;
  policy.direct = options.directing;
  policy.weighted = options.adaptive || options.directing;
  RunReport r = batch_loop(net, ev, std::move(q), std::move(simp), cfg, policy);
  r.options = options;
  return r;
}

RunReport estimate_static(const BayesianNetwork& net, const Evidence& ev, const ProposalDistribution& q,
                          const SamplerConfig& cfg) {
  RunReport r = batch_loop(net, ev, q, SimplifiedNetwork{}, cfg, LoopPolicy{});
  r.options = {false, false};
  r.algorithm = "static";
  return r;
}

RunReport run_varis(const BayesianNetwork& net, const Evidence& ev, const SamplerConfig& cfg,
                    const RunOptions& options) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  SimplifiedNetwork simp = del_edges(net, cfg.width_bound);
  if (!simp.deleted_edges.empty()) simp = fit_without_evidence(net, simp, ev, cfg.fit);
  const int width = induced_width(simp.network);
  ProposalDistribution q = build_proposal(net, simp, ev, cfg.limits);
  RunReport r = run_batches(net, ev, std::move(q), std::move(simp), cfg, options);
  r.algorithm = options.adaptive || options.directing ? "varis" : "varis-static";
  r.simplified_width = width;
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

RunReport likelihood_weighting(const BayesianNetwork& net, const Evidence& ev, const SamplerConfig& cfg) {
  RunReport r = estimate_static(net, ev, prior_proposal(net, ev), cfg);
  r.algorithm = "lw";
  return r;
}

RunReport sis_star(const BayesianNetwork& net, const Evidence& ev, const SamplerConfig& cfg) {
  LoopPolicy policy;
  policy.adapt = true;
  policy.accept_test = false;
  RunReport r = batch_loop(net, ev, feasible_prior_proposal(net, ev), SimplifiedNetwork{}, cfg, policy);
  r.options = {true, false};
  r.algorithm = "sis";
  return r;
}

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string trace_csv(const RunReport& report) {
  std::string out = "k,ln_Ptilde_k,ln_Ptilde_cum,D_hat_k,sigma_hat_k,w_k,eta_k,accepted,directing_event\n";
  for (const auto& s : report.trace) {
    out += std::to_string(s.k) + ',' + format_real(s.ln_p_batch) + ',' + format_real(s.ln_p_cum) + ',' +
           format_real(s.d_hat) + ',' + format_real(s.cv) + ',' + format_real(s.weight) + ',' + format_real(s.eta) +
           ',' + (s.accepted ? "1" : "0") + ',' + to_string(s.event) + '\n';
  }
  return out;
}

std::string summary_json(const RunReport& report) {
  // non-finite reals become strings so the document stays valid JSON
  auto real = [](double x) -> nlohmann::ordered_json {
    if (std::isfinite(x)) return x;
    return format_real(x);
  };
  const SamplerConfig& c = report.config;
  nlohmann::ordered_json cfg;
  cfg["m"] = c.m;
  cfg["k_max"] = c.horizon();
  cfg["eta0"] = c.eta0;
  cfg["etaf"] = c.etaf;
  cfg["alpha"] = c.alpha;
  cfg["beta"] = c.beta;
  cfg["l"] = c.window;
  cfg["w0"] = c.w0;
  cfg["M"] = c.samples;
  cfg["significance"] = c.significance;
  cfg["cooldown"] = c.cooldown_batches();
  cfg["width_bound"] = c.width_bound;
  cfg["workers"] = c.workers;
  cfg["adaptive"] = report.options.adaptive;
  cfg["directing"] = report.options.directing;

  nlohmann::ordered_json j;
  j["algorithm"] = report.algorithm;
  j["estimate_ln"] = real(report.estimate_ln);
  j["M"] = report.samples;
  j["batches"] = report.trace.size();
  j["feasible_samples"] = report.feasible_samples;
  j["kl_estimate"] = real(report.kl_estimate);
  j["ln_sample_variance"] = real(report.log_sample_variance);
  j["deleted_edges"] = report.deleted_edges;
  j["simplified_width"] = report.simplified_width;
  j["wall_seconds"] = report.wall_seconds;
  j["seed"] = c.seed;
  j["config"] = std::move(cfg);
  return j.dump(2) + "\n";
}

}  // namespace varis
