#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "coxbar/bar_engine.hpp"
#include "coxbar/error.hpp"
#include "coxbar/io.hpp"
#include "coxbar/parallel.hpp"
#include "coxbar/random.hpp"
#include "coxbar/screening.hpp"
#include "coxbar/simulate.hpp"

namespace coxbar {

/// Selection and estimation scores of one fit against the truth.
struct SelectionMetrics {
  double ssb = 0.0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  bool tm = false;
  std::size_t acr = 0;
  std::size_t q = 0;
  std::vector<bool> included;  // per truly nonzero coefficient, ascending index
  double aic = 0.0;
  double bic = 0.0;
};

namespace detail {

inline std::vector<std::size_t> magnitude_rank(std::span<const std::size_t> idx, std::span<const double> v) {
  std::vector<std::size_t> order(idx.begin(), idx.end());
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(v[a]) > std::abs(v[b]); });
  return order;
}

}  // namespace detail

/// SSB, false positives/negatives, exact-model indicator and ACR. ACR counts
/// truly nonzero coefficients whose rank by |estimate| (within the true
/// support, ties by index) equals their rank by |truth|.
inline SelectionMetrics score(std::span<const double> beta_hat, std::span<const double> beta_true) {
  if (beta_hat.size() != beta_true.size())
    throw InputError("estimate and truth have different lengths");
  SelectionMetrics m;
  std::vector<std::size_t> signal;
  for (std::size_t j = 0; j < beta_true.size(); ++j) {
    const double diff = beta_hat[j] - beta_true[j];
    m.ssb += diff * diff;
    const bool selected = beta_hat[j] != 0.0;
    if (beta_true[j] != 0.0) {
      signal.push_back(j);
      m.included.push_back(selected);
      if (!selected) ++m.fn;
    } else if (selected) {
      ++m.fp;
    }
  }
  m.q = signal.size();
  m.tm = m.fp == 0 && m.fn == 0;
  const auto by_truth = detail::magnitude_rank(signal, beta_true);
  const auto by_est = detail::magnitude_rank(signal, beta_hat);
  for (std::size_t k = 0; k < signal.size(); ++k) m.acr += by_truth[k] == by_est[k];
  if (m.tm != (m.fp == 0 && m.fn == 0) || m.fp > beta_true.size() - m.q || m.fn > m.q)
    throw std::logic_error("inconsistent selection metrics");
  return m;
}

/// A named estimator configuration for benchmarking.
struct MethodConfig {
  std::string name;
  BarConfig bar;
  std::size_t screen_m = 0;  // 0: no screening stage
};

/// lambda grid for the criterion-tuned variant: ln(n) * 2^(k/2), k = -6..4.
inline std::vector<double> default_lambda_grid(std::size_t n) {
  std::vector<double> g;
  for (int k = -6; k <= 4; ++k) g.push_back(std::log(static_cast<double>(n)) * std::pow(2.0, k / 2.0));
  return g;
}

/// Screening size floor(n / ln n).
inline std::size_t default_screen_size(std::size_t n) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) / std::log(static_cast<double>(n))));
}

/// Known names: bic-coxbar, cbic-coxbar, coxbar-bic (lambda chosen by BIC over
/// default_lambda_grid), and the screened variants sjs-bic-coxbar,
/// sjs-cbic-coxbar. `screen_m` = 0 picks floor(n / ln n) for screened methods.
inline MethodConfig method_from_name(const std::string& name, std::size_t n, std::size_t screen_m = 0,
                                     const BarConfig& base = {}) {
  MethodConfig m;
  m.name = name;
  m.bar = base;
  std::string core = name;
  if (core.rfind("sjs-", 0) == 0) {
    core = core.substr(4);
    m.screen_m = screen_m ? screen_m : default_screen_size(n);
  }
  if (core == "bic-coxbar") {
    m.bar.lambda_rule = LambdaRule::bic;
  } else if (core == "cbic-coxbar") {
    m.bar.lambda_rule = LambdaRule::cbic;
  } else if (core == "coxbar-bic") {
    m.bar.lambda_rule = LambdaRule::grid;
    m.bar.lambda_grid = default_lambda_grid(n);
    m.bar.criterion = Criterion::bic;
  } else {
    throw InputError("unknown method '" + name + "'");
  }
  return m;
}

/// Fits one method to one dataset.
inline FitResult fit_method(const SurvivalDataset& ds, const MethodConfig& method) {
  if (method.screen_m > 0) return sjs_coxbar(ds, std::min(method.screen_m, ds.p), method.bar);
  return fit_bar(ds, method.bar);
}

struct ReplicateOutcome {
  bool ok = false;
  std::string error;
  SelectionMetrics metrics;
  double runtime_ms = 0.0;
};

struct MethodSummary {
  std::string method;
  std::size_t reps = 0;     // successful replicates
  std::size_t failed = 0;
  double ssb = 0.0, fp = 0.0, fn = 0.0, tm = 0.0, acr = 0.0, aic = 0.0, bic = 0.0;
  double runtime_ms = 0.0;
  std::vector<double> inclusion;
};

struct BenchmarkReport {
  std::vector<std::size_t> signals;  // indices of truly nonzero coefficients
  std::vector<MethodSummary> methods;
  std::vector<std::vector<ReplicateOutcome>> outcomes;  // [method][replicate]
  double mean_censoring = 0.0;
};

/// Seed of replicate r under a master seed.
inline std::uint64_t replicate_seed(std::uint64_t master, std::size_t r) { return derive_seed(master, 0xBE7Cu, r); }

/// simulate -> fit -> score for each replicate; every method sees the same
/// replicate datasets. Replicates may run concurrently; aggregation walks them
/// in index order so results do not depend on `threads`.
inline BenchmarkReport run_benchmark(const SimScenario& scenario, const std::vector<MethodConfig>& methods,
                                     std::size_t replicates, std::uint64_t seed, std::size_t threads = 1) {
  if (replicates < 1) throw InputError("replicates must be at least 1");
  if (methods.empty()) throw InputError("no methods to benchmark");
  check_scenario(scenario);
  BenchmarkReport rep;
  for (std::size_t j = 0; j < scenario.p; ++j)
    if (scenario.beta0[j] != 0.0) rep.signals.push_back(j);
  rep.outcomes.assign(methods.size(), std::vector<ReplicateOutcome>(replicates));
  std::vector<double> censoring(replicates, 0.0);

  parallel_for(replicates, threads, [&](std::size_t r) {
    SimScenario s = scenario;
    s.seed = replicate_seed(seed, r);
    SimulatedData sim;
    try {
      sim = simulate(s);
    } catch (const Error& e) {
      for (auto& per_method : rep.outcomes) per_method[r].error = e.what();
      return;
    }
    censoring[r] = sim.censoring_rate;
    for (std::size_t k = 0; k < methods.size(); ++k) {
      auto& out = rep.outcomes[k][r];
      try {
        const auto t0 = std::chrono::steady_clock::now();
        const auto fit = fit_method(sim.data, methods[k]);
        const auto t1 = std::chrono::steady_clock::now();
        out.runtime_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        out.metrics = score(fit.beta, s.beta0);
        out.metrics.aic = fit.aic;
        out.metrics.bic = fit.bic;
        out.ok = true;
      } catch (const Error& e) {
        out.error = e.what();
      }
    }
  });

  rep.mean_censoring = std::accumulate(censoring.begin(), censoring.end(), 0.0) / static_cast<double>(replicates);
  for (std::size_t k = 0; k < methods.size(); ++k) {
    MethodSummary sum;
    sum.method = methods[k].name;
    sum.inclusion.assign(rep.signals.size(), 0.0);
    for (const auto& o : rep.outcomes[k]) {
      if (!o.ok) {
        ++sum.failed;
        continue;
      }
      ++sum.reps;
      sum.ssb += o.metrics.ssb;
      sum.fp += static_cast<double>(o.metrics.fp);
      sum.fn += static_cast<double>(o.metrics.fn);
      sum.tm += o.metrics.tm ? 1.0 : 0.0;
      sum.acr += static_cast<double>(o.metrics.acr);
      sum.aic += o.metrics.aic;
      sum.bic += o.metrics.bic;
      sum.runtime_ms += o.runtime_ms;
      for (std::size_t s = 0; s < rep.signals.size(); ++s) sum.inclusion[s] += o.metrics.included[s] ? 1.0 : 0.0;
    }
    if (sum.reps > 0) {
      const double r = static_cast<double>(sum.reps);
      for (double* v : {&sum.ssb, &sum.fp, &sum.fn, &sum.tm, &sum.acr, &sum.aic, &sum.bic, &sum.runtime_ms}) *v /= r;
      for (double& v : sum.inclusion) v /= r;
    }
    rep.methods.push_back(std::move(sum));
  }
  return rep;
}

/// Report CSV: `#` header lines, then
/// method,reps,SSB,FP,FN,TM,ACR,AIC,BIC,mean_runtime_ms,P_<j>...,failed.
/// Runtime is wall-clock and only written when `timing` is set (NA otherwise)
/// so that reports are reproducible byte for byte.
inline void write_report_csv(std::ostream& out, const BenchmarkReport& rep, bool timing = false) {
  out << "# ACR: truly nonzero coefficients whose rank by |estimate| within the true support "
         "equals their rank by |truth| (ties by index)\n";
  out << "# FP: selected but truly zero; FN: truly nonzero but not selected; TM: share of exact-support fits\n";
  out << "# mean realized censoring: " << format_double(rep.mean_censoring, 6) << '\n';
  out << "method,reps,SSB,FP,FN,TM,ACR,AIC,BIC,mean_runtime_ms";
  for (std::size_t s : rep.signals) out << ",P_" << (s + 1);
  out << ",failed\n";
  for (const auto& m : rep.methods) {
    out << m.method << ',' << m.reps;
    for (double v : {m.ssb, m.fp, m.fn, m.tm, m.acr, m.aic, m.bic}) out << ',' << format_double(v, 10);
    out << ',' << (timing ? format_double(m.runtime_ms, 6) : std::string("NA"));
    for (double v : m.inclusion) out << ',' << format_double(v, 10);
    out << ',' << m.failed << '\n';
  }
}

}  // namespace coxbar
