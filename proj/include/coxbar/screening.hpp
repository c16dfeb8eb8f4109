#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "coxbar/bar_engine.hpp"
#include "coxbar/ccd_solver.hpp"
#include "coxbar/error.hpp"
#include "coxbar/partial_likelihood.hpp"
#include "coxbar/survival_data.hpp"

namespace coxbar {

struct ScreenOptions {
  std::size_t max_iter = 50;
  int max_backtracks = 60;
  SolverOptions polish;
};

struct ScreenResult {
  std::vector<std::size_t> selected;  // ascending column indices, |selected| <= m
  std::vector<double> beta;           // length p, zero outside `selected`
  double loglik = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Indices of the m largest |values|; equal magnitudes keep the smaller index.
/// Returned in ascending index order.
inline std::vector<std::size_t> top_m_indices(std::span<const double> values, std::size_t m) {
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  m = std::min(m, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      const double ma = std::abs(values[a]), mb = std::abs(values[b]);
                      return ma != mb ? ma > mb : a < b;
                    });
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Sure joint screening: iterative hard thresholding for the sparsity-
/// restricted maximum partial likelihood. Each iteration takes a gradient
/// ascent step (step size halved from 1 until the thresholded point does not
/// lower l), keeps the m largest coefficients, and polishes them with an
/// unpenalized coordinate-descent fit on the kept set. Stops when the kept set
/// repeats.
inline ScreenResult sjs_screen(const SurvivalDataset& ds, std::size_t m, const ScreenOptions& opts = {}) {
  if (m < 1 || m > ds.p)
    throw InputError("screening size m=" + std::to_string(m) + " must lie in 1.." + std::to_string(ds.p));
  if (ds.event_count == 0) throw InputError("dataset has no events");

  ScreenResult res;
  std::vector<double> beta(ds.p, 0.0);
  double ll = log_partial_likelihood_at(ds, beta);
  std::vector<std::size_t> previous;
  std::vector<double> candidate(ds.p);

  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    res.iterations = it;
    const auto grad = full_gradient(ds, init_state(ds, beta));
    std::vector<std::size_t> kept;
    double step = 1.0;
    bool improved = false;
    for (int bt = 0; bt <= opts.max_backtracks; ++bt, step /= 2.0) {
      for (std::size_t j = 0; j < ds.p; ++j) candidate[j] = beta[j] + step * grad[j];
      kept = top_m_indices(candidate, m);
      std::vector<double> thresholded(ds.p, 0.0);
      for (std::size_t j : kept) thresholded[j] = candidate[j];
      const double cand_ll = log_partial_likelihood_at(ds, thresholded);
      if (std::isfinite(cand_ll) && cand_ll >= ll) {
        candidate = std::move(thresholded);
        improved = true;
        break;
      }
    }
    if (!improved) break;  // stalled: keep the current set, converged stays false

    PenaltySpec penalty = PenaltySpec::uniform(ds.p, 0.0);
    std::fill(penalty.frozen.begin(), penalty.frozen.end(), std::uint8_t{1});
    for (std::size_t j : kept) penalty.frozen[j] = 0;
    auto polished = ccd_minimize(ds, penalty, candidate, opts.polish);
    beta = std::move(polished.beta);
    ll = polished.loglik;
    res.selected = kept;
    if (kept == previous) {
      res.converged = true;
      break;
    }
    previous = std::move(kept);
  }
  if (res.selected.empty()) res.selected = top_m_indices(beta, m);
  res.beta = std::move(beta);
  res.loglik = ll;
  return res;
}

/// Two-stage estimator: screen to at most m columns, then run BAR on the
/// screened columns and embed the result back into length p.
inline FitResult sjs_coxbar(const SurvivalDataset& ds, std::size_t m, const BarConfig& config,
                            const ScreenOptions& opts = {}) {
  const auto screen = sjs_screen(ds, m, opts);
  const auto sub = subset_columns(ds, screen.selected);
  auto fit = fit_bar(sub, config);
  std::vector<double> full(ds.p, 0.0);
  for (std::size_t k = 0; k < screen.selected.size(); ++k) full[screen.selected[k]] = fit.beta[k];
  fit.beta = std::move(full);
  fit.support = support_of(fit.beta);
  fit.df = fit.support.size();
  return fit;
}

}  // namespace coxbar
