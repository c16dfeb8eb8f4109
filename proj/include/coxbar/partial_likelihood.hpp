#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coxbar/error.hpp"
#include "coxbar/survival_data.hpp"

namespace coxbar {

/// Linear predictors and risk-set denominators for one coefficient vector.
///
/// `eta` and `w` are indexed by risk-order position. Columns with a centering
/// transform add the same constant to every subject's predictor; that constant
/// is kept in `eta_shift` rather than in `eta` because the partial likelihood
/// is invariant to it. `denom[g]` is the sum of `w` over the risk set of event
/// group g, i.e. the prefix [0, groups[g].end].
struct LinearPredictorState {
  std::vector<double> beta;
  std::vector<double> eta;
  std::vector<double> w;
  std::vector<double> denom;
  double eta_shift = 0.0;
  double drift = 0.0;  // bound on relative rounding accumulated in denom

  /// Full linear predictor beta . x for the subject at `pos`.
  double linear_predictor(std::size_t pos) const { return eta[pos] + eta_shift; }
};

/// First and second derivative of the log-partial likelihood along one
/// coordinate. g2 is never positive.
struct CoordDerivatives {
  double g1 = 0.0;
  double g2 = 0.0;
};

struct UpdateOutcome {
  bool accepted = false;
  double loglik_change = 0.0;
};

/// Relative drift in `denom` that forces a full recomputation.
inline constexpr double kDenominatorDriftLimit = 1e-9;

/// Recomputes `w` from `eta` and every denominator from scratch.
inline void refresh(const SurvivalDataset& ds, LinearPredictorState& state) {
  for (std::size_t k = 0; k < ds.n; ++k) state.w[k] = std::exp(state.eta[k]);
  const auto& groups = ds.risk.groups;
  double acc = 0.0;
  std::size_t k = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (; k <= groups[g].end; ++k) acc += state.w[k];
    state.denom[g] = acc;
  }
  state.drift = 0.0;
}

inline LinearPredictorState init_state(const SurvivalDataset& ds, std::span<const double> beta) {
  if (beta.size() != ds.p)
    throw InputError("coefficient vector has length " + std::to_string(beta.size()) + ", expected " +
                     std::to_string(ds.p));
  LinearPredictorState s;
  s.beta.assign(beta.begin(), beta.end());
  s.eta.assign(ds.n, 0.0);
  s.w.assign(ds.n, 1.0);
  s.denom.assign(ds.risk.groups.size(), 0.0);
  for (std::size_t j = 0; j < ds.p; ++j) {
    const double b = beta[j];
    if (!std::isfinite(b)) throw InputError("non-finite coefficient at index " + std::to_string(j + 1));
    if (b == 0.0) continue;
    const auto& col = ds.design.column(j);
    const auto& tr = ds.design.transform(j);
    const double step = tr.multiplier() * b;
    for (std::size_t e = 0; e < col.nnz(); ++e) s.eta[col.pos[e]] += col.value[e] * step;
    s.eta_shift += tr.offset() * b;
  }
  refresh(ds, s);
  for (std::size_t k = 0; k < ds.n; ++k)
    if (!std::isfinite(s.w[k]) || !(s.w[k] > 0.0))
      throw NumericalError("exp(linear predictor) overflows for subject " + std::to_string(ds.order[k] + 1));
  for (double d : s.denom)
    if (!std::isfinite(d)) throw NumericalError("risk-set denominator overflows");
  return s;
}

/// Breslow log-partial likelihood: sum over events of r_i - ln D(risk set).
inline double log_partial_likelihood(const SurvivalDataset& ds, const LinearPredictorState& state) {
  double ll = 0.0;
  for (std::size_t k = 0; k < ds.n; ++k)
    if (ds.risk.event_at[k]) ll += state.eta[k];
  const auto& groups = ds.risk.groups;
  for (std::size_t g = 0; g < groups.size(); ++g) ll -= groups[g].events * std::log(state.denom[g]);
  return ll;
}

/// Derivatives along column j. Only the column's nonzero entries and the event
/// groups from its first nonzero position onward are visited.
inline CoordDerivatives coord_derivatives(const SurvivalDataset& ds, const LinearPredictorState& state,
                                          std::size_t j) {
  const auto& col = ds.design.column(j);
  const std::size_t nnz = col.nnz();
  if (nnz == 0) return {};
  const auto& groups = ds.risk.groups;
  const auto& event_at = ds.risk.event_at;
  const std::uint32_t* pos = col.pos.data();
  const double* val = col.value.data();
  const double* w = state.w.data();

  double a_sum = 0.0, b_sum = 0.0, event_x = 0.0, mean_sum = 0.0, var_sum = 0.0;
  std::size_t e = 0;
  for (std::size_t g = ds.risk.first_group[pos[0]]; g < groups.size(); ++g) {
    const std::uint32_t end = groups[g].end;
    for (; e < nnz && pos[e] <= end; ++e) {
      const double v = val[e];
      const double vw = v * w[pos[e]];
      a_sum += vw;
      b_sum += v * vw;
      if (event_at[pos[e]]) event_x += v;
    }
    const double inv = 1.0 / state.denom[g];
    const double mean = a_sum * inv;
    double var = b_sum * inv - mean * mean;
    if (var < 0.0) var = 0.0;
    mean_sum += groups[g].events * mean;
    var_sum += groups[g].events * var;
  }
  const double m = ds.design.transform(j).multiplier();
  return {m * (event_x - mean_sum), -m * m * var_sum};
}

namespace detail {

/// Walks column j for a tentative step `delta`. Returns the change in the
/// log-partial likelihood, or nullopt if any weight or denominator would
/// overflow. With Commit the state is updated in place; callers must only
/// commit a step that a non-committing walk has accepted.
template <bool Commit, typename State>
std::optional<double> column_step(const SurvivalDataset& ds, State& state, std::size_t j, double delta) {
  const auto& col = ds.design.column(j);
  const auto& tr = ds.design.transform(j);
  const std::size_t nnz = col.nnz();
  if constexpr (Commit) {
    state.beta[j] += delta;
    state.eta_shift += tr.offset() * delta;
  }
  if (nnz == 0 || delta == 0.0) return 0.0;

  const double step = tr.multiplier() * delta;
  const auto& groups = ds.risk.groups;
  const auto& event_at = ds.risk.event_at;
  const std::uint32_t* pos = col.pos.data();
  const double* val = col.value.data();

  double cum = 0.0, event_x = 0.0, dlog = 0.0;
  std::size_t e = 0;
  auto visit = [&](std::size_t idx) -> bool {
    const std::uint32_t k = pos[idx];
    const double eta_new = state.eta[k] + val[idx] * step;
    const double w_new = std::exp(eta_new);
    if (!std::isfinite(w_new) || !(w_new > 0.0)) return false;
    cum += w_new - state.w[k];
    if (event_at[k]) event_x += val[idx];
    if constexpr (Commit) {
      state.eta[k] = eta_new;
      state.w[k] = w_new;
    }
    return true;
  };
  for (std::size_t g = ds.risk.first_group[pos[0]]; g < groups.size(); ++g) {
    const std::uint32_t end = groups[g].end;
    for (; e < nnz && pos[e] <= end; ++e)
      if (!visit(e)) return std::nullopt;
    const double d_old = state.denom[g];
    const double d_new = d_old + cum;
    if (!std::isfinite(d_new) || !(d_new > 0.0)) return std::nullopt;
    dlog += groups[g].events * std::log1p(cum / d_old);
    if constexpr (Commit) state.denom[g] = d_new;
  }
  for (; e < nnz; ++e)
    if (!visit(e)) return std::nullopt;
  if constexpr (Commit) state.drift += 4.0 * std::numeric_limits<double>::epsilon();
  return step * event_x - dlog;
}

}  // namespace detail

/// Change in the log-partial likelihood if beta[j] moved by delta; nullopt on
/// overflow. The state is not modified.
inline std::optional<double> loglik_change(const SurvivalDataset& ds, const LinearPredictorState& state,
                                           std::size_t j, double delta) {
  return detail::column_step<false>(ds, state, j, delta);
}

/// beta[j] += delta with an O(nnz_j + groups) patch of eta, w and the
/// denominators. On overflow the state is left untouched and the update is
/// reported as rejected.
inline UpdateOutcome apply_coord_update(const SurvivalDataset& ds, LinearPredictorState& state, std::size_t j,
                                        double delta) {
  if (!std::isfinite(delta)) return {false, 0.0};
  auto trial = loglik_change(ds, state, j, delta);
  if (!trial) return {false, 0.0};
  auto done = detail::column_step<true>(ds, state, j, delta);
  if (state.drift > kDenominatorDriftLimit) refresh(ds, state);
  return {true, *done};
}

/// Gradient of the log-partial likelihood, one coord_derivatives per column.
inline std::vector<double> full_gradient(const SurvivalDataset& ds, const LinearPredictorState& state) {
  std::vector<double> g(ds.p, 0.0);
  for (std::size_t j = 0; j < ds.p; ++j) g[j] = coord_derivatives(ds, state, j).g1;
  return g;
}

/// From-scratch log-partial likelihood at beta; infinite values signal overflow.
inline double log_partial_likelihood_at(const SurvivalDataset& ds, std::span<const double> beta) {
  try {
    return log_partial_likelihood(ds, init_state(ds, beta));
  } catch (const NumericalError&) {
    return -std::numeric_limits<double>::infinity();
  }
}

}  // namespace coxbar
