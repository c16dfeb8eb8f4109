#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "coxbar/error.hpp"
#include "coxbar/partial_likelihood.hpp"
#include "coxbar/survival_data.hpp"

namespace coxbar {

/// Quadratic penalty sum_j weight[j] * beta[j]^2. A frozen coordinate is
/// pinned at exactly zero, which stands in for an infinite weight.
struct PenaltySpec {
  std::vector<double> weight;
  std::vector<std::uint8_t> frozen;

  static PenaltySpec uniform(std::size_t p, double w) {
    return {std::vector<double>(p, w), std::vector<std::uint8_t>(p, 0)};
  }
  std::size_t size() const noexcept { return weight.size(); }
};

struct SolverOptions {
  std::size_t max_sweeps = 1000;
  double tol_obj = 1e-8;       // relative objective change over one sweep
  double tol_beta = 1e-6;      // max |delta beta_j| over one sweep
  double initial_radius = 1.0;
  int max_halvings = 30;
  /// Record the from-scratch objective after every accepted step. O(n + nnz)
  /// per step, meant for tests on small problems.
  bool trace_objective = false;
};

struct FitResult {
  std::vector<double> beta;
  std::vector<std::size_t> support;
  double loglik = 0.0;
  double objective = 0.0;
  std::size_t sweeps = 0;
  std::size_t outer_iterations = 0;
  bool converged = false;
  std::size_t df = 0;
  double aic = 0.0;
  double bic = 0.0;
  double cbic = 0.0;
  double lambda = 0.0;
  double xi = 0.0;
  std::vector<double> objective_trace;
  std::vector<std::size_t> trace_starts;     // offset of each inner solve in objective_trace
  std::vector<std::size_t> support_history;  // support size after each outer step
};

/// Curvature guard for unpenalized coordinates with a flat second derivative.
inline constexpr double kCurvatureGuard = 1e-10;

/// One-step Newton increment for -2*l(beta) + beta_j^2 / phi_j along
/// coordinate j, written so phi_j only multiplies. phi_j = 0 returns -beta_j,
/// landing the coordinate on exactly zero.
inline double stabilized_coord_step(double beta_j, double g1, double g2, double phi_j) {
  return (phi_j * g1 - beta_j) / (-phi_j * g2 + 1.0);
}

inline std::vector<std::size_t> support_of(std::span<const double> beta) {
  std::vector<std::size_t> s;
  for (std::size_t j = 0; j < beta.size(); ++j)
    if (beta[j] != 0.0) s.push_back(j);
  return s;
}

inline double penalty_value(const PenaltySpec& penalty, std::span<const double> beta) {
  double pen = 0.0;
  for (std::size_t j = 0; j < beta.size(); ++j)
    if (!penalty.frozen[j] && penalty.weight[j] != 0.0) pen += penalty.weight[j] * beta[j] * beta[j];
  return pen;
}

/// F(beta) = -2 l(beta) + sum_j w_j beta_j^2, evaluated from scratch.
inline double penalized_objective(const SurvivalDataset& ds, const PenaltySpec& penalty,
                                  std::span<const double> beta) {
  return -2.0 * log_partial_likelihood_at(ds, beta) + penalty_value(penalty, beta);
}

/// Cyclic coordinate descent on F with trust-region-clamped one-step Newton
/// updates. Each accepted step does not increase F; a step that would is
/// halved up to `max_halvings` times and then skipped.
inline FitResult ccd_minimize(const SurvivalDataset& ds, const PenaltySpec& penalty,
                              std::span<const double> beta0, const SolverOptions& opts = {}) {
  const std::size_t p = ds.p;
  if (beta0.size() != p)
    throw InputError("starting vector has length " + std::to_string(beta0.size()) + ", expected " +
                     std::to_string(p));
  if (penalty.weight.size() != p || penalty.frozen.size() != p)
    throw InputError("penalty has length " + std::to_string(penalty.weight.size()) + ", expected " +
                     std::to_string(p));
  for (std::size_t j = 0; j < p; ++j) {
    if (!(penalty.weight[j] >= 0.0) || !std::isfinite(penalty.weight[j]))
      throw InputError("penalty weight for x" + std::to_string(j + 1) + " is negative or non-finite");
    if (penalty.frozen[j] && beta0[j] != 0.0)
      throw InputError("frozen coordinate x" + std::to_string(j + 1) + " must start at zero");
  }

  auto state = init_state(ds, beta0);
  std::vector<double> radius(p, opts.initial_radius);
  double ll = log_partial_likelihood(ds, state);
  double objective = -2.0 * ll + penalty_value(penalty, state.beta);

  FitResult res;
  if (opts.trace_objective) {
    res.trace_starts.push_back(0);
    res.objective_trace.push_back(penalized_objective(ds, penalty, state.beta));
  }

  for (std::size_t sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    const double start = objective;
    double max_change = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (penalty.frozen[j]) continue;
      const double w = penalty.weight[j];
      const double bj = state.beta[j];
      const auto d = coord_derivatives(ds, state, j);
      double delta = w > 0.0 ? stabilized_coord_step(bj, d.g1, d.g2, 1.0 / w)
                             : d.g1 / (-d.g2 + kCurvatureGuard);
      delta = std::clamp(delta, -radius[j], radius[j]);
      radius[j] = std::max(2.0 * std::abs(delta), radius[j] / 2.0);
      if (delta == 0.0) continue;

      bool accepted = false, any_finite = false;
      double change = 0.0;
      for (int h = 0; h <= opts.max_halvings; ++h, delta /= 2.0) {
        const auto dl = loglik_change(ds, state, j, delta);
        if (!dl) continue;
        any_finite = true;
        const double nb = bj + delta;
        change = -2.0 * *dl + w * (nb * nb - bj * bj);
        if (change <= 0.0) {
          detail::column_step<true>(ds, state, j, delta);
          if (state.drift > kDenominatorDriftLimit) refresh(ds, state);
          accepted = true;
          break;
        }
      }
      if (!any_finite)
        throw NumericalError("objective is non-finite for every trial step on x" + std::to_string(j + 1));
      if (!accepted) continue;
      objective += change;
      max_change = std::max(max_change, std::abs(delta));
      if (opts.trace_objective) res.objective_trace.push_back(penalized_objective(ds, penalty, state.beta));
    }
    refresh(ds, state);
    ll = log_partial_likelihood(ds, state);
    objective = -2.0 * ll + penalty_value(penalty, state.beta);
    if (!std::isfinite(objective)) throw NumericalError("objective became non-finite in sweep " + std::to_string(sweep));
    res.sweeps = sweep;
    const double rel = std::abs(start - objective) / (std::abs(objective) + 1.0);
    if (rel <= opts.tol_obj && max_change <= opts.tol_beta) {
      res.converged = true;
      break;
    }
  }

  res.beta = std::move(state.beta);
  for (std::size_t j = 0; j < p; ++j)
    if (penalty.frozen[j]) res.beta[j] = 0.0;
  res.support = support_of(res.beta);
  res.df = res.support.size();
  res.loglik = ll;
  res.objective = objective;
  return res;
}

}  // namespace coxbar
