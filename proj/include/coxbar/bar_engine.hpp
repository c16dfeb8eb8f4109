#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "coxbar/ccd_solver.hpp"
#include "coxbar/error.hpp"
#include "coxbar/io.hpp"
#include "coxbar/parallel.hpp"
#include "coxbar/partial_likelihood.hpp"
#include "coxbar/survival_data.hpp"

namespace coxbar {

enum class LambdaRule { fixed, bic, cbic, grid };
enum class Criterion { aic, bic, cbic };
enum class PathAxis { lambda, xi };

inline LambdaRule parse_lambda_rule(const std::string& s) {
  if (s == "fixed") return LambdaRule::fixed;
  if (s == "bic") return LambdaRule::bic;
  if (s == "cbic") return LambdaRule::cbic;
  if (s == "grid") return LambdaRule::grid;
  throw InputError("unknown lambda rule '" + s + "' (expected fixed, bic, cbic or grid)");
}

inline std::string to_string(LambdaRule r) {
  switch (r) {
    case LambdaRule::fixed: return "fixed";
    case LambdaRule::bic: return "bic";
    case LambdaRule::cbic: return "cbic";
    case LambdaRule::grid: return "grid";
  }
  return "?";
}

inline Criterion parse_criterion(const std::string& s) {
  if (s == "aic") return Criterion::aic;
  if (s == "bic") return Criterion::bic;
  if (s == "cbic") return Criterion::cbic;
  throw InputError("unknown criterion '" + s + "' (expected aic, bic or cbic)");
}

inline std::string to_string(Criterion c) {
  return c == Criterion::aic ? "aic" : c == Criterion::bic ? "bic" : "cbic";
}

struct BarConfig {
  double xi = 1.0;
  LambdaRule lambda_rule = LambdaRule::bic;
  double lambda = 0.0;               // used by LambdaRule::fixed
  std::vector<double> lambda_grid;   // used by LambdaRule::grid
  Criterion criterion = Criterion::bic;
  double d = 0.0;                    // L_d exponent; 0 gives the L0 surrogate
  double zero_threshold = 1e-8;
  std::size_t outer_max = 200;
  double outer_tol = 1e-6;
  SolverOptions solver;
  std::size_t threads = 1;           // grid and path fan-out only
};

inline void check_config(const BarConfig& c) {
  if (!(c.xi > 0.0) || !std::isfinite(c.xi)) throw InputError("xi must be positive");
  if (c.lambda_rule == LambdaRule::fixed && (!(c.lambda >= 0.0) || !std::isfinite(c.lambda)))
    throw InputError("lambda must be nonnegative");
  if (!(c.d >= 0.0 && c.d <= 1.0)) throw InputError("d must lie in [0, 1]");
  if (!(c.zero_threshold > 0.0)) throw InputError("zero threshold must be positive");
  if (c.outer_max == 0 || !(c.outer_tol > 0.0)) throw InputError("outer iteration limits must be positive");
  if (c.threads == 0) throw InputError("threads must be at least 1");
}

/// Penalty level for the single-lambda rules: fixed value, ln n, or ln d_n.
inline double resolve_lambda(const BarConfig& c, const SurvivalDataset& ds) {
  switch (c.lambda_rule) {
    case LambdaRule::fixed: return c.lambda;
    case LambdaRule::bic: return std::log(static_cast<double>(ds.n));
    case LambdaRule::cbic: return std::log(static_cast<double>(std::max<std::size_t>(ds.event_count, 1)));
    case LambdaRule::grid: break;
  }
  throw InputError("grid rule has no single lambda");
}

struct InformationCriteria {
  double aic = 0.0;
  double bic = 0.0;
  double cbic = 0.0;
};

/// -2 l + k df with k = 2, ln n and ln d_n.
inline InformationCriteria information_criteria(double loglik, std::size_t df, std::size_t n, std::size_t events) {
  const double dev = -2.0 * loglik;
  const double k = static_cast<double>(df);
  return {dev + 2.0 * k, dev + std::log(static_cast<double>(n)) * k,
          dev + std::log(static_cast<double>(events)) * k};
}

inline void attach_criteria(FitResult& fit, const SurvivalDataset& ds) {
  const auto ic = information_criteria(fit.loglik, fit.df, ds.n, std::max<std::size_t>(ds.event_count, 1));
  fit.aic = ic.aic;
  fit.bic = ic.bic;
  fit.cbic = ic.cbic;
}

inline double criterion_value(const FitResult& fit, Criterion c) {
  return c == Criterion::aic ? fit.aic : c == Criterion::bic ? fit.bic : fit.cbic;
}

/// Cox ridge fit, minimizing -2 l + xi * |beta|^2 from beta = 0.
inline FitResult fit_ridge(const SurvivalDataset& ds, double xi, const SolverOptions& opts = {}) {
  if (!(xi > 0.0)) throw InputError("xi must be positive");
  const std::vector<double> zero(ds.p, 0.0);
  auto fit = ccd_minimize(ds, PenaltySpec::uniform(ds.p, xi), zero, opts);
  fit.xi = xi;
  attach_criteria(fit, ds);
  return fit;
}

struct PathPoint {
  double tuning = 0.0;
  FitResult fit;
  bool failed = false;
  std::string error;
};

struct PathResult {
  std::vector<PathPoint> points;
};

struct GridFit {
  FitResult best;
  std::size_t best_index = 0;
  PathResult path;
};

inline GridFit fit_bar_grid(const SurvivalDataset& ds, std::vector<double> lambda_grid, Criterion criterion,
                            const BarConfig& config);

namespace detail {

inline std::size_t freeze_small(std::vector<double>& beta, std::vector<std::uint8_t>& frozen, double zeta) {
  std::size_t nonzero = 0;
  for (std::size_t j = 0; j < beta.size(); ++j) {
    if (frozen[j] || std::abs(beta[j]) < zeta) {
      beta[j] = 0.0;
      frozen[j] = 1;
    } else {
      ++nonzero;
    }
  }
  return nonzero;
}

inline void append_trace(FitResult& into, const FitResult& inner) {
  if (inner.objective_trace.empty()) return;
  into.trace_starts.push_back(into.objective_trace.size());
  into.objective_trace.insert(into.objective_trace.end(), inner.objective_trace.begin(), inner.objective_trace.end());
}

inline FitResult fit_bar_single(const SurvivalDataset& ds, const BarConfig& config, double lambda) {
  auto ridge = fit_ridge(ds, config.xi, config.solver);

  FitResult res;
  res.lambda = lambda;
  res.xi = config.xi;
  res.sweeps = ridge.sweeps;
  append_trace(res, ridge);
  std::vector<double> beta = std::move(ridge.beta);
  std::vector<std::uint8_t> frozen(ds.p, 0);
  res.support_history.push_back(freeze_small(beta, frozen, config.zero_threshold));

  const double power = 2.0 - config.d;
  PenaltySpec penalty{std::vector<double>(ds.p, 0.0), frozen};
  for (std::size_t k = 1; k <= config.outer_max; ++k) {
    for (std::size_t j = 0; j < ds.p; ++j) {
      penalty.frozen[j] = frozen[j];
      const double mag = std::abs(beta[j]);
      penalty.weight[j] = frozen[j] ? 0.0 : config.d == 0.0 ? lambda / (mag * mag) : lambda / std::pow(mag, power);
    }
    auto inner = ccd_minimize(ds, penalty, beta, config.solver);
    res.sweeps += inner.sweeps;
    append_trace(res, inner);
    std::vector<double> next = std::move(inner.beta);
    res.support_history.push_back(freeze_small(next, frozen, config.zero_threshold));
    double change = 0.0;
    for (std::size_t j = 0; j < ds.p; ++j) change = std::max(change, std::abs(next[j] - beta[j]));
    beta = std::move(next);
    res.outer_iterations = k;
    if (change < config.outer_tol) {
      res.converged = true;
      break;
    }
  }

  res.beta = std::move(beta);
  res.support = support_of(res.beta);
  res.df = res.support.size();
  res.loglik = log_partial_likelihood_at(ds, res.beta);
  double pen = 0.0;
  for (std::size_t j : res.support) pen += config.d == 0.0 ? 1.0 : std::pow(std::abs(res.beta[j]), config.d);
  res.objective = -2.0 * res.loglik + lambda * pen;
  attach_criteria(res, ds);
  return res;
}

}  // namespace detail

/// Broken adaptive ridge: a ridge start followed by reweighted ridge fits with
/// weights lambda / |beta_j|^(2-d), warm-started from the previous iterate.
/// Coordinates that fall below the zero threshold are locked at exact zero.
/// The reported objective is -2 l + lambda * sum_{support} |beta_j|^d.
inline FitResult fit_bar(const SurvivalDataset& ds, const BarConfig& config) {
  check_config(config);
  if (ds.event_count == 0) throw InputError("dataset has no events");
  if (config.lambda_rule == LambdaRule::grid)
    return fit_bar_grid(ds, config.lambda_grid, config.criterion, config).best;
  return detail::fit_bar_single(ds, config, resolve_lambda(config, ds));
}

inline void check_grid(std::span<const double> grid, bool positive) {
  if (grid.empty()) throw InputError("tuning grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i]) || grid[i] < 0.0 || (positive && grid[i] == 0.0))
      throw InputError("tuning grid values must be positive and finite");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw InputError("tuning grid must be strictly increasing");
  }
}

/// One BAR fit per grid point with every other setting taken from `config`.
/// Failed points are kept in the path with `failed` set.
inline PathResult path_over(const SurvivalDataset& ds, PathAxis axis, std::span<const double> grid,
                            const BarConfig& config) {
  check_config(config);
  check_grid(grid, axis == PathAxis::xi);
  PathResult path;
  path.points.resize(grid.size());
  parallel_for(grid.size(), config.threads, [&](std::size_t i) {
    BarConfig c = config;
    if (axis == PathAxis::lambda) {
      c.lambda_rule = LambdaRule::fixed;
      c.lambda = grid[i];
    } else {
      c.xi = grid[i];
      if (c.lambda_rule == LambdaRule::grid) c.lambda_rule = LambdaRule::bic;
    }
    auto& pt = path.points[i];
    pt.tuning = grid[i];
    try {
      pt.fit = fit_bar(ds, c);
    } catch (const Error& e) {
      pt.failed = true;
      pt.error = e.what();
    }
  });
  return path;
}

/// Fits every lambda and keeps the one minimizing the chosen criterion; ties
/// go to the smaller lambda.
inline GridFit fit_bar_grid(const SurvivalDataset& ds, std::vector<double> lambda_grid, Criterion criterion,
                            const BarConfig& config) {
  std::sort(lambda_grid.begin(), lambda_grid.end());
  lambda_grid.erase(std::unique(lambda_grid.begin(), lambda_grid.end()), lambda_grid.end());
  check_grid(lambda_grid, true);
  GridFit out;
  out.path = path_over(ds, PathAxis::lambda, lambda_grid, config);
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  for (std::size_t i = 0; i < out.path.points.size(); ++i) {
    const auto& pt = out.path.points[i];
    if (pt.failed) continue;
    const double score = criterion_value(pt.fit, criterion);
    if (!found || score < best) {
      best = score;
      out.best_index = i;
      found = true;
    }
  }
  if (!found) throw NumericalError("every grid point failed: " + out.path.points.front().error);
  out.best = out.path.points[out.best_index].fit;
  return out;
}

/// Path CSV: tuning,converged,df,loglik,aic,bic,cbic,beta_1..beta_p with 17
/// significant digits.
inline void write_path_csv(std::ostream& out, const PathResult& path, std::size_t p) {
  out << "tuning,converged,df,loglik,aic,bic,cbic";
  for (std::size_t j = 0; j < p; ++j) out << ",beta_" << (j + 1);
  out << '\n';
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& pt : path.points) {
    const auto& f = pt.fit;
    out << format_double(pt.tuning, 17) << ',' << (pt.failed ? 0 : int(f.converged)) << ','
        << (pt.failed ? 0 : f.df);
    for (double v : {f.loglik, f.aic, f.bic, f.cbic}) out << ',' << format_double(pt.failed ? nan : v, 17);
    for (std::size_t j = 0; j < p; ++j)
      out << ',' << format_double(pt.failed || j >= f.beta.size() ? nan : f.beta[j], 17);
    out << '\n';
  }
}

struct PairBound {
  std::size_t i = 0;
  std::size_t j = 0;
  double correlation = 0.0;
  double lhs = 0.0;  // |1/beta_i - 1/beta_j|
  double rhs = 0.0;  // bound
  bool violated = false;
};

struct GroupingReport {
  std::size_t pairs = 0;
  std::size_t violations = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  std::vector<PairBound> details;
};

/// Evaluates |1/b_i - 1/b_j| <= (1/lambda) sqrt(2 (n-1)(1 - r_ij)) sqrt(n (1 + d_n)^2)
/// for every pair of nonzero coefficients. `tolerance` allows |b_i - b_j| up to
/// that amount of fixed-point error before a pair counts as a violation.
inline GroupingReport grouping_bound_check(const FitResult& fit, const SurvivalDataset& ds, double lambda,
                                           double tolerance = 1e-6) {
  GroupingReport rep;
  const double n = static_cast<double>(ds.n);
  const double dn = static_cast<double>(ds.event_count);
  std::vector<std::vector<double>> cols;
  cols.reserve(fit.support.size());
  for (std::size_t j : fit.support) cols.push_back(dense_column(ds, j));
  for (std::size_t a = 0; a < fit.support.size(); ++a) {
    for (std::size_t b = a + 1; b < fit.support.size(); ++b) {
      const double bi = fit.beta[fit.support[a]], bj = fit.beta[fit.support[b]];
      double dot = 0.0;
      for (std::size_t r = 0; r < ds.n; ++r) dot += cols[a][r] * cols[b][r];
      PairBound pb;
      pb.i = fit.support[a];
      pb.j = fit.support[b];
      pb.correlation = dot / (n - 1.0);
      pb.lhs = std::abs(1.0 / bi - 1.0 / bj);
      pb.rhs = std::sqrt(2.0 * (n - 1.0) * std::max(0.0, 1.0 - pb.correlation)) * std::sqrt(n) * (1.0 + dn) / lambda;
      const double slack = pb.rhs - pb.lhs;
      pb.violated = slack < -tolerance / std::abs(bi * bj);
      rep.min_slack = std::min(rep.min_slack, slack);
      rep.violations += pb.violated;
      ++rep.pairs;
      rep.details.push_back(pb);
    }
  }
  return rep;
}

}  // namespace coxbar
