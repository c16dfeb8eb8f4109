#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "coxbar/error.hpp"
#include "coxbar/io.hpp"
#include "coxbar/random.hpp"
#include "coxbar/survival_data.hpp"

namespace coxbar {

enum class DesignKind { ar1_gaussian, sparse_binary };

/// Generative setup: exponential proportional hazards with unit baseline
/// hazard and independent U(0, u_max) censoring.
struct SimScenario {
  std::size_t n = 300;
  std::size_t p = 10;
  std::vector<double> beta0;
  DesignKind design = DesignKind::ar1_gaussian;
  double rho = 0.5;        // ar1-gaussian: corr(x_j, x_k) = rho^|j-k|
  double sparsity = 0.98;  // sparse-binary: fraction of zero entries
  double target_censoring = 0.2;
  std::uint64_t seed = 1;
};

struct SimulatedData {
  SurvivalDataset data;
  double u_max = std::numeric_limits<double>::infinity();
  double censoring_rate = 0.0;
};

inline constexpr std::size_t kCalibrationPilot = 50000;
inline constexpr double kCalibrationTolerance = 0.005;
inline constexpr int kCalibrationSteps = 60;

/// Coefficients of the moderate-dimension designs, zero-padded to length p.
inline std::vector<double> moderate_truth(std::size_t p) {
  std::vector<double> b{0.20, 0.0, 0.35, 0.0, 0.50, 0.55, 0.0, 0.0, 0.70, 0.80};
  b.resize(p, 0.0);
  return b;
}

inline void check_scenario(const SimScenario& s) {
  if (s.n < 1 || s.p < 1) throw InputError("scenario needs n >= 1 and p >= 1");
  if (s.beta0.size() != s.p)
    throw InputError("beta0 has " + std::to_string(s.beta0.size()) + " entries, p = " + std::to_string(s.p));
  for (double b : s.beta0)
    if (!std::isfinite(b)) throw InputError("beta0 entries must be finite");
  if (s.design == DesignKind::ar1_gaussian && !(s.rho > -1.0 && s.rho < 1.0))
    throw InputError("ar1 correlation must lie in (-1, 1)");
  if (s.design == DesignKind::sparse_binary && !(s.sparsity >= 0.0 && s.sparsity < 1.0))
    throw InputError("sparsity must lie in [0, 1)");
  if (!(s.target_censoring >= 0.0 && s.target_censoring < 1.0))
    throw InputError("target censoring must lie in [0, 1)");
}

namespace detail {

enum StreamId : std::uint32_t {
  kDesignStream = 1,
  kEventStream = 2,
  kCensorStream = 3,
  kPilotDesignStream = 11,
  kPilotEventStream = 12,
  kPilotCensorStream = 13,
};

/// Linear predictors of `count` fresh subjects; only columns up to the last
/// nonzero coefficient are drawn.
inline std::vector<double> pilot_predictors(const SimScenario& s, std::size_t count) {
  std::size_t last = 0;
  for (std::size_t j = 0; j < s.p; ++j)
    if (s.beta0[j] != 0.0) last = j + 1;
  std::vector<double> lp(count, 0.0);
  RandomStream rng(s.seed, kPilotDesignStream);
  const double density = 1.0 - s.sparsity;
  const double innov = std::sqrt(1.0 - s.rho * s.rho);
  for (std::size_t i = 0; i < count; ++i) {
    double x = 0.0;
    for (std::size_t j = 0; j < last; ++j) {
      if (s.design == DesignKind::ar1_gaussian) {
        x = j == 0 ? rng.normal() : s.rho * x + innov * rng.normal();
        lp[i] += s.beta0[j] * x;
      } else if (s.beta0[j] != 0.0 && rng.uniform() < density) {
        lp[i] += s.beta0[j];
      }
    }
  }
  return lp;
}

}  // namespace detail

/// Upper limit of the uniform censoring distribution that reaches the target
/// censoring fraction on a pilot sample, found by bisection on ln(u_max).
/// Target 0 means no censoring (infinite u_max).
inline double calibrate_censoring(const SimScenario& s) {
  check_scenario(s);
  if (s.target_censoring == 0.0) return std::numeric_limits<double>::infinity();
  const auto lp = detail::pilot_predictors(s, kCalibrationPilot);
  RandomStream ev(s.seed, detail::kPilotEventStream), cs(s.seed, detail::kPilotCensorStream);
  // subject i is censored under u_max = u exactly when u < T_i / V_i
  std::vector<double> ratio(lp.size());
  for (std::size_t i = 0; i < lp.size(); ++i) {
    const double t = ev.exponential() / std::exp(lp[i]);
    ratio[i] = t / cs.uniform();
  }
  std::sort(ratio.begin(), ratio.end());
  const double total = static_cast<double>(ratio.size());
  auto censored_fraction = [&](double log_u) {
    const double u = std::exp(log_u);
    const auto above = ratio.end() - std::upper_bound(ratio.begin(), ratio.end(), u);
    return static_cast<double>(above) / total;
  };
  double lo = -60.0, hi = 60.0;
  for (int step = 0; step < kCalibrationSteps; ++step) {
    const double mid = 0.5 * (lo + hi);
    const double f = censored_fraction(mid);
    if (std::abs(f - s.target_censoring) <= kCalibrationTolerance) return std::exp(mid);
    if (f > s.target_censoring)
      lo = mid;
    else
      hi = mid;
  }
  throw NumericalError("censoring target " + format_double(s.target_censoring) + " unreachable; achievable range [" +
                       format_double(censored_fraction(60.0)) + ", " + format_double(censored_fraction(-60.0)) + "]");
}

/// Draws one dataset. Fully determined by the scenario (including its seed).
inline SimulatedData simulate(const SimScenario& s) {
  check_scenario(s);
  SimulatedData out;
  out.u_max = calibrate_censoring(s);

  std::vector<ColumnInput> cols(s.p);
  std::vector<double> lp(s.n, 0.0);
  RandomStream rng(s.seed, detail::kDesignStream);
  if (s.design == DesignKind::ar1_gaussian) {
    for (auto& c : cols) {
      c.rows.reserve(s.n);
      c.values.reserve(s.n);
    }
    const double innov = std::sqrt(1.0 - s.rho * s.rho);
    for (std::size_t i = 0; i < s.n; ++i) {
      double x = 0.0;
      for (std::size_t j = 0; j < s.p; ++j) {
        x = j == 0 ? rng.normal() : s.rho * x + innov * rng.normal();
        cols[j].rows.push_back(i);
        cols[j].values.push_back(x);
        lp[i] += s.beta0[j] * x;
      }
    }
  } else {
    const double density = 1.0 - s.sparsity;
    const double log_miss = std::log1p(-density);
    for (std::size_t j = 0; j < s.p; ++j) {
      auto& c = cols[j];
      c.rows.reserve(static_cast<std::size_t>(density * static_cast<double>(s.n) * 1.2) + 8);
      // geometric gaps between ones
      double row = density >= 1.0 ? 0.0 : std::floor(std::log(rng.uniform()) / log_miss);
      while (row < static_cast<double>(s.n)) {
        const auto r = static_cast<std::size_t>(row);
        c.rows.push_back(r);
        c.values.push_back(1.0);
        lp[r] += s.beta0[j];
        row += 1.0 + (density >= 1.0 ? 0.0 : std::floor(std::log(rng.uniform()) / log_miss));
      }
    }
  }

  RandomStream ev(s.seed, detail::kEventStream), cs(s.seed, detail::kCensorStream);
  std::vector<double> time(s.n);
  std::vector<std::uint8_t> status(s.n);
  std::size_t censored = 0;
  for (std::size_t i = 0; i < s.n; ++i) {
    const double t = ev.exponential() / std::exp(lp[i]);
    const double c = std::isfinite(out.u_max) ? out.u_max * cs.uniform() : std::numeric_limits<double>::infinity();
    if (t <= c) {
      time[i] = t;
      status[i] = 1;
    } else {
      time[i] = c;
      status[i] = 0;
      ++censored;
    }
  }
  out.censoring_rate = static_cast<double>(censored) / static_cast<double>(s.n);
  out.data = build_dataset(std::move(time), std::move(status), std::move(cols));
  return out;
}

/// Parses `v1,v2,...` where any item may be `value x count`, e.g. `0.7x6`.
/// Missing trailing entries are zero.
inline std::vector<double> parse_beta_list(const std::string& text, std::size_t p) {
  std::vector<double> beta;
  for (auto item : detail::split(text, ',')) {
    if (item.empty()) continue;
    std::size_t count = 1;
    const auto x = item.find('x');
    std::string_view num = item;
    if (x != std::string_view::npos) {
      num = detail::trim(item.substr(0, x));
      if (!detail::parse_count(detail::trim(item.substr(x + 1)), count))
        throw InputError("malformed repeat count in '" + std::string(item) + "'");
    }
    double v = 0.0;
    if (!detail::parse_number(num, v)) throw InputError("malformed coefficient '" + std::string(item) + "'");
    beta.insert(beta.end(), count, v);
  }
  if (beta.size() > p)
    throw InputError("beta0 lists " + std::to_string(beta.size()) + " values but p = " + std::to_string(p));
  beta.resize(p, 0.0);
  return beta;
}

/// Flat `key=value` scenario text. Keys: n, p, beta0, design (ar1:RHO or
/// sparse-binary:SPARSITY), censoring, seed. `#` starts a comment.
inline SimScenario parse_scenario(std::istream& in, const std::string& name = "scenario") {
  SimScenario s;
  std::string beta_text;
  bool have_beta = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view v = line;
    if (auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
    v = detail::trim(v);
    if (v.empty()) continue;
    const auto eq = v.find('=');
    if (eq == std::string_view::npos) throw InputError(name, line_no, "expected key=value");
    const auto key = detail::trim(v.substr(0, eq));
    const auto val = detail::trim(v.substr(eq + 1));
    double num = 0.0;
    std::size_t count = 0;
    if (key == "n") {
      if (!detail::parse_count(val, count)) throw InputError(name, line_no, "malformed n");
      s.n = count;
    } else if (key == "p") {
      if (!detail::parse_count(val, count)) throw InputError(name, line_no, "malformed p");
      s.p = count;
    } else if (key == "beta0") {
      beta_text = std::string(val);
      have_beta = true;
    } else if (key == "design") {
      const auto colon = val.find(':');
      const auto kind = detail::trim(val.substr(0, colon));
      const auto arg = colon == std::string_view::npos ? std::string_view{} : detail::trim(val.substr(colon + 1));
      if (kind == "ar1") {
        s.design = DesignKind::ar1_gaussian;
        if (!arg.empty() && !detail::parse_number(arg, s.rho)) throw InputError(name, line_no, "malformed ar1 correlation");
      } else if (kind == "sparse-binary") {
        s.design = DesignKind::sparse_binary;
        if (!arg.empty() && !detail::parse_number(arg, s.sparsity)) throw InputError(name, line_no, "malformed sparsity");
      } else {
        throw InputError(name, line_no, "unknown design '" + std::string(kind) + "'");
      }
    } else if (key == "censoring") {
      if (!detail::parse_number(val, num)) throw InputError(name, line_no, "malformed censoring");
      s.target_censoring = num;
    } else if (key == "seed") {
      if (!detail::parse_count(val, count)) throw InputError(name, line_no, "malformed seed");
      s.seed = count;
    } else {
      throw InputError(name, line_no, "unknown key '" + std::string(key) + "'");
    }
  }
  s.beta0 = have_beta ? parse_beta_list(beta_text, s.p) : moderate_truth(s.p);
  check_scenario(s);
  return s;
}

inline SimScenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open scenario file");
  return parse_scenario(in, path);
}

}  // namespace coxbar
