#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "coxbar/coxbar.hpp"

namespace coxbar::cli {

enum ExitCode : int { kOk = 0, kInputError = 1, kNotConverged = 2 };

/// Parses a tuning grid: `lo:hi:logK`, `lo:hi:linK`, or a comma list.
inline std::vector<double> parse_grid(const std::string& text) {
  const auto parts = detail::split(text, ':');
  std::vector<double> grid;
  if (parts.size() == 3) {
    double lo = 0.0, hi = 0.0;
    std::size_t k = 0;
    const auto mode = detail::trim(parts[2]);
    const bool log_spaced = mode.rfind("log", 0) == 0;
    if (!detail::parse_number(detail::trim(parts[0]), lo) || !detail::parse_number(detail::trim(parts[1]), hi) ||
        !(log_spaced || mode.rfind("lin", 0) == 0) || !detail::parse_count(mode.substr(3), k) || k == 0)
      throw InputError("malformed grid '" + text + "' (expected lo:hi:logK, lo:hi:linK or a comma list)");
    if (log_spaced && !(lo > 0.0 && hi > 0.0)) throw InputError("log grid bounds must be positive");
    if (k == 1) return {lo};
    for (std::size_t i = 0; i < k; ++i) {
      const double t = static_cast<double>(i) / static_cast<double>(k - 1);
      grid.push_back(log_spaced ? std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))) : lo + t * (hi - lo));
    }
    return grid;
  }
  if (parts.size() != 1) throw InputError("malformed grid '" + text + "'");
  for (auto item : detail::split(text, ',')) {
    double v = 0.0;
    if (!detail::parse_number(detail::trim(item), v)) throw InputError("malformed grid value in '" + text + "'");
    grid.push_back(v);
  }
  return grid;
}

inline StandardizeMode parse_standardize(const std::string& s) {
  if (s == "none") return StandardizeMode::none;
  if (s == "scale") return StandardizeMode::scale_only;
  if (s == "center-scale") return StandardizeMode::center_and_scale;
  throw InputError("unknown standardize mode '" + s + "' (expected none, scale or center-scale)");
}

struct TuningFlags {
  std::optional<double> xi, lambda, d;
  std::string lambda_rule, criterion = "bic", lambda_grid;
  std::size_t screen_m = 0;
};

inline void add_tuning(CLI::App& cmd, TuningFlags& t) {
  cmd.add_option("--xi", t.xi, "ridge level of the initial fit");
  cmd.add_option("--lambda", t.lambda, "fixed penalty level (implies --lambda-rule fixed)");
  cmd.add_option("--lambda-rule", t.lambda_rule, "fixed, bic (ln n), cbic (ln events) or grid");
  cmd.add_option("--lambda-grid", t.lambda_grid, "grid for --lambda-rule grid");
  cmd.add_option("--criterion", t.criterion, "criterion for grid selection: aic, bic or cbic");
  cmd.add_option("--d", t.d, "exponent of the L_d target, in [0, 1]");
  cmd.add_option("--screen-m", t.screen_m, "screen to m columns before fitting");
}

inline BarConfig make_config(const TuningFlags& t, std::size_t threads) {
  BarConfig c;
  if (t.xi) c.xi = *t.xi;
  if (t.d) c.d = *t.d;
  if (!t.lambda_rule.empty()) c.lambda_rule = parse_lambda_rule(t.lambda_rule);
  if (t.lambda) {
    if (!t.lambda_rule.empty() && c.lambda_rule != LambdaRule::fixed)
      throw InputError("--lambda conflicts with --lambda-rule " + t.lambda_rule);
    c.lambda_rule = LambdaRule::fixed;
    c.lambda = *t.lambda;
  }
  if (c.lambda_rule == LambdaRule::grid) {
    if (t.lambda_grid.empty()) throw InputError("--lambda-rule grid needs --lambda-grid");
    c.lambda_grid = parse_grid(t.lambda_grid);
  }
  c.criterion = parse_criterion(t.criterion);
  c.threads = threads;
  check_config(c);
  return c;
}

inline nlohmann::ordered_json config_json(const BarConfig& c, std::size_t screen_m, const std::string& standardize) {
  nlohmann::ordered_json j;
  j["xi"] = c.xi;
  j["lambda_rule"] = to_string(c.lambda_rule);
  if (c.lambda_rule == LambdaRule::fixed) j["lambda"] = c.lambda;
  if (c.lambda_rule == LambdaRule::grid) {
    j["lambda_grid"] = c.lambda_grid;
    j["criterion"] = to_string(c.criterion);
  }
  j["d"] = c.d;
  j["zero_threshold"] = c.zero_threshold;
  j["outer_max"] = c.outer_max;
  j["outer_tol"] = c.outer_tol;
  if (screen_m > 0) j["screen_m"] = screen_m;
  j["standardize"] = standardize;
  return j;
}

/// Fit JSON with 1-based column labels. `beta` is reported as given.
inline nlohmann::ordered_json fit_json(const FitResult& fit, std::span<const double> beta, const BarConfig& c,
                                       std::size_t screen_m, const std::string& standardize) {
  nlohmann::ordered_json j;
  j["version"] = kVersion;
  nlohmann::ordered_json coef = nlohmann::ordered_json::object();
  nlohmann::ordered_json support = nlohmann::ordered_json::array();
  for (std::size_t k : fit.support) {
    coef[std::to_string(k + 1)] = beta[k];
    support.push_back(k + 1);
  }
  j["coefficients"] = coef;
  j["support"] = support;
  j["loglik"] = fit.loglik;
  j["df"] = fit.df;
  j["aic"] = fit.aic;
  j["bic"] = fit.bic;
  j["cbic"] = fit.cbic;
  j["lambda"] = fit.lambda;
  j["iterations"] = {{"outer", fit.outer_iterations}, {"sweeps", fit.sweeps}};
  j["converged"] = fit.converged;
  j["config"] = config_json(c, screen_m, standardize);
  return j;
}

inline std::ostream& open_output(const std::string& path, std::ofstream& file, std::ostream& fallback) {
  if (path.empty() || path == "-") return fallback;
  file.open(path, std::ios::binary);
  if (!file) throw InputError(path + ": cannot open for writing");
  return file;
}

inline SurvivalDataset load_input(const std::string& surv, const std::string& design, const std::string& format) {
  if (format == "auto") return load_dataset(surv, design);
  return load_dataset(surv, design, parse_design_format(format));
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse Cox regression by broken adaptive ridge"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::size_t threads = 1;
  std::optional<std::uint64_t> seed;
  std::string out_path;

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "fit a dataset");
  std::string surv, design, format = "auto", standardize = "none";
  TuningFlags fit_t;
  fit_cmd->add_option("--surv", surv, "survival CSV (id,time,status)")->required();
  fit_cmd->add_option("--design", design, "design file (dense CSV or sparse coordinate)")->required();
  fit_cmd->add_option("--format", format, "design format: auto, dense-csv or sparse-coord");
  fit_cmd->add_option("--standardize", standardize, "none, scale or center-scale");
  fit_cmd->add_option("--out", out_path, "output JSON (default stdout)");
  add_tuning(*fit_cmd, fit_t);

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "draw a dataset from a scenario");
  std::string scenario_path, prefix, sim_format = "auto";
  sim_cmd->add_option("--scenario", scenario_path, "scenario file")->required();
  sim_cmd->add_option("--out", prefix, "output prefix for <prefix>_surv.csv and the design file")->required();
  sim_cmd->add_option("--format", sim_format, "design format: auto, dense-csv or sparse-coord");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Monte Carlo benchmark over a scenario");
  std::vector<std::string> methods;
  std::size_t reps = 100;
  bool timing = false;
  TuningFlags bench_t;
  bench_cmd->add_option("--scenario", scenario_path, "scenario file")->required();
  bench_cmd->add_option("--method", methods, "bic-coxbar, cbic-coxbar, coxbar-bic, sjs-bic-coxbar, sjs-cbic-coxbar");
  bench_cmd->add_option("--reps", reps, "replicates");
  bench_cmd->add_flag("--timing", timing, "report wall-clock runtime (output is then not reproducible)");
  bench_cmd->add_option("--out", out_path, "output CSV (default stdout)");
  bench_cmd->add_option("--xi", bench_t.xi, "ridge level of the initial fit");
  bench_cmd->add_option("--d", bench_t.d, "exponent of the L_d target, in [0, 1]");
  bench_cmd->add_option("--screen-m", bench_t.screen_m, "screening size for sjs methods (default n / ln n)");

  // path
  auto* path_cmd = app.add_subcommand("path", "fits over a lambda or xi grid");
  std::string axis = "lambda", grid_text;
  TuningFlags path_t;
  path_cmd->add_option("--axis", axis, "lambda or xi");
  path_cmd->add_option("--grid", grid_text, "lo:hi:logK, lo:hi:linK or a comma list")->required();
  path_cmd->add_option("--scenario", scenario_path, "simulate one replicate from this scenario");
  path_cmd->add_option("--surv", surv, "survival CSV");
  path_cmd->add_option("--design", design, "design file");
  path_cmd->add_option("--format", format, "design format: auto, dense-csv or sparse-coord");
  path_cmd->add_option("--standardize", standardize, "none, scale or center-scale");
  path_cmd->add_option("--out", out_path, "output CSV (default stdout)");
  add_tuning(*path_cmd, path_t);

  for (auto* cmd : {fit_cmd, sim_cmd, bench_cmd, path_cmd}) {
    cmd->add_option("--seed", seed, "master seed (overrides the scenario seed)");
    cmd->add_option("--threads", threads, "worker threads for bench, grid and path fan-out");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kInputError;
  }

  try {
    if (threads < 1) throw InputError("--threads must be at least 1");

    if (fit_cmd->parsed()) {
      const auto config = make_config(fit_t, threads);
      const auto mode = parse_standardize(standardize);
      const auto raw = load_input(surv, design, format);
      const auto ds = coxbar::standardize(raw, mode);
      const auto fit = fit_t.screen_m > 0 ? sjs_coxbar(ds, fit_t.screen_m, config) : fit_bar(ds, config);
      const auto beta = to_original_scale(ds, fit.beta);
      std::ofstream file;
      open_output(out_path, file, out) << fit_json(fit, beta, config, fit_t.screen_m, standardize).dump(2) << '\n';
      if (!fit.converged) {
        err << "warning: BAR iterations did not converge within " << config.outer_max << " outer steps\n";
        return kNotConverged;
      }
      return kOk;
    }

    if (sim_cmd->parsed()) {
      auto scenario = load_scenario(scenario_path);
      if (seed) scenario.seed = *seed;
      const auto sim = simulate(scenario);
      DesignFormat fmt = DesignFormat::dense_csv;
      if (sim_format == "auto") {
        const double density = static_cast<double>(sim.data.design.nnz()) /
                               (static_cast<double>(sim.data.n) * static_cast<double>(sim.data.p));
        fmt = density < 0.5 ? DesignFormat::sparse_coord : DesignFormat::dense_csv;
      } else {
        fmt = parse_design_format(sim_format);
      }
      const std::string design_file = prefix + (fmt == DesignFormat::sparse_coord ? "_design.coord" : "_design.csv");
      save_dataset(sim.data, prefix + "_surv.csv", design_file, fmt);
      out << "censoring_rate=" << format_double(sim.censoring_rate) << '\n'
          << "u_max=" << format_double(sim.u_max) << '\n'
          << "events=" << sim.data.event_count << '\n';
      return kOk;
    }

    if (bench_cmd->parsed()) {
      if (reps < 1) throw InputError("--reps must be at least 1");
      auto scenario = load_scenario(scenario_path);
      const std::uint64_t master = seed ? *seed : scenario.seed;
      BarConfig base;
      if (bench_t.xi) base.xi = *bench_t.xi;
      if (bench_t.d) base.d = *bench_t.d;
      check_config(base);
      if (methods.empty()) methods.push_back("bic-coxbar");
      std::vector<MethodConfig> configs;
      for (const auto& m : methods) configs.push_back(method_from_name(m, scenario.n, bench_t.screen_m, base));
      const auto report = run_benchmark(scenario, configs, reps, master, threads);
      std::ofstream file;
      write_report_csv(open_output(out_path, file, out), report, timing);
      return kOk;
    }

    if (path_cmd->parsed()) {
      const PathAxis ax = axis == "lambda" ? PathAxis::lambda
                          : axis == "xi"   ? PathAxis::xi
                                           : throw InputError("unknown axis '" + axis + "' (expected lambda or xi)");
      auto grid = parse_grid(grid_text);
      const auto config = make_config(path_t, threads);
      const auto mode = parse_standardize(standardize);
      SurvivalDataset raw;
      if (!scenario_path.empty()) {
        if (!surv.empty() || !design.empty()) throw InputError("give either --scenario or --surv/--design");
        auto scenario = load_scenario(scenario_path);
        if (seed) scenario.seed = *seed;
        raw = simulate(scenario).data;
      } else {
        if (surv.empty() || design.empty()) throw InputError("path needs --scenario or both --surv and --design");
        raw = load_input(surv, design, format);
      }
      const auto ds = coxbar::standardize(raw, mode);
      const auto path = path_over(ds, ax, grid, config);
      std::ofstream file;
      write_path_csv(open_output(out_path, file, out), path, ds.p);
      return kOk;
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return sim_cmd->parsed() ? kInputError : kNotConverged;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
  return kInputError;
}

}  // namespace coxbar::cli
