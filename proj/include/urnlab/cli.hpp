// Copyright 2026 The urnlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "urnlab/bayes.hpp"
#include "urnlab/behavioral.hpp"
#include "urnlab/error.hpp"
#include "urnlab/estimate.hpp"
#include "urnlab/io.hpp"
#include "urnlab/metrics.hpp"
#include "urnlab/simulate.hpp"

namespace urnlab::cli {

enum class Format { Csv, Json };

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumerical = 2;

struct Flags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> replications;
  std::optional<std::string> treatment;
  std::optional<int> group_size;
  std::optional<int> rounds;
  std::optional<std::string> out;
  std::string format = "csv";
  std::optional<std::string> panel;
  std::optional<std::string> covariates;
  int threads = 0;
};

namespace detail {

inline Format output_format(const Flags& f) {
  if (f.format == "csv") return Format::Csv;
  if (f.format == "json") return Format::Json;
  throw ValidationError("--format must be csv or json");
}

inline std::string extension(Format f) { return f == Format::Csv ? "csv" : "json"; }

inline Treatment treatment_flag(const std::string& name) {
  const auto t = parse_treatment(name);
  if (!t) throw ValidationError("unknown treatment '" + name + "'");
  return *t;
}

inline std::uint64_t require_seed(const Flags& f, std::optional<std::uint64_t> fallback = {}) {
  if (f.seed) return *f.seed;
  if (fallback) return *fallback;
  throw ValidationError("a seed is required (--seed or \"seed\" in the config)");
}

inline std::filesystem::path out_dir(const Flags& f) {
  std::filesystem::path dir = f.out.value_or(".");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create " + dir.string());
  return dir;
}

inline void emit(const std::filesystem::path& path, const std::string& text) {
  write_file(path.string(), text);
  std::cerr << "wrote " << path.string() << '\n';
}

inline std::string dump(const json& j) { return j.dump(2) + '\n'; }

inline std::string series_text(const std::vector<LabeledSeries>& s, Format f) {
  return f == Format::Csv ? series_csv(s) : dump(series_json(s));
}

inline std::string group_label(Treatment t, int n) {
  return std::string(treatment_name(t)) + std::to_string(n);
}

inline void add_outcomes(std::vector<LabeledSeries>& out, const std::string& label,
                         const SimulationRun& run) {
  out.push_back({label, run.correct});
  if (!run.consensus.rounds.empty()) out.push_back({label, run.consensus});
  if (!run.majority_correct.rounds.empty()) out.push_back({label, run.majority_correct});
}

inline void add_panel_outcomes(std::vector<LabeledSeries>& out, const std::string& label,
                               const Panel& p) {
  out.push_back({label, fraction_correct_by_round(p)});
  const auto games = group_games(p);
  const bool groups = !games.empty() && games.front().players >= 2;
  if (groups) {
    out.push_back({label, consensus_by_round(p, false)});
    auto no_ties = consensus_by_round(p, true);
    no_ties.metric = "consensus_no_signal_ties";
    out.push_back({label, no_ties});
    out.push_back({label, majority_correct_by_round(p)});
  }
}

/// Splits a panel by treatment, keeping file order.
inline std::map<Treatment, Panel> by_treatment(const Panel& p) {
  std::map<Treatment, Panel> out;
  for (const auto& r : p) out[r.treatment].push_back(r);
  return out;
}

inline std::string individual_csv(const std::string& label,
                                  const std::vector<PlayerResponsiveness>& rows) {
  std::string out;
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  for (const auto& r : rows) {
    out += label + ',' + std::to_string(r.session) + ',' + std::to_string(r.player) + ',' +
           std::to_string(r.weak_rows) + ',' + opt(r.weak_rate()) + ',' +
           std::to_string(r.strong_rows) + ',' + opt(r.strong_rate()) + ',' + opt(r.social()) +
           '\n';
  }
  return out;
}

inline constexpr std::string_view kIndividualHeader =
    "label,session,player,weak_rows,weak_follow_rate,strong_rows,strong_follow_rate,social_responsiveness";

//---------------------------------------------------------------------------//
// Subcommands
//---------------------------------------------------------------------------//

inline int benchmark(const Flags& f) {
  const Format fmt = output_format(f);
  GameConfig base;
  std::optional<std::uint64_t> config_seed;
  if (f.config) {
    const auto rc = load_run_config(*f.config);
    base = rc.game;
    config_seed = rc.seed;
  }
  if (f.rounds) base.rounds = *f.rounds;
  const std::int64_t reps = f.replications.value_or(200000);
  const std::uint64_t seed = require_seed(f, config_seed);

  std::vector<std::pair<Treatment, int>> columns;
  if (f.treatment) {
    columns.emplace_back(treatment_flag(*f.treatment), f.group_size.value_or(base.group_size));
  } else {
    columns = {{Treatment::NoInfo, 1},  {Treatment::Signals, 8}, {Treatment::All, 8},
               {Treatment::All, 4},     {Treatment::Actions, 8}, {Treatment::Actions, 4}};
  }
  std::vector<BenchmarkTable> tables;
  for (const auto& [t, n] : columns) {
    GameConfig c = base;
    c.treatment = t;
    c.group_size = n;
    if (t == Treatment::Actions) {
      std::cerr << "simulating " << group_label(t, n) << " with " << reps << " games\n";
      tables.push_back(simulate_rational_actions(c, reps, seed, {f.threads}));
      if (tables.back().flagged_games > 0) {
        std::cerr << "warning: likelihood floor used in " << tables.back().flagged_games
                  << " games\n";
      }
    } else {
      tables.push_back(benchmark_signals_table(c));
    }
  }
  const std::filesystem::path path = f.out.value_or("benchmark." + extension(fmt));
  emit(path, fmt == Format::Csv ? benchmark_csv(tables) : dump(benchmark_json(tables)));
  return kExitOk;
}

inline int simulate(const Flags& f) {
  const Format fmt = output_format(f);
  RunConfig rc;
  if (f.config) rc = load_run_config(*f.config);
  if (f.treatment) rc.game.treatment = treatment_flag(*f.treatment);
  if (f.group_size) rc.game.group_size = *f.group_size;
  if (f.rounds) rc.game.rounds = *f.rounds;
  if (f.replications) rc.replications = *f.replications;
  rc.game.validate();
  if (rc.replications < 1) throw ValidationError("replications must be >= 1");
  const std::uint64_t seed = require_seed(f, rc.seed);
  const int threads = f.threads > 0 ? f.threads : rc.threads;
  const SimulationOptions opt{true, threads, 256};

  SimulationRun run;
  switch (rc.policy) {
    case PolicyKind::Behavioral:
      run = simulate_replications(rc.game, BehavioralPolicy(rc.behavioral, rc.analytic),
                                  rc.replications, seed, opt);
      break;
    case PolicyKind::Rational:
      run = simulate_replications(rc.game, RationalPolicy{}, rc.replications, seed, opt);
      break;
    case PolicyKind::CoinFlip:
      run = simulate_replications(rc.game, CoinFlipPolicy{}, rc.replications, seed, opt);
      break;
    case PolicyKind::Majority:
      run = simulate_replications(rc.game, MajorityPolicy{}, rc.replications, seed, opt);
      break;
  }

  std::filesystem::path panel_path;
  std::filesystem::path series_path;
  if (f.out || !(rc.panel_path && rc.series_path)) {
    const auto dir = out_dir(f);
    panel_path = dir / "panel.csv";
    series_path = dir / ("series." + extension(fmt));
  }
  if (rc.panel_path && !f.out) panel_path = *rc.panel_path;
  if (rc.series_path && !f.out) series_path = *rc.series_path;

  std::vector<LabeledSeries> series;
  add_outcomes(series, group_label(rc.game.treatment, rc.game.group_size), run);
  emit(panel_path, format_panel(run.panel));
  emit(series_path, series_text(series, fmt));
  return kExitOk;
}

inline Panel input_panel(const Flags& f) {
  if (!f.panel) throw ValidationError("--panel PATH is required");
  return load_panel(*f.panel);
}

inline int fit(const Flags& f) {
  const Format fmt = output_format(f);
  Panel panel = input_panel(f);
  if (f.treatment) {
    const Treatment t = treatment_flag(*f.treatment);
    std::erase_if(panel, [&](const PanelRecord& r) { return r.treatment != t; });
    if (panel.empty()) throw ValidationError("no rows with treatment " + *f.treatment);
  }
  DatasetOptions dopt;
  if (f.covariates) dopt.low_iq = parse_covariates(read_file(*f.covariates));
  const auto ds = build_dataset(panel, dopt);
  FitOptions fopt;
  fopt.threads = f.threads;
  if (f.seed) fopt.seed = *f.seed;

  json doc;
  std::string csv = "parameter,estimate,std_error,ci_low,ci_high\n";
  const FitResult result = fit_mle(ds, fopt);
  doc["fit"] = fit_json(result);
  for (const char* name : {"beta", "gamma", "psi"}) {
    if (std::string_view(name) == "gamma" && !result.has_gamma) continue;
    const double est = name[0] == 'b' ? result.estimates.beta
                       : name[0] == 'g' ? result.estimates.gamma
                                        : result.estimates.psi;
    const double se = name[0] == 'b' ? result.std_errors.beta
                      : name[0] == 'g' ? result.std_errors.gamma
                                       : result.std_errors.psi;
    const auto [lo, hi] = result.wald_ci(name);
    csv += std::string(name) + ',' + format_number(est) + ',' + format_number(se) + ',' +
           format_number(lo) + ',' + format_number(hi) + '\n';
  }
  if (f.covariates) doc["heterogeneous"] = hetero_json(fit_heterogeneous(ds, fopt));
  if (!result.converged) std::cerr << "warning: optimizer did not converge: " << result.message << '\n';

  const std::filesystem::path path = f.out.value_or("fit." + extension(fmt));
  emit(path, fmt == Format::Json ? dump(doc) : csv);
  return kExitOk;
}

inline int metrics(const Flags& f) {
  const Format fmt = output_format(f);
  Panel panel = input_panel(f);
  const auto dir = out_dir(f);
  std::vector<LabeledSeries> series;
  std::string resp_csv(kResponsivenessHeader);
  resp_csv += '\n';
  json resp_json = json::object();
  bool any_resp = false;
  for (const auto& [t, p] : by_treatment(panel)) {
    if (f.treatment && treatment_flag(*f.treatment) != t) continue;
    const std::string label(treatment_name(t));
    add_panel_outcomes(series, label, p);
    const auto games = group_games(p);
    if (shows_others_actions(t) && !games.empty() && games.front().players >= 2) {
      const auto table = responsiveness_summary(p);
      resp_csv += responsiveness_csv(label, table);
      resp_json[label] = responsiveness_json(table);
      any_resp = true;
    }
  }
  emit(dir / ("series." + extension(fmt)), series_text(series, fmt));
  if (any_resp) {
    emit(dir / ("responsiveness." + extension(fmt)),
         fmt == Format::Csv ? resp_csv : dump(resp_json));
  }
  return kExitOk;
}

inline int export_figures(const Flags& f) {
  RunConfig rc;
  if (f.config) rc = load_run_config(*f.config);
  const std::uint64_t seed = require_seed(f, rc.seed);
  const std::int64_t reps = f.replications.value_or(rc.replications);
  const auto dir = out_dir(f);
  const int threads = f.threads > 0 ? f.threads : rc.threads;

  auto run_for = [&](Treatment t, int n, bool keep) {
    GameConfig c = rc.game;
    c.treatment = t;
    c.group_size = n;
    return simulate_replications(c, BehavioralPolicy(rc.behavioral, rc.analytic), reps, seed,
                                 {keep, threads, 256});
  };

  // Outcomes and individual responsiveness: the given panel, else a
  // simulated all/signals pair.
  std::vector<LabeledSeries> outcomes;
  std::string individual(kIndividualHeader);
  individual += '\n';
  if (f.panel) {
    for (const auto& [t, p] : by_treatment(load_panel(*f.panel))) {
      const std::string label(treatment_name(t));
      add_panel_outcomes(outcomes, label, p);
      individual += individual_csv(label, individual_responsiveness(p));
    }
  } else {
    for (Treatment t : {Treatment::All, Treatment::Signals}) {
      const auto run = run_for(t, 8, true);
      add_panel_outcomes(outcomes, group_label(t, 8), run.panel);
      individual += individual_csv(group_label(t, 8), individual_responsiveness(run.panel));
    }
  }
  emit(dir / "outcomes_by_round.csv", series_csv(outcomes));
  emit(dir / "individual_responsiveness.csv", individual);

  std::vector<LabeledSeries> correct;
  std::string resp(kResponsivenessHeader);
  resp += '\n';
  const std::vector<std::pair<Treatment, int>> cols = {
      {Treatment::NoInfo, 8}, {Treatment::Actions, 8}, {Treatment::Actions, 4},
      {Treatment::Signals, 8}, {Treatment::All, 8},    {Treatment::All, 4}};
  for (const auto& [t, n] : cols) {
    const bool keep = t == Treatment::All && n == 8;
    const auto run = run_for(t, n, keep);
    correct.push_back({group_label(t, n), run.correct});
    if (keep) resp += responsiveness_csv(group_label(t, n), responsiveness_summary(run.panel));
  }
  emit(dir / "behavioral_correct_by_treatment.csv", series_csv(correct));
  emit(dir / "behavioral_responsiveness.csv", resp);
  return kExitOk;
}

}  // namespace detail

/// Runs the command line; returns the process exit status.
inline int run(int argc, const char* const* argv) {
  CLI::App app{"urnlab: social-learning urn game benchmarks, simulation and estimation"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON run configuration");
    sub->add_option("--seed", f.seed, "master seed");
    sub->add_option("--replications", f.replications, "number of games");
    sub->add_option("--treatment", f.treatment, "no_info, actions, signals or all");
    sub->add_option("--group-size", f.group_size, "players per group");
    sub->add_option("--rounds", f.rounds, "rounds per game");
    sub->add_option("--out", f.out, "output file or directory");
    sub->add_option("--format", f.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--threads", f.threads, "worker threads (0: all cores)");
  };
  auto* bench = app.add_subcommand("benchmark", "Bayesian benchmark probabilities of correct actions");
  common(bench);
  auto* sim = app.add_subcommand("simulate", "simulate games and write the panel and round series");
  common(sim);
  auto* fitc = app.add_subcommand("fit", "maximum-likelihood fit of the behavioral model");
  common(fitc);
  fitc->add_option("--panel", f.panel, "panel CSV");
  fitc->add_option("--covariates", f.covariates, "player,low_iq CSV for the split model");
  auto* met = app.add_subcommand("metrics", "round series and responsiveness from a panel");
  common(met);
  met->add_option("--panel", f.panel, "panel CSV");
  auto* exp = app.add_subcommand("export", "figure data: outcomes, responsiveness, behavioral curves");
  common(exp);
  exp->add_option("--panel", f.panel, "optional panel CSV for the outcome figures");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cerr << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  try {
    if (*bench) return detail::benchmark(f);
    if (*sim) return detail::simulate(f);
    if (*fitc) return detail::fit(f);
    if (*met) return detail::metrics(f);
    if (*exp) return detail::export_figures(f);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitValidation;
}

}  // namespace urnlab::cli
