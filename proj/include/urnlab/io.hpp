// Copyright 2026 The urnlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "urnlab/bayes.hpp"
#include "urnlab/behavioral.hpp"
#include "urnlab/error.hpp"
#include "urnlab/estimate.hpp"
#include "urnlab/game.hpp"
#include "urnlab/metrics.hpp"

namespace urnlab {

using json = nlohmann::ordered_json;

//---------------------------------------------------------------------------//
// Formatting
//---------------------------------------------------------------------------//

/// Shortest round-trip decimal form; empty for NaN.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline json number_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw ValidationError("write failed: " + path);
}

//---------------------------------------------------------------------------//
// Panel CSV
//---------------------------------------------------------------------------//

inline constexpr std::string_view kPanelHeader =
    "session,treatment,group,game,round,player,signal,action,state";

struct PanelLoadOptions {
  std::optional<int> max_round;  ///< reject rounds above this
};

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::int64_t parse_int(std::string_view field, std::string_view column,
                              std::int64_t row) {
  std::int64_t v = 0;
  const auto* end = field.data() + field.size();
  const auto res = std::from_chars(field.data(), end, v);
  if (field.empty() || res.ec != std::errc() || res.ptr != end) {
    throw ValidationError(std::string(column) + " must be an integer, got '" +
                              std::string(field) + "'",
                          row);
  }
  return v;
}

inline Color parse_color(std::string_view field, std::string_view column,
                         std::int64_t row) {
  if (field == "R") return Color::Red;
  if (field == "G") return Color::Green;
  throw ValidationError(std::string(column) + " must be R or G, got '" +
                            std::string(field) + "'",
                        row);
}

}  // namespace detail

/// Parses panel CSV text. Rows are numbered from 1, not counting the
/// header.
inline Panel parse_panel(std::string_view text, const PanelLoadOptions& options = {}) {
  if (text.find('\r') != std::string_view::npos) {
    throw ValidationError("panel must use LF line endings");
  }
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    lines.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  if (lines.empty()) throw ValidationError("panel file is empty");

  static const std::vector<std::string_view> expected = detail::split_commas(kPanelHeader);
  const auto header = detail::split_commas(lines.front());
  if (header != expected) {
    for (const auto& col : header) {
      if (std::find(expected.begin(), expected.end(), col) == expected.end()) {
        throw ValidationError("unexpected column '" + std::string(col) + "' in header");
      }
    }
    for (const auto& col : expected) {
      if (std::find(header.begin(), header.end(), col) == header.end()) {
        throw ValidationError("missing column '" + std::string(col) + "' in header");
      }
    }
    throw ValidationError("header must be exactly: " + std::string(kPanelHeader));
  }

  Panel panel;
  panel.reserve(lines.size() - 1);
  using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t, std::int64_t>;
  std::set<Key> seen;
  std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t>, std::pair<State, Treatment>>
      game_state;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto row = static_cast<std::int64_t>(i);
    const auto fields = detail::split_commas(lines[i]);
    if (fields.size() != expected.size()) {
      throw ValidationError("expected " + std::to_string(expected.size()) + " fields, got " +
                                std::to_string(fields.size()),
                            row);
    }
    PanelRecord r;
    r.session = detail::parse_int(fields[0], "session", row);
    const auto t = parse_treatment(fields[1]);
    if (!t) {
      throw ValidationError("unknown treatment '" + std::string(fields[1]) + "'", row);
    }
    r.treatment = *t;
    r.group = detail::parse_int(fields[2], "group", row);
    r.game = detail::parse_int(fields[3], "game", row);
    const auto round = detail::parse_int(fields[4], "round", row);
    if (round < 1 || (options.max_round && round > *options.max_round)) {
      throw ValidationError("round " + std::to_string(round) + " out of range", row);
    }
    r.round = static_cast<int>(round);
    r.player = detail::parse_int(fields[5], "player", row);
    r.signal = detail::parse_color(fields[6], "signal", row);
    r.action = detail::parse_color(fields[7], "action", row);
    r.state = detail::parse_color(fields[8], "state", row);
    if (!seen.insert({r.session, r.game, r.round, r.player}).second) {
      throw ValidationError("duplicate (session, game, round, player)", row);
    }
    const auto [it, fresh] =
        game_state.try_emplace({r.session, r.game, r.group}, r.state, r.treatment);
    if (!fresh && it->second.first != r.state) {
      throw ValidationError("state differs within one group's game", row);
    }
    if (!fresh && it->second.second != r.treatment) {
      throw ValidationError("treatment differs within one group's game", row);
    }
    panel.push_back(r);
  }
  return panel;
}

inline Panel load_panel(const std::string& path, const PanelLoadOptions& options = {}) {
  try {
    return parse_panel(read_file(path), options);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline std::string format_panel(const Panel& panel) {
  std::string out(kPanelHeader);
  out += '\n';
  for (const auto& r : panel) {
    out += std::to_string(r.session);
    out += ',';
    out += treatment_name(r.treatment);
    out += ',';
    out += std::to_string(r.group);
    out += ',';
    out += std::to_string(r.game);
    out += ',';
    out += std::to_string(r.round);
    out += ',';
    out += std::to_string(r.player);
    out += ',';
    out += to_char(r.signal);
    out += ',';
    out += to_char(r.action);
    out += ',';
    out += to_char(r.state);
    out += '\n';
  }
  return out;
}

inline void save_panel(const std::string& path, const Panel& panel) {
  write_file(path, format_panel(panel));
}

/// Reads "player,low_iq" rows (low_iq 0 or 1).
inline std::map<std::int64_t, bool> parse_covariates(std::string_view text) {
  std::map<std::int64_t, bool> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::int64_t row = 0;
  if (!std::getline(in, line) || line != "player,low_iq") {
    throw ValidationError("covariate header must be exactly: player,low_iq");
  }
  while (std::getline(in, line)) {
    ++row;
    const auto f = detail::split_commas(line);
    if (f.size() != 2) throw ValidationError("expected 2 fields", row);
    const auto id = detail::parse_int(f[0], "player", row);
    const auto v = detail::parse_int(f[1], "low_iq", row);
    if (v != 0 && v != 1) throw ValidationError("low_iq must be 0 or 1", row);
    if (!out.emplace(id, v == 1).second) throw ValidationError("duplicate player", row);
  }
  return out;
}

//---------------------------------------------------------------------------//
// Run configuration
//---------------------------------------------------------------------------//

enum class PolicyKind { Rational, Behavioral, CoinFlip, Majority };

inline std::optional<PolicyKind> parse_policy(std::string_view s) {
  if (s == "rational") return PolicyKind::Rational;
  if (s == "behavioral") return PolicyKind::Behavioral;
  if (s == "coin-flip") return PolicyKind::CoinFlip;
  if (s == "majority") return PolicyKind::Majority;
  return std::nullopt;
}

inline std::string_view policy_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::Rational: return "rational";
    case PolicyKind::Behavioral: return "behavioral";
    case PolicyKind::CoinFlip: return "coin-flip";
    case PolicyKind::Majority: return "majority";
  }
  return "?";
}

struct RunConfig {
  GameConfig game;
  PolicyKind policy = PolicyKind::Behavioral;
  BehavioralParams behavioral;
  bool analytic = false;
  std::int64_t replications = 1000;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::optional<std::string> panel_path;
  std::optional<std::string> series_path;
};

namespace detail {

inline void reject_unknown(const json& obj, std::initializer_list<std::string_view> keys,
                           std::string_view where) {
  if (!obj.is_object()) throw ValidationError(std::string(where) + " must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw ValidationError("unknown key '" + k + "' in " + std::string(where));
    }
  }
}

template <class T>
T get_as(const json& obj, std::string_view key, std::string_view where) {
  const auto& v = obj.at(std::string(key));
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ValidationError(std::string(where) + "." + std::string(key) + " must be a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ValidationError(std::string(where) + "." + std::string(key) + " must be an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_unsigned()) return v.template get<T>();
      if (v.template get<std::int64_t>() < 0) {
        throw ValidationError(std::string(where) + "." + std::string(key) + " must be nonnegative");
      }
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ValidationError(std::string(where) + "." + std::string(key) + " must be a number");
  } else {
    if (!v.is_string()) throw ValidationError(std::string(where) + "." + std::string(key) + " must be a string");
  }
  return v.template get<T>();
}

}  // namespace detail

/// Parses and validates a run configuration. Unknown keys are errors.
inline RunConfig parse_run_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  detail::reject_unknown(doc, {"game", "policy", "behavioral", "replications", "seed", "threads", "output"},
                         "config");
  RunConfig c;
  if (doc.contains("game")) {
    const auto& g = doc["game"];
    detail::reject_unknown(g, {"rounds", "group_size", "precision", "prior_red", "treatment"}, "game");
    if (g.contains("rounds")) c.game.rounds = detail::get_as<int>(g, "rounds", "game");
    if (g.contains("group_size")) c.game.group_size = detail::get_as<int>(g, "group_size", "game");
    if (g.contains("precision")) c.game.precision = detail::get_as<double>(g, "precision", "game");
    if (g.contains("prior_red")) c.game.prior_red = detail::get_as<double>(g, "prior_red", "game");
    if (g.contains("treatment")) {
      const auto name = detail::get_as<std::string>(g, "treatment", "game");
      const auto t = parse_treatment(name);
      if (!t) throw ValidationError("unknown treatment '" + name + "'");
      c.game.treatment = *t;
    }
  }
  if (doc.contains("policy")) {
    const auto name = detail::get_as<std::string>(doc, "policy", "config");
    const auto p = parse_policy(name);
    if (!p) throw ValidationError("unknown policy '" + name + "'");
    c.policy = *p;
  }
  if (doc.contains("behavioral")) {
    const auto& b = doc["behavioral"];
    detail::reject_unknown(b, {"beta", "gamma", "psi", "analytic"}, "behavioral");
    if (b.contains("beta")) c.behavioral.beta = detail::get_as<double>(b, "beta", "behavioral");
    if (b.contains("gamma")) c.behavioral.gamma = detail::get_as<double>(b, "gamma", "behavioral");
    if (b.contains("psi")) c.behavioral.psi = detail::get_as<double>(b, "psi", "behavioral");
    if (b.contains("analytic")) c.analytic = detail::get_as<bool>(b, "analytic", "behavioral");
  }
  if (doc.contains("replications")) {
    c.replications = detail::get_as<std::int64_t>(doc, "replications", "config");
  }
  if (doc.contains("seed")) c.seed = detail::get_as<std::uint64_t>(doc, "seed", "config");
  if (doc.contains("threads")) c.threads = detail::get_as<int>(doc, "threads", "config");
  if (doc.contains("output")) {
    const auto& o = doc["output"];
    detail::reject_unknown(o, {"panel", "series"}, "output");
    if (o.contains("panel")) c.panel_path = detail::get_as<std::string>(o, "panel", "output");
    if (o.contains("series")) c.series_path = detail::get_as<std::string>(o, "series", "output");
  }
  c.game.validate();
  c.behavioral.validate();
  if (c.replications < 1) throw ValidationError("replications must be >= 1");
  if (c.threads < 0) throw ValidationError("threads must be >= 0");
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_file(path));
}

//---------------------------------------------------------------------------//
// Result writers
//---------------------------------------------------------------------------//

inline constexpr std::string_view kBenchmarkHeader =
    "round,treatment,group_size,probability,std_error,replications";

inline std::string benchmark_csv(const std::vector<BenchmarkTable>& tables) {
  std::string out(kBenchmarkHeader);
  out += '\n';
  for (const auto& t : tables) {
    for (const auto& r : t.rows) {
      out += std::to_string(r.round) + ',' + std::string(treatment_name(t.treatment)) + ',' +
             std::to_string(t.group_size) + ',' + format_number(r.probability) + ',' +
             format_number(r.std_error) + ',' + std::to_string(r.replications) + '\n';
    }
  }
  return out;
}

inline json benchmark_json(const std::vector<BenchmarkTable>& tables) {
  json arr = json::array();
  for (const auto& t : tables) {
    json rows = json::array();
    for (const auto& r : t.rows) {
      rows.push_back({{"round", r.round},
                      {"probability", number_or_null(r.probability)},
                      {"std_error", number_or_null(r.std_error)},
                      {"replications", r.replications}});
    }
    arr.push_back({{"treatment", treatment_name(t.treatment)},
                   {"group_size", t.group_size},
                   {"exact", t.exact},
                   {"flagged_games", t.flagged_games},
                   {"rows", std::move(rows)}});
  }
  return arr;
}

inline constexpr std::string_view kSeriesHeader =
    "label,metric,round,mean,std_error,count,clusters";

struct LabeledSeries {
  std::string label;
  RoundSeries series;
};

inline std::string series_csv(const std::vector<LabeledSeries>& all) {
  std::string out(kSeriesHeader);
  out += '\n';
  for (const auto& [label, s] : all) {
    for (const auto& r : s.rounds) {
      out += label + ',' + s.metric + ',' + std::to_string(r.round) + ',' +
             format_number(r.mean) + ',' + format_number(r.std_error) + ',' +
             std::to_string(r.count) + ',' + std::to_string(r.clusters) + '\n';
    }
  }
  return out;
}

inline json series_json(const std::vector<LabeledSeries>& all) {
  json arr = json::array();
  for (const auto& [label, s] : all) {
    json rows = json::array();
    for (const auto& r : s.rounds) {
      rows.push_back({{"round", r.round},
                      {"mean", number_or_null(r.mean)},
                      {"std_error", number_or_null(r.std_error)},
                      {"count", r.count},
                      {"clusters", r.clusters}});
    }
    arr.push_back({{"label", label}, {"metric", s.metric}, {"rounds", std::move(rows)}});
  }
  return arr;
}

inline constexpr std::string_view kResponsivenessHeader =
    "label,category,rho_bin,rho_low,rho_high,count,red_share";

inline std::string responsiveness_csv(const std::string& label, const ResponsivenessTable& t) {
  std::string out;
  for (const auto& c : t.cells) {
    out += label + ',' + std::string(strength_name(c.category)) + ',' + std::to_string(c.bin) +
           ',' + format_number(c.bin / 10.0) + ',' + format_number((c.bin + 1) / 10.0) + ',' +
           std::to_string(c.count) + ',' + format_number(c.red_share) + '\n';
  }
  return out;
}

inline json responsiveness_json(const ResponsivenessTable& t) {
  json cells = json::array();
  for (const auto& c : t.cells) {
    cells.push_back({{"category", strength_name(c.category)},
                     {"rho_bin", c.bin},
                     {"count", c.count},
                     {"red_share", c.red_share}});
  }
  json slopes = json::array();
  for (const auto& s : t.slopes) {
    slopes.push_back({{"category", strength_name(s.category)},
                      {"count", s.count},
                      {"slope", s.slope ? json(*s.slope) : json(nullptr)},
                      {"std_error", s.std_error ? json(*s.std_error) : json(nullptr)}});
  }
  return {{"cutoffs", t.cutoffs.bounds}, {"cells", std::move(cells)}, {"slopes", std::move(slopes)}};
}

inline json fit_json(const FitResult& f) {
  json est = {{"beta", f.estimates.beta}, {"psi", f.estimates.psi}};
  json se = {{"beta", number_or_null(f.std_errors.beta)}, {"psi", number_or_null(f.std_errors.psi)}};
  json ci = json::object();
  if (f.has_gamma) {
    est["gamma"] = f.estimates.gamma;
    se["gamma"] = number_or_null(f.std_errors.gamma);
  }
  if (f.se_available) {
    for (const char* name : {"beta", "gamma", "psi"}) {
      if (std::string_view(name) == "gamma" && !f.has_gamma) continue;
      const auto [lo, hi] = f.wald_ci(name);
      ci[name] = {lo, hi};
    }
  }
  json effects = {{"signal_sd", number_or_null(f.effects.signal_sd)},
                  {"signal", {{"value", number_or_null(f.effects.signal.value)},
                              {"std_error", number_or_null(f.effects.signal.std_error)}}}};
  if (f.effects.action) {
    effects["action"] = {{"value", number_or_null(f.effects.action->value)},
                         {"std_error", number_or_null(f.effects.action->std_error)}};
  }
  return {{"treatment", treatment_name(f.treatment)},
          {"rows", f.rows},
          {"estimates", est},
          {"std_errors", f.se_available ? se : json(nullptr)},
          {"wald_ci_95", ci},
          {"log_likelihood", f.log_likelihood},
          {"effects", effects},
          {"convergence",
           {{"converged", f.converged},
            {"iterations", f.iterations},
            {"evaluations", f.evaluations},
            {"gradient_norm", number_or_null(f.gradient_norm)},
            {"message", f.message},
            {"best_start", f.best_start},
            {"start_log_likelihoods", f.start_log_likelihoods}}}};
}

inline json hetero_json(const HeteroFit& f) {
  auto group = [](const GroupEstimate& g) {
    const auto [lo, hi] = g.ci();
    return json{{"value", number_or_null(g.value)},
                {"std_error", number_or_null(g.std_error)},
                {"ci_95", {number_or_null(lo), number_or_null(hi)}}};
  };
  auto effect = [](const EffectSize& e) {
    return json{{"value", number_or_null(e.value)}, {"std_error", number_or_null(e.std_error)}};
  };
  json out = {{"rows", f.rows},
              {"offsets_identified", f.offsets_identified},
              {"estimates",
               {{"beta_common", f.estimates.beta_common},
                {"beta_low_iq", f.estimates.beta_low_iq},
                {"gamma_common", number_or_null(f.estimates.gamma_common)},
                {"gamma_low_iq", f.estimates.gamma_low_iq},
                {"psi", f.estimates.psi}}},
              {"std_errors",
               {{"beta_common", number_or_null(f.std_errors[0])},
                {"beta_low_iq", number_or_null(f.std_errors[1])},
                {"gamma_common", number_or_null(f.std_errors[2])},
                {"gamma_low_iq", number_or_null(f.std_errors[3])},
                {"psi", number_or_null(f.std_errors[4])}}},
              {"beta_low", group(f.beta_low)},
              {"beta_high", group(f.beta_high)},
              {"beta_difference", group(f.beta_difference)},
              {"signal_effect_low", effect(f.signal_effect_low)},
              {"signal_effect_high", effect(f.signal_effect_high)},
              {"log_likelihood", f.log_likelihood},
              {"converged", f.converged},
              {"message", f.message}};
  if (f.has_gamma) {
    out["gamma_low"] = group(f.gamma_low);
    out["gamma_high"] = group(f.gamma_high);
    out["gamma_difference"] = group(f.gamma_difference);
    out["action_effect_low"] = effect(f.action_effect_low);
    out["action_effect_high"] = effect(f.action_effect_high);
  }
  return out;
}

}  // namespace urnlab
