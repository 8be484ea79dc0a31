// Copyright 2026 The urnlab Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion on stdout, details on
// stderr, nonzero exit when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "support/enumeration.hpp"
#include "support/properties.hpp"
#include "support/synthetic.hpp"
#include "urnlab/bayes.hpp"
#include "urnlab/behavioral.hpp"
#include "urnlab/estimate.hpp"
#include "urnlab/metrics.hpp"

namespace {

using namespace urnlab;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string summary;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class... A>
std::string fmt(const char* f, A... args) {
  char buf[1024];
  if constexpr (sizeof...(A) == 0) {
    return f;
  } else {
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
  }
}

void note(const char* f, auto... args) {
  std::fprintf(stderr, "    %s\n", fmt(f, args...).c_str());
}

// Printed benchmark probabilities. A value of 1 stands for "> .99".
constexpr int kTableRounds[] = {1, 2, 3, 4, 5, 6, 8, 10, 12, 14, 16, 18, 20};
constexpr double kNoInfo[] = {.50, .60, .60, .65, .65, .68, .71, .73, .75, .77, .79, .80, .81};
constexpr double kActions8[] = {.50, .60, .73, .77, .78, .80, .83, .84, .86, .87, .88, .89, .90};
constexpr double kSignals8[] = {.50, .71, .79, .84, .87, .90, .93, .96, .97, .98, .99, 1, 1};
constexpr double kActions4[] = {.50, .60, .68, .71, .73, .75, .77, .79, .81, .83, .84, .85, .86};
constexpr double kAll4[] = {.50, .65, .71, .75, .79, .81, .86, .89, .91, .93, .94, .95, .96};

double table_error(double value, double printed) {
  if (printed == 1.0) return value > 0.99 ? 0.0 : 0.99 - value;
  return std::abs(value - printed);
}

GameConfig config_for(Treatment t, int n) {
  GameConfig c;
  c.treatment = t;
  c.group_size = n;
  return c;
}

//---------------------------------------------------------------------------//

Outcome exact_columns() {
  const auto t0 = Clock::now();
  const auto noinfo = benchmark_signals_table(config_for(Treatment::NoInfo, 8));
  const auto signals8 = benchmark_signals_table(config_for(Treatment::Signals, 8));
  const auto all8 = benchmark_signals_table(config_for(Treatment::All, 8));
  const auto all4 = benchmark_signals_table(config_for(Treatment::All, 4));
  const double elapsed = seconds_since(t0);

  double worst = 0.0;
  bool same = true;
  for (std::size_t i = 0; i < std::size(kTableRounds); ++i) {
    const int t = kTableRounds[i];
    worst = std::max({worst, table_error(noinfo.at_round(t).probability, kNoInfo[i]),
                      table_error(signals8.at_round(t).probability, kSignals8[i]),
                      table_error(all4.at_round(t).probability, kAll4[i])});
    same = same && signals8.at_round(t).probability == all8.at_round(t).probability;
  }
  note("max deviation from printed values %.4f, runtime %.4f s", worst, elapsed);
  return {worst <= 0.005 && same && elapsed < 1.0,
          fmt("exact benchmark columns: max |err| %.4f (tol 0.005), %.3f s (limit 1 s)", worst,
              elapsed)};
}

Outcome monte_carlo_columns() {
  constexpr std::int64_t kGames = 200000;
  const auto t0 = Clock::now();
  const auto a8 = simulate_rational_actions(config_for(Treatment::Actions, 8), kGames, 42);
  const auto a4 = simulate_rational_actions(config_for(Treatment::Actions, 4), kGames, 43);
  const double elapsed = seconds_since(t0);

  double worst = 0.0;
  int misses = 0;
  int first_miss = 0;
  note("round  actions8 (printed)  actions4 (printed)");
  for (std::size_t i = 0; i < std::size(kTableRounds); ++i) {
    const int t = kTableRounds[i];
    const double p8 = a8.at_round(t).probability;
    const double p4 = a4.at_round(t).probability;
    const double e = std::max(std::abs(p8 - kActions8[i]), std::abs(p4 - kActions4[i]));
    worst = std::max(worst, e);
    if (e > 0.01) {
      ++misses;
      if (first_miss == 0) first_miss = t;
    }
    note("%5d  %.4f (%.2f)      %.4f (%.2f)%s", t, p8, kActions8[i], p4, kActions4[i],
         e > 0.01 ? "  outside 0.01" : "");
  }
  note("MC SE at round 20: %.5f / %.5f; flagged games %lld / %lld", a8.at_round(20).std_error,
       a4.at_round(20).std_error, static_cast<long long>(a8.flagged_games),
       static_cast<long long>(a4.flagged_games));
  std::string s = fmt("ACTIONS MC columns (%lld games each): max |err| %.4f (tol 0.01), ",
                      static_cast<long long>(kGames), worst);
  if (misses > 0) s += fmt("%d of 13 rounds outside from round %d, ", misses, first_miss);
  s += fmt("%.1f s (limit 600 s)", elapsed);
  return {misses == 0 && elapsed < 600.0, s};
}

Outcome filter_oracle() {
  double worst = 0.0;
  std::size_t cases = 0;
  int configs = 0;
  for (int n : {2, 3}) {
    for (int rounds = 1; rounds <= 4; ++rounds) {
      for (double q : {0.6, 0.7}) {
        for (double prior : {0.5, 0.35}) {
          GameConfig c = config_for(Treatment::Actions, n);
          c.rounds = rounds;
          c.precision = q;
          c.prior_red = prior;
          const auto cmp = testing::compare_filter_with_oracle(c);
          worst = std::max(worst, cmp.max_error);
          cases += cmp.cases;
          ++configs;
        }
      }
    }
  }
  return {worst <= 1e-10 && cases > 0,
          fmt("filter vs enumeration: %d configs, %zu posteriors, max |err| %.2e (tol 1e-10)",
              configs, cases, worst)};
}

Outcome behavioral_properties() {
  constexpr std::int64_t kGames = 200000;
  const BehavioralParams params{0.5, 1.0, 0.5};
  auto run = [&](Treatment t, int n, std::uint64_t seed) {
    return simulate_behavioral(params, config_for(t, n), kGames, seed).correct;
  };
  const auto noinfo = run(Treatment::NoInfo, 8, 101);
  const auto actions8 = run(Treatment::Actions, 8, 102);
  const auto signals8 = run(Treatment::Signals, 8, 103);
  const auto all8 = run(Treatment::All, 8, 104);
  const auto actions4 = run(Treatment::Actions, 4, 105);
  const auto all4 = run(Treatment::All, 4, 106);

  auto z = [](const RoundSeries& hi, const RoundSeries& lo, int t) {
    const auto& a = hi.at_round(t);
    const auto& b = lo.at_round(t);
    return (a.mean - b.mean) / std::hypot(a.std_error, b.std_error);
  };

  double za = INFINITY;
  for (int t = 3; t <= 20; ++t) za = std::min(za, z(all8, signals8, t));
  const bool a = za > 2.0;

  double zb = INFINITY;
  bool b = true;
  for (int t = 4; t <= 20; ++t) {
    b = b && noinfo.at_round(t).mean < actions8.at_round(t).mean &&
        actions8.at_round(t).mean < signals8.at_round(t).mean;
    zb = std::min({zb, z(actions8, noinfo, t), z(signals8, actions8, t)});
  }

  const double zc_actions = z(actions8, actions4, 20);
  const double zc_all = z(all8, all4, 20);
  const bool c = std::abs(zc_actions) <= 2.0 && zc_all > 2.0;

  const auto panel = simulate_behavioral(params, config_for(Treatment::All, 8), 5000, 107,
                                         {true, false, 0, 256})
                         .panel;
  const auto resp = responsiveness_summary(panel);
  const auto& weak = resp.slope_of(StrengthCategory::Weak);
  bool d = weak.slope.has_value();
  double gap = INFINITY;
  for (auto cat : {StrengthCategory::VeryStrongGreen, StrengthCategory::VeryStrongRed}) {
    const auto& s = resp.slope_of(cat);
    d = d && s.slope.has_value();
    if (d) gap = std::min(gap, *weak.slope - *s.slope);
  }
  d = d && gap > 0.0;

  note("(a) ALL8 - SIGNALS8, rounds 3-20: min z %.2f", za);
  note("(b) NOINFO < ACTIONS8 < SIGNALS8, rounds 4-20: %s, min z %.2f", b ? "holds" : "broken", zb);
  note("(c) round 20: ACTIONS8 %.4f vs ACTIONS4 %.4f (z %.2f); ALL8 %.4f vs ALL4 %.4f (z %.2f)",
       actions8.at_round(20).mean, actions4.at_round(20).mean, zc_actions, all8.at_round(20).mean,
       all4.at_round(20).mean, zc_all);
  note("(d) weak slope %.4f, margin over very strong %.4f", weak.slope.value_or(NAN), gap);
  return {a && b && c && d,
          fmt("behavioral orderings (%lld games per column): a=%s b=%s c=%s d=%s",
              static_cast<long long>(kGames), a ? "ok" : "FAIL", b ? "ok" : "FAIL",
              c ? "ok" : "FAIL", d ? "ok" : "FAIL")};
}

Outcome gradient_check() {
  testing::RowDesign design;
  for (int n = 1; n <= 60; ++n) design.n_counts.push_back(n);
  for (int m = -20; m <= 20; ++m) design.m_values.push_back(m);
  const auto ds = testing::draw_rows({0.8, 0.9, 0.6}, design, 2000, 5);
  Stream s(2026);
  const double h = 1e-6;
  double worst = 0.0;
  auto rel = [](double x, double y) {
    return std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1.0});
  };
  auto f = [&](BehavioralParams q) { return log_likelihood(q, ds).value; };
  for (int k = 0; k < 1000; ++k) {
    const BehavioralParams p{0.05 + 2.5 * s.uniform(), 0.05 + 2.0 * s.uniform(),
                             0.05 + 1.2 * s.uniform()};
    const auto v = log_likelihood(p, ds);
    const double fb = (f({p.beta + h, p.gamma, p.psi}) - f({p.beta - h, p.gamma, p.psi})) / (2 * h);
    const double fg = (f({p.beta, p.gamma + h, p.psi}) - f({p.beta, p.gamma - h, p.psi})) / (2 * h);
    const double fp = (f({p.beta, p.gamma, p.psi + h}) - f({p.beta, p.gamma, p.psi - h})) / (2 * h);
    worst = std::max({worst, rel(v.d_beta, fb), rel(*v.d_gamma, fg), rel(v.d_psi, fp)});
  }
  return {worst < 1e-6,
          fmt("gradient vs central differences: 1000 points, max rel err %.2e (tol 1e-6)", worst)};
}

struct RecoveryColumn {
  const char* name;
  Treatment treatment;
  int players;
  BehavioralParams truth;
};

double spread(const std::vector<double>& v) {
  if (v.size() < 2) return NAN;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

Outcome parameter_recovery(int seeds) {
  const RecoveryColumn cols[] = {
      {"NONE", Treatment::NoInfo, 80, {1.047, 0.0, 0.524}},
      {"SIGNALS", Treatment::Signals, 82, {1.018, 0.0, 0.570}},
      {"ACTIONS", Treatment::Actions, 136, {1.268, 0.968, 0.516}},
      {"ALL", Treatment::All, 152, {1.273, 0.648, 0.628}},
  };
  constexpr const char* kNames[] = {"beta", "gamma", "psi"};
  bool pass = true;
  std::string summary = "recovery, seeds within 0.05 and covered:";
  for (const auto& col : cols) {
    ExperimentDesign design;
    design.treatment = col.treatment;
    design.players = col.players;
    const bool has_gamma = shows_others_actions(col.treatment);
    int within[3] = {0, 0, 0};
    int covered[3] = {0, 0, 0};
    std::vector<double> estimates[3];
    double se_sum[3] = {0, 0, 0};
    int joint = 0;
    int joint_coverage = 0;
    int failed = 0;
    std::int64_t rows = 0;
    for (int k = 0; k < seeds; ++k) {
      const auto ds = build_dataset(
          simulate_experiment(design, col.truth, 5000 + static_cast<std::uint64_t>(k)));
      rows = static_cast<std::int64_t>(ds.rows.size());
      FitResult fit;
      try {
        fit = fit_mle(ds);
      } catch (const std::exception&) {
        ++failed;
        continue;
      }
      const double est[3] = {fit.estimates.beta, fit.estimates.gamma, fit.estimates.psi};
      const double truth[3] = {col.truth.beta, col.truth.gamma, col.truth.psi};
      const double se[3] = {fit.std_errors.beta, fit.std_errors.gamma, fit.std_errors.psi};
      bool all_within = fit.se_available;
      bool all_covered = fit.se_available;
      for (int i = 0; i < 3; ++i) {
        if (i == 1 && !has_gamma) continue;
        const bool w = std::abs(est[i] - truth[i]) <= 0.05;
        const bool c = std::abs(est[i] - truth[i]) <= 1.959963984540054 * se[i];
        within[i] += w;
        covered[i] += c;
        se_sum[i] += se[i];
        estimates[i].push_back(est[i]);
        all_within = all_within && w;
        all_covered = all_covered && c;
      }
      joint += all_within && all_covered;
      joint_coverage += all_covered;
    }
    std::string line = fmt("%-7s %lld rows:", col.name, static_cast<long long>(rows));
    for (int i = 0; i < 3; ++i) {
      if (i == 1 && !has_gamma) continue;
      line += fmt(" %s within %d covered %d SE %.4f SD %.4f;", kNames[i], within[i], covered[i],
                  se_sum[i] / seeds, spread(estimates[i]));
    }
    line += fmt(" joint %d, coverage only %d, fit failures %d", joint, joint_coverage, failed);
    note("%s", line.c_str());
    pass = pass && joint * 100 >= 90 * seeds;
    summary += fmt(" %s %d/%d", col.name, joint, seeds);
  }
  summary += " (need 90%)";
  return {pass, summary};
}

Outcome identification_probe_check() {
  testing::RowDesign zero;
  zero.n_counts = {8, 16, 24};
  zero.m_values = {0};
  const auto slope_probe = identification_probe(testing::draw_rows({0.5, 1.0, 0.5}, zero, 100000, 31));
  const double target = 2.0 * logistic(1.0) - 1.0;
  const double slope = slope_probe.gamma_slope.value_or(NAN);

  testing::RowDesign strata;
  strata.n_counts = {8, 32};
  strata.m_values = {-8, -6, -4, -2, 0, 2, 4, 6, 8};
  const auto psi_probe = identification_probe(testing::draw_rows({0.5, 1.0, 0.5}, strata, 100000, 32));
  const double psi = psi_probe.psi.value_or(NAN);
  const bool ok = std::abs(slope - target) <= 0.02 && std::abs(psi - 0.5) <= 0.05;
  return {ok, fmt("identification probe: slope %.4f vs %.4f (tol 0.02), psi %.4f vs 0.5 (tol 0.05)",
                  slope, target, psi)};
}

Outcome hetero_recovery(int seeds) {
  HeteroParams truth;
  truth.beta_common = std::log(1.64);
  truth.beta_low_iq = std::log(0.99 / 1.64);
  truth.gamma_common = std::log(0.68);
  truth.gamma_low_iq = std::log(0.61 / 0.68);
  truth.psi = 0.628;
  ExperimentDesign design;
  int beta_ok = 0;
  int covers = 0;
  int joint = 0;
  int failed = 0;
  int beta_covered = 0;
  double dgamma_se = 0.0;
  std::vector<double> beta_low_est, beta_high_est;
  for (int k = 0; k < seeds; ++k) {
    const auto seed = 9000 + static_cast<std::uint64_t>(k);
    const auto low = assign_low_iq(design.players, 0.47, seed);
    std::vector<BehavioralParams> per_player;
    for (bool l : low) per_player.push_back({truth.beta_for(l), truth.gamma_for(l), truth.psi});
    DatasetOptions o;
    o.low_iq = covariate_map(low);
    HeteroFit fit;
    try {
      fit = fit_heterogeneous(build_dataset(simulate_experiment(design, per_player, seed), o));
    } catch (const std::exception&) {
      ++failed;
      continue;
    }
    const bool b = fit.se_available && std::abs(fit.beta_low.value - 0.99) <= 0.08 &&
                   std::abs(fit.beta_high.value - 1.64) <= 0.08;
    const auto [lo, hi] = fit.gamma_difference.ci();
    const bool c = fit.se_available && lo <= 0.0 && 0.0 <= hi;
    const auto [bl_lo, bl_hi] = fit.beta_low.ci();
    const auto [bh_lo, bh_hi] = fit.beta_high.ci();
    beta_covered += fit.se_available && bl_lo <= 0.99 && 0.99 <= bl_hi && bh_lo <= 1.64 &&
                    1.64 <= bh_hi;
    beta_low_est.push_back(fit.beta_low.value);
    beta_high_est.push_back(fit.beta_high.value);
    beta_ok += b;
    covers += c;
    joint += b && c;
    dgamma_se += fit.gamma_difference.std_error;
  }
  note("group beta within 0.08: %d, gamma-difference CI covers 0: %d, mean SE(dgamma) %.4f, "
       "fit failures %d",
       beta_ok, covers, dgamma_se / seeds, failed);
  note("SD of beta_low %.4f, beta_high %.4f; both group beta CIs cover truth: %d",
       spread(beta_low_est), spread(beta_high_est), beta_covered);
  return {joint * 100 >= 90 * seeds,
          fmt("heterogeneous recovery: %d/%d seeds pass (need 90%%)", joint, seeds)};
}

Outcome property_suites() {
  const auto rep = testing::run_property_suite(10000, 0xacce97ull);
  for (std::size_t k = 0; k < 4; ++k) {
    note("%s: %lld cases, %lld violations",
         testing::property_name(testing::kAllProperties[k]).c_str(),
         static_cast<long long>(rep.cases[k]), static_cast<long long>(rep.violations[k]));
  }
  for (const auto& f : rep.first_failures) note("%s", f.c_str());
  return {rep.total_violations() == 0 && rep.total_cases() == 10000,
          fmt("invariant suites: %lld cases, %lld violations",
              static_cast<long long>(rep.total_cases()),
              static_cast<long long>(rep.total_violations()))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"urnlab acceptance suite"};
  std::vector<int> only;
  int seeds = 100;
  app.add_option("--only", only, "criteria to run (default: all)")->check(CLI::Range(1, 9));
  app.add_option("--seeds", seeds, "seeds for the recovery criteria")->check(CLI::Range(1, 10000));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::function<Outcome()>> criteria = {
      exact_columns,
      monte_carlo_columns,
      filter_oracle,
      behavioral_properties,
      gradient_check,
      [&] { return parameter_recovery(seeds); },
      identification_probe_check,
      [&] { return hetero_recovery(seeds); },
      property_suites,
  };
  const std::set<int> selected(only.begin(), only.end());

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  %d  %s  [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, o.summary.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
