// Copyright 2026 The urnlab Authors
// SPDX-License-Identifier: Apache-2.0

// Randomized invariants shared by the property tests and the acceptance
// suite. Each case draws a small game and checks one property family.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "urnlab/bayes.hpp"
#include "urnlab/behavioral.hpp"
#include "urnlab/metrics.hpp"
#include "urnlab/simulate.hpp"

namespace urnlab::testing {

enum class Property { ColorSwap, Firewall, Determinism, ConsensusBounds };

inline constexpr Property kAllProperties[] = {Property::ColorSwap, Property::Firewall,
                                              Property::Determinism, Property::ConsensusBounds};

inline std::string property_name(Property p) {
  switch (p) {
    case Property::ColorSwap: return "color swap";
    case Property::Firewall: return "information firewall";
    case Property::Determinism: return "determinism under parallelism";
    case Property::ConsensusBounds: return "consensus bounds";
  }
  return "?";
}

struct PropertyReport {
  std::int64_t cases[4] = {0, 0, 0, 0};
  std::int64_t violations[4] = {0, 0, 0, 0};
  std::vector<std::string> first_failures;

  std::int64_t total_cases() const { return cases[0] + cases[1] + cases[2] + cases[3]; }
  std::int64_t total_violations() const {
    return violations[0] + violations[1] + violations[2] + violations[3];
  }
};

struct CaseDraw {
  GameConfig config;
  BehavioralParams params;
  SeedSpec seed;
};

inline CaseDraw draw_case(std::uint64_t master, std::int64_t i) {
  Stream s = Stream::derive({master, static_cast<std::uint64_t>(i), 0}, kNaturePlayer, 7,
                            Lane::Policy);
  CaseDraw d;
  d.config.rounds = 1 + static_cast<int>(s.below(10));
  d.config.group_size = 1 + static_cast<int>(s.below(7));
  d.config.precision = 0.55 + 0.4 * s.uniform();
  d.config.prior_red = 0.5;
  d.config.treatment = kAllTreatments[s.below(4)];
  d.params = {2.0 * s.uniform(), 2.0 * s.uniform(), s.uniform()};
  d.seed = {s(), s.below(1000), s.below(10)};
  return d;
}

namespace detail {

struct Checker {
  bool ok = true;
  std::string why;
  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      why = what;
    }
  }
};

inline bool same_series(const RoundSeries& a, const RoundSeries& b) {
  if (a.rounds.size() != b.rounds.size()) return false;
  for (std::size_t t = 0; t < a.rounds.size(); ++t) {
    const auto& x = a.rounds[t];
    const auto& y = b.rounds[t];
    if (x.count != y.count || x.clusters != y.clusters) return false;
    if (x.empty()) continue;
    if (x.mean != y.mean) return false;
    if (std::isnan(x.std_error) != std::isnan(y.std_error)) return false;
    if (!std::isnan(x.std_error) && std::abs(x.std_error - y.std_error) > 1e-12) return false;
  }
  return true;
}

/// Metrics are invariant under relabeling colors; the behavioral choice
/// rule and the public filter are antisymmetric.
inline void check_color_swap(const CaseDraw& d, Checker& c) {
  const Panel p = simulate_game(d.config, BehavioralPolicy(d.params), d.seed);
  const Panel s = color_swapped(p);
  c.expect(color_swapped(s) == p, "swap is not an involution");
  c.expect(same_series(fraction_correct_by_round(p), fraction_correct_by_round(s)),
           "fraction correct changed under swap");
  if (d.config.group_size >= 2) {
    c.expect(same_series(consensus_by_round(p, true), consensus_by_round(s, true)),
             "consensus changed under swap");
    c.expect(same_series(majority_correct_by_round(p), majority_correct_by_round(s)),
             "majority correct changed under swap");
  }

  const int n = 1 + static_cast<int>(d.seed.game) + d.config.rounds;
  for (int m = -n; m <= n; m += 2) {
    const double S = signal_index(m, n, d.params.psi);
    for (int A : {-1, 1}) {
      const double a = choice_prob(d.params, {S, A});
      const double b = choice_prob(d.params, {signal_index(-m, n, d.params.psi), -A});
      c.expect(a == 1.0 - b, "choice probability not antisymmetric");
    }
  }

  if (d.config.group_size >= 2) {
    GameConfig g = d.config;
    g.treatment = Treatment::Actions;
    BeliefFilter f(g);
    BeliefFilter fs(g);
    std::vector<Color> swapped_row;
    for (int t = 1; t <= g.rounds; ++t) {
      std::vector<Color> row;
      for (int j = 0; j < g.group_size; ++j) {
        row.push_back(p[static_cast<std::size_t>((t - 1) * g.group_size + j)].action);
      }
      swapped_row.clear();
      for (Color x : row) swapped_row.push_back(swapped(x));
      f.update(row);
      fs.update(swapped_row);
      for (int j = 0; j < g.group_size; ++j) {
        const double x = f.social_log_odds(j);
        c.expect(std::abs(x + fs.social_log_odds(j)) <= 1e-9 * (1.0 + std::abs(x)),
                 "filter log odds not antisymmetric");
      }
    }
  }
}

struct InfoRecord {
  InfoSet info;
  std::vector<std::vector<Color>> others_prev;
  bool own_column_hidden = true;
  bool future_hidden = true;
};

struct RecordingPolicy {
  std::vector<InfoRecord>* log;

  ActionValue act(const InfoSet& info, Stream& s) const {
    InfoRecord r{info, {}, true, true};
    if (info.others_actions) {
      const auto& h = *info.others_actions;
      for (int q = 1; q <= h.rounds_completed(); ++q) r.others_prev.push_back(h.others_in_round(q));
      if (h.rounds_completed() >= 1) {
        try {
          (void)h.at(1, info.player);
          r.own_column_hidden = false;
        } catch (const std::out_of_range&) {
        }
      }
      try {
        (void)h.others_in_round(info.round);
        r.future_hidden = false;
      } catch (const std::out_of_range&) {
      }
    }
    r.info.others_actions.reset();
    log->push_back(std::move(r));
    return s.uniform() < 0.5 ? Color::Red : Color::Green;
  }
};

/// Every information set holds exactly what the treatment reveals.
inline void check_firewall(const CaseDraw& d, Checker& c) {
  std::vector<InfoRecord> log;
  const Panel p = simulate_game(d.config, RecordingPolicy{&log}, d.seed);
  const int n = d.config.group_size;
  const Treatment t = d.config.treatment;
  c.expect(log.size() == p.size(), "one decision per record");
  std::vector<Tally> own(static_cast<std::size_t>(n));
  Tally group;
  for (int r = 1; r <= d.config.rounds; ++r) {
    for (int j = 0; j < n; ++j) {
      const std::size_t i = static_cast<std::size_t>((r - 1) * n + j);
      const auto& rec = log[i];
      c.expect(rec.info.round == r && rec.info.player == j, "decision order");
      c.expect(rec.info.own == own[static_cast<std::size_t>(j)], "own tally");
      c.expect(rec.info.others_signals.has_value() == shows_others_signals(t),
               "others' signals visibility");
      if (rec.info.others_signals) {
        c.expect(*rec.info.others_signals == group - own[static_cast<std::size_t>(j)],
                 "others' signal tally");
      }
      c.expect(rec.own_column_hidden, "own column reachable");
      c.expect(rec.future_hidden, "current round reachable");
      if (shows_others_actions(t)) {
        c.expect(rec.others_prev.size() == static_cast<std::size_t>(r - 1), "action rounds");
        for (int q = 1; q < r && q <= static_cast<int>(rec.others_prev.size()); ++q) {
          std::vector<Color> expect;
          for (int k = 0; k < n; ++k) {
            if (k != j) expect.push_back(p[static_cast<std::size_t>((q - 1) * n + k)].action);
          }
          c.expect(rec.others_prev[static_cast<std::size_t>(q - 1)] == expect, "action history");
        }
      } else {
        c.expect(rec.others_prev.empty(), "hidden actions leaked");
      }
    }
    for (int j = 0; j < n; ++j) {
      const Color sig = p[static_cast<std::size_t>((r - 1) * n + j)].signal;
      own[static_cast<std::size_t>(j)].add(sig);
      group.add(sig);
    }
  }
}

/// Same seed, same bytes, whatever the thread count or block size.
inline void check_determinism(const CaseDraw& d, std::int64_t i, Checker& c) {
  const std::int64_t reps = 2 + i % 9;
  const std::int64_t block = 1 + i % 5;
  const std::uint64_t seed = d.seed.master_seed;
  const auto a = simulate_replications(d.config, BehavioralPolicy(d.params), reps, seed,
                                       {true, 1, block});
  const auto b = simulate_replications(d.config, BehavioralPolicy(d.params), reps, seed,
                                       {true, 3, block + 2});
  c.expect(a.panel == b.panel, "panel depends on threads");
  c.expect(same_series(a.correct, b.correct), "correct series depends on threads");
  if (d.config.group_size >= 2) {
    c.expect(same_series(a.consensus, b.consensus), "consensus depends on threads");
  }
  if (d.config.treatment == Treatment::Actions && d.config.group_size >= 2) {
    const auto x = simulate_rational(d.config, reps, seed, {1, block});
    const auto y = simulate_rational(d.config, reps, seed, {2, block + 1});
    bool same = x.rows.size() == y.rows.size();
    for (std::size_t k = 0; same && k < x.rows.size(); ++k) {
      same = x.rows[k].probability == y.rows[k].probability;
    }
    c.expect(same, "rational benchmark depends on threads");
  }
}

/// Shares lie in their ranges and consensus never falls below one half.
inline void check_consensus_bounds(const CaseDraw& d, std::int64_t i, Checker& c) {
  CaseDraw e = d;
  if (e.config.group_size < 2) e.config.group_size = 2 + static_cast<int>(i % 5);
  const auto run = simulate_replications(e.config, BehavioralPolicy(e.params), 1 + i % 4,
                                         d.seed.master_seed, {true, 1, 2});
  const auto with_ties = consensus_by_round(run.panel, false);
  const auto no_ties = consensus_by_round(run.panel, true);
  for (const auto* s : {&with_ties, &no_ties}) {
    for (const auto& r : s->rounds) {
      if (r.empty()) continue;
      c.expect(r.mean >= 0.5 && r.mean <= 1.0, "consensus outside [1/2, 1]");
      c.expect(std::isnan(r.std_error) || r.std_error >= 0.0, "negative SE");
    }
  }
  for (std::size_t t = 0; t < with_ties.rounds.size(); ++t) {
    c.expect(no_ties.rounds[t].count <= with_ties.rounds[t].count, "tie exclusion adds rows");
  }
  for (const auto* s : {&run.correct, &run.majority_correct}) {
    for (const auto& r : s->rounds) {
      if (r.empty()) continue;
      c.expect(r.mean >= 0.0 && r.mean <= 1.0, "share outside [0, 1]");
    }
  }
}

}  // namespace detail

/// Runs `cases` cases, cycling through the four property families.
inline PropertyReport run_property_suite(std::int64_t cases, std::uint64_t master) {
  PropertyReport rep;
  for (std::int64_t i = 0; i < cases; ++i) {
    const auto d = draw_case(master, i);
    const auto k = static_cast<std::size_t>(i % 4);
    detail::Checker c;
    try {
      switch (kAllProperties[k]) {
        case Property::ColorSwap: detail::check_color_swap(d, c); break;
        case Property::Firewall: detail::check_firewall(d, c); break;
        case Property::Determinism: detail::check_determinism(d, i, c); break;
        case Property::ConsensusBounds: detail::check_consensus_bounds(d, i, c); break;
      }
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    ++rep.cases[k];
    if (!c.ok) {
      ++rep.violations[k];
      if (rep.first_failures.size() < 5) {
        rep.first_failures.push_back("case " + std::to_string(i) + " (" +
                                     property_name(kAllProperties[k]) + "): " + c.why);
      }
    }
  }
  return rep;
}

}  // namespace urnlab::testing
