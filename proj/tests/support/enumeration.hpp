// Copyright 2026 The urnlab Authors
// SPDX-License-Identifier: Apache-2.0

// Brute-force reference for the actions treatment. Every joint path of
// state, signals and tie-breaking coins is enumerated; each player's
// posterior is computed by conditioning directly on that player's
// information set (full own signal sequence plus all public actions).
// Nothing here uses the filter or any tally sufficiency argument.

#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "urnlab/bayes.hpp"
#include "urnlab/game.hpp"

namespace urnlab::testing {

struct OracleCase {
  int round = 1;
  int player = 0;
  Tally own;
  std::vector<Color> history;  ///< round-major actions of rounds < round
  double posterior = 0.5;
  double mass = 0.0;  ///< probability of this information set
};

struct OracleBranch {
  State state;
  std::vector<Color> signals;  ///< (t - 1) * n + j for t = 1..T-1
  std::vector<Color> actions;
  double prob;
};

inline std::vector<OracleCase> enumerate_actions_game(const GameConfig& config,
                                                      double tie_tolerance = 1e-12) {
  const int n = config.group_size;
  const int T = config.rounds;
  const int bits = n * (T - 1);
  const double q = config.precision;

  std::vector<OracleBranch> branches;
  for (State w : {Color::Red, Color::Green}) {
    const double pw = w == Color::Red ? config.prior_red : 1.0 - config.prior_red;
    for (long mask = 0; mask < (1L << bits); ++mask) {
      OracleBranch b{w, {}, {}, pw};
      for (int i = 0; i < bits; ++i) {
        const Color s = (mask >> i) & 1 ? Color::Red : Color::Green;
        b.signals.push_back(s);
        b.prob *= s == w ? q : 1.0 - q;
      }
      branches.push_back(std::move(b));
    }
  }

  auto info_key = [&](const OracleBranch& b, int t, int j) {
    std::string key;
    for (int r = 1; r < t; ++r) key += to_char(b.signals[static_cast<std::size_t>((r - 1) * n + j)]);
    key += '|';
    for (Color a : b.actions) key += to_char(a);
    return key;
  };

  std::vector<OracleCase> cases;
  for (int t = 1; t <= T; ++t) {
    struct Mass {
      double red = 0.0;
      double total = 0.0;
    };
    std::vector<std::map<std::string, Mass>> by_player(static_cast<std::size_t>(n));
    for (const auto& b : branches) {
      for (int j = 0; j < n; ++j) {
        auto& m = by_player[static_cast<std::size_t>(j)][info_key(b, t, j)];
        m.total += b.prob;
        if (b.state == Color::Red) m.red += b.prob;
      }
    }

    std::vector<std::map<std::string, bool>> recorded(static_cast<std::size_t>(n));
    std::vector<OracleBranch> next;
    for (const auto& b : branches) {
      std::vector<int> decision(static_cast<std::size_t>(n));  // +1 red, -1 green, 0 coin
      for (int j = 0; j < n; ++j) {
        const auto key = info_key(b, t, j);
        const auto& m = by_player[static_cast<std::size_t>(j)].at(key);
        const double p = m.red / m.total;
        decision[static_cast<std::size_t>(j)] =
            p > 0.5 + tie_tolerance ? 1 : (p < 0.5 - tie_tolerance ? -1 : 0);
        if (!recorded[static_cast<std::size_t>(j)][key]) {
          recorded[static_cast<std::size_t>(j)][key] = true;
          OracleCase c;
          c.round = t;
          c.player = j;
          for (int r = 1; r < t; ++r) c.own.add(b.signals[static_cast<std::size_t>((r - 1) * n + j)]);
          c.history = b.actions;
          c.posterior = p;
          c.mass = m.total;
          cases.push_back(std::move(c));
        }
      }
      if (t == T) continue;
      std::vector<int> coins;
      for (int j = 0; j < n; ++j) {
        if (decision[static_cast<std::size_t>(j)] == 0) coins.push_back(j);
      }
      const int k = static_cast<int>(coins.size());
      for (int mask = 0; mask < (1 << k); ++mask) {
        OracleBranch child = b;
        child.prob *= std::ldexp(1.0, -k);
        std::vector<int> d = decision;
        for (int c = 0; c < k; ++c) d[static_cast<std::size_t>(coins[static_cast<std::size_t>(c)])] = (mask >> c) & 1 ? 1 : -1;
        for (int j = 0; j < n; ++j) {
          child.actions.push_back(d[static_cast<std::size_t>(j)] > 0 ? Color::Red : Color::Green);
        }
        next.push_back(std::move(child));
      }
    }
    if (t < T) branches = std::move(next);
  }
  return cases;
}

struct OracleComparison {
  std::size_t cases = 0;
  double max_error = 0.0;
};

/// Replays every enumerated history through the filter and compares the
/// filter posterior with the enumerated one.
inline OracleComparison compare_filter_with_oracle(const GameConfig& config) {
  GameConfig c = config;
  c.treatment = Treatment::Actions;
  OracleComparison out;
  for (const auto& oc : enumerate_actions_game(c)) {
    BeliefFilter f(c);
    const int n = c.group_size;
    for (int r = 1; r < oc.round; ++r) {
      f.update(std::span<const Color>(oc.history.data() + static_cast<std::size_t>((r - 1) * n),
                                      static_cast<std::size_t>(n)));
    }
    const double p = myopic_posterior(oc.own, f, oc.player).p;
    out.max_error = std::max(out.max_error, std::abs(p - oc.posterior));
    ++out.cases;
  }
  return out;
}

}  // namespace urnlab::testing
