// Copyright 2026 The urnlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "urnlab/error.hpp"
#include "urnlab/game.hpp"
#include "urnlab/numeric.hpp"

namespace urnlab {

//---------------------------------------------------------------------------//
// Round series
//---------------------------------------------------------------------------//

struct RoundStat {
  int round = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std_error = std::numeric_limits<double>::quiet_NaN();
  std::int64_t count = 0;     ///< observations
  std::int64_t clusters = 0;  ///< independent clusters behind the SE

  bool empty() const noexcept { return count == 0; }
};

struct RoundSeries {
  std::string metric;
  std::vector<RoundStat> rounds;

  const RoundStat& at_round(int t) const {
    return rounds.at(static_cast<std::size_t>(t - 1));
  }
};

/// Sufficient statistics for a cluster-robust mean. Every cluster adds a
/// success count s_g out of n_g observations. All fields are integers, so
/// merging is exact and order-independent.
struct ClusterSums {
  std::int64_t clusters = 0;
  std::int64_t n = 0;
  std::int64_t s = 0;
  std::int64_t ss = 0;
  std::int64_t nn = 0;
  std::int64_t sn = 0;

  void add(std::int64_t successes, std::int64_t trials) noexcept {
    if (trials == 0) return;
    ++clusters;
    n += trials;
    s += successes;
    ss += successes * successes;
    nn += trials * trials;
    sn += successes * trials;
  }

  void merge(const ClusterSums& o) noexcept {
    clusters += o.clusters;
    n += o.n;
    s += o.s;
    ss += o.ss;
    nn += o.nn;
    sn += o.sn;
  }

  /// Pooled mean with the between-cluster (CR1) standard error
  ///   sqrt(G/(G-1) * sum_g (s_g - m n_g)^2) / N.
  RoundStat stat(int round) const noexcept {
    RoundStat r;
    r.round = round;
    r.count = n;
    r.clusters = clusters;
    if (n == 0) return r;
    const double m = static_cast<double>(s) / static_cast<double>(n);
    r.mean = m;
    if (clusters >= 2) {
      const double resid = static_cast<double>(ss) -
                           2.0 * m * static_cast<double>(sn) +
                           m * m * static_cast<double>(nn);
      const double g = static_cast<double>(clusters);
      r.std_error = std::sqrt(g / (g - 1.0) * std::max(resid, 0.0)) /
                    static_cast<double>(n);
    }
    return r;
  }
};

class RoundSeriesBuilder {
 public:
  RoundSeriesBuilder() = default;
  explicit RoundSeriesBuilder(int rounds)
      : sums_(static_cast<std::size_t>(rounds)) {}

  void add(int round, std::int64_t successes, std::int64_t trials) {
    if (round > static_cast<int>(sums_.size())) {
      sums_.resize(static_cast<std::size_t>(round));
    }
    sums_[static_cast<std::size_t>(round - 1)].add(successes, trials);
  }

  /// Makes the series cover at least `rounds` rounds.
  void cover(int rounds) {
    if (rounds > static_cast<int>(sums_.size())) sums_.resize(static_cast<std::size_t>(rounds));
  }

  void merge(const RoundSeriesBuilder& o) {
    if (o.sums_.size() > sums_.size()) sums_.resize(o.sums_.size());
    for (std::size_t i = 0; i < o.sums_.size(); ++i) sums_[i].merge(o.sums_[i]);
  }

  RoundSeries finish(std::string metric) const {
    RoundSeries out{std::move(metric), {}};
    out.rounds.reserve(sums_.size());
    for (std::size_t i = 0; i < sums_.size(); ++i) {
      out.rounds.push_back(sums_[i].stat(static_cast<int>(i) + 1));
    }
    return out;
  }

  const std::vector<ClusterSums>& sums() const noexcept { return sums_; }

  friend bool operator==(const RoundSeriesBuilder& a,
                         const RoundSeriesBuilder& b) {
    if (a.sums_.size() != b.sums_.size()) return false;
    for (std::size_t i = 0; i < a.sums_.size(); ++i) {
      const auto& x = a.sums_[i];
      const auto& y = b.sums_[i];
      if (std::tie(x.clusters, x.n, x.s, x.ss, x.nn, x.sn) !=
          std::tie(y.clusters, y.n, y.s, y.ss, y.nn, y.sn)) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<ClusterSums> sums_;
};

//---------------------------------------------------------------------------//
// Game grids
//---------------------------------------------------------------------------//

/// One group's game laid out as round-major [round][player] matrices.
struct GameGrid {
  std::int64_t session = 0;
  std::int64_t game = 0;
  std::int64_t group = 0;
  Treatment treatment = Treatment::NoInfo;
  State state = Color::Red;
  int rounds = 0;
  int players = 0;
  std::vector<std::int64_t> player_ids;  ///< sorted
  std::vector<Color> signals;
  std::vector<Color> actions;

  std::size_t idx(int round, int j) const noexcept {
    return static_cast<std::size_t>((round - 1) * players + j);
  }
  Color signal(int round, int j) const { return signals[idx(round, j)]; }
  Color action(int round, int j) const { return actions[idx(round, j)]; }
};

/// Groups a panel by (session, game, group). Each group must be a complete
/// rectangle: every player present in every round 1..R exactly once.
inline std::vector<GameGrid> group_games(const Panel& panel) {
  using Key = std::tuple<std::int64_t, std::int64_t, std::int64_t>;
  std::map<Key, std::vector<const PanelRecord*>> by_game;
  for (const auto& r : panel) by_game[{r.session, r.game, r.group}].push_back(&r);

  std::vector<GameGrid> out;
  out.reserve(by_game.size());
  for (auto& [key, recs] : by_game) {
    GameGrid g;
    std::tie(g.session, g.game, g.group) = key;
    g.treatment = recs.front()->treatment;
    g.state = recs.front()->state;
    for (const auto* r : recs) {
      g.rounds = std::max(g.rounds, r->round);
      g.player_ids.push_back(r->player);
    }
    std::sort(g.player_ids.begin(), g.player_ids.end());
    g.player_ids.erase(std::unique(g.player_ids.begin(), g.player_ids.end()),
                       g.player_ids.end());
    g.players = static_cast<int>(g.player_ids.size());
    const auto cells = static_cast<std::size_t>(g.rounds * g.players);
    if (recs.size() != cells) {
      throw ValidationError("game (session " + std::to_string(g.session) +
                            ", game " + std::to_string(g.game) + ", group " +
                            std::to_string(g.group) +
                            ") is not a complete rounds x players grid");
    }
    g.signals.assign(cells, Color::Red);
    g.actions.assign(cells, Color::Red);
    std::vector<bool> seen(cells, false);
    for (const auto* r : recs) {
      if (r->state != g.state || r->treatment != g.treatment) {
        throw ValidationError("inconsistent state or treatment within game " +
                              std::to_string(g.game));
      }
      if (r->round < 1) {
        throw ValidationError("invalid round in game " + std::to_string(g.game));
      }
      const int j = static_cast<int>(
          std::lower_bound(g.player_ids.begin(), g.player_ids.end(), r->player) -
          g.player_ids.begin());
      const auto i = g.idx(r->round, j);
      if (seen[i]) {
        throw ValidationError("duplicate or invalid round in game " +
                              std::to_string(g.game));
      }
      seen[i] = true;
      g.signals[i] = r->signal;
      g.actions[i] = r->action;
    }
    out.push_back(std::move(g));
  }
  return out;
}

/// Grid for the records of exactly one game, in engine order (round-major,
/// player index ascending). Cheaper than group_games for simulation output.
inline GameGrid grid_from_engine_output(std::span<const PanelRecord> recs,
                                        int rounds, int players) {
  GameGrid g;
  g.session = recs.front().session;
  g.game = recs.front().game;
  g.group = recs.front().group;
  g.treatment = recs.front().treatment;
  g.state = recs.front().state;
  g.rounds = rounds;
  g.players = players;
  g.player_ids.resize(static_cast<std::size_t>(players));
  for (int j = 0; j < players; ++j) {
    g.player_ids[static_cast<std::size_t>(j)] = recs[static_cast<std::size_t>(j)].player;
  }
  g.signals.resize(recs.size());
  g.actions.resize(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    g.signals[i] = recs[i].signal;
    g.actions[i] = recs[i].action;
  }
  return g;
}

//---------------------------------------------------------------------------//
// Per-round outcome metrics
//---------------------------------------------------------------------------//

enum class ClusterBy { Game, Session };

inline constexpr std::string_view kCorrectMetric = "correct";
inline constexpr std::string_view kConsensusMetric = "consensus";
inline constexpr std::string_view kMajorityCorrectMetric = "majority_correct";

namespace detail {

inline void add_correct(const GameGrid& g, RoundSeriesBuilder& b) {
  for (int t = 1; t <= g.rounds; ++t) {
    int hits = 0;
    for (int j = 0; j < g.players; ++j) hits += g.action(t, j) == g.state;
    b.add(t, hits, g.players);
  }
}

inline void add_consensus(const GameGrid& g, bool exclude_signal_ties,
                          RoundSeriesBuilder& b) {
  if (g.players < 2) {
    throw ValidationError("consensus needs groups of at least two players");
  }
  Tally cumulative;
  for (int t = 1; t <= g.rounds; ++t) {
    if (!(exclude_signal_ties && cumulative.red == cumulative.green)) {
      int red = 0;
      for (int j = 0; j < g.players; ++j) red += g.action(t, j) == Color::Red;
      b.add(t, std::max(red, g.players - red), g.players);
    }
    for (int j = 0; j < g.players; ++j) cumulative.add(g.signal(t, j));
  }
}

inline void add_majority_correct(const GameGrid& g, RoundSeriesBuilder& b) {
  if (g.players < 2) {
    throw ValidationError("majority metrics need groups of at least two players");
  }
  for (int t = 1; t <= g.rounds; ++t) {
    int red = 0;
    for (int j = 0; j < g.players; ++j) red += g.action(t, j) == Color::Red;
    const int green = g.players - red;
    if (red == green) continue;
    const Color majority = red > green ? Color::Red : Color::Green;
    b.add(t, majority == g.state ? 1 : 0, 1);
  }
}

/// Runs `add(grid, builder)` per game, then pools clusters as requested.
template <class AddFn>
RoundSeriesBuilder cluster_series(const std::vector<GameGrid>& games,
                                  ClusterBy by, AddFn add) {
  int rounds = 0;
  for (const auto& g : games) rounds = std::max(rounds, g.rounds);
  if (by == ClusterBy::Game) {
    RoundSeriesBuilder b(rounds);
    for (const auto& g : games) add(g, b);
    return b;
  }
  // Session clusters: sum each session's per-round counts first.
  std::map<std::int64_t, std::vector<std::pair<std::int64_t, std::int64_t>>>
      per_session;
  for (const auto& g : games) {
    RoundSeriesBuilder one;
    add(g, one);
    auto& acc = per_session[g.session];
    const auto& sums = one.sums();
    if (acc.size() < sums.size()) acc.resize(sums.size());
    for (std::size_t i = 0; i < sums.size(); ++i) {
      acc[i].first += sums[i].s;
      acc[i].second += sums[i].n;
    }
  }
  RoundSeriesBuilder b(rounds);
  for (const auto& [session, acc] : per_session) {
    for (std::size_t i = 0; i < acc.size(); ++i) {
      b.add(static_cast<int>(i) + 1, acc[i].first, acc[i].second);
    }
  }
  return b;
}

}  // namespace detail

/// Share of correct actions per round; SE clustered by game (or session).
inline RoundSeries fraction_correct_by_round(const Panel& panel,
                                             ClusterBy by = ClusterBy::Game) {
  if (panel.empty()) throw ValidationError("empty panel");
  return detail::cluster_series(group_games(panel), by, detail::add_correct)
      .finish(std::string(kCorrectMetric));
}

/// Relative size of the majority faction per game-round, in [0.5, 1].
/// With `exclude_signal_ties`, game-rounds whose group signal tally from
/// earlier rounds is tied are dropped (this always drops round 1).
inline RoundSeries consensus_by_round(const Panel& panel,
                                      bool exclude_signal_ties,
                                      ClusterBy by = ClusterBy::Game) {
  if (panel.empty()) throw ValidationError("empty panel");
  return detail::cluster_series(group_games(panel), by,
                                [&](const GameGrid& g, RoundSeriesBuilder& b) {
                                  detail::add_consensus(g, exclude_signal_ties,
                                                        b);
                                })
      .finish(std::string(kConsensusMetric));
}

/// Among game-rounds with a strict action majority, how often the
/// majority action matches the state.
inline RoundSeries majority_correct_by_round(const Panel& panel,
                                             ClusterBy by = ClusterBy::Game) {
  if (panel.empty()) throw ValidationError("empty panel");
  return detail::cluster_series(group_games(panel), by,
                                detail::add_majority_correct)
      .finish(std::string(kMajorityCorrectMetric));
}

/// Streaming form of the three round metrics, used by the simulators.
struct OutcomeAccumulator {
  RoundSeriesBuilder correct;
  RoundSeriesBuilder consensus;
  RoundSeriesBuilder majority_correct;

  void add_game(const GameGrid& g) {
    correct.cover(g.rounds);
    detail::add_correct(g, correct);
    if (g.players >= 2) {
      consensus.cover(g.rounds);
      majority_correct.cover(g.rounds);
      detail::add_consensus(g, false, consensus);
      detail::add_majority_correct(g, majority_correct);
    }
  }

  void merge(const OutcomeAccumulator& o) {
    correct.merge(o.correct);
    consensus.merge(o.consensus);
    majority_correct.merge(o.majority_correct);
  }
};

//---------------------------------------------------------------------------//
// Signal strength
//---------------------------------------------------------------------------//

enum class StrengthCategory : std::uint8_t {
  VeryStrongGreen,
  StrongGreen,
  Weak,
  StrongRed,
  VeryStrongRed,
};

inline constexpr std::array<StrengthCategory, 5> kAllStrengthCategories = {
    StrengthCategory::VeryStrongGreen, StrengthCategory::StrongGreen,
    StrengthCategory::Weak, StrengthCategory::StrongRed,
    StrengthCategory::VeryStrongRed};

constexpr std::string_view strength_name(StrengthCategory c) noexcept {
  switch (c) {
    case StrengthCategory::VeryStrongGreen: return "very_strong_green";
    case StrengthCategory::StrongGreen: return "strong_green";
    case StrengthCategory::Weak: return "weak";
    case StrengthCategory::StrongRed: return "strong_red";
    case StrengthCategory::VeryStrongRed: return "very_strong_red";
  }
  return "?";
}

/// Four increasing bounds (a, b, c, d) on the red-minus-green difference:
///   very strong green  diff < a
///   strong green       a <= diff <= b
///   weak               b <  diff <  c
///   strong red         c <= diff <= d
///   very strong red    diff > d
struct StrengthCutoffs {
  std::array<int, 4> bounds{-26, -15, 15, 26};

  bool valid() const noexcept {
    return bounds[0] < bounds[1] && bounds[1] < bounds[2] &&
           bounds[2] < bounds[3];
  }

  friend bool operator==(const StrengthCutoffs&, const StrengthCutoffs&) = default;
};

/// Cutoffs used for groups of eight over twenty rounds.
inline constexpr StrengthCutoffs kDefaultCutoffs{};

inline StrengthCategory classify_strength(int diff,
                                          const StrengthCutoffs& cutoffs =
                                              kDefaultCutoffs) {
  if (!cutoffs.valid()) throw ValidationError("strength cutoffs must increase");
  const auto& b = cutoffs.bounds;
  if (diff < b[0]) return StrengthCategory::VeryStrongGreen;
  if (diff <= b[1]) return StrengthCategory::StrongGreen;
  if (diff < b[2]) return StrengthCategory::Weak;
  if (diff <= b[3]) return StrengthCategory::StrongRed;
  return StrengthCategory::VeryStrongRed;
}

/// Cutoffs at the 10/25/75/90th percentiles of the visible signal
/// difference, pooled over decision rounds 2..rounds, with the state drawn
/// from the prior. `signals_per_round` is how many new signals a player
/// sees per round (the group size when signals are public, else 1).
/// Reproduces kDefaultCutoffs for eight public signals over twenty rounds.
inline StrengthCutoffs percentile_cutoffs(int signals_per_round, int rounds = 20,
                                          double precision = 0.6,
                                          double prior_red = 0.5) {
  if (signals_per_round < 1 || rounds < 2) {
    throw ValidationError("percentile cutoffs need >= 1 signal per round and >= 2 rounds");
  }
  const int max_n = signals_per_round * (rounds - 1);
  std::vector<double> mass(static_cast<std::size_t>(2 * max_n + 1), 0.0);
  const double weight = 1.0 / (rounds - 1);
  for (int t = 2; t <= rounds; ++t) {
    const int n = signals_per_round * (t - 1);
    for (int red = 0; red <= n; ++red) {
      const double p = prior_red * std::exp(log_binomial_pmf(red, n, precision)) +
                       (1.0 - prior_red) *
                           std::exp(log_binomial_pmf(red, n, 1.0 - precision));
      mass[static_cast<std::size_t>(2 * red - n + max_n)] += weight * p;
    }
  }
  auto quantile = [&](double level) {
    double cdf = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
      cdf += mass[i];
      if (cdf >= level - 1e-12) return static_cast<int>(i) - max_n;
    }
    return max_n;
  };
  StrengthCutoffs c;
  c.bounds = {quantile(0.10), quantile(0.25) - 1, quantile(0.75) + 1,
              quantile(0.90)};
  // Degenerate for very short games; keep the partition well formed.
  c.bounds[1] = std::max(c.bounds[1], c.bounds[0] + 1);
  c.bounds[2] = std::max(c.bounds[2], c.bounds[1] + 1);
  c.bounds[3] = std::max(c.bounds[3], c.bounds[2] + 1);
  return c;
}

//---------------------------------------------------------------------------//
// Responsiveness to others' actions
//---------------------------------------------------------------------------//

/// Decile of a share k/others: left-closed bins, the top bin closed.
inline int rho_bin(int red_others, int others) {
  if (others <= 0) throw ValidationError("rho needs at least one other player");
  return std::min(10 * red_others / others, 9);
}

struct ResponsivenessCell {
  StrengthCategory category;
  int bin = 0;  ///< 0..9, bin k covers [k/10, (k+1)/10)
  std::int64_t count = 0;
  double red_share = 0.0;
};

/// Slope of P(red) in rho within a strength category, holding the exact
/// signal tally (difference and count) fixed; SE clustered by game.
struct CategorySlope {
  StrengthCategory category;
  std::int64_t count = 0;
  std::optional<double> slope;
  std::optional<double> std_error;
};

struct ResponsivenessTable {
  StrengthCutoffs cutoffs;
  std::vector<ResponsivenessCell> cells;  ///< nonempty cells only
  std::array<CategorySlope, 5> slopes;

  const CategorySlope& slope_of(StrengthCategory c) const {
    return slopes[static_cast<std::size_t>(c)];
  }
};

struct ResponsivenessOptions {
  std::optional<StrengthCutoffs> cutoffs;  ///< default: percentile_cutoffs
  double precision = 0.6;                  ///< for the default cutoffs
};

inline ResponsivenessTable responsiveness_summary(
    const Panel& panel, const ResponsivenessOptions& options = {}) {
  const auto games = group_games(panel);
  if (games.empty()) throw ValidationError("empty panel");

  struct Obs {
    std::size_t game;
    int diff;
    int count;
    double rho;
    int bin;
    int y;
  };
  std::array<std::vector<Obs>, 5> by_cat;

  std::optional<StrengthCutoffs> cutoffs = options.cutoffs;
  for (std::size_t gi = 0; gi < games.size(); ++gi) {
    const auto& g = games[gi];
    if (!shows_others_actions(g.treatment)) {
      throw ValidationError("responsiveness needs a treatment with public actions");
    }
    if (g.players < 2) throw ValidationError("responsiveness needs groups of two or more");
    const bool public_signals = shows_others_signals(g.treatment);
    if (!cutoffs) {
      cutoffs = percentile_cutoffs(public_signals ? g.players : 1,
                                   std::max(g.rounds, 2), options.precision);
    }
    std::vector<Tally> own(static_cast<std::size_t>(g.players));
    Tally group;
    for (int t = 1; t <= g.rounds; ++t) {
      if (t >= 2) {
        int red_prev = 0;
        for (int j = 0; j < g.players; ++j) red_prev += g.action(t - 1, j) == Color::Red;
        for (int j = 0; j < g.players; ++j) {
          const Tally visible = public_signals ? group : own[static_cast<std::size_t>(j)];
          const int others_red = red_prev - (g.action(t - 1, j) == Color::Red);
          const int others = g.players - 1;
          const auto cat = classify_strength(visible.diff(), *cutoffs);
          by_cat[static_cast<std::size_t>(cat)].push_back(
              {gi, visible.diff(), visible.total(),
               static_cast<double>(others_red) / others,
               rho_bin(others_red, others), g.action(t, j) == Color::Red});
        }
      }
      for (int j = 0; j < g.players; ++j) {
        own[static_cast<std::size_t>(j)].add(g.signal(t, j));
        group.add(g.signal(t, j));
      }
    }
  }

  ResponsivenessTable table;
  table.cutoffs = *cutoffs;
  for (auto cat : kAllStrengthCategories) {
    const auto& obs = by_cat[static_cast<std::size_t>(cat)];
    std::array<std::int64_t, 10> n{};
    std::array<std::int64_t, 10> red{};
    for (const auto& o : obs) {
      ++n[static_cast<std::size_t>(o.bin)];
      red[static_cast<std::size_t>(o.bin)] += o.y;
    }
    for (int b = 0; b < 10; ++b) {
      if (n[static_cast<std::size_t>(b)] == 0) continue;
      table.cells.push_back({cat, b, n[static_cast<std::size_t>(b)],
                             static_cast<double>(red[static_cast<std::size_t>(b)]) /
                                 static_cast<double>(n[static_cast<std::size_t>(b)])});
    }

    // Within-stratum slope: demean y and rho inside each exact tally.
    CategorySlope& cs = table.slopes[static_cast<std::size_t>(cat)];
    cs.category = cat;
    cs.count = static_cast<std::int64_t>(obs.size());
    std::map<std::pair<int, int>, std::tuple<double, double, std::int64_t>> strata;
    for (const auto& o : obs) {
      auto& [sy, sx, c] = strata[{o.diff, o.count}];
      sy += o.y;
      sx += o.rho;
      ++c;
    }
    double sxx = 0.0;
    double sxy = 0.0;
    std::vector<double> xt(obs.size());
    std::vector<double> yt(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const auto& [sy, sx, c] = strata[{obs[i].diff, obs[i].count}];
      xt[i] = obs[i].rho - sx / static_cast<double>(c);
      yt[i] = obs[i].y - sy / static_cast<double>(c);
      sxx += xt[i] * xt[i];
      sxy += xt[i] * yt[i];
    }
    if (sxx <= 1e-12) continue;
    const double slope = sxy / sxx;
    cs.slope = slope;
    std::map<std::size_t, double> score;
    for (std::size_t i = 0; i < obs.size(); ++i) {
      score[obs[i].game] += xt[i] * (yt[i] - slope * xt[i]);
    }
    if (score.size() >= 2) {
      double meat = 0.0;
      for (const auto& [game, u] : score) meat += u * u;
      const double g = static_cast<double>(score.size());
      cs.std_error = std::sqrt(g / (g - 1.0) * meat) / sxx;
    }
  }
  return table;
}

//---------------------------------------------------------------------------//
// Individual responsiveness
//---------------------------------------------------------------------------//

/// Per-player nonparametric responsiveness. "Follows" means acting on the
/// majority of the visible signals (rows with a tied tally are skipped).
/// The social measure is the follow rate when every other player chose the
/// signal majority in the previous round minus the rate when none did.
struct PlayerResponsiveness {
  std::int64_t session = 0;
  std::int64_t player = 0;
  std::int64_t weak_rows = 0;
  std::int64_t weak_follow = 0;
  std::int64_t strong_rows = 0;
  std::int64_t strong_follow = 0;
  std::int64_t all_agree_rows = 0;
  std::int64_t all_agree_follow = 0;
  std::int64_t none_agree_rows = 0;
  std::int64_t none_agree_follow = 0;

  std::optional<double> weak_rate() const { return rate(weak_follow, weak_rows); }
  std::optional<double> strong_rate() const { return rate(strong_follow, strong_rows); }
  std::optional<double> social() const {
    const auto a = rate(all_agree_follow, all_agree_rows);
    const auto b = rate(none_agree_follow, none_agree_rows);
    if (!a || !b) return std::nullopt;
    return *a - *b;
  }

 private:
  static std::optional<double> rate(std::int64_t k, std::int64_t n) {
    if (n == 0) return std::nullopt;
    return static_cast<double>(k) / static_cast<double>(n);
  }
};

inline std::vector<PlayerResponsiveness> individual_responsiveness(
    const Panel& panel, const ResponsivenessOptions& options = {}) {
  const auto games = group_games(panel);
  std::map<std::pair<std::int64_t, std::int64_t>, PlayerResponsiveness> acc;
  for (const auto& g : games) {
    const bool public_signals = shows_others_signals(g.treatment);
    const bool public_actions = shows_others_actions(g.treatment) && g.players >= 2;
    const StrengthCutoffs cutoffs =
        options.cutoffs ? *options.cutoffs
                        : percentile_cutoffs(public_signals ? g.players : 1,
                                             std::max(g.rounds, 2), options.precision);
    std::vector<Tally> own(static_cast<std::size_t>(g.players));
    Tally group;
    for (int t = 1; t <= g.rounds; ++t) {
      for (int j = 0; j < g.players && t >= 2; ++j) {
        const Tally seen = public_signals ? group : own[static_cast<std::size_t>(j)];
        if (seen.diff() == 0) continue;
        const Color majority = seen.diff() > 0 ? Color::Red : Color::Green;
        const bool follow = g.action(t, j) == majority;
        auto& r = acc[{g.session, g.player_ids[static_cast<std::size_t>(j)]}];
        r.session = g.session;
        r.player = g.player_ids[static_cast<std::size_t>(j)];
        if (classify_strength(seen.diff(), cutoffs) == StrengthCategory::Weak) {
          ++r.weak_rows;
          r.weak_follow += follow;
        } else {
          ++r.strong_rows;
          r.strong_follow += follow;
        }
        if (public_actions) {
          int agree = 0;
          for (int k = 0; k < g.players; ++k) {
            if (k != j) agree += g.action(t - 1, k) == majority;
          }
          if (agree == g.players - 1) {
            ++r.all_agree_rows;
            r.all_agree_follow += follow;
          } else if (agree == 0) {
            ++r.none_agree_rows;
            r.none_agree_follow += follow;
          }
        }
      }
      for (int j = 0; j < g.players; ++j) {
        own[static_cast<std::size_t>(j)].add(g.signal(t, j));
        group.add(g.signal(t, j));
      }
    }
  }
  std::vector<PlayerResponsiveness> out;
  out.reserve(acc.size());
  for (auto& [key, r] : acc) out.push_back(r);
  return out;
}

}  // namespace urnlab
