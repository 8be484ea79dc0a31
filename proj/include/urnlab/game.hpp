// Copyright 2026 The urnlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <concepts>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "urnlab/error.hpp"
#include "urnlab/rng.hpp"

namespace urnlab {

//---------------------------------------------------------------------------//
// Colors
//---------------------------------------------------------------------------//

/// The two urn colors. States, signals and actions all share this type.
enum class Color : std::uint8_t { Red, Green };

using State = Color;
using SignalValue = Color;
using ActionValue = Color;

constexpr Color swapped(Color c) noexcept {
  return c == Color::Red ? Color::Green : Color::Red;
}

/// Red maps to +1, Green to -1.
constexpr int encode(Color c) noexcept { return c == Color::Red ? 1 : -1; }

constexpr char to_char(Color c) noexcept { return c == Color::Red ? 'R' : 'G'; }

//---------------------------------------------------------------------------//
// Treatments and configuration
//---------------------------------------------------------------------------//

enum class Treatment : std::uint8_t { NoInfo, Actions, Signals, All };

inline constexpr Treatment kAllTreatments[] = {
    Treatment::NoInfo, Treatment::Actions, Treatment::Signals, Treatment::All};

constexpr bool shows_others_actions(Treatment t) noexcept {
  return t == Treatment::Actions || t == Treatment::All;
}

constexpr bool shows_others_signals(Treatment t) noexcept {
  return t == Treatment::Signals || t == Treatment::All;
}

constexpr std::string_view treatment_name(Treatment t) noexcept {
  switch (t) {
    case Treatment::NoInfo: return "no_info";
    case Treatment::Actions: return "actions";
    case Treatment::Signals: return "signals";
    case Treatment::All: return "all";
  }
  return "?";
}

inline std::optional<Treatment> parse_treatment(std::string_view name) {
  for (Treatment t : kAllTreatments) {
    if (treatment_name(t) == name) return t;
  }
  return std::nullopt;
}

struct GameConfig {
  int rounds = 20;
  int group_size = 8;
  double precision = 0.6;
  double prior_red = 0.5;
  Treatment treatment = Treatment::All;

  void validate() const {
    if (rounds < 1) throw ValidationError("rounds must be at least 1");
    if (group_size < 1) throw ValidationError("group_size must be at least 1");
    if (!(precision > 0.5 && precision < 1.0)) {
      throw ValidationError("precision must lie in (0.5, 1)");
    }
    if (!(prior_red > 0.0 && prior_red < 1.0)) {
      throw ValidationError("prior_red must lie in (0, 1)");
    }
  }

  friend bool operator==(const GameConfig&, const GameConfig&) = default;
};

//---------------------------------------------------------------------------//
// Information sets
//---------------------------------------------------------------------------//

struct Tally {
  int red = 0;
  int green = 0;

  constexpr int total() const noexcept { return red + green; }
  /// Red minus green.
  constexpr int diff() const noexcept { return red - green; }
  constexpr void add(Color c) noexcept { (c == Color::Red ? red : green) += 1; }

  constexpr Tally operator+(const Tally& o) const noexcept {
    return {red + o.red, green + o.green};
  }
  constexpr Tally operator-(const Tally& o) const noexcept {
    return {red - o.red, green - o.green};
  }
  friend constexpr bool operator==(const Tally&, const Tally&) = default;
};

/// Read-only view of the other players' actions in completed rounds.
/// Backed by the engine's round-major action matrix; the viewing player's
/// own column is not reachable through it.
class ActionHistory {
 public:
  ActionHistory(std::span<const Color> round_major, int group_size,
                int rounds_completed, int self)
      : actions_(round_major),
        group_size_(group_size),
        rounds_(rounds_completed),
        self_(self) {}

  int rounds_completed() const noexcept { return rounds_; }
  int others() const noexcept { return group_size_ - 1; }

  /// Actions of everyone but the viewer in 1-based `round`, in player order.
  std::vector<Color> others_in_round(int round) const {
    std::vector<Color> out;
    out.reserve(static_cast<std::size_t>(others()));
    const auto row = row_of(round);
    for (int j = 0; j < group_size_; ++j) {
      if (j != self_) out.push_back(row[static_cast<std::size_t>(j)]);
    }
    return out;
  }

  int others_red(int round) const {
    int red = 0;
    const auto row = row_of(round);
    for (int j = 0; j < group_size_; ++j) {
      if (j != self_ && row[static_cast<std::size_t>(j)] == Color::Red) ++red;
    }
    return red;
  }

  /// Action of player `j != self` in 1-based `round`.
  Color at(int round, int j) const {
    if (j == self_ || j < 0 || j >= group_size_) {
      throw std::out_of_range("ActionHistory::at: player not visible");
    }
    return row_of(round)[static_cast<std::size_t>(j)];
  }

 private:
  std::span<const Color> row_of(int round) const {
    if (round < 1 || round > rounds_) {
      throw std::out_of_range("ActionHistory: round not yet completed");
    }
    return actions_.subspan(
        static_cast<std::size_t>((round - 1) * group_size_),
        static_cast<std::size_t>(group_size_));
  }

  std::span<const Color> actions_;
  int group_size_;
  int rounds_;
  int self_;
};

/// Everything a player has observed before acting in `round`.
struct InfoSet {
  int round = 1;  ///< 1-based decision round
  int player = 0; ///< index within the group
  int group_size = 1;
  Treatment treatment = Treatment::NoInfo;
  Tally own;                               ///< own signals, rounds < round
  std::optional<Tally> others_signals;     ///< iff signals are public
  std::optional<ActionHistory> others_actions;  ///< iff actions are public

  /// Signals the player can count: own, plus others' when public.
  Tally visible_signals() const noexcept {
    return others_signals ? own + *others_signals : own;
  }
};

//---------------------------------------------------------------------------//
// Panel records
//---------------------------------------------------------------------------//

/// One (session, game, round, player) observation.
struct PanelRecord {
  std::int64_t session = 0;
  Treatment treatment = Treatment::NoInfo;
  std::int64_t group = 0;
  std::int64_t game = 0;
  int round = 1;
  std::int64_t player = 0;
  SignalValue signal = Color::Red;
  ActionValue action = Color::Red;
  State state = Color::Red;

  friend bool operator==(const PanelRecord&, const PanelRecord&) = default;
};

using Panel = std::vector<PanelRecord>;

/// Swaps Red and Green in every signal, action and state.
inline Panel color_swapped(const Panel& panel) {
  Panel out = panel;
  for (auto& r : out) {
    r.signal = swapped(r.signal);
    r.action = swapped(r.action);
    r.state = swapped(r.state);
  }
  return out;
}

//---------------------------------------------------------------------------//
// Primitive draws
//---------------------------------------------------------------------------//

/// Draws one ball: the state's color with probability `precision`.
/// Consumes one uniform.
inline SignalValue draw_signal(State state, double precision, Stream& stream) {
  return stream.bernoulli(precision) ? state : swapped(state);
}

/// Strict-majority color of `tally`, fair coin on a tie. Always consumes
/// exactly one uniform so that streams stay aligned whatever the tally.
inline ActionValue majority_action(const Tally& tally, Stream& stream) {
  const bool coin_red = stream.uniform() < 0.5;
  if (tally.red > tally.green) return Color::Red;
  if (tally.green > tally.red) return Color::Green;
  return coin_red ? Color::Red : Color::Green;
}

//---------------------------------------------------------------------------//
// Simulation loop
//---------------------------------------------------------------------------//

/// An agent policy maps an information set and a private stream to an
/// action. One copy of the policy serves a whole group for one game.
template <class P>
concept AgentPolicy = std::copy_constructible<P> &&
    requires(P& p, const InfoSet& info, Stream& s) {
      { p.act(info, s) } -> std::same_as<ActionValue>;
    };

/// Optional hook: called once before round 1.
template <class P>
concept StartsGames = requires(P& p, const GameConfig& c) { p.start_game(c); };

/// Optional hook: receives every player's action after each round. Only
/// invoked in treatments where actions are public.
template <class P>
concept ObservesRounds = requires(P& p, int round, std::span<const Color> a) {
  p.observe_round(round, a);
};

/// Bookkeeping ids stamped onto the records of one simulated game.
struct GameLabels {
  std::int64_t session = 0;
  std::int64_t group = 0;
  std::int64_t player_offset = 0;
};

inline GameLabels default_labels(const SeedSpec& seed) {
  return {static_cast<std::int64_t>(seed.replication), 0, 0};
}

/// Plays one game and appends rounds x group_size records to `out`, ordered
/// by round then player. Within a round every player acts first, then each
/// draws a signal that becomes visible from the next round on. Returns the
/// policy as it stands after the last round.
template <AgentPolicy P>
P simulate_game_into(const GameConfig& config, P policy,
                        const SeedSpec& seed, const GameLabels& labels,
                        Panel& out) {
  config.validate();
  const int n = config.group_size;
  const int rounds = config.rounds;
  const Treatment treatment = config.treatment;

  Stream nature = Stream::derive(seed, kNaturePlayer, 0, Lane::Nature);
  const State state = nature.bernoulli(config.prior_red) ? Color::Red
                                                         : Color::Green;

  if constexpr (StartsGames<P>) policy.start_game(config);

  std::vector<Tally> own(static_cast<std::size_t>(n));
  Tally group_tally;
  std::vector<Color> actions(static_cast<std::size_t>(rounds * n));
  out.reserve(out.size() + static_cast<std::size_t>(rounds * n));

  for (int t = 1; t <= rounds; ++t) {
    const std::span<const Color> history(actions.data(),
                                         static_cast<std::size_t>((t - 1) * n));
    for (int j = 0; j < n; ++j) {
      InfoSet info;
      info.round = t;
      info.player = j;
      info.group_size = n;
      info.treatment = treatment;
      info.own = own[static_cast<std::size_t>(j)];
      if (shows_others_signals(treatment)) {
        info.others_signals = group_tally - info.own;
      }
      if (shows_others_actions(treatment)) {
        info.others_actions.emplace(history, n, t - 1, j);
      }
      Stream s = Stream::derive(seed, static_cast<std::uint64_t>(j),
                                static_cast<std::uint64_t>(t), Lane::Policy);
      actions[static_cast<std::size_t>((t - 1) * n + j)] = policy.act(info, s);
    }

    if constexpr (ObservesRounds<P>) {
      if (shows_others_actions(treatment)) {
        policy.observe_round(
            t, std::span<const Color>(
                   actions.data() + static_cast<std::size_t>((t - 1) * n),
                   static_cast<std::size_t>(n)));
      }
    }

    for (int j = 0; j < n; ++j) {
      Stream s = Stream::derive(seed, static_cast<std::uint64_t>(j),
                                static_cast<std::uint64_t>(t), Lane::Nature);
      const SignalValue signal = draw_signal(state, config.precision, s);
      own[static_cast<std::size_t>(j)].add(signal);
      group_tally.add(signal);
      PanelRecord r;
      r.session = labels.session;
      r.treatment = treatment;
      r.group = labels.group;
      r.game = static_cast<std::int64_t>(seed.game);
      r.round = t;
      r.player = labels.player_offset + j;
      r.signal = signal;
      r.action = actions[static_cast<std::size_t>((t - 1) * n + j)];
      r.state = state;
      out.push_back(r);
    }
  }
  return policy;
}

template <AgentPolicy P>
Panel simulate_game(const GameConfig& config, P policy, const SeedSpec& seed) {
  Panel out;
  simulate_game_into(config, std::move(policy), seed, default_labels(seed),
                     out);
  return out;
}

template <AgentPolicy P>
Panel simulate_game(const GameConfig& config, P policy, const SeedSpec& seed,
                    const GameLabels& labels) {
  Panel out;
  simulate_game_into(config, std::move(policy), seed, labels, out);
  return out;
}

//---------------------------------------------------------------------------//
// Baseline policies
//---------------------------------------------------------------------------//

struct CoinFlipPolicy {
  ActionValue act(const InfoSet&, Stream& s) const {
    return s.uniform() < 0.5 ? Color::Red : Color::Green;
  }
};

/// Majority of the visible signals.
struct MajorityPolicy {
  ActionValue act(const InfoSet& info, Stream& s) const {
    return majority_action(info.visible_signals(), s);
  }
};

}  // namespace urnlab
