// Copyright 2026 The urnlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "urnlab/error.hpp"
#include "urnlab/game.hpp"
#include "urnlab/metrics.hpp"
#include "urnlab/numeric.hpp"
#include "urnlab/parallel.hpp"

namespace urnlab {

//---------------------------------------------------------------------------//
// Exact benchmarks for public-signal treatments
//---------------------------------------------------------------------------//

/// Probability that the majority of k conditionally independent signals
/// of precision q names the state, ties broken by a fair coin:
///   P[Bin(k, q) > k/2] + P[Bin(k, q) = k/2] / 2.
inline double majority_correct_prob(int k, double precision) {
  if (k < 0) throw ValidationError("signal count must be nonnegative");
  if (!(precision > 0.5 && precision < 1.0)) {
    throw ValidationError("precision must lie in (0.5, 1)");
  }
  if (k == 0) return 0.5;
  const long double lq = std::log(static_cast<long double>(precision));
  const long double lnq = std::log1p(-static_cast<long double>(precision));
  const long double lk = std::lgamma(static_cast<long double>(k) + 1);
  long double total = 0;
  for (int r = k / 2; r <= k; ++r) {
    const long double lp = lk - std::lgamma(static_cast<long double>(r) + 1) -
                           std::lgamma(static_cast<long double>(k - r) + 1) +
                           r * lq + (k - r) * lnq;
    const long double p = std::exp(lp);
    if (2 * r > k) {
      total += p;
    } else if (2 * r == k) {
      total += p / 2;
    }
  }
  return static_cast<double>(total);
}

/// Evidence for Red carried by a red-minus-green difference:
/// ln P(I | Red) / P(I | Green) = diff * ln(q / (1 - q)).
inline double posterior_log_odds(int diff, double precision) {
  return diff * std::log(precision / (1.0 - precision));
}

struct BenchmarkRow {
  int round = 0;
  double probability = 0.0;
  double std_error = 0.0;         ///< 0 for exact rows
  std::int64_t replications = 0;  ///< 0 for exact rows
};

struct BenchmarkTable {
  Treatment treatment = Treatment::NoInfo;
  int group_size = 1;
  bool exact = true;
  std::int64_t flagged_games = 0;  ///< games where the likelihood floor fired
  std::vector<BenchmarkRow> rows;

  const BenchmarkRow& at_round(int t) const {
    return rows.at(static_cast<std::size_t>(t - 1));
  }
};

/// Exact per-round probability of a correct action for Bayesian players
/// who see only their own signals (NoInfo) or everyone's (Signals, All).
inline BenchmarkTable benchmark_signals_table(const GameConfig& config) {
  config.validate();
  if (config.treatment == Treatment::Actions) {
    throw ValidationError(
        "the actions treatment has no closed form; use simulate_rational_actions");
  }
  if (config.prior_red != 0.5) {
    throw ValidationError("the exact benchmark assumes a uniform prior");
  }
  const int per_round =
      shows_others_signals(config.treatment) ? config.group_size : 1;
  BenchmarkTable table;
  table.treatment = config.treatment;
  table.group_size = config.group_size;
  table.exact = true;
  for (int t = 1; t <= config.rounds; ++t) {
    table.rows.push_back(
        {t, majority_correct_prob(per_round * (t - 1), config.precision), 0.0, 0});
  }
  return table;
}

//---------------------------------------------------------------------------//
// Myopic Bayesian decisions
//---------------------------------------------------------------------------//

/// |p - 1/2| at or below this counts as indifference.
inline constexpr double kIndifferenceTolerance = 1e-12;

/// The same tolerance on the log-odds scale: logistic(x) - 1/2 ~ x / 4.
inline constexpr double kIndifferenceLogOdds = 4.0 * kIndifferenceTolerance;

/// Floor on filter cell weights, applied only when an observed action has
/// vanishing likelihood (which can only happen through round-off).
inline constexpr double kLikelihoodFloor = 1e-12;

/// Probability of a Red action under the myopic rule: 1 above even odds,
/// 0 below, 1/2 when indifferent.
constexpr double rational_red_probability(double log_odds) noexcept {
  if (log_odds > kIndifferenceLogOdds) return 1.0;
  if (log_odds < -kIndifferenceLogOdds) return 0.0;
  return 0.5;
}

struct PosteriorBelief {
  double p = 0.5;  ///< probability of state Red
};

/// Public forward filter for the actions treatment.
///
/// Given the state, players' signal tallies evolve independently and each
/// action is a deterministic function of the actor's own tally and the
/// public history (plus a coin at indifference). The likelihood of the
/// public history therefore factors over players, P(H | w) = prod_j L_j(w),
/// and each factor is tracked by a forward pass over that player's
/// red-signal count.
///
/// After observing rounds 1..r, the tables hold, for each player j and
/// state w, the distribution of j's red count among the signals drawn in
/// rounds 1..r-1, conditional on w and on j's actions so far.
class BeliefFilter {
 public:
  explicit BeliefFilter(const GameConfig& config)
      : players_(config.group_size),
        capacity_(config.rounds + 1),
        precision_(config.precision),
        lambda_(std::log(config.precision / (1.0 - config.precision))),
        prior_log_odds_(logit(config.prior_red)),
        dist_(static_cast<std::size_t>(players_ * 2 * capacity_), 0.0),
        loglik_(static_cast<std::size_t>(players_ * 2), 0.0) {
    config.validate();
    for (int j = 0; j < players_; ++j) {
      for (int w = 0; w < 2; ++w) cell(j, w, 0) = 1.0;
    }
  }

  int players() const noexcept { return players_; }
  int rounds_observed() const noexcept { return rounds_; }
  /// Number of signals behind each tally table.
  int signals_per_player() const noexcept { return rounds_ > 0 ? rounds_ - 1 : 0; }
  bool floored() const noexcept { return floored_; }

  /// pi_j(. | w) over red counts 0..signals_per_player().
  std::span<const double> distribution(int player, State w) const {
    const auto base = offset(player, index(w), 0);
    return {dist_.data() + base,
            static_cast<std::size_t>(signals_per_player() + 1)};
  }

  /// log L_j(w): log-likelihood of j's observed actions given w.
  double log_likelihood(int player, State w) const {
    return loglik_[static_cast<std::size_t>(player * 2 + index(w))];
  }

  /// Sum over k != excluded of log L_k(Red) - log L_k(Green), accumulated
  /// in player order.
  double social_log_odds(int excluded) const noexcept {
    double s = 0.0;
    for (int k = 0; k < players_; ++k) {
      if (k == excluded) continue;
      s += loglik_[static_cast<std::size_t>(k * 2)] -
           loglik_[static_cast<std::size_t>(k * 2 + 1)];
    }
    return s;
  }

  /// Log-odds of Red for a player with signal difference `diff` given the
  /// social evidence. Shared by the players and by the filter's model of
  /// them, so both sides round identically.
  double decision_log_odds(int diff, double social) const noexcept {
    return prior_log_odds_ + diff * lambda_ + social;
  }

  /// Absorbs the actions of round rounds_observed() + 1: first the signal
  /// drawn at the end of the previous round, then the actions themselves.
  void update(std::span<const Color> round_actions) {
    if (static_cast<int>(round_actions.size()) != players_) {
      throw ValidationError("round actions must cover every player");
    }
    if (rounds_ + 1 >= capacity_) {
      throw ValidationError("filter already holds a full game");
    }
    const int t = rounds_ + 1;

    if (rounds_ >= 1) {
      const int n_new = t - 1;  // cells 0..n_new after the step
      for (int j = 0; j < players_; ++j) {
        for (int w = 0; w < 2; ++w) {
          const double p_red = w == 0 ? precision_ : 1.0 - precision_;
          double* pi = dist_.data() + offset(j, w, 0);
          pi[n_new] = pi[n_new - 1] * p_red;
          for (int c = n_new - 1; c >= 1; --c) {
            pi[c] = pi[c] * (1.0 - p_red) + pi[c - 1] * p_red;
          }
          pi[0] *= 1.0 - p_red;
        }
      }
    }

    social_.resize(static_cast<std::size_t>(players_));
    for (int j = 0; j < players_; ++j) {
      social_[static_cast<std::size_t>(j)] = social_log_odds(j);
    }

    const int n_signals = t - 1;
    for (int j = 0; j < players_; ++j) {
      const bool red = round_actions[static_cast<std::size_t>(j)] == Color::Red;
      const double social = social_[static_cast<std::size_t>(j)];
      weights_.resize(static_cast<std::size_t>(n_signals + 1));
      for (int c = 0; c <= n_signals; ++c) {
        const double pr =
            rational_red_probability(decision_log_odds(2 * c - n_signals, social));
        weights_[static_cast<std::size_t>(c)] = red ? pr : 1.0 - pr;
      }
      for (int w = 0; w < 2; ++w) {
        double* pi = dist_.data() + offset(j, w, 0);
        double z = 0.0;
        for (int c = 0; c <= n_signals; ++c) {
          z += pi[c] * weights_[static_cast<std::size_t>(c)];
        }
        if (z < kLikelihoodFloor) {
          floored_ = true;
          z = 0.0;
          for (int c = 0; c <= n_signals; ++c) {
            z += pi[c] * std::max(weights_[static_cast<std::size_t>(c)],
                                  kLikelihoodFloor);
          }
          for (int c = 0; c <= n_signals; ++c) {
            pi[c] *= std::max(weights_[static_cast<std::size_t>(c)],
                              kLikelihoodFloor) / z;
          }
        } else {
          for (int c = 0; c <= n_signals; ++c) {
            pi[c] *= weights_[static_cast<std::size_t>(c)] / z;
          }
        }
        loglik_[static_cast<std::size_t>(j * 2 + w)] += std::log(z);
      }
    }
    rounds_ = t;
  }

 private:
  static constexpr int index(State w) noexcept { return w == Color::Red ? 0 : 1; }
  std::size_t offset(int j, int w, int c) const noexcept {
    return static_cast<std::size_t>((j * 2 + w) * capacity_ + c);
  }
  double& cell(int j, int w, int c) { return dist_[offset(j, w, c)]; }

  int players_;
  int capacity_;
  double precision_;
  double lambda_;
  double prior_log_odds_;
  int rounds_ = 0;
  bool floored_ = false;
  std::vector<double> dist_;
  std::vector<double> loglik_;
  std::vector<double> social_;
  std::vector<double> weights_;
};

/// Value-returning form of BeliefFilter::update.
inline BeliefFilter filter_update(BeliefFilter filter,
                                  std::span<const Color> round_actions) {
  filter.update(round_actions);
  return filter;
}

/// Posterior on Red for `player` holding `own` signals, given the public
/// filter. The player's own action likelihood is left out: it is a known
/// function of the player's own tally and carries no news about the state.
inline PosteriorBelief myopic_posterior(const Tally& own,
                                        const BeliefFilter& filter,
                                        int player) {
  return {logistic(
      filter.decision_log_odds(own.diff(), filter.social_log_odds(player)))};
}

/// Myopic Bayesian player with common knowledge of rationality. In the
/// actions treatment it runs the public filter; elsewhere the visible
/// signals are a sufficient statistic. Always consumes one uniform per
/// decision, used only at indifference.
class RationalPolicy {
 public:
  void start_game(const GameConfig& config) {
    prior_log_odds_ = logit(config.prior_red);
    lambda_ = std::log(config.precision / (1.0 - config.precision));
    filter_.reset();
    if (config.treatment == Treatment::Actions) filter_.emplace(config);
  }

  ActionValue act(const InfoSet& info, Stream& stream) const {
    const bool coin_red = stream.uniform() < 0.5;
    const double log_odds =
        filter_ ? filter_->decision_log_odds(
                      info.own.diff(), filter_->social_log_odds(info.player))
                : prior_log_odds_ + info.visible_signals().diff() * lambda_;
    const double pr = rational_red_probability(log_odds);
    if (pr == 1.0) return Color::Red;
    if (pr == 0.0) return Color::Green;
    return coin_red ? Color::Red : Color::Green;
  }

  void observe_round(int, std::span<const Color> actions) {
    if (filter_) filter_->update(actions);
  }

  const std::optional<BeliefFilter>& filter() const noexcept { return filter_; }

 private:
  double prior_log_odds_ = 0.0;
  double lambda_ = 0.0;
  std::optional<BeliefFilter> filter_;
};

//---------------------------------------------------------------------------//
// Monte Carlo benchmark
//---------------------------------------------------------------------------//

struct MonteCarloOptions {
  int threads = 0;              ///< 0: all hardware threads
  std::int64_t block_size = 1024;
};

/// Monte Carlo probability of a correct action per round for rational
/// players in any treatment. Replication r plays game SeedSpec{seed, r, 0}.
inline BenchmarkTable simulate_rational(const GameConfig& config,
                                        std::int64_t replications,
                                        std::uint64_t seed,
                                        const MonteCarloOptions& options = {}) {
  config.validate();
  if (replications < 1) throw ValidationError("replications must be >= 1");

  struct Block {
    RoundSeriesBuilder correct;
    std::int64_t flagged = 0;
  };
  const auto blocks = run_blocks<Block>(
      replications, options.block_size, options.threads,
      [&](std::int64_t begin, std::int64_t end) {
        Block b;
        b.correct = RoundSeriesBuilder(config.rounds);
        Panel panel;
        for (std::int64_t r = begin; r < end; ++r) {
          panel.clear();
          const SeedSpec spec{seed, static_cast<std::uint64_t>(r), 0};
          const RationalPolicy done = simulate_game_into(
              config, RationalPolicy{}, spec, default_labels(spec), panel);
          if (done.filter() && done.filter()->floored()) ++b.flagged;
          std::size_t i = 0;
          for (int t = 1; t <= config.rounds; ++t) {
            int hits = 0;
            for (int j = 0; j < config.group_size; ++j, ++i) {
              hits += panel[i].action == panel[i].state;
            }
            b.correct.add(t, hits, config.group_size);
          }
        }
        return b;
      });

  RoundSeriesBuilder total(config.rounds);
  BenchmarkTable table;
  table.treatment = config.treatment;
  table.group_size = config.group_size;
  table.exact = false;
  for (const auto& b : blocks) {
    total.merge(b.correct);
    table.flagged_games += b.flagged;
  }
  for (const auto& s : total.finish(std::string(kCorrectMetric)).rounds) {
    table.rows.push_back({s.round, s.mean, s.std_error, s.clusters});
  }
  return table;
}

/// Monte Carlo benchmark for the actions treatment.
inline BenchmarkTable simulate_rational_actions(
    const GameConfig& config, std::int64_t replications, std::uint64_t seed,
    const MonteCarloOptions& options = {}) {
  if (config.treatment != Treatment::Actions) {
    throw ValidationError("simulate_rational_actions needs the actions treatment");
  }
  return simulate_rational(config, replications, seed, options);
}

}  // namespace urnlab
