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
#include "urnlab/simulate.hpp"

namespace urnlab {

struct BehavioralParams {
  double beta = 0.5;
  double gamma = 1.0;
  double psi = 0.5;

  void validate() const {
    if (!(std::isfinite(beta) && beta >= 0.0)) {
      throw ValidationError("beta must be finite and >= 0");
    }
    if (!(std::isfinite(gamma) && gamma >= 0.0)) {
      throw ValidationError("gamma must be finite and >= 0");
    }
    if (!(std::isfinite(psi) && psi >= 0.0)) {
      throw ValidationError("psi must be finite and >= 0");
    }
  }

  friend bool operator==(const BehavioralParams&, const BehavioralParams&) = default;
};

struct StimulusPair {
  double S = 0.0;
  int A = 0;  ///< -1, 0 or +1
};

/// M / n^psi; zero when no signal has been seen.
inline double signal_index(int m, int n_count, double psi) {
  if (n_count < 0) throw ValidationError("signal count must be nonnegative");
  if (n_count == 0) return 0.0;
  if (psi == 0.0) return m;
  if (psi == 1.0) return static_cast<double>(m) / n_count;
  return m * std::pow(static_cast<double>(n_count), -psi);
}

/// Encoded action of one uniformly drawn entry of `prev_others`, or 0 if
/// the list is empty. Always consumes from the stream, empty or not.
inline int social_stimulus(std::span<const Color> prev_others, Stream& stream) {
  const auto k = stream.below(std::max<std::size_t>(prev_others.size(), 1));
  if (prev_others.empty()) return 0;
  return encode(prev_others[static_cast<std::size_t>(k)]);
}

/// Logistic that satisfies f(-x) == 1 - f(x) bit for bit: both branches
/// go through h in [1/2, 1], where 1 - h is exact.
inline double mirrored_logistic(double x) noexcept {
  const double h = 1.0 - logistic(-std::abs(x));
  return x >= 0.0 ? h : 1.0 - h;
}

/// Probability of Red: logistic(beta S + gamma A).
inline double choice_prob(const BehavioralParams& params, const StimulusPair& stim) {
  return mirrored_logistic(params.beta * stim.S + params.gamma * stim.A);
}

/// The neighbor draw averaged out: rho logistic(z + gamma) +
/// (1 - rho) logistic(z - gamma), rho the Red share among the candidates.
inline double averaged_choice_prob(const BehavioralParams& params, double S,
                                   double rho) {
  const double z = params.beta * S;
  return rho * mirrored_logistic(z + params.gamma) +
         (1.0 - rho) * mirrored_logistic(z - params.gamma);
}

/// The behavioral agent. Social stimulus and gamma are dropped where
/// others' actions are hidden; S counts own signals only where others'
/// signals are hidden. Every decision consumes one uniform for the choice
/// and then one neighbor draw, in every treatment.
class BehavioralPolicy {
 public:
  explicit BehavioralPolicy(BehavioralParams params, bool analytic = false)
      : params_(params), analytic_(analytic) {
    params_.validate();
  }

  /// Parameters by player index within the group; overrides the shared set.
  BehavioralPolicy(std::vector<BehavioralParams> per_player, bool analytic)
      : per_player_(std::move(per_player)), analytic_(analytic) {
    if (per_player_.empty()) throw ValidationError("no per-player parameters");
    for (const auto& p : per_player_) p.validate();
    params_ = per_player_.front();
  }

  const BehavioralParams& params_for(int player) const {
    if (per_player_.empty()) return params_;
    return per_player_.at(static_cast<std::size_t>(player));
  }

  ActionValue act(const InfoSet& info, Stream& stream) const {
    const double u = stream.uniform();
    BehavioralParams p = params_for(info.player);
    const Tally seen = info.visible_signals();
    const double S = signal_index(seen.diff(), seen.total(), p.psi);

    std::vector<Color> prev;
    if (info.others_actions && info.round >= 2) {
      prev = info.others_actions->others_in_round(info.round - 1);
    } else {
      p.gamma = 0.0;
    }
    const int A = social_stimulus(prev, stream);

    double pr;
    if (analytic_ && !prev.empty()) {
      int red = 0;
      for (Color c : prev) red += c == Color::Red;
      pr = averaged_choice_prob(p, S, static_cast<double>(red) / prev.size());
    } else {
      pr = choice_prob(p, {S, A});
    }
    return u < pr ? Color::Red : Color::Green;
  }

 private:
  BehavioralParams params_;
  std::vector<BehavioralParams> per_player_;
  bool analytic_ = false;
};

struct BehavioralOptions {
  bool keep_panel = false;
  bool analytic = false;  ///< average the neighbor draw instead of sampling
  int threads = 0;
  std::int64_t block_size = 256;
};

struct BehavioralRun : SimulationRun {
  BehavioralParams params;
};

/// Simulates `replications` independent games of behavioral agents. Game r
/// uses SeedSpec{seed, r, 0} and is labelled session r.
inline BehavioralRun simulate_behavioral(const BehavioralParams& params,
                                         const GameConfig& config,
                                         std::int64_t replications,
                                         std::uint64_t seed,
                                         const BehavioralOptions& options = {}) {
  const BehavioralPolicy policy(params, options.analytic);
  BehavioralRun run{simulate_replications(
                        config, policy, replications, seed,
                        {options.keep_panel, options.threads, options.block_size}),
                    params};
  return run;
}

}  // namespace urnlab
