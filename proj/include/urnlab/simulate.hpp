// Copyright 2026 The urnlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "urnlab/error.hpp"
#include "urnlab/game.hpp"
#include "urnlab/metrics.hpp"
#include "urnlab/parallel.hpp"

namespace urnlab {

struct SimulationOptions {
  bool keep_panel = false;
  int threads = 0;
  std::int64_t block_size = 256;
};

struct SimulationRun {
  GameConfig config;
  std::int64_t replications = 0;
  Panel panel;  ///< empty unless keep_panel
  RoundSeries correct;
  RoundSeries consensus;         ///< empty for single-player groups
  RoundSeries majority_correct;  ///< empty for single-player groups
};

/// Plays `replications` independent games with one policy. Game r uses
/// SeedSpec{seed, r, 0} and is labelled session r. Results do not depend
/// on the thread count.
template <AgentPolicy P>
SimulationRun simulate_replications(const GameConfig& config, const P& policy,
                                    std::int64_t replications, std::uint64_t seed,
                                    const SimulationOptions& options = {}) {
  config.validate();
  if (replications < 1) throw ValidationError("replications must be >= 1");

  struct Block {
    OutcomeAccumulator acc;
    Panel panel;
  };
  auto blocks = run_blocks<Block>(
      replications, options.block_size, options.threads,
      [&](std::int64_t begin, std::int64_t end) {
        Block b;
        Panel game;
        for (std::int64_t r = begin; r < end; ++r) {
          game.clear();
          const SeedSpec spec{seed, static_cast<std::uint64_t>(r), 0};
          simulate_game_into(config, policy, spec, default_labels(spec), game);
          b.acc.add_game(grid_from_engine_output(game, config.rounds, config.group_size));
          if (options.keep_panel) b.panel.insert(b.panel.end(), game.begin(), game.end());
        }
        return b;
      });

  SimulationRun run;
  run.config = config;
  run.replications = replications;
  OutcomeAccumulator total;
  for (auto& b : blocks) {
    total.merge(b.acc);
    if (options.keep_panel) run.panel.insert(run.panel.end(), b.panel.begin(), b.panel.end());
  }
  run.correct = total.correct.finish(std::string(kCorrectMetric));
  run.consensus = total.consensus.finish(std::string(kConsensusMetric));
  run.majority_correct = total.majority_correct.finish(std::string(kMajorityCorrectMetric));
  return run;
}

}  // namespace urnlab
