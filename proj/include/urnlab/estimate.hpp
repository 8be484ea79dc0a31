// Copyright 2026 The urnlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "urnlab/behavioral.hpp"
#include "urnlab/error.hpp"
#include "urnlab/game.hpp"
#include "urnlab/metrics.hpp"
#include "urnlab/numeric.hpp"
#include "urnlab/optimize.hpp"
#include "urnlab/parallel.hpp"

namespace urnlab {

//---------------------------------------------------------------------------//
// Datasets
//---------------------------------------------------------------------------//

inline constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

/// One choice: the signal imbalance and count behind S, the Red share of
/// the others' previous actions, and whether the choice was Red.
struct EstimationRow {
  int m = 0;
  int n_count = 1;
  double rho = kAbsent;  ///< NaN where others' actions are hidden
  int red = 0;
  int low_iq = -1;  ///< -1 absent, else 0 or 1
};

struct EstimationDataset {
  Treatment treatment = Treatment::All;
  std::vector<EstimationRow> rows;

  bool has_rho() const noexcept { return shows_others_actions(treatment); }

  bool has_covariate() const noexcept {
    return !rows.empty() &&
           std::all_of(rows.begin(), rows.end(),
                       [](const EstimationRow& r) { return r.low_iq >= 0; });
  }

  /// Checks every row; problems are reported with the 1-based row.
  void validate() const {
    const bool want_rho = has_rho();
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& r = rows[i];
      const auto row = static_cast<std::int64_t>(i + 1);
      if (r.n_count < 1) throw ValidationError("signal count must be >= 1", row);
      if (std::abs(r.m) > r.n_count || (r.m + r.n_count) % 2 != 0) {
        throw ValidationError("signal sum inconsistent with signal count", row);
      }
      if (r.red != 0 && r.red != 1) throw ValidationError("action must be 0 or 1", row);
      if (want_rho) {
        if (std::isnan(r.rho)) throw ValidationError("rho is missing", row);
        if (!(r.rho >= 0.0 && r.rho <= 1.0)) {
          throw ValidationError("rho must lie in [0, 1]", row);
        }
      }
      if (r.low_iq < -1 || r.low_iq > 1) {
        throw ValidationError("low_iq must be -1, 0 or 1", row);
      }
    }
  }
};

struct DatasetOptions {
  /// Low-IQ indicator by player id. When set, every player must appear.
  std::optional<std::map<std::int64_t, bool>> low_iq;
};

/// Builds the estimation rows of a single-treatment panel. Round 1 is left
/// out (no signals seen yet); rho counts the others' actions in the
/// previous round.
inline EstimationDataset build_dataset(const Panel& panel,
                                       const DatasetOptions& options = {}) {
  if (panel.empty()) throw ValidationError("empty panel");
  const Treatment treatment = panel.front().treatment;
  const bool public_signals = shows_others_signals(treatment);
  const bool public_actions = shows_others_actions(treatment);

  const auto games = group_games(panel);
  EstimationDataset ds;
  ds.treatment = treatment;
  for (const auto& g : games) {
    if (g.treatment != treatment) {
      throw ValidationError("panel mixes treatments; fit one treatment at a time");
    }
    if (public_actions && g.players < 2) {
      std::int64_t row = 0;
      for (std::size_t i = 0; i < panel.size(); ++i) {
        const auto& r = panel[i];
        if (r.session == g.session && r.game == g.game && r.group == g.group) {
          row = static_cast<std::int64_t>(i + 1);
          break;
        }
      }
      throw ValidationError("rho undefined: player observes no one", row);
    }
    std::vector<int> covariate(static_cast<std::size_t>(g.players), -1);
    if (options.low_iq) {
      for (int j = 0; j < g.players; ++j) {
        const auto id = g.player_ids[static_cast<std::size_t>(j)];
        const auto it = options.low_iq->find(id);
        if (it == options.low_iq->end()) {
          throw ValidationError("no low_iq value for player " + std::to_string(id));
        }
        covariate[static_cast<std::size_t>(j)] = it->second ? 1 : 0;
      }
    }
    std::vector<Tally> own(static_cast<std::size_t>(g.players));
    Tally group;
    for (int t = 1; t <= g.rounds; ++t) {
      if (t >= 2) {
        int red_prev = 0;
        for (int j = 0; j < g.players; ++j) red_prev += g.action(t - 1, j) == Color::Red;
        for (int j = 0; j < g.players; ++j) {
          const Tally seen = public_signals ? group : own[static_cast<std::size_t>(j)];
          EstimationRow row;
          row.m = seen.diff();
          row.n_count = seen.total();
          if (public_actions) {
            row.rho = static_cast<double>(red_prev - (g.action(t - 1, j) == Color::Red)) /
                      (g.players - 1);
          }
          row.red = g.action(t, j) == Color::Red;
          row.low_iq = covariate[static_cast<std::size_t>(j)];
          ds.rows.push_back(row);
        }
      }
      for (int j = 0; j < g.players; ++j) {
        own[static_cast<std::size_t>(j)].add(g.signal(t, j));
        group.add(g.signal(t, j));
      }
    }
  }
  return ds;
}

//---------------------------------------------------------------------------//
// Likelihood
//---------------------------------------------------------------------------//

/// rho logistic(beta S + gamma) + (1 - rho) logistic(beta S - gamma),
/// S = m / n^psi.
inline double mixture_choice_prob(const BehavioralParams& params, int m,
                                  int n_count, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ValidationError("rho must lie in [0, 1]");
  return averaged_choice_prob(params, signal_index(m, n_count, params.psi), rho);
}

namespace detail {

/// Rows sharing (m, n, rho, group), with their Red and Green counts.
struct LikCell {
  double m = 0.0;
  double log_n = 0.0;
  double log_rho = 0.0;
  double log_1m_rho = 0.0;
  double y1 = 0.0;
  double y0 = 0.0;
  int n = 1;
  int group = 0;
};

struct CompiledData {
  std::vector<LikCell> cells;
  bool use_gamma = false;
  std::int64_t rows = 0;
  int groups = 1;
};

inline CompiledData compile(const EstimationDataset& ds, bool by_covariate) {
  ds.validate();
  CompiledData out;
  out.use_gamma = ds.has_rho();
  out.rows = static_cast<std::int64_t>(ds.rows.size());
  out.groups = by_covariate ? 2 : 1;
  using Key = std::tuple<int, int, std::uint64_t, int>;
  std::map<Key, std::size_t> index;
  for (const auto& r : ds.rows) {
    const double rho = out.use_gamma ? r.rho : 0.5;
    const int group = by_covariate ? r.low_iq : 0;
    const Key key{r.m, r.n_count, std::bit_cast<std::uint64_t>(rho), group};
    auto [it, fresh] = index.try_emplace(key, out.cells.size());
    if (fresh) {
      LikCell c;
      c.m = r.m;
      c.n = r.n_count;
      c.log_n = std::log(static_cast<double>(r.n_count));
      c.log_rho = std::log(rho);
      c.log_1m_rho = std::log1p(-rho);
      c.group = group;
      out.cells.push_back(c);
    }
    auto& c = out.cells[it->second];
    (r.red ? c.y1 : c.y0) += 1.0;
  }
  return out;
}

struct NaturalGrad {
  double beta = 0.0;
  double gamma = 0.0;
  double psi = 0.0;
};

/// Log-likelihood over cells; `params[g]` applies to cells of group g and
/// the natural-scale gradient of each group is written to `grads[g]`.
inline double mixture_loglik(const CompiledData& data,
                             std::span<const BehavioralParams> params,
                             std::span<NaturalGrad> grads) {
  for (auto& g : grads) g = {};
  long double total = 0.0L;
  for (const auto& c : data.cells) {
    const auto& p = params[static_cast<std::size_t>(c.group)];
    auto& gr = grads[static_cast<std::size_t>(c.group)];
    const double S = c.m * std::exp(-p.psi * c.log_n);
    const double z = p.beta * S;
    double ll;
    double dz;
    double dg = 0.0;
    if (!data.use_gamma) {
      ll = c.y1 * log_logistic(z) + c.y0 * log_logistic(-z);
      dz = c.y1 * logistic(-z) - c.y0 * logistic(z);
    } else {
      const double a = z + p.gamma;
      const double b = z - p.gamma;
      const double la = logistic(a);
      const double lb = logistic(b);
      const double ra = c.log_rho + log_logistic(a);
      const double rb = c.log_1m_rho + log_logistic(b);
      const double lq = log_add_exp(ra, rb);
      const double sa = c.log_rho + log_logistic(-a);
      const double sb = c.log_1m_rho + log_logistic(-b);
      const double l1q = log_add_exp(sa, sb);
      const double w1 = std::exp(ra - lq);
      const double w2 = std::exp(rb - lq);
      const double v1 = std::exp(sa - l1q);
      const double v2 = std::exp(sb - l1q);
      ll = c.y1 * lq + c.y0 * l1q;
      dz = c.y1 * (w1 * (1.0 - la) + w2 * (1.0 - lb)) -
           c.y0 * (v1 * la + v2 * lb);
      dg = c.y1 * (w1 * (1.0 - la) - w2 * (1.0 - lb)) -
           c.y0 * (v1 * la - v2 * lb);
    }
    total += ll;
    gr.beta += dz * S;
    gr.gamma += dg;
    gr.psi -= dz * z * c.log_n;
  }
  return static_cast<double>(total);
}

}  // namespace detail

struct LikelihoodValue {
  double value = 0.0;
  double d_beta = 0.0;
  std::optional<double> d_gamma;  ///< absent where gamma is
  double d_psi = 0.0;
};

/// Log-likelihood and its exact gradient in (beta, gamma, psi).
inline LikelihoodValue log_likelihood(const BehavioralParams& params,
                                      const EstimationDataset& dataset) {
  if (!(std::isfinite(params.beta) && std::isfinite(params.gamma) &&
        std::isfinite(params.psi))) {
    throw ValidationError("parameters must be finite");
  }
  const auto data = detail::compile(dataset, false);
  BehavioralParams p = params;
  if (!data.use_gamma) p.gamma = 0.0;
  detail::NaturalGrad g;
  LikelihoodValue out;
  out.value = detail::mixture_loglik(data, {&p, 1}, {&g, 1});
  out.d_beta = g.beta;
  if (data.use_gamma) out.d_gamma = g.gamma;
  out.d_psi = g.psi;
  return out;
}

//---------------------------------------------------------------------------//
// Identification probe
//---------------------------------------------------------------------------//

struct ProbeResult {
  std::optional<double> gamma_slope;  ///< slope of P(red) in rho at m = 0
  std::optional<double> gamma;
  std::optional<double> psi;
  std::optional<double> beta;
  std::vector<std::string> missing;  ///< moments without support
  std::int64_t zero_rows = 0;
  int n_strata = 0;
};

/// Moment estimates from the identification argument: at m = 0 the Red
/// rate is linear in rho with slope 2 logistic(gamma) - 1; elsewhere the
/// mixture map is inverted cell by cell for z = beta m / n^psi, and within
/// each m, log|z| falls linearly in log n with slope -psi.
inline ProbeResult identification_probe(const EstimationDataset& dataset) {
  dataset.validate();
  ProbeResult out;
  const bool with_rho = dataset.has_rho();

  double gamma = 0.0;
  if (with_rho) {
    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& r : dataset.rows) {
      if (r.m != 0) continue;
      n += 1;
      sx += r.rho;
      sy += r.red;
      sxx += r.rho * r.rho;
      sxy += r.rho * r.red;
    }
    out.zero_rows = static_cast<std::int64_t>(n);
    const double var = n > 0 ? sxx / n - (sx / n) * (sx / n) : 0.0;
    if (n >= 2 && var > 1e-12) {
      const double slope = (sxy / n - sx / n * sy / n) / var;
      out.gamma_slope = slope;
      gamma = slope <= 0.0 ? 0.0 : logit(std::min((1.0 + slope) / 2.0, 1.0 - 1e-9));
      out.gamma = gamma;
    } else {
      out.missing.emplace_back("gamma: no m = 0 rows with varying rho");
    }
  }

  // z per (m, n) cell.
  struct Acc {
    double rows = 0;
    double red = 0;
    double rho = 0;
  };
  std::map<std::pair<int, int>, Acc> cells;
  std::map<int, int> strata;
  for (const auto& r : dataset.rows) {
    ++strata[r.n_count];
    if (r.m == 0) continue;
    auto& a = cells[{r.m, r.n_count}];
    a.rows += 1;
    a.red += r.red;
    a.rho += with_rho ? r.rho : 0.5;
  }
  out.n_strata = static_cast<int>(strata.size());

  struct Point {
    double x;
    double y;
    double w;
  };
  std::map<int, std::vector<Point>> by_m;
  for (const auto& [key, a] : cells) {
    const auto [m, n] = key;
    const double ybar = a.red / a.rows;
    if (a.rows < 5 || ybar <= 0.0 || ybar >= 1.0) continue;
    const double rbar = a.rho / a.rows;
    auto F = [&](double z) {
      return rbar * logistic(z + gamma) + (1.0 - rbar) * logistic(z - gamma);
    };
    double lo = -60.0;
    double hi = 60.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (F(mid) < ybar ? lo : hi) = mid;
    }
    const double z = 0.5 * (lo + hi);
    if (z == 0.0 || (z > 0) != (m > 0)) continue;
    by_m[m].push_back({std::log(static_cast<double>(n)),
                       std::log(std::abs(z)) - std::log(std::abs(m)), a.rows});
  }

  double sxx = 0, sxy = 0;
  for (const auto& [m, pts] : by_m) {
    if (pts.size() < 2) continue;
    double w = 0, mx = 0, my = 0;
    for (const auto& p : pts) {
      w += p.w;
      mx += p.w * p.x;
      my += p.w * p.y;
    }
    mx /= w;
    my /= w;
    for (const auto& p : pts) {
      sxx += p.w * (p.x - mx) * (p.x - mx);
      sxy += p.w * (p.x - mx) * (p.y - my);
    }
  }
  if (sxx > 1e-12) {
    const double psi = std::max(-sxy / sxx, 0.0);
    out.psi = psi;
    double w = 0, acc = 0;
    for (const auto& [m, pts] : by_m) {
      for (const auto& p : pts) {
        w += p.w;
        acc += p.w * (p.y + psi * p.x);
      }
    }
    out.beta = std::exp(acc / w);
  } else {
    out.missing.emplace_back("psi: no signal sum seen at two or more signal counts");
    out.missing.emplace_back("beta: needs psi");
  }
  return out;
}

//---------------------------------------------------------------------------//
// Maximum likelihood
//---------------------------------------------------------------------------//

struct EffectSize {
  double value = kAbsent;
  double std_error = kAbsent;
};

/// Choice-probability effects: of a one-SD rise in S (averaged over
/// A = -1 and A = +1), and of A moving from -1 to +1 at S = 0.
struct EffectSizes {
  double signal_sd = kAbsent;
  EffectSize signal;
  std::optional<EffectSize> action;
};

inline double signal_effect(double beta, double gamma, double sd) {
  return 0.5 * ((logistic(beta * sd + gamma) - logistic(gamma)) +
                (logistic(beta * sd - gamma) - logistic(-gamma)));
}

inline double action_effect(double gamma) { return 2.0 * logistic(gamma) - 1.0; }

struct FitOptions {
  int starts = 5;  ///< probe start plus jittered copies
  double jitter = 0.5;  ///< SD of the log-scale jitter
  std::uint64_t seed = 0x6a177e5ull;
  int threads = 1;
  OptimizeOptions optimize;
  std::optional<BehavioralParams> start;  ///< replaces the probe start
};

struct FitResult {
  Treatment treatment = Treatment::All;
  bool has_gamma = true;
  BehavioralParams estimates;
  bool se_available = false;
  BehavioralParams std_errors{kAbsent, kAbsent, kAbsent};
  Eigen::MatrixXd covariance;  ///< natural scale, (beta, [gamma,] psi)
  double log_likelihood = -std::numeric_limits<double>::infinity();
  std::int64_t rows = 0;
  bool converged = false;
  int iterations = 0;
  int evaluations = 0;
  double gradient_norm = kAbsent;
  std::string message;
  std::vector<double> start_log_likelihoods;
  int best_start = 0;
  EffectSizes effects;

  /// Wald interval for "beta", "gamma" or "psi".
  std::pair<double, double> wald_ci(std::string_view name, double z = 1.959963984540054) const {
    double est;
    double se;
    if (name == "beta") {
      est = estimates.beta;
      se = std_errors.beta;
    } else if (name == "gamma") {
      est = estimates.gamma;
      se = std_errors.gamma;
    } else if (name == "psi") {
      est = estimates.psi;
      se = std_errors.psi;
    } else {
      throw ValidationError("unknown parameter " + std::string(name));
    }
    return {est - z * se, est + z * se};
  }
};

namespace detail {

inline Eigen::VectorXd jittered(const Eigen::VectorXd& base, double sd,
                                std::uint64_t seed, int start) {
  Stream s = Stream::derive({seed, static_cast<std::uint64_t>(start), 0},
                            kNaturePlayer, 0, Lane::Policy);
  Eigen::VectorXd x = base;
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += sd * s.normal();
  return x;
}

inline double weighted_signal_sd(const CompiledData& data, double psi, int group = -1) {
  double w = 0, s = 0, ss = 0;
  for (const auto& c : data.cells) {
    if (group >= 0 && c.group != group) continue;
    const double S = c.m * std::exp(-psi * c.log_n);
    const double k = c.y0 + c.y1;
    w += k;
    s += k * S;
    ss += k * S * S;
  }
  if (w <= 0) return kAbsent;
  const double mean = s / w;
  return std::sqrt(std::max(ss / w - mean * mean, 0.0));
}

struct MultiStart {
  OptimizeResult best;
  std::vector<double> start_values;
  int best_start = 0;
};

template <class Objective>
MultiStart multi_start(Objective f, const std::vector<Eigen::VectorXd>& starts,
                       const OptimizeOptions& opt, int threads) {
  auto results = run_blocks<OptimizeResult>(
      static_cast<std::int64_t>(starts.size()), 1, threads,
      [&](std::int64_t b, std::int64_t) {
        return minimize_bfgs(f, starts[static_cast<std::size_t>(b)], opt);
      });
  MultiStart out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    out.start_values.push_back(-results[i].value);
    if (i == 0 || results[i].value < out.best.value ||
        (std::isfinite(results[i].value) && !std::isfinite(out.best.value))) {
      out.best = results[i];
      out.best_start = static_cast<int>(i);
    }
  }
  return out;
}

/// Effect-size standard errors by the delta method with a central-difference
/// gradient in the optimizer's coordinates.
template <class Fn>
double delta_se(Fn&& fn, const Eigen::VectorXd& theta, const Eigen::MatrixXd& cov) {
  Eigen::VectorXd grad(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(theta[i]));
    Eigen::VectorXd tp = theta;
    Eigen::VectorXd tm = theta;
    tp[i] += h;
    tm[i] -= h;
    grad[i] = (fn(tp) - fn(tm)) / (2 * h);
  }
  return std::sqrt(std::max(grad.dot(cov * grad), 0.0));
}

inline constexpr double kThetaBound = 30.0;

}  // namespace detail

/// Maximum likelihood over log(beta), log(gamma), log(psi). Standard errors
/// come from the inverse observed information in those coordinates, mapped
/// to the natural scale by the delta method.
inline FitResult fit_mle(const EstimationDataset& dataset,
                         const FitOptions& options = {}) {
  const auto data = detail::compile(dataset, false);
  if (data.rows == 0) throw ValidationError("dataset is empty");
  const bool use_gamma = data.use_gamma;
  const int dim = use_gamma ? 3 : 2;

  auto unpack = [&](const Eigen::VectorXd& th) {
    BehavioralParams p;
    p.beta = std::exp(th[0]);
    p.gamma = use_gamma ? std::exp(th[1]) : 0.0;
    p.psi = std::exp(th[dim - 1]);
    return p;
  };
  auto objective = [&](const Eigen::VectorXd& th, Eigen::VectorXd& grad) {
    grad.setZero(dim);
    if (th.cwiseAbs().maxCoeff() > detail::kThetaBound) {
      return std::numeric_limits<double>::infinity();
    }
    const BehavioralParams p = unpack(th);
    detail::NaturalGrad g;
    const double ll = detail::mixture_loglik(data, {&p, 1}, {&g, 1});
    grad[0] = -g.beta * p.beta;
    if (use_gamma) grad[1] = -g.gamma * p.gamma;
    grad[dim - 1] = -g.psi * p.psi;
    return -ll;
  };

  BehavioralParams start;
  if (options.start) {
    start = *options.start;
  } else {
    const auto probe = identification_probe(dataset);
    start.beta = probe.beta.value_or(1.0);
    start.gamma = probe.gamma.value_or(0.5);
    start.psi = probe.psi.value_or(0.5);
  }
  auto clamp = [](double v) { return std::clamp(v, 0.05, 5.0); };
  Eigen::VectorXd theta0(dim);
  theta0[0] = std::log(clamp(start.beta));
  if (use_gamma) theta0[1] = std::log(clamp(start.gamma));
  theta0[dim - 1] = std::log(clamp(start.psi));

  std::vector<Eigen::VectorXd> starts{theta0};
  for (int k = 1; k < std::max(options.starts, 1); ++k) {
    starts.push_back(detail::jittered(theta0, options.jitter, options.seed, k));
  }
  const auto ms = detail::multi_start(objective, starts, options.optimize, options.threads);
  const auto& best = ms.best;

  FitResult fit;
  fit.treatment = dataset.treatment;
  fit.has_gamma = use_gamma;
  fit.rows = data.rows;
  fit.estimates = unpack(best.x);
  fit.log_likelihood = -best.value;
  fit.converged = best.converged;
  fit.iterations = best.iterations;
  fit.evaluations = best.evaluations;
  fit.gradient_norm = best.gradient.size() ? best.gradient.lpNorm<Eigen::Infinity>() : kAbsent;
  fit.message = best.message;
  fit.start_log_likelihoods = ms.start_values;
  fit.best_start = ms.best_start;
  if (!std::isfinite(best.value)) {
    throw NumericalError("log-likelihood not finite at any start");
  }

  const auto beta_of = [&](const Eigen::VectorXd& th) { return std::exp(th[0]); };
  const auto gamma_of = [&](const Eigen::VectorXd& th) {
    return use_gamma ? std::exp(th[1]) : 0.0;
  };
  const auto psi_of = [&](const Eigen::VectorXd& th) { return std::exp(th[dim - 1]); };
  auto signal_fn = [&](const Eigen::VectorXd& th) {
    return signal_effect(beta_of(th), gamma_of(th),
                         detail::weighted_signal_sd(data, psi_of(th)));
  };
  fit.effects.signal_sd = detail::weighted_signal_sd(data, fit.estimates.psi);
  fit.effects.signal.value = signal_fn(best.x);
  if (use_gamma) fit.effects.action = EffectSize{action_effect(fit.estimates.gamma), kAbsent};

  const Eigen::MatrixXd h = numeric_hessian(objective, best.x);
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() == Eigen::Success) {
    const Eigen::MatrixXd cov_log = llt.solve(Eigen::MatrixXd::Identity(dim, dim));
    if (cov_log.allFinite()) {
      Eigen::VectorXd jac(dim);
      for (int i = 0; i < dim; ++i) jac[i] = std::exp(best.x[i]);
      fit.covariance = jac.asDiagonal() * cov_log * jac.asDiagonal();
      fit.se_available = true;
      fit.std_errors.beta = std::sqrt(fit.covariance(0, 0));
      fit.std_errors.gamma = use_gamma ? std::sqrt(fit.covariance(1, 1)) : kAbsent;
      fit.std_errors.psi = std::sqrt(fit.covariance(dim - 1, dim - 1));
      fit.effects.signal.std_error = detail::delta_se(signal_fn, best.x, cov_log);
      if (use_gamma) {
        fit.effects.action->std_error = detail::delta_se(
            [&](const Eigen::VectorXd& th) { return action_effect(gamma_of(th)); },
            best.x, cov_log);
      }
    }
  }
  if (!fit.se_available) fit.message += "; information matrix singular, no standard errors";
  return fit;
}

//---------------------------------------------------------------------------//
// Heterogeneous model
//---------------------------------------------------------------------------//

/// beta_i = exp(beta_common + beta_low_iq * low_i), likewise gamma_i; psi
/// shared.
struct HeteroParams {
  double beta_common = 0.0;
  double beta_low_iq = 0.0;
  double gamma_common = 0.0;
  double gamma_low_iq = 0.0;
  double psi = 0.5;

  double beta_for(bool low) const { return std::exp(beta_common + (low ? beta_low_iq : 0.0)); }
  double gamma_for(bool low) const { return std::exp(gamma_common + (low ? gamma_low_iq : 0.0)); }

  /// Parameters with the covariate labels exchanged.
  HeteroParams relabeled() const {
    return {beta_common + beta_low_iq, -beta_low_iq, gamma_common + gamma_low_iq,
            -gamma_low_iq, psi};
  }
};

struct GroupEstimate {
  double value = kAbsent;
  double std_error = kAbsent;

  std::pair<double, double> ci(double z = 1.959963984540054) const {
    return {value - z * std_error, value + z * std_error};
  }
};

struct HeteroFit {
  HeteroParams estimates;
  bool has_gamma = true;
  bool offsets_identified = true;
  bool se_available = false;
  /// SEs of (beta_common, beta_low_iq, gamma_common, gamma_low_iq, psi);
  /// NaN where a parameter is absent or unidentified.
  std::array<double, 5> std_errors{kAbsent, kAbsent, kAbsent, kAbsent, kAbsent};
  GroupEstimate beta_low, beta_high, gamma_low, gamma_high;
  GroupEstimate beta_difference;   ///< low minus high
  GroupEstimate gamma_difference;  ///< low minus high
  EffectSize signal_effect_low, signal_effect_high;
  EffectSize action_effect_low, action_effect_high;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  std::int64_t rows = 0;
  bool converged = false;
  int iterations = 0;
  std::string message;
};

/// Joint MLE of the covariate-split model, started from the pooled fit.
/// A constant covariate leaves the offsets unidentified: they are reported
/// as zero and flagged.
inline HeteroFit fit_heterogeneous(const EstimationDataset& dataset,
                                   const FitOptions& options = {}) {
  if (!dataset.has_covariate()) {
    throw ValidationError("every row needs a low_iq value");
  }
  const auto data = detail::compile(dataset, true);
  const bool use_gamma = data.use_gamma;
  bool both = false;
  {
    bool seen[2] = {false, false};
    for (const auto& c : data.cells) seen[c.group] = true;
    both = seen[0] && seen[1];
  }

  const FitResult pooled = fit_mle(dataset, options);

  // theta = (bc, [bl], [gc, [gl]], s)
  std::vector<int> slot(5, -1);
  int dim = 0;
  slot[0] = dim++;
  if (both) slot[1] = dim++;
  if (use_gamma) {
    slot[2] = dim++;
    if (both) slot[3] = dim++;
  }
  slot[4] = dim++;

  auto unpack = [&](const Eigen::VectorXd& th) {
    HeteroParams h;
    h.beta_common = th[slot[0]];
    h.beta_low_iq = slot[1] >= 0 ? th[slot[1]] : 0.0;
    h.gamma_common = slot[2] >= 0 ? th[slot[2]] : -std::numeric_limits<double>::infinity();
    h.gamma_low_iq = slot[3] >= 0 ? th[slot[3]] : 0.0;
    h.psi = std::exp(th[slot[4]]);
    return h;
  };
  auto group_params = [&](const HeteroParams& h) {
    std::array<BehavioralParams, 2> p;
    for (int g = 0; g < 2; ++g) {
      p[g].beta = h.beta_for(g == 1);
      p[g].gamma = use_gamma ? h.gamma_for(g == 1) : 0.0;
      p[g].psi = h.psi;
    }
    return p;
  };
  auto objective = [&](const Eigen::VectorXd& th, Eigen::VectorXd& grad) {
    grad.setZero(dim);
    if (th.cwiseAbs().maxCoeff() > detail::kThetaBound) {
      return std::numeric_limits<double>::infinity();
    }
    const HeteroParams h = unpack(th);
    const auto p = group_params(h);
    std::array<detail::NaturalGrad, 2> g;
    const double ll = detail::mixture_loglik(data, p, g);
    grad[slot[0]] = -(g[0].beta * p[0].beta + g[1].beta * p[1].beta);
    if (slot[1] >= 0) grad[slot[1]] = -g[1].beta * p[1].beta;
    if (slot[2] >= 0) grad[slot[2]] = -(g[0].gamma * p[0].gamma + g[1].gamma * p[1].gamma);
    if (slot[3] >= 0) grad[slot[3]] = -g[1].gamma * p[1].gamma;
    grad[slot[4]] = -(g[0].psi + g[1].psi) * h.psi;
    return -ll;
  };

  Eigen::VectorXd theta0 = Eigen::VectorXd::Zero(dim);
  theta0[slot[0]] = std::log(std::max(pooled.estimates.beta, 1e-3));
  if (slot[2] >= 0) theta0[slot[2]] = std::log(std::max(pooled.estimates.gamma, 1e-3));
  theta0[slot[4]] = std::log(std::max(pooled.estimates.psi, 1e-3));
  std::vector<Eigen::VectorXd> starts{theta0};
  for (int k = 1; k < std::max(options.starts, 1); ++k) {
    starts.push_back(detail::jittered(theta0, options.jitter, options.seed ^ 0x4e7ull, k));
  }
  const auto ms = detail::multi_start(objective, starts, options.optimize, options.threads);
  const auto& best = ms.best;
  if (!std::isfinite(best.value)) throw NumericalError("log-likelihood not finite at any start");

  HeteroFit fit;
  fit.has_gamma = use_gamma;
  fit.offsets_identified = both;
  fit.estimates = unpack(best.x);
  if (!use_gamma) fit.estimates.gamma_common = kAbsent;
  fit.log_likelihood = -best.value;
  fit.rows = data.rows;
  fit.converged = best.converged;
  fit.iterations = best.iterations;
  fit.message = best.message;
  if (!both) fit.message += "; covariate constant, offsets unidentified";

  const auto beta_g = [&](const Eigen::VectorXd& th, int g) {
    return std::exp(th[slot[0]] + (g == 1 && slot[1] >= 0 ? th[slot[1]] : 0.0));
  };
  const auto gamma_g = [&](const Eigen::VectorXd& th, int g) {
    if (slot[2] < 0) return 0.0;
    return std::exp(th[slot[2]] + (g == 1 && slot[3] >= 0 ? th[slot[3]] : 0.0));
  };
  const auto psi_of = [&](const Eigen::VectorXd& th) { return std::exp(th[slot[4]]); };
  auto sig_eff = [&](const Eigen::VectorXd& th, int g) {
    return signal_effect(beta_g(th, g), gamma_g(th, g),
                         detail::weighted_signal_sd(data, psi_of(th), g));
  };

  fit.beta_low.value = beta_g(best.x, 1);
  fit.beta_high.value = beta_g(best.x, 0);
  fit.beta_difference.value = fit.beta_low.value - fit.beta_high.value;
  fit.signal_effect_low.value = sig_eff(best.x, 1);
  fit.signal_effect_high.value = sig_eff(best.x, 0);
  if (use_gamma) {
    fit.gamma_low.value = gamma_g(best.x, 1);
    fit.gamma_high.value = gamma_g(best.x, 0);
    fit.gamma_difference.value = fit.gamma_low.value - fit.gamma_high.value;
    fit.action_effect_low.value = action_effect(fit.gamma_low.value);
    fit.action_effect_high.value = action_effect(fit.gamma_high.value);
  }

  const Eigen::MatrixXd h = numeric_hessian(objective, best.x);
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() == Eigen::Success) {
    const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(dim, dim));
    if (cov.allFinite()) {
      fit.se_available = true;
      for (int k = 0; k < 4; ++k) {
        if (slot[k] >= 0) fit.std_errors[k] = std::sqrt(cov(slot[k], slot[k]));
      }
      fit.std_errors[4] = fit.estimates.psi * std::sqrt(cov(slot[4], slot[4]));
      auto se = [&](auto fn) { return detail::delta_se(fn, best.x, cov); };
      fit.beta_low.std_error = se([&](const Eigen::VectorXd& t) { return beta_g(t, 1); });
      fit.beta_high.std_error = se([&](const Eigen::VectorXd& t) { return beta_g(t, 0); });
      fit.beta_difference.std_error =
          se([&](const Eigen::VectorXd& t) { return beta_g(t, 1) - beta_g(t, 0); });
      fit.signal_effect_low.std_error = se([&](const Eigen::VectorXd& t) { return sig_eff(t, 1); });
      fit.signal_effect_high.std_error = se([&](const Eigen::VectorXd& t) { return sig_eff(t, 0); });
      if (use_gamma) {
        fit.gamma_low.std_error = se([&](const Eigen::VectorXd& t) { return gamma_g(t, 1); });
        fit.gamma_high.std_error = se([&](const Eigen::VectorXd& t) { return gamma_g(t, 0); });
        fit.gamma_difference.std_error =
            se([&](const Eigen::VectorXd& t) { return gamma_g(t, 1) - gamma_g(t, 0); });
        fit.action_effect_low.std_error =
            se([&](const Eigen::VectorXd& t) { return action_effect(gamma_g(t, 1)); });
        fit.action_effect_high.std_error =
            se([&](const Eigen::VectorXd& t) { return action_effect(gamma_g(t, 0)); });
      }
    }
  }
  return fit;
}

//---------------------------------------------------------------------------//
// Synthetic experiments
//---------------------------------------------------------------------------//

/// Layout of a synthetic lab experiment: `players` split into groups of
/// `group_size` (the last group takes the remainder), each group playing
/// `games` games of `rounds` rounds.
struct ExperimentDesign {
  Treatment treatment = Treatment::All;
  int players = 152;
  int games = 10;
  int rounds = 20;
  int group_size = 8;
  double precision = 0.6;
  double prior_red = 0.5;

  std::int64_t estimation_rows() const {
    return static_cast<std::int64_t>(players) * games * (rounds - 1);
  }
};

/// Simulates the design with per-player parameters (indexed by player id).
/// Group k, game g is seeded SeedSpec{seed, k, g}.
inline Panel simulate_experiment(const ExperimentDesign& design,
                                 std::span<const BehavioralParams> per_player,
                                 std::uint64_t seed, bool analytic = false) {
  if (design.players < 1 || design.games < 1 || design.group_size < 1) {
    throw ValidationError("experiment needs players, games and a group size");
  }
  if (static_cast<int>(per_player.size()) != design.players) {
    throw ValidationError("need one parameter set per player");
  }
  Panel panel;
  panel.reserve(static_cast<std::size_t>(design.players) * design.games * design.rounds);
  const int groups = (design.players + design.group_size - 1) / design.group_size;
  for (int k = 0; k < groups; ++k) {
    const int first = k * design.group_size;
    const int size = std::min(design.group_size, design.players - first);
    GameConfig config;
    config.rounds = design.rounds;
    config.group_size = size;
    config.precision = design.precision;
    config.prior_red = design.prior_red;
    config.treatment = design.treatment;
    const BehavioralPolicy policy(
        std::vector<BehavioralParams>(per_player.begin() + first,
                                      per_player.begin() + first + size),
        analytic);
    for (int g = 0; g < design.games; ++g) {
      const SeedSpec spec{seed, static_cast<std::uint64_t>(k),
                          static_cast<std::uint64_t>(g)};
      simulate_game_into(config, policy, spec, GameLabels{0, k, first}, panel);
    }
  }
  return panel;
}

inline Panel simulate_experiment(const ExperimentDesign& design,
                                 const BehavioralParams& params, std::uint64_t seed,
                                 bool analytic = false) {
  const std::vector<BehavioralParams> all(static_cast<std::size_t>(design.players), params);
  return simulate_experiment(design, all, seed, analytic);
}

/// Marks round(share * players) players as low-IQ, chosen by a seeded
/// shuffle.
inline std::vector<bool> assign_low_iq(int players, double share, std::uint64_t seed) {
  if (!(share >= 0.0 && share <= 1.0)) throw ValidationError("share must lie in [0, 1]");
  std::vector<int> order(static_cast<std::size_t>(players));
  for (int i = 0; i < players; ++i) order[static_cast<std::size_t>(i)] = i;
  Stream s = Stream::derive({seed, 0, 0}, kNaturePlayer, 1, Lane::Policy);
  for (int i = players - 1; i > 0; --i) {
    const auto j = static_cast<int>(s.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  const int low = static_cast<int>(std::lround(share * players));
  std::vector<bool> out(static_cast<std::size_t>(players), false);
  for (int i = 0; i < low; ++i) out[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
  return out;
}

inline std::map<std::int64_t, bool> covariate_map(const std::vector<bool>& low_iq) {
  std::map<std::int64_t, bool> m;
  for (std::size_t i = 0; i < low_iq.size(); ++i) m[static_cast<std::int64_t>(i)] = low_iq[i];
  return m;
}

}  // namespace urnlab
