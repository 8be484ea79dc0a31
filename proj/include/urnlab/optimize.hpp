// Copyright 2026 The urnlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace urnlab {

struct OptimizeOptions {
  int max_iterations = 400;
  double gradient_tolerance = 1e-8;  ///< on the infinity norm
  int polish_steps = 8;
};

struct OptimizeResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

/// Central-difference Jacobian of an analytic gradient, symmetrized.
template <class Objective>
Eigen::MatrixXd numeric_hessian(Objective&& f, const Eigen::VectorXd& x,
                                double step = 1e-5) {
  const auto d = x.size();
  Eigen::MatrixXd h(d, d);
  Eigen::VectorXd gp(d);
  Eigen::VectorXd gm(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double hj = step * std::max(1.0, std::abs(x[j]));
    Eigen::VectorXd xp = x;
    Eigen::VectorXd xm = x;
    xp[j] += hj;
    xm[j] -= hj;
    f(xp, gp);
    f(xm, gm);
    h.col(j) = (gp - gm) / (2.0 * hj);
  }
  return 0.5 * (h + h.transpose());
}

/// Minimizes f by BFGS with a weak-Wolfe bisection line search, then
/// polishes with Newton steps on a finite-difference Hessian.
/// `f(x, grad)` returns the value and writes the gradient.
template <class Objective>
OptimizeResult minimize_bfgs(Objective&& f, Eigen::VectorXd x0,
                             const OptimizeOptions& options = {}) {
  const auto d = x0.size();
  OptimizeResult r;
  r.x = std::move(x0);
  r.gradient.resize(d);
  r.value = f(r.x, r.gradient);
  ++r.evaluations;
  if (!std::isfinite(r.value)) {
    r.message = "objective not finite at the starting point";
    return r;
  }

  auto small = [&](const Eigen::VectorXd& g) {
    return g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance;
  };

  Eigen::MatrixXd inv_h = Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd g_new(d);
  bool first = true;
  for (; r.iterations < options.max_iterations && !small(r.gradient);
       ++r.iterations) {
    Eigen::VectorXd dir = -inv_h * r.gradient;
    double slope = r.gradient.dot(dir);
    if (!(slope < 0.0)) {
      inv_h.setIdentity();
      dir = -r.gradient;
      slope = -r.gradient.squaredNorm();
    }

    constexpr double c1 = 1e-4;
    constexpr double c2 = 0.9;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double alpha = first ? std::min(1.0, 1.0 / r.gradient.lpNorm<Eigen::Infinity>())
                         : 1.0;
    Eigen::VectorXd x_new;
    double f_new = 0.0;
    bool accepted = false;
    for (int trial = 0; trial < 60; ++trial) {
      x_new = r.x + alpha * dir;
      f_new = f(x_new, g_new);
      ++r.evaluations;
      if (!std::isfinite(f_new) || f_new > r.value + c1 * alpha * slope) {
        hi = alpha;
      } else if (g_new.dot(dir) < c2 * slope) {
        lo = alpha;
      } else {
        accepted = true;
        break;
      }
      alpha = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * alpha;
    }
    if (!accepted) {
      if (std::isfinite(f_new) && f_new < r.value) {
        accepted = true;  // sufficient decrease without curvature
      } else {
        r.message = "line search failed";
        break;
      }
    }
    first = false;

    const Eigen::VectorXd s = x_new - r.x;
    const Eigen::VectorXd y = g_new - r.gradient;
    const double sy = s.dot(y);
    r.x = x_new;
    r.value = f_new;
    r.gradient = g_new;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
      inv_h = (id - rho * s * y.transpose()) * inv_h *
                  (id - rho * y * s.transpose()) +
              rho * s * s.transpose();
    }
  }

  // Newton polish for a tight optimum.
  for (int k = 0; k < options.polish_steps && !small(r.gradient); ++k) {
    const Eigen::MatrixXd h = numeric_hessian(f, r.x);
    r.evaluations += static_cast<int>(2 * d);
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() != Eigen::Success) break;
    const Eigen::VectorXd step = llt.solve(-r.gradient);
    double t = 1.0;
    bool improved = false;
    for (int trial = 0; trial < 20; ++trial, t *= 0.5) {
      const Eigen::VectorXd x_new = r.x + t * step;
      const double f_new = f(x_new, g_new);
      ++r.evaluations;
      if (std::isfinite(f_new) &&
          (f_new <= r.value ||
           g_new.lpNorm<Eigen::Infinity>() < r.gradient.lpNorm<Eigen::Infinity>())) {
        r.x = x_new;
        r.value = f_new;
        r.gradient = g_new;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }

  r.converged = small(r.gradient);
  if (r.converged) {
    r.message = "gradient tolerance reached";
  } else if (r.message.empty()) {
    r.message = "iteration limit reached";
  }
  return r;
}

}  // namespace urnlab
