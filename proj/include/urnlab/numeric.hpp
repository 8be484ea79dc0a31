// Copyright 2026 The urnlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

namespace urnlab {

/// Standard logistic function.
inline double logistic(double x) noexcept {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(logistic(x)) without overflow or cancellation.
inline double log_logistic(double x) noexcept {
  if (x >= 0.0) {
    return -std::log1p(std::exp(-x));
  }
  return x - std::log1p(std::exp(x));
}

inline double logit(double p) noexcept { return std::log(p / (1.0 - p)); }

/// log(exp(a) + exp(b)).
inline double log_add_exp(double a, double b) noexcept {
  if (a == -INFINITY) return b;
  if (b == -INFINITY) return a;
  const double hi = a > b ? a : b;
  const double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace urnlab

namespace urnlab {

/// log P[Bin(n, p) = k] for 0 <= k <= n, 0 < p < 1.
inline double log_binomial_pmf(int k, int n, double p) noexcept {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
         k * std::log(p) + (n - k) * std::log1p(-p);
}

}  // namespace urnlab
