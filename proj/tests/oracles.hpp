#pragma once

// Test-side oracles, independent of the library implementation paths they
// check.

#include <cmath>
#include <numbers>

namespace oracles {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// TV(N(0,1), N(mu,1)) = 2 Phi(mu/2) - 1, from the error function.
inline double tv_unit_gaussians(double mu) { return 2.0 * normal_cdf(mu / 2.0) - 1.0; }

/// Bhattacharyya coefficient of N(0,1) vs N(mu,1): exp(-mu^2/8).
inline double bhattacharyya_unit_gaussians(double mu) { return std::exp(-mu * mu / 8.0); }

// chi-square 0.999 quantile for 49 degrees of freedom (Wilson-Hilferty)
inline constexpr double chi2_crit_49_999 = 85.35;

}  // namespace oracles
