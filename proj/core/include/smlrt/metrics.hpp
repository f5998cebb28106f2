#pragma once

#include <span>

namespace smlrt {

/// Absolute floor on |truth| in the MAPE denominator.
inline constexpr double kMapeEpsilon = 1e-8;

/// sqrt(mean((p - t)^2))
double compute_rmse(std::span<const double> pred, std::span<const double> truth);

/// 100 * mean(|p - t| / max(|t|, epsilon))
double compute_mape(std::span<const double> pred, std::span<const double> truth,
                    double epsilon = kMapeEpsilon);

}  // namespace smlrt
