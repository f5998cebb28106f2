#include "smlrt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "smlrt/error.hpp"

namespace smlrt {

namespace {

void check_inputs(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, "prediction has " + std::to_string(pred.size()) +
                                               " values, truth has " +
                                               std::to_string(truth.size()));
  }
  if (pred.empty()) throw Error(ErrorCode::EmptyInput, "metrics need at least one value");
}

}  // namespace

double compute_rmse(std::span<const double> pred, std::span<const double> truth) {
  check_inputs(pred, truth);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(pred.size()));
}

double compute_mape(std::span<const double> pred, std::span<const double> truth, double epsilon) {
  check_inputs(pred, truth);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sum += std::abs(pred[i] - truth[i]) / std::max(std::abs(truth[i]), epsilon);
  }
  return 100.0 * sum / static_cast<double>(pred.size());
}

}  // namespace smlrt
