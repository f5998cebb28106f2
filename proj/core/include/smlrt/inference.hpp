#pragma once

// Portable dense-MLP surrogate models.
//
// On disk a model is a directory holding
//   model.json  {"version":1,"dtype":"f32","input_features":F,"output_features":G,
//                "layers":[{"in":..,"out":..,"activation":"relu"|"tanh"|"identity",
//                           "weights_offset":bytes,"bias_offset":bytes}, ...]}
//   weights.bin little-endian f32; each layer's weights row-major [out x in]
//               at weights_offset and its bias [out] at bias_offset.

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "smlrt/tensor.hpp"

namespace smlrt {

enum class Activation { Identity, Relu, Tanh };

std::string_view to_string(Activation activation) noexcept;
Activation parse_activation(std::string_view name);

struct DenseLayer {
  std::int64_t in_dim = 0;
  std::int64_t out_dim = 0;
  std::vector<float> weights;  // [out_dim x in_dim], row-major
  std::vector<float> bias;     // [out_dim]
  Activation activation = Activation::Identity;
};

class Model {
 public:
  Model() = default;
  /// Validates the dimension chain and weight finiteness.
  explicit Model(std::vector<DenseLayer> layers);

  std::int64_t input_features() const noexcept { return input_features_; }
  std::int64_t output_features() const noexcept { return output_features_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::int64_t parameter_count() const noexcept;

  /// [B, F] -> [B, G]. f64 batches are computed in f32 and returned as f64.
  Tensor infer(const Tensor& batch) const;

  /// Forward pass of a single row; `out` must hold output_features() values.
  void forward_row(std::span<const float> in, std::span<float> out) const;

 private:
  std::int64_t input_features_ = 0;
  std::int64_t output_features_ = 0;
  std::vector<DenseLayer> layers_;
};

/// `path` is the model directory or its model.json file.
Model load_model(const std::filesystem::path& path);
void save_model(const Model& model, const std::filesystem::path& directory);

/// Exact 5-point Jacobi update as a single linear layer. Feature order is
/// [up, down, left, center, right]:
///   y = alpha * (up + down + left + right) + (1 - 4 alpha) * center
Model jacobi_model(float alpha);

/// Single identity layer with W = I, b = 0.
Model identity_model(std::int64_t features);

}  // namespace smlrt
