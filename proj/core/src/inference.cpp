#include "smlrt/inference.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "smlrt/error.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace smlrt {

static_assert(std::endian::native == std::endian::little,
              "weights.bin is read in place and assumes a little-endian host");

std::string_view to_string(Activation activation) noexcept {
  switch (activation) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::Identity;
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  throw Error(ErrorCode::ManifestError, "unknown activation '" + std::string(name) + "'");
}

Model::Model(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw Error(ErrorCode::DimChainError, "model has no layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.in_dim <= 0 || layer.out_dim <= 0) {
      throw Error(ErrorCode::DimChainError, "layer " + std::to_string(l) + " has empty dimensions");
    }
    if (l > 0 && layers_[l - 1].out_dim != layer.in_dim) {
      throw Error(ErrorCode::DimChainError,
                  "layer " + std::to_string(l - 1) + " outputs " +
                      std::to_string(layers_[l - 1].out_dim) + " features but layer " +
                      std::to_string(l) + " expects " + std::to_string(layer.in_dim));
    }
    if (static_cast<std::int64_t>(layer.weights.size()) != layer.in_dim * layer.out_dim ||
        static_cast<std::int64_t>(layer.bias.size()) != layer.out_dim) {
      throw Error(ErrorCode::DimChainError,
                  "layer " + std::to_string(l) + " parameter sizes do not match its dimensions");
    }
    auto finite = [](float v) { return std::isfinite(v); };
    if (!std::all_of(layer.weights.begin(), layer.weights.end(), finite) ||
        !std::all_of(layer.bias.begin(), layer.bias.end(), finite)) {
      throw Error(ErrorCode::NonFiniteWeights, "layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
  input_features_ = layers_.front().in_dim;
  output_features_ = layers_.back().out_dim;
}

std::int64_t Model::parameter_count() const noexcept {
  std::int64_t n = 0;
  for (const auto& l : layers_) n += l.in_dim * l.out_dim + l.out_dim;
  return n;
}

void Model::forward_row(std::span<const float> in, std::span<float> out) const {
  std::vector<float> a(in.begin(), in.end());
  std::vector<float> b;
  for (const auto& layer : layers_) {
    b.assign(static_cast<std::size_t>(layer.out_dim), 0.0f);
    for (std::int64_t o = 0; o < layer.out_dim; ++o) {
      const float* w = layer.weights.data() + o * layer.in_dim;
      float acc = layer.bias[static_cast<std::size_t>(o)];
      for (std::int64_t i = 0; i < layer.in_dim; ++i) acc += w[i] * a[static_cast<std::size_t>(i)];
      switch (layer.activation) {
        case Activation::Identity: break;
        case Activation::Relu: acc = acc > 0.0f ? acc : 0.0f; break;
        case Activation::Tanh: acc = std::tanh(acc); break;
      }
      b[static_cast<std::size_t>(o)] = acc;
    }
    std::swap(a, b);
  }
  std::copy(a.begin(), a.end(), out.begin());
}

Tensor Model::infer(const Tensor& batch) const {
  if (batch.rank() != 2 || batch.shape()[1] != input_features_) {
    throw Error(ErrorCode::ShapeMismatch, "model expects [B, " + std::to_string(input_features_) +
                                              "] but got " + shape_to_string(batch.shape()));
  }
  const Tensor x = batch.cast(DType::f32);
  const std::int64_t rows = batch.shape()[0];
  Tensor y(DType::f32, {rows, output_features_});
  auto xin = x.values<float>();
  auto yout = y.values<float>();
  const auto f = static_cast<std::size_t>(input_features_);
  const auto g = static_cast<std::size_t>(output_features_);
  for (std::int64_t r = 0; r < rows; ++r) {
    const auto row = static_cast<std::size_t>(r);
    forward_row(xin.subspan(row * f, f), yout.subspan(row * g, g));
  }
  const auto bad = std::find_if(yout.begin(), yout.end(), [](float v) { return !std::isfinite(v); });
  if (bad != yout.end()) {
    throw Error(ErrorCode::NonFiniteOutput,
                "inference produced a non-finite value at flat index " +
                    std::to_string(bad - yout.begin()));
  }
  return y.cast(batch.dtype());
}

Model load_model(const fs::path& path) {
  const fs::path dir = fs::is_directory(path) ? path : path.parent_path();
  const fs::path manifest = fs::is_directory(path) ? path / "model.json" : path;
  std::ifstream in(manifest);
  if (!in) throw Error(ErrorCode::IoError, "cannot open model manifest " + manifest.string());
  std::ifstream wf(dir / "weights.bin", std::ios::binary);
  if (!wf) throw Error(ErrorCode::IoError, "cannot open " + (dir / "weights.bin").string());
  std::vector<char> blob((std::istreambuf_iterator<char>(wf)), std::istreambuf_iterator<char>());

  std::vector<DenseLayer> layers;
  std::int64_t declared_in = 0;
  std::int64_t declared_out = 0;
  try {
    const auto j = ordered_json::parse(in);
    if (j.at("version").get<int>() != 1) {
      throw Error(ErrorCode::ManifestError, "unsupported model version");
    }
    if (j.at("dtype").get<std::string>() != "f32") {
      throw Error(ErrorCode::ManifestError, "model weights must be f32");
    }
    declared_in = j.at("input_features").get<std::int64_t>();
    declared_out = j.at("output_features").get<std::int64_t>();
    for (const auto& l : j.at("layers")) {
      DenseLayer layer;
      layer.in_dim = l.at("in").get<std::int64_t>();
      layer.out_dim = l.at("out").get<std::int64_t>();
      layer.activation = parse_activation(l.at("activation").get<std::string>());
      const auto w_off = l.at("weights_offset").get<std::int64_t>();
      const auto b_off = l.at("bias_offset").get<std::int64_t>();
      if (layer.in_dim <= 0 || layer.out_dim <= 0) {
        throw Error(ErrorCode::DimChainError, "layer with non-positive dimensions");
      }
      auto slice = [&](std::int64_t offset, std::int64_t count) {
        const auto bytes = count * 4;
        if (offset < 0 || offset % 4 != 0 ||
            offset + bytes > static_cast<std::int64_t>(blob.size())) {
          throw Error(ErrorCode::ManifestError,
                      "parameter block [" + std::to_string(offset) + ", " +
                          std::to_string(offset + bytes) + ") lies outside weights.bin (" +
                          std::to_string(blob.size()) + " bytes)");
        }
        std::vector<float> v(static_cast<std::size_t>(count));
        std::memcpy(v.data(), blob.data() + offset, static_cast<std::size_t>(bytes));
        return v;
      };
      layer.weights = slice(w_off, layer.in_dim * layer.out_dim);
      layer.bias = slice(b_off, layer.out_dim);
      layers.push_back(std::move(layer));
    }
  } catch (const ordered_json::exception& e) {
    throw Error(ErrorCode::ManifestError, manifest.string() + ": " + e.what());
  }
  Model model(std::move(layers));
  if (model.input_features() != declared_in || model.output_features() != declared_out) {
    throw Error(ErrorCode::DimChainError,
                "declared features " + std::to_string(declared_in) + " -> " +
                    std::to_string(declared_out) + " disagree with the layer chain " +
                    std::to_string(model.input_features()) + " -> " +
                    std::to_string(model.output_features()));
  }
  spdlog::debug("inference: loaded {} ({} layers, {} parameters)", manifest.string(),
                model.layers().size(), model.parameter_count());
  return model;
}

void save_model(const Model& model, const fs::path& directory) {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + directory.string() + ": " + ec.message());

  ordered_json j;
  j["version"] = 1;
  j["dtype"] = "f32";
  j["input_features"] = model.input_features();
  j["output_features"] = model.output_features();
  j["layers"] = ordered_json::array();
  std::vector<float> blob;
  for (const auto& layer : model.layers()) {
    ordered_json l;
    l["in"] = layer.in_dim;
    l["out"] = layer.out_dim;
    l["activation"] = std::string(to_string(layer.activation));
    l["weights_offset"] = static_cast<std::int64_t>(blob.size() * 4);
    blob.insert(blob.end(), layer.weights.begin(), layer.weights.end());
    l["bias_offset"] = static_cast<std::int64_t>(blob.size() * 4);
    blob.insert(blob.end(), layer.bias.begin(), layer.bias.end());
    j["layers"].push_back(std::move(l));
  }
  {
    std::ofstream wf(directory / "weights.bin", std::ios::binary | std::ios::trunc);
    wf.write(reinterpret_cast<const char*>(blob.data()),
             static_cast<std::streamsize>(blob.size() * sizeof(float)));
    if (!wf) throw Error(ErrorCode::IoError, "failed writing weights.bin");
  }
  std::ofstream mf(directory / "model.json", std::ios::trunc);
  mf << j.dump(2) << "\n";
  if (!mf) throw Error(ErrorCode::IoError, "failed writing model.json");
}

Model jacobi_model(float alpha) {
  DenseLayer layer;
  layer.in_dim = 5;
  layer.out_dim = 1;
  layer.weights = {alpha, alpha, alpha, 1.0f - 4.0f * alpha, alpha};
  layer.bias = {0.0f};
  return Model({std::move(layer)});
}

Model identity_model(std::int64_t features) {
  DenseLayer layer;
  layer.in_dim = features;
  layer.out_dim = features;
  layer.weights.assign(static_cast<std::size_t>(features * features), 0.0f);
  for (std::int64_t i = 0; i < features; ++i) {
    layer.weights[static_cast<std::size_t>(i * features + i)] = 1.0f;
  }
  layer.bias.assign(static_cast<std::size_t>(features), 0.0f);
  return Model({std::move(layer)});
}

}  // namespace smlrt
