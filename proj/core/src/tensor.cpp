#include "smlrt/tensor.hpp"

#include <cstring>
#include <functional>
#include <numeric>

namespace smlrt {

std::string_view to_string(DType dtype) noexcept {
  return dtype == DType::f32 ? "f32" : "f64";
}

DType parse_dtype(std::string_view name) {
  if (name == "f32") return DType::f32;
  if (name == "f64") return DType::f64;
  throw Error(ErrorCode::DtypeMismatch, "unknown dtype '" + std::string(name) + "'");
}

std::size_t dtype_size(DType dtype) noexcept { return dtype == DType::f32 ? 4 : 8; }

std::int64_t element_count(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>{});
}

Strides row_major_strides(const Shape& shape) {
  Strides strides(shape.size(), 1);
  for (std::size_t d = shape.size(); d-- > 1;) strides[d - 1] = strides[d] * shape[d];
  return strides;
}

std::string shape_to_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t d = 0; d < shape.size(); ++d) {
    if (d) out += ", ";
    out += std::to_string(shape[d]);
  }
  if (shape.size() == 1) out += ",";
  return out + ")";
}

Tensor::Tensor(DType dtype, Shape shape) : dtype_(dtype), shape_(std::move(shape)) {
  for (auto extent : shape_) {
    if (extent < 0) throw Error(ErrorCode::ShapeMismatch, "negative extent in tensor shape");
  }
  const auto n = static_cast<std::size_t>(element_count(shape_));
  if (dtype_ == DType::f32) {
    storage_ = std::vector<float>(n);
  } else {
    storage_ = std::vector<double>(n);
  }
}

std::span<const std::byte> Tensor::bytes() const noexcept {
  return std::visit(
      [](const auto& v) { return std::as_bytes(std::span(v)); }, storage_);
}

std::span<std::byte> Tensor::bytes() noexcept {
  return std::visit(
      [](auto& v) { return std::as_writable_bytes(std::span(v)); }, storage_);
}

Tensor Tensor::reshaped(Shape shape) const {
  if (element_count(shape) != size()) {
    throw Error(ErrorCode::ShapeMismatch, "cannot reshape " + shape_to_string(shape_) +
                                              " to " + shape_to_string(shape));
  }
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

Tensor Tensor::cast(DType dtype) const {
  if (dtype == dtype_) return *this;
  Tensor out(dtype, shape_);
  if (dtype == DType::f32) {
    auto src = values<double>();
    auto dst = out.values<float>();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i]);
  } else {
    auto src = values<float>();
    auto dst = out.values<double>();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<double>(src[i]);
  }
  return out;
}

double Tensor::at_flat(std::int64_t index) const {
  return std::visit([index](const auto& v) { return static_cast<double>(v.at(index)); },
                    storage_);
}

void Tensor::check_dtype(DType requested) const {
  if (requested != dtype_) {
    throw Error(ErrorCode::DtypeMismatch, "tensor holds " + std::string(to_string(dtype_)) +
                                              ", requested " + std::string(to_string(requested)));
  }
}

bool bitwise_equal(const Tensor& a, const Tensor& b) noexcept {
  if (a.dtype() != b.dtype() || a.shape() != b.shape()) return false;
  auto x = a.bytes();
  auto y = b.bytes();
  return x.size() == y.size() && (x.empty() || std::memcmp(x.data(), y.data(), x.size()) == 0);
}

ArrayBuffer::ArrayBuffer(std::span<float> data, Shape shape)
    : ArrayBuffer(data, shape, row_major_strides(shape)) {}

ArrayBuffer::ArrayBuffer(std::span<double> data, Shape shape)
    : ArrayBuffer(data, shape, row_major_strides(shape)) {}

ArrayBuffer::ArrayBuffer(std::span<float> data, Shape shape, Strides strides)
    : dtype_(DType::f32),
      data_(data.data()),
      capacity_(data.size()),
      shape_(std::move(shape)),
      strides_(std::move(strides)) {
  validate();
}

ArrayBuffer::ArrayBuffer(std::span<double> data, Shape shape, Strides strides)
    : dtype_(DType::f64),
      data_(data.data()),
      capacity_(data.size()),
      shape_(std::move(shape)),
      strides_(std::move(strides)) {
  validate();
}

void ArrayBuffer::validate() {
  if (shape_.empty()) throw Error(ErrorCode::ShapeMismatch, "array rank must be at least 1");
  if (shape_.size() != strides_.size()) {
    throw Error(ErrorCode::ShapeMismatch, "shape and strides differ in rank");
  }
  std::int64_t last = 0;
  for (std::size_t d = 0; d < shape_.size(); ++d) {
    if (shape_[d] <= 0) throw Error(ErrorCode::ShapeMismatch, "array extents must be positive");
    if (strides_[d] <= 0) throw Error(ErrorCode::ShapeMismatch, "array strides must be positive");
    last += (shape_[d] - 1) * strides_[d];
  }
  if (last >= static_cast<std::int64_t>(capacity_)) {
    throw Error(ErrorCode::OutOfBounds, "array shape " + shape_to_string(shape_) +
                                            " addresses past the end of its storage (" +
                                            std::to_string(capacity_) + " elements)");
  }
}

}  // namespace smlrt
