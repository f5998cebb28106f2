#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "smlrt/error.hpp"

namespace smlrt {

enum class DType { f32, f64 };

using Shape = std::vector<std::int64_t>;
using Strides = std::vector<std::int64_t>;

std::string_view to_string(DType dtype) noexcept;
DType parse_dtype(std::string_view name);
std::size_t dtype_size(DType dtype) noexcept;

template <class T>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>,
                "only f32 and f64 element types are supported");
  return std::is_same_v<T, float> ? DType::f32 : DType::f64;
}

std::int64_t element_count(const Shape& shape) noexcept;
Strides row_major_strides(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major tensor owning its storage.
class Tensor {
 public:
  Tensor() = default;
  Tensor(DType dtype, Shape shape);

  template <class T>
  static Tensor from_values(Shape shape, std::vector<T> values) {
    Tensor t;
    t.dtype_ = dtype_of<T>();
    if (static_cast<std::int64_t>(values.size()) != element_count(shape)) {
      throw Error(ErrorCode::ShapeMismatch,
                  "value count " + std::to_string(values.size()) +
                      " does not match shape " + shape_to_string(shape));
    }
    t.shape_ = std::move(shape);
    t.storage_ = std::move(values);
    return t;
  }

  DType dtype() const noexcept { return dtype_; }
  const Shape& shape() const noexcept { return shape_; }
  std::int64_t rank() const noexcept { return static_cast<std::int64_t>(shape_.size()); }
  std::int64_t size() const noexcept { return element_count(shape_); }
  std::size_t byte_size() const noexcept {
    return static_cast<std::size_t>(size()) * dtype_size(dtype_);
  }

  template <class T>
  std::span<T> values() {
    check_dtype(dtype_of<T>());
    return std::get<std::vector<T>>(storage_);
  }
  template <class T>
  std::span<const T> values() const {
    check_dtype(dtype_of<T>());
    return std::get<std::vector<T>>(storage_);
  }

  std::span<const std::byte> bytes() const noexcept;
  std::span<std::byte> bytes() noexcept;

  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;
  Tensor cast(DType dtype) const;

  /// Element at a flat row-major index, widened to double.
  double at_flat(std::int64_t index) const;

 private:
  void check_dtype(DType requested) const;

  DType dtype_ = DType::f32;
  Shape shape_;
  std::variant<std::vector<float>, std::vector<double>> storage_;
};

/// Bitwise comparison of dtype, shape and payload.
bool bitwise_equal(const Tensor& a, const Tensor& b) noexcept;

/// Non-owning strided view of host application memory.
class ArrayBuffer {
 public:
  ArrayBuffer() = default;
  ArrayBuffer(std::span<float> data, Shape shape);
  ArrayBuffer(std::span<double> data, Shape shape);
  ArrayBuffer(std::span<float> data, Shape shape, Strides strides);
  ArrayBuffer(std::span<double> data, Shape shape, Strides strides);

  DType dtype() const noexcept { return dtype_; }
  const Shape& shape() const noexcept { return shape_; }
  const Strides& strides() const noexcept { return strides_; }
  std::int64_t rank() const noexcept { return static_cast<std::int64_t>(shape_.size()); }
  bool empty() const noexcept { return capacity_ == 0; }

  template <class T>
  std::span<T> data() const {
    if (dtype_of<T>() != dtype_) {
      throw Error(ErrorCode::DtypeMismatch, std::string("array holds ") +
                                                std::string(to_string(dtype_)));
    }
    return {static_cast<T*>(data_), capacity_};
  }

  const void* raw() const noexcept { return data_; }

 private:
  void validate();

  DType dtype_ = DType::f32;
  void* data_ = nullptr;
  std::size_t capacity_ = 0;
  Shape shape_;
  Strides strides_;
};

/// Dispatches `fn` with a value-initialized `float` or `double` tag.
template <class Fn>
decltype(auto) visit_dtype(DType dtype, Fn&& fn) {
  if (dtype == DType::f32) return fn(float{});
  return fn(double{});
}

}  // namespace smlrt
