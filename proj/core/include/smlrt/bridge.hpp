#pragma once

// Memory concretization between application arrays and dense tensors.
//
// A `to` map runs four steps:
//   extract_symbolic_shape  -> per-RHS-slice offsets relative to the sweep start
//   resolve_symbolic_shape  -> absolute start/stop/stride per array dimension
//   wrap_tensors            -> zero-copy strided views over the array
//   compose_tensor          -> the single copy into a (sweep..., features...) tensor
// A `from` map reuses the first three steps and scatters through the views.

#include <cstdint>
#include <optional>
#include <vector>

#include "smlrt/directive.hpp"
#include "smlrt/tensor.hpp"

namespace smlrt {

/// Access pattern of one RHS slice, one entry per array dimension.
/// Dimensions driven by a symbol carry the index of that symbol's sweep axis
/// and an offset relative to the first swept value; constant dimensions carry
/// an absolute index.
struct SliceDescriptor {
  std::vector<std::int64_t> offset_per_dim;
  std::vector<std::int64_t> elem_count_per_dim;
  std::vector<std::int64_t> step_per_dim;
  std::vector<std::optional<std::size_t>> sweep_axis_per_dim;
  /// Dimensions declared as ranges; they form the element axes of the view.
  std::vector<bool> is_range_per_dim;

  std::int64_t element_count() const noexcept;
};

struct ResolvedSlice {
  SliceDescriptor descriptor;
  /// Absolute index of the first accessed element, per array dimension.
  std::vector<std::int64_t> start_per_dim;
  /// One past the last accessed index over the whole sweep, per dimension.
  std::vector<std::int64_t> end_per_dim;
  /// Index advance per sweep step (0 for constant dimensions).
  std::vector<std::int64_t> sweep_stride_per_dim;
  Shape sweep_shape;
  /// Extents of the range dimensions, or {1} for a single-element slice.
  Shape element_shape;

  std::int64_t feature_count() const noexcept { return element_count(element_shape); }
};

/// Zero-copy strided window over an ArrayBuffer. The leading `sweep_rank`
/// axes follow the sweep; the remaining axes enumerate the slice elements.
struct MemoryView {
  std::int64_t base_offset = 0;
  Shape shape;
  Strides strides;
  std::size_t sweep_rank = 0;
  ArrayBuffer source;

  std::int64_t feature_count() const noexcept;
};

/// Target slice extents (the sweep shape) for a bound map target.
Shape sweep_shape(const MapTarget& target);

/// Shape the `to` direction produces: sweep shape followed by LHS feature sizes.
Shape concretized_shape(const FunctorDecl& functor, const MapTarget& target);

std::vector<SliceDescriptor> extract_symbolic_shape(const FunctorDecl& functor,
                                                    const MapTarget& target);

std::vector<ResolvedSlice> resolve_symbolic_shape(const std::vector<SliceDescriptor>& descriptors,
                                                  const MapTarget& target);

std::vector<MemoryView> wrap_tensors(const std::vector<ResolvedSlice>& resolved,
                                     const ArrayBuffer& array);

Tensor compose_tensor(const std::vector<MemoryView>& views, const SymbolicSlice& lhs);

/// Gathers `array` through the functor applied to `target`. Never writes `array`.
Tensor concretize_to(const FunctorDecl& functor, const MapTarget& target, const ArrayBuffer& array);

/// Writes `tensor` back through the functor; only swept elements change.
/// `from` functors must consist of point slices addressing distinct elements.
void scatter_from(const FunctorDecl& functor, const MapTarget& target, const Tensor& tensor,
                  const ArrayBuffer& array);

/// Extraction and resolution done once for a (functor, target) pair, so
/// repeated gathers/scatters only pay for wrapping and copying.
class MapPlan {
 public:
  MapPlan(FunctorDecl functor, MapTarget target, Direction direction);

  const FunctorDecl& functor() const noexcept { return functor_; }
  const MapTarget& target() const noexcept { return target_; }
  Direction direction() const noexcept { return direction_; }
  const std::vector<ResolvedSlice>& resolved() const noexcept { return resolved_; }

  /// (sweep..., features...) shape of the gathered tensor.
  const Shape& tensor_shape() const noexcept { return shape_; }
  const Shape& sweep() const noexcept { return sweep_; }
  std::int64_t batch() const noexcept { return element_count(sweep_); }
  std::int64_t features() const noexcept { return functor_.feature_size(); }

  Tensor gather(const ArrayBuffer& array) const;
  void scatter(const Tensor& tensor, const ArrayBuffer& array) const;

 private:
  FunctorDecl functor_;
  MapTarget target_;
  Direction direction_;
  std::vector<ResolvedSlice> resolved_;
  Shape sweep_;
  Shape shape_;
};

}  // namespace smlrt
