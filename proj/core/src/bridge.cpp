#include "smlrt/bridge.hpp"

#include <algorithm>
#include <string>

#include "smlrt/error.hpp"

namespace smlrt {

std::int64_t SliceDescriptor::element_count() const noexcept {
  std::int64_t n = 1;
  for (auto c : elem_count_per_dim) n *= c;
  return n;
}

std::int64_t MemoryView::feature_count() const noexcept {
  std::int64_t n = 1;
  for (std::size_t a = sweep_rank; a < shape.size(); ++a) n *= shape[a];
  return n;
}

Shape sweep_shape(const MapTarget& target) {
  Shape shape;
  shape.reserve(target.slices.size());
  for (const auto& s : target.slices) shape.push_back(s.count());
  return shape;
}

Shape concretized_shape(const FunctorDecl& functor, const MapTarget& target) {
  Shape shape = sweep_shape(target);
  for (auto f : functor.feature_shape()) shape.push_back(f);
  return shape;
}

std::vector<SliceDescriptor> extract_symbolic_shape(const FunctorDecl& functor,
                                                    const MapTarget& target) {
  const auto symbols = functor.symbols();
  if (symbols.size() != target.slices.size()) {
    throw Error(ErrorCode::ArityMismatch,
                "functor '" + functor.name + "' has " + std::to_string(symbols.size()) +
                    " symbolic dimensions but target '" + target.array + "' supplies " +
                    std::to_string(target.slices.size()) + " slices");
  }
  auto axis_of = [&](const std::string& symbol) {
    return static_cast<std::size_t>(std::find(symbols.begin(), symbols.end(), symbol) -
                                    symbols.begin());
  };

  std::vector<SliceDescriptor> out;
  out.reserve(functor.rhs.size());
  for (const auto& slice : functor.rhs) {
    SliceDescriptor d;
    for (const auto& dim : slice.dims) {
      if (const auto* p = std::get_if<SymPoint>(&dim)) {
        d.offset_per_dim.push_back(p->at.offset);
        d.elem_count_per_dim.push_back(1);
        d.step_per_dim.push_back(1);
        d.is_range_per_dim.push_back(false);
        d.sweep_axis_per_dim.push_back(p->at.is_constant()
                                           ? std::nullopt
                                           : std::optional<std::size_t>(axis_of(p->at.symbol)));
      } else {
        const auto& r = std::get<SymRange>(dim);
        d.offset_per_dim.push_back(r.start.offset);
        d.elem_count_per_dim.push_back(r.count());
        d.step_per_dim.push_back(r.step);
        d.is_range_per_dim.push_back(true);
        d.sweep_axis_per_dim.push_back(r.start.is_constant()
                                           ? std::nullopt
                                           : std::optional<std::size_t>(axis_of(r.start.symbol)));
      }
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<ResolvedSlice> resolve_symbolic_shape(const std::vector<SliceDescriptor>& descriptors,
                                                  const MapTarget& target) {
  const Shape sweep = sweep_shape(target);
  std::vector<ResolvedSlice> out;
  out.reserve(descriptors.size());
  for (const auto& d : descriptors) {
    ResolvedSlice r;
    r.descriptor = d;
    r.sweep_shape = sweep;
    for (std::size_t dim = 0; dim < d.offset_per_dim.size(); ++dim) {
      std::int64_t start = d.offset_per_dim[dim];
      std::int64_t sweep_stride = 0;
      std::int64_t sweep_extent = 0;
      if (const auto axis = d.sweep_axis_per_dim[dim]) {
        const auto& cs = target.slices[*axis];
        start += cs.start;
        sweep_stride = cs.step;
        sweep_extent = (cs.count() - 1) * cs.step;
      }
      const std::int64_t last =
          start + sweep_extent + (d.elem_count_per_dim[dim] - 1) * d.step_per_dim[dim];
      r.start_per_dim.push_back(start);
      r.end_per_dim.push_back(last + 1);
      r.sweep_stride_per_dim.push_back(sweep_stride);
      if (d.is_range_per_dim[dim]) r.element_shape.push_back(d.elem_count_per_dim[dim]);
    }
    if (r.element_shape.empty()) r.element_shape.push_back(1);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<MemoryView> wrap_tensors(const std::vector<ResolvedSlice>& resolved,
                                     const ArrayBuffer& array) {
  std::vector<MemoryView> views;
  views.reserve(resolved.size());
  for (std::size_t s = 0; s < resolved.size(); ++s) {
    const auto& r = resolved[s];
    const auto& d = r.descriptor;
    if (static_cast<std::int64_t>(d.offset_per_dim.size()) != array.rank()) {
      throw Error(ErrorCode::ArityMismatch,
                  "RHS slice " + std::to_string(s) + " has " +
                      std::to_string(d.offset_per_dim.size()) + " dimensions but the array has " +
                      std::to_string(array.rank()));
    }
    MemoryView v;
    v.source = array;
    v.sweep_rank = r.sweep_shape.size();
    v.shape = r.sweep_shape;
    v.strides.assign(v.sweep_rank, 0);
    for (std::size_t dim = 0; dim < d.offset_per_dim.size(); ++dim) {
      const std::int64_t extent = array.shape()[dim];
      if (r.start_per_dim[dim] < 0 || r.end_per_dim[dim] > extent) {
        throw Error(ErrorCode::OutOfBounds,
                    "RHS slice " + std::to_string(s) + " reaches indices [" +
                        std::to_string(r.start_per_dim[dim]) + ", " +
                        std::to_string(r.end_per_dim[dim]) + ") in dimension " +
                        std::to_string(dim) + " of an array with extent " +
                        std::to_string(extent));
      }
      const std::int64_t stride = array.strides()[dim];
      v.base_offset += r.start_per_dim[dim] * stride;
      if (const auto axis = d.sweep_axis_per_dim[dim]) {
        v.strides[*axis] += r.sweep_stride_per_dim[dim] * stride;
      }
    }
    bool any_range = false;
    for (std::size_t dim = 0; dim < d.offset_per_dim.size(); ++dim) {
      if (!d.is_range_per_dim[dim]) continue;
      any_range = true;
      v.shape.push_back(d.elem_count_per_dim[dim]);
      v.strides.push_back(d.step_per_dim[dim] * array.strides()[dim]);
    }
    if (!any_range) {
      v.shape.push_back(1);
      v.strides.push_back(1);
    }
    views.push_back(std::move(v));
  }
  return views;
}

namespace {

// Calls fn(source_offset, position) for every element of the view in
// row-major order; `position` is the running flat index.
template <class Fn>
void for_each_offset(const MemoryView& v, Fn&& fn) {
  const std::size_t rank = v.shape.size();
  if (element_count(v.shape) == 0) return;
  std::vector<std::int64_t> idx(rank, 0);
  std::int64_t offset = v.base_offset;
  std::int64_t position = 0;
  const std::int64_t inner = v.shape[rank - 1];
  const std::int64_t inner_stride = v.strides[rank - 1];
  while (true) {
    for (std::int64_t k = 0; k < inner; ++k) fn(offset + k * inner_stride, position++);
    std::size_t a = rank - 1;
    while (true) {
      if (a == 0) return;
      --a;
      if (++idx[a] < v.shape[a]) {
        offset += v.strides[a];
        break;
      }
      offset -= (v.shape[a] - 1) * v.strides[a];
      idx[a] = 0;
    }
  }
}

template <class T>
void gather_into(const std::vector<MemoryView>& views, std::span<T> out, std::int64_t features) {
  std::int64_t feature_base = 0;
  for (const auto& v : views) {
    const std::int64_t f = v.feature_count();
    const T* src = v.source.data<T>().data();
    for_each_offset(v, [&](std::int64_t offset, std::int64_t position) {
      const std::int64_t row = position / f;
      out[row * features + feature_base + position % f] = src[offset];
    });
    feature_base += f;
  }
}

template <class T>
void scatter_out(const std::vector<MemoryView>& views, std::span<const T> in,
                 std::int64_t features) {
  std::int64_t feature_base = 0;
  for (const auto& v : views) {
    const std::int64_t f = v.feature_count();
    T* dst = v.source.data<T>().data();
    for_each_offset(v, [&](std::int64_t offset, std::int64_t position) {
      const std::int64_t row = position / f;
      dst[offset] = in[row * features + feature_base + position % f];
    });
    feature_base += f;
  }
}

std::int64_t total_features(const std::vector<MemoryView>& views) {
  std::int64_t f = 0;
  for (const auto& v : views) f += v.feature_count();
  return f;
}

// Every destination must be written by exactly one (sweep point, feature).
void check_injective(const FunctorDecl& functor, const MapTarget& target,
                     const std::vector<ResolvedSlice>& resolved) {
  for (std::size_t s = 0; s < resolved.size(); ++s) {
    if (resolved[s].descriptor.element_count() > 1) {
      throw Error(ErrorCode::NonInjectiveScatter,
                  "RHS slice " + std::to_string(s) + " of '" + functor.name +
                      "' spans several elements; 'from' functors take point slices");
    }
  }
  // Compare index tuples: slices p and q collide iff for some sweep points
  // they address the same element. Enumerate destinations and look for repeats.
  const Shape sweep = sweep_shape(target);
  const std::int64_t batch = element_count(sweep);
  const std::size_t rank = resolved.empty() ? 0 : resolved.front().start_per_dim.size();
  std::vector<std::vector<std::int64_t>> seen;
  seen.reserve(static_cast<std::size_t>(batch) * resolved.size());
  std::vector<std::int64_t> sweep_idx(sweep.size());
  for (std::int64_t b = 0; b < batch; ++b) {
    std::int64_t rem = b;
    for (std::size_t a = sweep.size(); a-- > 0;) {
      sweep_idx[a] = rem % sweep[a];
      rem /= sweep[a];
    }
    for (const auto& r : resolved) {
      std::vector<std::int64_t> dest(rank);
      for (std::size_t dim = 0; dim < rank; ++dim) {
        dest[dim] = r.start_per_dim[dim];
        if (const auto axis = r.descriptor.sweep_axis_per_dim[dim]) {
          dest[dim] += sweep_idx[*axis] * r.sweep_stride_per_dim[dim];
        }
      }
      seen.push_back(std::move(dest));
    }
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw Error(ErrorCode::NonInjectiveScatter,
                "functor '" + functor.name + "' maps several tensor entries onto one element of '" +
                    target.array + "'");
  }
}

}  // namespace

Tensor compose_tensor(const std::vector<MemoryView>& views, const SymbolicSlice& lhs) {
  if (views.empty()) throw Error(ErrorCode::FeatureMismatch, "no RHS views to compose");
  FunctorDecl shape_only{"", lhs, {}};
  const auto feature_shape = shape_only.feature_shape();
  const std::int64_t lhs_features = shape_only.feature_size();
  const std::int64_t rhs_features = total_features(views);
  if (rhs_features != lhs_features) {
    throw Error(ErrorCode::FeatureMismatch,
                "RHS slices supply " + std::to_string(rhs_features) +
                    " features but the LHS declares " + std::to_string(lhs_features));
  }
  const auto& first = views.front();
  const Shape sweep(first.shape.begin(), first.shape.begin() + first.sweep_rank);
  for (const auto& v : views) {
    if (v.source.dtype() != first.source.dtype()) {
      throw Error(ErrorCode::DtypeMismatch, "RHS views disagree on dtype");
    }
    if (!std::equal(sweep.begin(), sweep.end(), v.shape.begin()) || v.sweep_rank != sweep.size()) {
      throw Error(ErrorCode::ShapeMismatch, "RHS views disagree on the sweep shape");
    }
  }
  Shape shape = sweep;
  shape.insert(shape.end(), feature_shape.begin(), feature_shape.end());
  Tensor out(first.source.dtype(), shape);
  visit_dtype(out.dtype(), [&](auto tag) {
    using T = decltype(tag);
    gather_into<T>(views, out.values<T>(), lhs_features);
  });
  return out;
}

Tensor concretize_to(const FunctorDecl& functor, const MapTarget& target,
                     const ArrayBuffer& array) {
  const auto resolved = resolve_symbolic_shape(extract_symbolic_shape(functor, target), target);
  return compose_tensor(wrap_tensors(resolved, array), functor.lhs);
}

void scatter_from(const FunctorDecl& functor, const MapTarget& target, const Tensor& tensor,
                  const ArrayBuffer& array) {
  MapPlan(functor, target, Direction::From).scatter(tensor, array);
}

MapPlan::MapPlan(FunctorDecl functor, MapTarget target, Direction direction)
    : functor_(std::move(functor)), target_(std::move(target)), direction_(direction) {
  resolved_ = resolve_symbolic_shape(extract_symbolic_shape(functor_, target_), target_);
  sweep_ = sweep_shape(target_);
  shape_ = concretized_shape(functor_, target_);
  std::int64_t rhs_features = 0;
  for (const auto& r : resolved_) rhs_features += r.feature_count();
  if (rhs_features != functor_.feature_size()) {
    throw Error(ErrorCode::FeatureMismatch,
                "functor '" + functor_.name + "' RHS supplies " + std::to_string(rhs_features) +
                    " features but its LHS declares " + std::to_string(functor_.feature_size()));
  }
  if (direction_ == Direction::From) check_injective(functor_, target_, resolved_);
}

Tensor MapPlan::gather(const ArrayBuffer& array) const {
  return compose_tensor(wrap_tensors(resolved_, array), functor_.lhs);
}

void MapPlan::scatter(const Tensor& tensor, const ArrayBuffer& array) const {
  if (direction_ != Direction::From) {
    throw Error(ErrorCode::SemanticError,
                "functor '" + functor_.name + "' is bound for 'to'; scatter needs a 'from' map");
  }
  if (tensor.shape() != shape_) {
    throw Error(ErrorCode::ShapeMismatch, "tensor shape " + shape_to_string(tensor.shape()) +
                                              " does not match the mapped shape " +
                                              shape_to_string(shape_));
  }
  if (tensor.dtype() != array.dtype()) {
    throw Error(ErrorCode::DtypeMismatch, "tensor is " + std::string(to_string(tensor.dtype())) +
                                              " but array '" + target_.array + "' is " +
                                              std::string(to_string(array.dtype())));
  }
  const auto views = wrap_tensors(resolved_, array);
  visit_dtype(array.dtype(), [&](auto tag) {
    using T = decltype(tag);
    scatter_out<T>(views, tensor.values<T>(), functor_.feature_size());
  });
}

}  // namespace smlrt
