#include "gather_oracle.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace smlrt::testkit {
namespace {

std::int64_t uniform(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

std::int64_t count(std::int64_t start, std::int64_t stop, std::int64_t step) {
  return stop <= start ? 0 : (stop - start + step - 1) / step;
}

}  // namespace

Shape oracle_shape(const FunctorDecl& functor, const MapTarget& target) {
  Shape shape;
  for (const auto& s : target.slices) shape.push_back(count(s.start, s.stop, s.step));
  for (const auto& dim : functor.lhs.dims) {
    if (const auto* r = std::get_if<SymRange>(&dim)) {
      shape.push_back(count(r->start.offset, r->stop.offset, r->step));
    }
  }
  return shape;
}

std::optional<std::vector<std::int64_t>> oracle_offsets(const FunctorDecl& functor,
                                                        const MapTarget& target,
                                                        const Shape& shape,
                                                        const Strides& strides) {
  std::vector<std::string> symbols;
  for (const auto& dim : functor.lhs.dims) {
    if (const auto* p = std::get_if<SymPoint>(&dim)) symbols.push_back(p->at.symbol);
  }
  std::vector<std::int64_t> sweep;
  for (const auto& s : target.slices) sweep.push_back(count(s.start, s.stop, s.step));
  const std::int64_t total =
      std::accumulate(sweep.begin(), sweep.end(), std::int64_t{1}, std::multiplies<>());

  std::vector<std::int64_t> out;
  for (std::int64_t flat = 0; flat < total; ++flat) {
    // Decode the sweep point row-major and bind each symbol.
    std::vector<std::int64_t> value(symbols.size());
    std::int64_t rest = flat;
    for (std::size_t k = symbols.size(); k-- > 0;) {
      const std::int64_t idx = rest % sweep[k];
      rest /= sweep[k];
      value[k] = target.slices[k].start + idx * target.slices[k].step;
    }
    auto eval = [&](const SymExpr& e) {
      if (e.is_constant()) return e.offset;
      const auto pos = std::find(symbols.begin(), symbols.end(), e.symbol) - symbols.begin();
      return value[static_cast<std::size_t>(pos)] + e.offset;
    };

    for (const auto& slice : functor.rhs) {
      // Candidate index lists per array dimension, then their cartesian product.
      std::vector<std::vector<std::int64_t>> per_dim;
      for (const auto& dim : slice.dims) {
        std::vector<std::int64_t> idx;
        if (const auto* p = std::get_if<SymPoint>(&dim)) {
          idx.push_back(eval(p->at));
        } else {
          const auto& r = std::get<SymRange>(dim);
          for (std::int64_t v = eval(r.start); v < eval(r.stop); v += r.step) idx.push_back(v);
        }
        per_dim.push_back(std::move(idx));
      }
      std::vector<std::size_t> pos(per_dim.size(), 0);
      while (true) {
        std::int64_t offset = 0;
        for (std::size_t d = 0; d < per_dim.size(); ++d) {
          const std::int64_t i = per_dim[d][pos[d]];
          if (i < 0 || i >= shape[d]) return std::nullopt;
          offset += i * strides[d];
        }
        out.push_back(offset);
        std::size_t d = per_dim.size();
        while (d > 0) {
          --d;
          if (++pos[d] < per_dim[d].size()) break;
          pos[d] = 0;
          if (d == 0) goto next_slice;
        }
        if (per_dim.empty()) break;
      }
    next_slice:;
    }
  }
  return out;
}

BridgeCase random_bridge_case(std::mt19937_64& rng) {
  BridgeCase c;
  const std::vector<std::string> names = {"i", "j", "k"};
  const auto n_sym = static_cast<std::size_t>(uniform(rng, 1, 3));
  const auto rank = static_cast<std::size_t>(uniform(rng, static_cast<std::int64_t>(n_sym), 3));

  // Each symbol drives at least one array dimension; leftover dimensions are
  // driven by a random symbol or held constant.
  std::vector<std::optional<std::size_t>> driver(rank);
  std::vector<std::size_t> dims(rank);
  std::iota(dims.begin(), dims.end(), 0);
  std::shuffle(dims.begin(), dims.end(), rng);
  for (std::size_t s = 0; s < n_sym; ++s) driver[dims[s]] = s;
  for (std::size_t s = n_sym; s < rank; ++s) {
    if (uniform(rng, 0, 2) > 0) driver[dims[s]] = static_cast<std::size_t>(uniform(rng, 0, static_cast<std::int64_t>(n_sym) - 1));
  }

  for (std::size_t d = 0; d < rank; ++d) c.shape.push_back(uniform(rng, 4, 16));

  c.functor.name = "f";
  for (std::size_t s = 0; s < n_sym; ++s) c.functor.lhs.dims.push_back(SymPoint{SymExpr::sym(names[s])});

  std::int64_t features = 0;
  const auto n_rhs = uniform(rng, 1, 4);
  for (std::int64_t r = 0; r < n_rhs; ++r) {
    SymbolicSlice slice;
    std::int64_t elements = 1;
    for (std::size_t d = 0; d < rank; ++d) {
      const bool range = elements < 4 && uniform(rng, 0, 2) == 0;
      if (driver[d]) {
        const std::string& sym = names[*driver[d]];
        const std::int64_t a = uniform(rng, -2, 2);
        if (range) {
          const std::int64_t step = uniform(rng, 1, 2);
          const std::int64_t n = uniform(rng, 2, std::max<std::int64_t>(2, 4 / elements));
          const std::int64_t b = a + (n - 1) * step + 1;
          slice.dims.push_back(SymRange{SymExpr::sym(sym, a), SymExpr::sym(sym, b), step});
          elements *= count(a, b, step);
        } else {
          slice.dims.push_back(SymPoint{SymExpr::sym(sym, a)});
        }
      } else {
        if (range) {
          const std::int64_t a = uniform(rng, 0, 2);
          const std::int64_t b = a + uniform(rng, 2, std::max<std::int64_t>(2, 4 / elements));
          slice.dims.push_back(SymRange{SymExpr::constant(a), SymExpr::constant(b), 1});
          elements *= b - a;
        } else {
          slice.dims.push_back(SymPoint{SymExpr::constant(uniform(rng, 0, c.shape[d] - 1))});
        }
      }
    }
    features += elements;
    c.functor.rhs.push_back(std::move(slice));
  }

  // One trailing feature range, or two when the count factors.
  if (features % 2 == 0 && features > 2 && uniform(rng, 0, 1) == 0) {
    c.functor.lhs.dims.push_back(SymRange{SymExpr::constant(0), SymExpr::constant(2), 1});
    c.functor.lhs.dims.push_back(SymRange{SymExpr::constant(0), SymExpr::constant(features / 2), 1});
  } else {
    const auto pos = static_cast<long>(uniform(rng, 0, static_cast<std::int64_t>(n_sym)));
    c.functor.lhs.dims.insert(c.functor.lhs.dims.begin() + pos,
                              SymRange{SymExpr::constant(0), SymExpr::constant(features), 1});
  }

  // Per symbol: lowest and highest offset reached and the tightest extent it
  // drives. Most targets stay in bounds; some are drawn freely so the
  // out-of-bounds path is exercised too.
  std::vector<std::int64_t> lo(n_sym, 0), hi(n_sym, 0), extent(n_sym, 16);
  for (const auto& slice : c.functor.rhs) {
    for (std::size_t d = 0; d < rank; ++d) {
      if (!driver[d]) continue;
      const std::size_t s = *driver[d];
      std::int64_t first = 0, last = 0;
      if (const auto* p = std::get_if<SymPoint>(&slice.dims[d])) {
        first = last = p->at.offset;
      } else {
        const auto& r = std::get<SymRange>(slice.dims[d]);
        first = r.start.offset;
        last = r.start.offset + (r.count() - 1) * r.step;
      }
      lo[s] = std::min(lo[s], first);
      hi[s] = std::max(hi[s], last);
      extent[s] = std::min(extent[s], c.shape[d]);
    }
  }
  const bool free_draw = uniform(rng, 0, 9) == 0;
  for (std::size_t s = 0; s < n_sym; ++s) {
    const std::int64_t step = uniform(rng, 1, 2);
    const std::int64_t min_start = -lo[s];
    const std::int64_t max_last = extent[s] - 1 - hi[s];
    if (free_draw || max_last < min_start) {
      const std::int64_t start = uniform(rng, 0, 4);
      c.target.slices.push_back(ConcreteSlice{start, start + uniform(rng, 1, 8), step});
      continue;
    }
    const std::int64_t start = uniform(rng, min_start, max_last);
    const std::int64_t stop = uniform(rng, start + 1, max_last + 1);
    c.target.slices.push_back(ConcreteSlice{start, stop, step});
  }
  c.target.array = "a";

  if (uniform(rng, 0, 3) == 0) {
    // Column-major layout.
    c.strides.assign(rank, 1);
    for (std::size_t d = 1; d < rank; ++d) c.strides[d] = c.strides[d - 1] * c.shape[d - 1];
  } else {
    c.strides = row_major_strides(c.shape);
  }
  c.storage = element_count(c.shape);
  c.dtype = uniform(rng, 0, 1) == 0 ? DType::f32 : DType::f64;
  std::uniform_real_distribution<double> value(-100.0, 100.0);
  if (c.dtype == DType::f32) {
    c.data_f32.resize(static_cast<std::size_t>(c.storage));
    for (auto& v : c.data_f32) v = static_cast<float>(value(rng));
  } else {
    c.data_f64.resize(static_cast<std::size_t>(c.storage));
    for (auto& v : c.data_f64) v = value(rng);
  }
  return c;
}

}  // namespace smlrt::testkit
