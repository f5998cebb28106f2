#include "smlrt/runtime.hpp"

#include <algorithm>
#include <chrono>
#include <spdlog/spdlog.h>

#include "smlrt/error.hpp"

namespace fs = std::filesystem;

namespace smlrt {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t since(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
}

std::string canonical_key(const std::string& path) {
  std::error_code ec;
  auto p = fs::weakly_canonical(fs::absolute(path), ec);
  return ec ? path : p.string();
}

bool same_maps(const std::vector<BoundMap>& a, const std::vector<BoundMap>& b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](const auto& x, const auto& y) {
    return x.direction == y.direction && x.functor == y.functor && x.target == y.target &&
           x.array.dtype() == y.array.dtype() && x.array.shape() == y.array.shape();
  });
}

// Concatenates [B, F_k] row blocks along the feature axis.
Tensor concat_features(const std::vector<Tensor>& parts, std::int64_t batch, const Shape& sweep) {
  if (parts.size() == 1) {
    Shape shape = sweep;
    shape.push_back(parts.front().size() / batch);
    return parts.front().reshaped(shape);
  }
  std::int64_t total = 0;
  for (const auto& p : parts) total += p.size() / batch;
  Shape shape = sweep;
  shape.push_back(total);
  Tensor out(parts.front().dtype(), shape);
  visit_dtype(out.dtype(), [&](auto tag) {
    using T = decltype(tag);
    auto dst = out.values<T>();
    std::int64_t base = 0;
    for (const auto& p : parts) {
      const std::int64_t f = p.size() / batch;
      auto src = p.values<T>();
      for (std::int64_t b = 0; b < batch; ++b) {
        std::copy_n(src.begin() + b * f, f, dst.begin() + b * total + base);
      }
      base += f;
    }
  });
  return out;
}

}  // namespace

std::string_view to_string(PathTaken path) noexcept {
  return path == PathTaken::Accurate ? "accurate" : "surrogate";
}

bool interleave_predicate(std::int64_t step, std::int64_t n_accurate, std::int64_t n_surrogate) {
  if (n_accurate < 0 || n_surrogate < 0 || n_accurate + n_surrogate == 0) {
    throw Error(ErrorCode::InvalidSchedule, "interleave schedule " + std::to_string(n_accurate) +
                                                ":" + std::to_string(n_surrogate) +
                                                " has no steps");
  }
  if (step < 0) throw Error(ErrorCode::InvalidSchedule, "step must be non-negative");
  return step % (n_accurate + n_surrogate) >= n_accurate;
}

struct Runtime::Region {
  struct Binding {
    std::string array_name;
    MapPlan plan;
    ArrayBuffer array;
  };

  RegionDescriptor descriptor;
  std::vector<Binding> inputs;
  std::vector<Binding> outputs;
  Shape sweep;
  std::int64_t batch = 0;
  std::int64_t in_features = 0;
  std::int64_t out_features = 0;
  RegionStats stats;
  bool model_checked = false;
};

Runtime::Runtime() = default;
Runtime::~Runtime() = default;

void Runtime::declare_functor(FunctorDecl functor) {
  auto it = functors_.find(functor.name);
  if (it != functors_.end()) {
    if (it->second == functor) return;
    throw Error(ErrorCode::DuplicateFunctor,
                "functor '" + functor.name + "' is already declared differently");
  }
  functors_.emplace(functor.name, std::move(functor));
}

const FunctorDecl& Runtime::functor(std::string_view name) const {
  auto it = functors_.find(name);
  if (it == functors_.end()) {
    throw Error(ErrorCode::UnknownFunctor, "no functor named '" + std::string(name) + "'");
  }
  return it->second;
}

std::vector<BoundMap> Runtime::bind_maps(const MapDirective& map, const ArrayMap& arrays) const {
  const FunctorDecl& f = functor(map.functor);
  std::vector<BoundMap> out;
  for (const auto& target : map.targets) {
    auto it = arrays.find(target.array);
    if (it == arrays.end()) {
      throw Error(ErrorCode::UnresolvedReference,
                  "map target '" + target.array + "' has no host array bound");
    }
    out.push_back({map.direction, f, target, it->second});
  }
  return out;
}

RegionHandle Runtime::register_region(std::string name, std::function<void()> accurate_fn,
                                      const std::vector<std::string>& directives,
                                      const ArrayMap& arrays, const Environment& env) {
  RegionDescriptor d;
  d.name = std::move(name);
  d.accurate_fn = std::move(accurate_fn);
  bool have_ml = false;
  // Functors first so maps may precede their functor in the list.
  std::vector<MapDirective> maps;
  for (const auto& text : directives) {
    auto parsed = parse_directive(text, env);
    if (auto* f = std::get_if<FunctorDecl>(&parsed)) {
      declare_functor(std::move(*f));
    } else if (auto* m = std::get_if<MapDirective>(&parsed)) {
      maps.push_back(std::move(*m));
    } else {
      if (have_ml) {
        throw Error(ErrorCode::SemanticError, "region '" + d.name + "' has two ml directives");
      }
      d.ml = std::get<MlDirective>(std::move(parsed));
      have_ml = true;
    }
  }
  if (!have_ml) {
    throw Error(ErrorCode::MissingClause, "region '" + d.name + "' has no ml directive");
  }
  for (const auto& m : maps) {
    auto bound = bind_maps(m, arrays);
    d.maps.insert(d.maps.end(), bound.begin(), bound.end());
  }
  return register_region(std::move(d));
}

RegionHandle Runtime::register_region(RegionDescriptor descriptor) {
  const auto& ml = descriptor.ml;
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    const auto& existing = regions_[i]->descriptor;
    if (existing.name != descriptor.name) continue;
    if (existing.ml == ml && same_maps(existing.maps, descriptor.maps)) return RegionHandle(i);
    throw Error(ErrorCode::DuplicateRegion,
                "region '" + descriptor.name + "' is already registered with a different descriptor");
  }
  if (!descriptor.accurate_fn) {
    throw Error(ErrorCode::SemanticError, "region '" + descriptor.name + "' has no accurate path");
  }
  if ((ml.mode == MlMode::Infer || ml.mode == MlMode::Predicated) && !ml.model_path) {
    throw Error(ErrorCode::MissingClause, "region '" + descriptor.name + "' needs a model path");
  }
  if ((ml.mode == MlMode::Collect || ml.mode == MlMode::Predicated) && !ml.db_path) {
    throw Error(ErrorCode::MissingClause, "region '" + descriptor.name + "' needs a database path");
  }
  if ((ml.in_refs.empty() && ml.inout_refs.empty()) ||
      (ml.out_refs.empty() && ml.inout_refs.empty())) {
    throw Error(ErrorCode::MissingClause,
                "region '" + descriptor.name + "' needs both inputs and outputs");
  }

  auto region = std::make_unique<Region>();
  auto resolve = [&](const std::string& ref, Direction dir) {
    const BoundMap* found = nullptr;
    for (const auto& m : descriptor.maps) {
      if (m.direction != dir || m.target.array != ref) continue;
      if (found) {
        throw Error(ErrorCode::UnresolvedReference,
                    "array '" + ref + "' has several '" + std::string(to_string(dir)) +
                        "' maps in region '" + descriptor.name + "'");
      }
      found = &m;
    }
    if (!found) {
      throw Error(ErrorCode::UnresolvedReference,
                  "array '" + ref + "' has no '" + std::string(to_string(dir)) +
                      "' map in region '" + descriptor.name + "'");
    }
    Region::Binding b{ref, MapPlan(found->functor, found->target, dir), found->array};
    wrap_tensors(b.plan.resolved(), b.array);  // bounds check
    return b;
  };
  for (const auto& ref : ml.in_refs) region->inputs.push_back(resolve(ref, Direction::To));
  for (const auto& ref : ml.inout_refs) region->inputs.push_back(resolve(ref, Direction::To));
  for (const auto& ref : ml.out_refs) region->outputs.push_back(resolve(ref, Direction::From));
  for (const auto& ref : ml.inout_refs) region->outputs.push_back(resolve(ref, Direction::From));

  const auto& first = region->inputs.front();
  region->sweep = first.plan.sweep();
  region->batch = first.plan.batch();
  for (const auto* list : {&region->inputs, &region->outputs}) {
    for (const auto& b : *list) {
      if (b.plan.sweep() != region->sweep) {
        throw Error(ErrorCode::ShapeMismatch,
                    "region '" + descriptor.name + "': map of '" + b.array_name + "' sweeps " +
                        shape_to_string(b.plan.sweep()) + " but '" + first.array_name +
                        "' sweeps " + shape_to_string(region->sweep));
      }
      if (b.array.dtype() != first.array.dtype()) {
        throw Error(ErrorCode::DtypeMismatch,
                    "region '" + descriptor.name + "' mixes f32 and f64 arrays");
      }
    }
  }
  for (const auto& b : region->inputs) region->in_features += b.plan.features();
  for (const auto& b : region->outputs) region->out_features += b.plan.features();

  region->descriptor = std::move(descriptor);
  regions_.push_back(std::move(region));
  spdlog::debug("runtime: registered region '{}' ({} -> {} features, batch {})",
                regions_.back()->descriptor.name, regions_.back()->in_features,
                regions_.back()->out_features, regions_.back()->batch);
  return RegionHandle(regions_.size() - 1);
}

Runtime::Region& Runtime::region(RegionHandle handle) {
  if (handle.index() >= regions_.size()) throw Error(ErrorCode::UnknownRegion, "invalid region handle");
  return *regions_[handle.index()];
}

const Runtime::Region& Runtime::region(RegionHandle handle) const {
  if (handle.index() >= regions_.size()) throw Error(ErrorCode::UnknownRegion, "invalid region handle");
  return *regions_[handle.index()];
}

const std::string& Runtime::region_name(RegionHandle handle) const {
  return region(handle).descriptor.name;
}

RegionStats Runtime::stats(RegionHandle handle) const { return region(handle).stats; }

const Model& Runtime::model_for(Region& r) {
  const std::string key = canonical_key(*r.descriptor.ml.model_path);
  auto it = models_.find(key);
  if (it == models_.end()) {
    try {
      it = models_.emplace(key, load_model(*r.descriptor.ml.model_path)).first;
    } catch (const Error& e) {
      throw Error(ErrorCode::ModelLoadError, "region '" + r.descriptor.name + "': " + e.what());
    }
    ++r.stats.model_loads;
    r.model_checked = false;
  }
  const Model& model = it->second;
  if (!r.model_checked) {
    if (model.input_features() != r.in_features || model.output_features() != r.out_features) {
      throw Error(ErrorCode::ModelShapeMismatch,
                  "region '" + r.descriptor.name + "' maps " + std::to_string(r.in_features) +
                      " -> " + std::to_string(r.out_features) + " features but model " +
                      *r.descriptor.ml.model_path + " is " +
                      std::to_string(model.input_features()) + " -> " +
                      std::to_string(model.output_features()));
    }
    r.model_checked = true;
  }
  return model;
}

Database& Runtime::database_for(const Region& r) {
  const std::string key = canonical_key(*r.descriptor.ml.db_path);
  auto it = databases_.find(key);
  if (it == databases_.end()) {
    it = databases_.emplace(key, Database::open_or_create(*r.descriptor.ml.db_path)).first;
  }
  return it->second;
}

RegionOutcome Runtime::invoke_region(RegionHandle handle, std::optional<bool> predicate,
                                     std::optional<bool> if_value) {
  Region& r = region(handle);
  const auto& ml = r.descriptor.ml;
  if (ml.if_cond && !if_value) {
    throw Error(ErrorCode::MissingPredicate,
                "region '" + r.descriptor.name + "' needs a value for if(" + *ml.if_cond + ")");
  }
  if (ml.mode == MlMode::Predicated && !predicate && if_value.value_or(true)) {
    throw Error(ErrorCode::MissingPredicate,
                "predicated region '" + r.descriptor.name + "' needs a predicate value");
  }

  const auto start = Clock::now();
  RegionOutcome out;

  if (!if_value.value_or(true)) {
    r.descriptor.accurate_fn();
    out.elapsed_region_ns = since(start);
    out.elapsed_total_ns = out.elapsed_region_ns;
    ++r.stats.accurate_calls;
  } else {
    const bool infer =
        ml.mode == MlMode::Infer || (ml.mode == MlMode::Predicated && *predicate);
    auto t = Clock::now();
    std::vector<Tensor> gathered;
    gathered.reserve(r.inputs.size());
    for (const auto& b : r.inputs) gathered.push_back(b.plan.gather(b.array));
    Tensor inputs = concat_features(gathered, r.batch, r.sweep);
    out.elapsed_map_to_ns = since(t);

    if (infer) {
      out.path_taken = PathTaken::Surrogate;
      const Model& model = model_for(r);
      t = Clock::now();
      Tensor y = model.infer(inputs.reshaped({r.batch, r.in_features}));
      out.elapsed_infer_ns = std::max<std::int64_t>(1, since(t));
      out.elapsed_region_ns = out.elapsed_infer_ns;

      t = Clock::now();
      auto values = y.cast(r.inputs.front().array.dtype());
      std::int64_t base = 0;
      for (const auto& b : r.outputs) {
        const std::int64_t g = b.plan.features();
        Tensor part(values.dtype(), b.plan.tensor_shape());
        visit_dtype(values.dtype(), [&](auto tag) {
          using T = decltype(tag);
          auto src = values.template values<T>();
          auto dst = part.template values<T>();
          for (std::int64_t row = 0; row < r.batch; ++row) {
            std::copy_n(src.begin() + row * r.out_features + base, g, dst.begin() + row * g);
          }
        });
        b.plan.scatter(part, b.array);
        base += g;
      }
      out.elapsed_map_from_ns = since(t);
      ++r.stats.surrogate_calls;
    } else {
      t = Clock::now();
      r.descriptor.accurate_fn();
      out.elapsed_region_ns = std::max<std::int64_t>(1, since(t));
      ++r.stats.accurate_calls;

      if (ml.mode != MlMode::Infer) {
        t = Clock::now();
        std::vector<Tensor> produced;
        produced.reserve(r.outputs.size());
        for (const auto& b : r.outputs) produced.push_back(b.plan.gather(b.array));
        Tensor outputs = concat_features(produced, r.batch, r.sweep);
        out.elapsed_map_from_ns = since(t);
        out.record_index = database_for(r).append_record(
            r.descriptor.name, inputs, outputs, static_cast<std::uint64_t>(out.elapsed_region_ns));
        ++r.stats.records;
      }
    }
    out.elapsed_total_ns = since(start);
  }

  ++r.stats.invocations;
  r.stats.time_region_ns += out.elapsed_region_ns;
  r.stats.time_map_to_ns += out.elapsed_map_to_ns;
  r.stats.time_map_from_ns += out.elapsed_map_from_ns;
  r.stats.time_infer_ns += out.elapsed_infer_ns;
  r.stats.time_total_ns += out.elapsed_total_ns;
  return out;
}

void Runtime::rebind(RegionHandle handle, std::string_view array, const ArrayBuffer& buffer) {
  Region& r = region(handle);
  bool found = false;
  for (auto* list : {&r.inputs, &r.outputs}) {
    for (auto& b : *list) {
      if (b.array_name != array) continue;
      if (b.array.dtype() != buffer.dtype() || b.array.shape() != buffer.shape()) {
        throw Error(ErrorCode::ShapeMismatch,
                    "rebinding '" + std::string(array) + "' requires the same dtype and shape");
      }
      b.array = buffer;
      found = true;
    }
  }
  for (auto& m : r.descriptor.maps) {
    if (m.target.array == array) m.array = buffer;
  }
  if (!found) {
    throw Error(ErrorCode::UnresolvedReference, "region '" + r.descriptor.name +
                                                    "' does not map an array named '" +
                                                    std::string(array) + "'");
  }
}

void Runtime::unload_models() {
  models_.clear();
  for (auto& r : regions_) r->model_checked = false;
}

void Runtime::close_databases() { databases_.clear(); }

}  // namespace smlrt
