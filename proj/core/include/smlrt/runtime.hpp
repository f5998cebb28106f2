#pragma once

// Execution control for annotated regions.
//
// Each invocation takes exactly one path:
//   accurate  - run the host callback; in collect mode, gather inputs before
//               and outputs after it and append a database record.
//   surrogate - gather inputs, run the model on [B, F], scatter [B, G] into
//               the output arrays. The callback is not called.
//
// `predicated` regions choose per call: false collects, true infers. An
// `if(...)` clause gates the mechanism: false runs the callback with no
// mapping and no collection.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "smlrt/bridge.hpp"
#include "smlrt/directive.hpp"
#include "smlrt/inference.hpp"
#include "smlrt/srdb.hpp"
#include "smlrt/tensor.hpp"

namespace smlrt {

/// A tensor map applied to one concrete host array.
struct BoundMap {
  Direction direction = Direction::To;
  FunctorDecl functor;
  MapTarget target;
  ArrayBuffer array;
};

struct RegionDescriptor {
  std::string name;
  std::function<void()> accurate_fn;
  std::vector<BoundMap> maps;
  MlDirective ml;
};

enum class PathTaken { Accurate, Surrogate };

std::string_view to_string(PathTaken path) noexcept;

struct RegionOutcome {
  PathTaken path_taken = PathTaken::Accurate;
  /// Time in the region body: the callback, or the model forward pass.
  std::int64_t elapsed_region_ns = 0;
  std::int64_t elapsed_map_to_ns = 0;
  std::int64_t elapsed_map_from_ns = 0;
  std::int64_t elapsed_infer_ns = 0;
  /// Wall time of the whole invocation, including database writes.
  std::int64_t elapsed_total_ns = 0;
  std::optional<std::int64_t> record_index;
};

struct RegionStats {
  std::int64_t invocations = 0;
  std::int64_t accurate_calls = 0;
  std::int64_t surrogate_calls = 0;
  std::int64_t records = 0;
  std::int64_t model_loads = 0;
  std::int64_t time_region_ns = 0;
  std::int64_t time_map_to_ns = 0;
  std::int64_t time_map_from_ns = 0;
  std::int64_t time_infer_ns = 0;
  std::int64_t time_total_ns = 0;
};

class RegionHandle {
 public:
  RegionHandle() = default;
  std::size_t index() const noexcept { return index_; }
  friend bool operator==(RegionHandle, RegionHandle) = default;

 private:
  friend class Runtime;
  explicit RegionHandle(std::size_t index) : index_(index) {}
  std::size_t index_ = static_cast<std::size_t>(-1);
};

using ArrayMap = std::map<std::string, ArrayBuffer, std::less<>>;

/// Not thread-safe; one runtime per thread of control.
class Runtime {
 public:
  Runtime();
  ~Runtime();
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  /// Re-declaring an identical functor is a no-op.
  void declare_functor(FunctorDecl functor);
  const FunctorDecl& functor(std::string_view name) const;

  /// Resolves the map's functor and binds each target to its host array.
  std::vector<BoundMap> bind_maps(const MapDirective& map, const ArrayMap& arrays) const;

  /// Registering the same name again with an identical descriptor returns
  /// the existing handle. Models and databases open lazily on first use.
  RegionHandle register_region(RegionDescriptor descriptor);

  /// Parses functor, map and ml directives and registers the region.
  RegionHandle register_region(std::string name, std::function<void()> accurate_fn,
                               const std::vector<std::string>& directives, const ArrayMap& arrays,
                               const Environment& env = {});

  /// `predicate` is required for predicated regions, `if_value` for regions
  /// with an if(...) clause.
  RegionOutcome invoke_region(RegionHandle handle, std::optional<bool> predicate = std::nullopt,
                              std::optional<bool> if_value = std::nullopt);

  /// Points every map of `array` at a new buffer of identical dtype and shape.
  void rebind(RegionHandle handle, std::string_view array, const ArrayBuffer& buffer);

  RegionStats stats(RegionHandle handle) const;
  const std::string& region_name(RegionHandle handle) const;

  /// Drops cached models; the next inference reloads from disk.
  void unload_models();
  /// Releases database handles and their writer locks.
  void close_databases();

 private:
  struct Region;
  Region& region(RegionHandle handle);
  const Region& region(RegionHandle handle) const;
  const Model& model_for(Region& region);
  Database& database_for(const Region& region);

  std::map<std::string, FunctorDecl, std::less<>> functors_;
  std::vector<std::unique_ptr<Region>> regions_;
  std::map<std::string, Model> models_;
  std::map<std::string, Database> databases_;
};

/// True when `step` falls on a surrogate slot of the repeating schedule
/// [n_accurate accurate steps, then n_surrogate surrogate steps].
bool interleave_predicate(std::int64_t step, std::int64_t n_accurate, std::int64_t n_surrogate);

}  // namespace smlrt
