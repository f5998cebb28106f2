#pragma once

// SRDB: on-disk database of (inputs, outputs, elapsed time) records, one
// group per annotated region.
//
//   <db>/manifest.json
//   <db>/regions/<name>/inputs.bin    little-endian f32/f64, records concatenated
//   <db>/regions/<name>/outputs.bin
//   <db>/regions/<name>/times.bin     little-endian u64 nanoseconds
//   <db>/.lock                        held (flock) by the single writer
//
// Payloads are appended first and the manifest is replaced atomically last,
// so the committed record count never exceeds the payload on disk.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "smlrt/tensor.hpp"

namespace smlrt {

struct SrdbRegionInfo {
  std::string name;
  DType dtype = DType::f32;
  Shape input_shape;
  Shape output_shape;
  std::int64_t record_count = 0;
  std::string created_utc;

  friend bool operator==(const SrdbRegionInfo&, const SrdbRegionInfo&) = default;
};

struct SrdbManifest {
  int version = 1;
  std::vector<SrdbRegionInfo> regions;

  const SrdbRegionInfo* find(std::string_view region) const noexcept;
  friend bool operator==(const SrdbManifest&, const SrdbManifest&) = default;
};

struct SrdbRecord {
  std::int64_t index = 0;
  Tensor inputs;
  Tensor outputs;
  std::uint64_t elapsed_ns = 0;
};

enum class OpenMode { Create, Append, Read };

inline constexpr int kSrdbVersion = 1;

class Database {
 public:
  /// Create: path absent or an empty directory. Append/Read: valid manifest.
  /// Create and Append take the writer lock for the lifetime of the handle.
  static Database open(const std::filesystem::path& path, OpenMode mode);
  /// Append when a manifest exists, Create otherwise.
  static Database open_or_create(const std::filesystem::path& path);

  Database(Database&&) noexcept;
  Database& operator=(Database&&) noexcept;
  Database(const Database&) = delete;
  Database& operator=(const Database&) = delete;
  ~Database();

  /// The first append to a region fixes its dtype and per-record shapes.
  std::int64_t append_record(std::string_view region, const Tensor& inputs, const Tensor& outputs,
                             std::uint64_t elapsed_ns);

  /// Records [begin, end) of `region`.
  std::vector<SrdbRecord> read_records(std::string_view region, std::int64_t begin,
                                       std::int64_t end) const;

  const SrdbManifest& info() const noexcept { return manifest_; }
  const std::filesystem::path& path() const noexcept { return path_; }
  OpenMode mode() const noexcept { return mode_; }

 private:
  Database(std::filesystem::path path, OpenMode mode);
  void write_manifest() const;
  void release_lock() noexcept;

  std::filesystem::path path_;
  OpenMode mode_ = OpenMode::Read;
  SrdbManifest manifest_;
  int lock_fd_ = -1;
};

/// Reads and validates the manifest without taking the writer lock.
SrdbManifest db_info(const std::filesystem::path& path);

std::string manifest_to_json(const SrdbManifest& manifest);

}  // namespace smlrt
