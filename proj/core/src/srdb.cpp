#include "smlrt/srdb.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "smlrt/error.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace smlrt {

namespace {

constexpr const char* kManifest = "manifest.json";
constexpr const char* kLock = ".lock";

fs::path region_dir(const fs::path& db, std::string_view region) {
  return db / "regions" / std::string(region);
}

void check_region_name(std::string_view name) {
  const bool ok = !name.empty() && name != "." && name != ".." &&
                  std::all_of(name.begin(), name.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
                           c == '.';
                  });
  if (!ok) {
    throw Error(ErrorCode::SemanticError,
                "region name '" + std::string(name) + "' is not a valid SRDB group name");
  }
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::uintmax_t file_size_or_zero(const fs::path& p) {
  std::error_code ec;
  const auto n = fs::file_size(p, ec);
  return ec ? 0 : n;
}

// Payload bytes are little-endian on disk.
void to_little_endian(std::span<std::byte> bytes, std::size_t width) {
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i + width <= bytes.size(); i += width) {
      std::reverse(bytes.begin() + i, bytes.begin() + i + width);
    }
  } else {
    (void)bytes;
    (void)width;
  }
}

void append_bytes(const fs::path& file, std::span<const std::byte> bytes, std::size_t width) {
  std::vector<std::byte> buf(bytes.begin(), bytes.end());
  to_little_endian(buf, width);
  std::ofstream out(file, std::ios::binary | std::ios::app);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + file.string());
}

void read_bytes(const fs::path& file, std::uint64_t offset, std::span<std::byte> out,
                std::size_t width) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + file.string());
  in.seekg(static_cast<std::streamoff>(offset));
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (static_cast<std::size_t>(in.gcount()) != out.size()) {
    throw Error(ErrorCode::CorruptManifest, "short read from " + file.string());
  }
  to_little_endian(out, width);
}

Shape shape_from_json(const ordered_json& j) {
  Shape s;
  for (const auto& v : j) {
    const auto extent = v.get<std::int64_t>();
    if (extent <= 0) throw Error(ErrorCode::CorruptManifest, "non-positive extent in manifest");
    s.push_back(extent);
  }
  return s;
}

SrdbManifest parse_manifest(const fs::path& db) {
  const fs::path file = db / kManifest;
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::IoError, "no SRDB manifest at " + file.string());
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const ordered_json::exception& e) {
    throw Error(ErrorCode::CorruptManifest, file.string() + ": " + e.what());
  }
  SrdbManifest m;
  try {
    m.version = j.at("version").get<int>();
    if (m.version != kSrdbVersion) {
      throw Error(ErrorCode::VersionMismatch, "SRDB version " + std::to_string(m.version) +
                                                  " is not supported (expected " +
                                                  std::to_string(kSrdbVersion) + ")");
    }
    for (const auto& r : j.at("regions")) {
      SrdbRegionInfo info;
      info.name = r.at("name").get<std::string>();
      info.dtype = parse_dtype(r.at("dtype").get<std::string>());
      info.input_shape = shape_from_json(r.at("input_shape"));
      info.output_shape = shape_from_json(r.at("output_shape"));
      info.record_count = r.at("record_count").get<std::int64_t>();
      info.created_utc = r.at("created_utc").get<std::string>();
      if (info.record_count < 0) throw Error(ErrorCode::CorruptManifest, "negative record_count");
      check_region_name(info.name);
      m.regions.push_back(std::move(info));
    }
  } catch (const ordered_json::exception& e) {
    throw Error(ErrorCode::CorruptManifest, file.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::VersionMismatch || e.code() == ErrorCode::CorruptManifest) throw;
    throw Error(ErrorCode::CorruptManifest, file.string() + ": " + e.what());
  }
  return m;
}

struct PayloadSizes {
  std::uintmax_t inputs, outputs, times;
};

PayloadSizes committed_sizes(const SrdbRegionInfo& r) {
  const auto n = static_cast<std::uintmax_t>(r.record_count);
  const auto width = dtype_size(r.dtype);
  return {n * static_cast<std::uintmax_t>(element_count(r.input_shape)) * width,
          n * static_cast<std::uintmax_t>(element_count(r.output_shape)) * width, n * 8};
}

// Payload files may run past the committed size after an interrupted append;
// shorter files mean committed records are missing.
void check_payloads(const fs::path& db, const SrdbManifest& m, bool truncate_tail) {
  for (const auto& r : m.regions) {
    const auto dir = region_dir(db, r.name);
    const auto want = committed_sizes(r);
    const std::pair<const char*, std::uintmax_t> files[] = {
        {"inputs.bin", want.inputs}, {"outputs.bin", want.outputs}, {"times.bin", want.times}};
    for (const auto& [name, size] : files) {
      const auto have = file_size_or_zero(dir / name);
      if (have < size) {
        throw Error(ErrorCode::CorruptManifest,
                    "region '" + r.name + "': " + name + " holds " + std::to_string(have) +
                        " bytes but the manifest commits " + std::to_string(size));
      }
      if (have > size) {
        spdlog::warn("srdb: region '{}' {} has {} uncommitted trailing bytes", r.name, name,
                     have - size);
        if (truncate_tail) fs::resize_file(dir / name, size);
      }
    }
  }
}

}  // namespace

const SrdbRegionInfo* SrdbManifest::find(std::string_view region) const noexcept {
  for (const auto& r : regions) {
    if (r.name == region) return &r;
  }
  return nullptr;
}

std::string manifest_to_json(const SrdbManifest& manifest) {
  ordered_json j;
  j["version"] = manifest.version;
  j["regions"] = ordered_json::array();
  for (const auto& r : manifest.regions) {
    ordered_json e;
    e["name"] = r.name;
    e["dtype"] = std::string(to_string(r.dtype));
    e["input_shape"] = r.input_shape;
    e["output_shape"] = r.output_shape;
    e["record_count"] = r.record_count;
    e["created_utc"] = r.created_utc;
    j["regions"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

SrdbManifest db_info(const fs::path& path) {
  SrdbManifest m = parse_manifest(path);
  check_payloads(path, m, false);
  return m;
}

Database Database::open(const fs::path& path, OpenMode mode) { return Database(path, mode); }

Database Database::open_or_create(const fs::path& path) {
  return Database(path, fs::exists(path / kManifest) ? OpenMode::Append : OpenMode::Create);
}

Database::Database(fs::path path, OpenMode mode) : path_(std::move(path)), mode_(mode) {
  std::error_code ec;
  if (mode == OpenMode::Create) {
    if (fs::exists(path_, ec)) {
      if (!fs::is_directory(path_, ec)) {
        throw Error(ErrorCode::IoError, path_.string() + " exists and is not a directory");
      }
      if (!fs::is_empty(path_, ec)) {
        throw Error(ErrorCode::IoError, "cannot create SRDB in non-empty directory " +
                                            path_.string());
      }
    }
    fs::create_directories(path_ / "regions", ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + path_.string() + ": " + ec.message());
  }
  if (mode != OpenMode::Read) {
    const auto lock_path = path_ / kLock;
    lock_fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (lock_fd_ < 0) throw Error(ErrorCode::IoError, "cannot open " + lock_path.string());
    if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(lock_fd_);
      lock_fd_ = -1;
      throw Error(ErrorCode::DatabaseLocked, path_.string() + " is held by another writer");
    }
  }
  try {
    if (mode == OpenMode::Create) {
      manifest_ = SrdbManifest{};
      write_manifest();
    } else {
      manifest_ = parse_manifest(path_);
      check_payloads(path_, manifest_, mode == OpenMode::Append);
    }
  } catch (...) {
    release_lock();
    throw;
  }
  spdlog::debug("srdb: opened {} ({} regions)", path_.string(), manifest_.regions.size());
}

Database::Database(Database&& other) noexcept
    : path_(std::move(other.path_)),
      mode_(other.mode_),
      manifest_(std::move(other.manifest_)),
      lock_fd_(std::exchange(other.lock_fd_, -1)) {}

Database& Database::operator=(Database&& other) noexcept {
  if (this != &other) {
    release_lock();
    path_ = std::move(other.path_);
    mode_ = other.mode_;
    manifest_ = std::move(other.manifest_);
    lock_fd_ = std::exchange(other.lock_fd_, -1);
  }
  return *this;
}

Database::~Database() { release_lock(); }

void Database::release_lock() noexcept {
  if (lock_fd_ >= 0) {
    ::flock(lock_fd_, LOCK_UN);
    ::close(lock_fd_);
    lock_fd_ = -1;
  }
}

void Database::write_manifest() const {
  const fs::path tmp = path_ / "manifest.json.tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << manifest_to_json(manifest_);
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path_ / kManifest, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot commit manifest: " + ec.message());
}

std::int64_t Database::append_record(std::string_view region, const Tensor& inputs,
                                     const Tensor& outputs, std::uint64_t elapsed_ns) {
  if (mode_ == OpenMode::Read) {
    throw Error(ErrorCode::IoError, "database " + path_.string() + " is open read-only");
  }
  if (elapsed_ns == 0) throw Error(ErrorCode::SemanticError, "elapsed_ns must be positive");
  if (inputs.dtype() != outputs.dtype()) {
    throw Error(ErrorCode::DtypeMismatch, "region records hold a single dtype");
  }
  check_region_name(region);

  auto it = std::find_if(manifest_.regions.begin(), manifest_.regions.end(),
                         [&](const SrdbRegionInfo& r) { return r.name == region; });
  if (it == manifest_.regions.end()) {
    std::error_code ec;
    fs::create_directories(region_dir(path_, region), ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create region directory: " + ec.message());
    manifest_.regions.push_back(SrdbRegionInfo{std::string(region), inputs.dtype(), inputs.shape(),
                                               outputs.shape(), 0, utc_now()});
    it = std::prev(manifest_.regions.end());
  } else if (it->dtype != inputs.dtype() || it->input_shape != inputs.shape() ||
             it->output_shape != outputs.shape()) {
    throw Error(ErrorCode::ShapeDrift,
                "region '" + it->name + "' stores " + std::string(to_string(it->dtype)) + " " +
                    shape_to_string(it->input_shape) + " -> " + shape_to_string(it->output_shape) +
                    " records, got " + std::string(to_string(inputs.dtype())) + " " +
                    shape_to_string(inputs.shape()) + " -> " + shape_to_string(outputs.shape()));
  }

  const auto dir = region_dir(path_, region);
  const auto width = dtype_size(inputs.dtype());
  const std::uint64_t time_le = elapsed_ns;
  append_bytes(dir / "inputs.bin", inputs.bytes(), width);
  append_bytes(dir / "outputs.bin", outputs.bytes(), width);
  append_bytes(dir / "times.bin", std::as_bytes(std::span(&time_le, 1)), 8);

  const std::int64_t index = it->record_count;
  ++it->record_count;
  try {
    write_manifest();
  } catch (...) {
    --it->record_count;
    throw;
  }
  return index;
}

std::vector<SrdbRecord> Database::read_records(std::string_view region, std::int64_t begin,
                                               std::int64_t end) const {
  const SrdbRegionInfo* info = manifest_.find(region);
  if (!info) throw Error(ErrorCode::UnknownRegion, "no region '" + std::string(region) + "'");
  if (begin < 0 || end < begin || end > info->record_count) {
    throw Error(ErrorCode::RangeOutOfBounds,
                "records [" + std::to_string(begin) + ", " + std::to_string(end) +
                    ") outside region '" + info->name + "' with " +
                    std::to_string(info->record_count) + " records");
  }
  const auto dir = region_dir(path_, region);
  const auto width = dtype_size(info->dtype);
  const auto in_bytes = static_cast<std::uint64_t>(element_count(info->input_shape)) * width;
  const auto out_bytes = static_cast<std::uint64_t>(element_count(info->output_shape)) * width;

  std::vector<SrdbRecord> records;
  records.reserve(static_cast<std::size_t>(end - begin));
  for (std::int64_t k = begin; k < end; ++k) {
    SrdbRecord rec;
    rec.index = k;
    rec.inputs = Tensor(info->dtype, info->input_shape);
    rec.outputs = Tensor(info->dtype, info->output_shape);
    const auto u = static_cast<std::uint64_t>(k);
    read_bytes(dir / "inputs.bin", u * in_bytes, rec.inputs.bytes(), width);
    read_bytes(dir / "outputs.bin", u * out_bytes, rec.outputs.bytes(), width);
    std::uint64_t t = 0;
    read_bytes(dir / "times.bin", u * 8, std::as_writable_bytes(std::span(&t, 1)), 8);
    rec.elapsed_ns = t;
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace smlrt
