#pragma once

// Desk-scale mini-apps driven through the runtime: a 2-D Jacobi stencil
// annotated with the classic five-point functors, and a portfolio of
// American puts priced on a binomial tree.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "smlrt/runtime.hpp"
#include "smlrt/tensor.hpp"

namespace smlrt {

enum class App { Stencil, Options };
enum class BenchMode { Collect, Infer, Predicated };

std::string_view to_string(App app) noexcept;
std::string_view to_string(BenchMode mode) noexcept;
BenchMode parse_bench_mode(std::string_view name);

struct Interleave {
  std::int64_t accurate = 0;
  std::int64_t surrogate = 1;
};

/// Parses "A:S".
Interleave parse_interleave(std::string_view text);

inline constexpr std::int64_t kDefaultTreeDepth = 64;

struct BenchConfig {
  App app = App::Stencil;
  std::int64_t n = 32;
  std::int64_t m = 32;
  std::int64_t n_options = 1024;
  std::int64_t depth = kDefaultTreeDepth;
  std::int64_t steps = 1;
  BenchMode mode = BenchMode::Collect;
  Interleave interleave;
  std::string db_path;
  std::string model_path;
  std::uint64_t seed = 42;
  DType dtype = DType::f32;
};

/// Throws SemanticError on invalid extents, steps or schedule.
void validate(const BenchConfig& config);

struct BenchReport {
  std::string app;
  std::string mode;
  std::string metric;  // "rmse"
  double qoi_error = 0.0;
  double mape = 0.0;
  /// Reference (accurate-only) wall time over the annotated run's wall time.
  double speedup = 0.0;
  std::int64_t steps = 0;
  std::int64_t time_map_to_ns = 0;     // surrogate invocations only
  std::int64_t time_map_from_ns = 0;   // surrogate invocations only
  std::int64_t time_infer_ns = 0;
  std::int64_t time_surrogate_phase_ns = 0;
  std::int64_t time_accurate_ns = 0;   // callback time on accurate invocations
  std::int64_t time_collect_map_ns = 0;
  std::int64_t time_total_ns = 0;
  std::int64_t time_reference_ns = 0;
  std::int64_t records_written = 0;
  std::int64_t accurate_calls = 0;
  std::int64_t surrogate_calls = 0;
  std::vector<double> per_step_rmse;
  std::vector<PathTaken> per_step_path;
  std::vector<std::int64_t> per_step_map_to_ns;
  std::vector<std::int64_t> per_step_map_from_ns;
  std::vector<std::int64_t> per_step_infer_ns;
  std::vector<std::int64_t> per_step_total_ns;

  /// Share of the surrogate phase spent mapping memory (0 with no surrogate steps).
  double mapping_share() const noexcept;
};

BenchReport run_stencil(const BenchConfig& config);
BenchReport run_options(const BenchConfig& config);
BenchReport run_bench(const BenchConfig& config);

/// Functor and map directives of the stencil region, as written for a host
/// program with extents N and M.
extern const std::vector<std::string> kStencilDirectives;
extern const std::vector<std::string> kOptionsDirectives;

/// Sum of two seeded Gaussian bumps on an n x m grid, row-major.
std::vector<double> initial_field(std::int64_t n, std::int64_t m, std::uint64_t seed);

/// next[i][j] = (cur[i-1][j] + cur[i+1][j] + cur[i][j-1] + cur[i][j+1]) / 4 on the
/// interior; the boundary of `next` is left untouched.
template <class T>
void jacobi_step(const T* cur, T* next, std::int64_t n, std::int64_t m) {
  for (std::int64_t i = 1; i < n - 1; ++i) {
    for (std::int64_t j = 1; j < m - 1; ++j) {
      next[i * m + j] = (cur[(i - 1) * m + j] + cur[(i + 1) * m + j] + cur[i * m + j - 1] +
                         cur[i * m + j + 1]) /
                        T(4);
    }
  }
}

struct OptionParams {
  double spot;
  double strike;
  double years;
  double rate;
  double volatility;
};

/// Portfolio drawn from fixed uniform ranges; records are (S, K, T, r, sigma).
std::vector<OptionParams> generate_portfolio(std::int64_t count, std::uint64_t seed);

/// Cox-Ross-Rubinstein tree price of an American put.
double american_put_binomial(const OptionParams& option, std::int64_t depth);

}  // namespace smlrt
