#include "smlrt/apps.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <spdlog/spdlog.h>

#include "smlrt/error.hpp"
#include "smlrt/metrics.hpp"

namespace smlrt {

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t since(Clock::time_point start) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start).count();
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

// The ml directive for the chosen mode. Infer mode carries an if(...) gate so
// interleaved accurate steps skip collection.
std::string ml_directive(const BenchConfig& c, std::string_view in, std::string_view out) {
  std::string refs = " in(" + std::string(in) + ") out(" + std::string(out) + ")";
  switch (c.mode) {
    case BenchMode::Collect:
      return "#pragma approx ml(collect)" + refs + " db(" + quoted(c.db_path) + ")";
    case BenchMode::Infer:
      return "#pragma approx ml(infer)" + refs + " model(" + quoted(c.model_path) +
             ") if(use_surrogate)";
    case BenchMode::Predicated:
      return "#pragma approx ml(predicated:use_surrogate)" + refs + " db(" + quoted(c.db_path) +
             ") model(" + quoted(c.model_path) + ")";
  }
  return {};
}

// Accumulates invocation outcomes into the report's timing breakdown.
void account(BenchReport& report, const RegionOutcome& o) {
  report.per_step_path.push_back(o.path_taken);
  report.per_step_map_to_ns.push_back(o.elapsed_map_to_ns);
  report.per_step_map_from_ns.push_back(o.elapsed_map_from_ns);
  report.per_step_infer_ns.push_back(o.elapsed_infer_ns);
  report.per_step_total_ns.push_back(o.elapsed_total_ns);
  if (o.path_taken == PathTaken::Surrogate) {
    ++report.surrogate_calls;
    report.time_map_to_ns += o.elapsed_map_to_ns;
    report.time_map_from_ns += o.elapsed_map_from_ns;
    report.time_infer_ns += o.elapsed_infer_ns;
    report.time_surrogate_phase_ns += o.elapsed_total_ns;
  } else {
    ++report.accurate_calls;
    report.time_accurate_ns += o.elapsed_region_ns;
    report.time_collect_map_ns += o.elapsed_map_to_ns + o.elapsed_map_from_ns;
    if (o.record_index) ++report.records_written;
  }
}

RegionOutcome invoke_step(Runtime& rt, RegionHandle h, const BenchConfig& c, std::int64_t step) {
  const bool surrogate = interleave_predicate(step, c.interleave.accurate, c.interleave.surrogate);
  switch (c.mode) {
    case BenchMode::Collect: return rt.invoke_region(h);
    case BenchMode::Infer: return rt.invoke_region(h, std::nullopt, surrogate);
    case BenchMode::Predicated: return rt.invoke_region(h, surrogate);
  }
  return {};
}

void finish(BenchReport& report) {
  report.speedup = report.time_total_ns > 0
                       ? static_cast<double>(report.time_reference_ns) /
                             static_cast<double>(report.time_total_ns)
                       : 0.0;
  report.qoi_error = report.per_step_rmse.empty() ? 0.0 : report.per_step_rmse.back();
}

template <class T>
BenchReport stencil_impl(const BenchConfig& c) {
  const std::int64_t n = c.n;
  const std::int64_t m = c.m;
  const auto init = initial_field(n, m, c.seed);

  std::vector<T> a(init.begin(), init.end());
  std::vector<T> b = a;
  std::vector<T> ref_a = a;
  std::vector<T> ref_b = a;
  T* cur = a.data();
  T* next = b.data();
  T* ref_cur = ref_a.data();
  T* ref_next = ref_b.data();
  const auto cells = static_cast<std::size_t>(n * m);

  Runtime rt;
  std::vector<std::string> directives = kStencilDirectives;
  directives.push_back(ml_directive(c, "t", "tnew"));
  auto buffer = [&](T* p) { return ArrayBuffer(std::span<T>(p, cells), Shape{n, m}); };
  const RegionHandle h = rt.register_region(
      "stencil", [&] { jacobi_step(cur, next, n, m); }, directives,
      {{"t", buffer(cur)}, {"tnew", buffer(next)}}, Environment{{"N", n}, {"M", m}});

  BenchReport report;
  report.app = "stencil";
  report.mode = std::string(to_string(c.mode));
  report.metric = "rmse";
  report.steps = c.steps;

  std::vector<double> got;
  std::vector<double> want;
  for (std::int64_t step = 0; step < c.steps; ++step) {
    auto t0 = Clock::now();
    const RegionOutcome o = invoke_step(rt, h, c, step);
    std::swap(cur, next);
    rt.rebind(h, "t", buffer(cur));
    rt.rebind(h, "tnew", buffer(next));
    report.time_total_ns += since(t0);
    account(report, o);

    t0 = Clock::now();
    jacobi_step(ref_cur, ref_next, n, m);
    std::swap(ref_cur, ref_next);
    report.time_reference_ns += since(t0);

    got.clear();
    want.clear();
    for (std::int64_t i = 1; i < n - 1; ++i) {
      for (std::int64_t j = 1; j < m - 1; ++j) {
        got.push_back(static_cast<double>(cur[i * m + j]));
        want.push_back(static_cast<double>(ref_cur[i * m + j]));
      }
    }
    report.per_step_rmse.push_back(compute_rmse(got, want));
    if (step + 1 == c.steps) report.mape = compute_mape(got, want);
  }
  finish(report);
  return report;
}

template <class T>
BenchReport options_impl(const BenchConfig& c) {
  const std::int64_t count = c.n_options;
  std::vector<T> records(static_cast<std::size_t>(count * 5));
  std::vector<T> prices(static_cast<std::size_t>(count));

  Runtime rt;
  std::vector<std::string> directives = kOptionsDirectives;
  directives.push_back(ml_directive(c, "options", "prices"));
  const std::int64_t depth = c.depth;
  auto kernel = [&] {
    for (std::int64_t k = 0; k < count; ++k) {
      const T* r = records.data() + k * 5;
      prices[static_cast<std::size_t>(k)] = static_cast<T>(american_put_binomial(
          {double(r[0]), double(r[1]), double(r[2]), double(r[3]), double(r[4])}, depth));
    }
  };
  const RegionHandle h = rt.register_region(
      "options", kernel, directives,
      {{"options", ArrayBuffer(std::span<T>(records), Shape{count, 5})},
       {"prices", ArrayBuffer(std::span<T>(prices), Shape{count})}},
      Environment{{"NOPT", count}});

  BenchReport report;
  report.app = "options";
  report.mode = std::string(to_string(c.mode));
  report.metric = "rmse";
  report.steps = c.steps;

  std::vector<double> all_got;
  std::vector<double> all_want;
  std::vector<double> reference(static_cast<std::size_t>(count));
  for (std::int64_t step = 0; step < c.steps; ++step) {
    const auto portfolio = generate_portfolio(count, c.seed + static_cast<std::uint64_t>(step));
    for (std::int64_t k = 0; k < count; ++k) {
      const auto& p = portfolio[static_cast<std::size_t>(k)];
      T* r = records.data() + k * 5;
      r[0] = static_cast<T>(p.spot);
      r[1] = static_cast<T>(p.strike);
      r[2] = static_cast<T>(p.years);
      r[3] = static_cast<T>(p.rate);
      r[4] = static_cast<T>(p.volatility);
    }

    auto t0 = Clock::now();
    const RegionOutcome o = invoke_step(rt, h, c, step);
    report.time_total_ns += since(t0);
    account(report, o);

    t0 = Clock::now();
    for (std::int64_t k = 0; k < count; ++k) {
      const T* r = records.data() + k * 5;
      reference[static_cast<std::size_t>(k)] = american_put_binomial(
          {double(r[0]), double(r[1]), double(r[2]), double(r[3]), double(r[4])}, depth);
    }
    report.time_reference_ns += since(t0);

    std::vector<double> got(prices.begin(), prices.end());
    report.per_step_rmse.push_back(compute_rmse(got, reference));
    all_got.insert(all_got.end(), got.begin(), got.end());
    all_want.insert(all_want.end(), reference.begin(), reference.end());
  }
  finish(report);
  report.qoi_error = compute_rmse(all_got, all_want);
  report.mape = compute_mape(all_got, all_want);
  return report;
}

}  // namespace

const std::vector<std::string> kStencilDirectives = {
    "#pragma approx tensor functor(ifnctr: \\\n"
    "    [i, j,  0:5] = ( ([i-1, j], [i+1, j], \\ \n"
    "    [i, j-1:j+2]))",
    "#pragma approx tensor functor(ofnctr: \\\n"
    "    [i, j, 0:1] = ([i, j]))",
    "#pragma approx tensor map(to: \\\n"
    "    ifnctr(t[1:N-1, 1:M-1]))",
    "#pragma approx tensor map(from: \\\n"
    "        ofnctr(tnew[1:N-1, 1:M-1]))",
};

const std::vector<std::string> kOptionsDirectives = {
    "#pragma approx tensor functor(opt_in: [k, 0:5] = ([k, 0:5]))",
    "#pragma approx tensor functor(opt_out: [k, 0:1] = ([k]))",
    "#pragma approx tensor map(to: opt_in(options[0:NOPT]))",
    "#pragma approx tensor map(from: opt_out(prices[0:NOPT]))",
};

std::string_view to_string(App app) noexcept { return app == App::Stencil ? "stencil" : "options"; }

std::string_view to_string(BenchMode mode) noexcept {
  switch (mode) {
    case BenchMode::Collect: return "collect";
    case BenchMode::Infer: return "infer";
    case BenchMode::Predicated: return "predicated";
  }
  return "collect";
}

BenchMode parse_bench_mode(std::string_view name) {
  if (name == "collect") return BenchMode::Collect;
  if (name == "infer") return BenchMode::Infer;
  if (name == "predicated") return BenchMode::Predicated;
  throw Error(ErrorCode::SemanticError, "unknown mode '" + std::string(name) + "'");
}

Interleave parse_interleave(std::string_view text) {
  const auto colon = text.find(':');
  auto parse = [&](std::string_view s) -> std::int64_t {
    if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      throw Error(ErrorCode::InvalidSchedule, "interleave must look like A:S, got '" +
                                                  std::string(text) + "'");
    }
    return std::stoll(std::string(s));
  };
  if (colon == std::string_view::npos) {
    throw Error(ErrorCode::InvalidSchedule,
                "interleave must look like A:S, got '" + std::string(text) + "'");
  }
  Interleave out{parse(text.substr(0, colon)), parse(text.substr(colon + 1))};
  interleave_predicate(0, out.accurate, out.surrogate);
  return out;
}

double BenchReport::mapping_share() const noexcept {
  if (time_surrogate_phase_ns <= 0) return 0.0;
  return static_cast<double>(time_map_to_ns + time_map_from_ns) /
         static_cast<double>(time_surrogate_phase_ns);
}

void validate(const BenchConfig& c) {
  if (c.app == App::Stencil && (c.n < 3 || c.m < 3)) {
    throw Error(ErrorCode::SemanticError, "stencil grid must be at least 3x3");
  }
  if (c.app == App::Options && c.n_options < 1) {
    throw Error(ErrorCode::SemanticError, "option count must be positive");
  }
  if (c.app == App::Options && c.depth < 1) {
    throw Error(ErrorCode::SemanticError, "tree depth must be positive");
  }
  if (c.steps < 1) throw Error(ErrorCode::SemanticError, "steps must be at least 1");
  interleave_predicate(0, c.interleave.accurate, c.interleave.surrogate);
  if (c.mode != BenchMode::Infer && c.db_path.empty()) {
    throw Error(ErrorCode::MissingClause, std::string(to_string(c.mode)) + " mode needs --db");
  }
  if (c.mode != BenchMode::Collect && c.model_path.empty()) {
    throw Error(ErrorCode::MissingClause, std::string(to_string(c.mode)) + " mode needs --model");
  }
}

BenchReport run_stencil(const BenchConfig& config) {
  validate(config);
  return config.dtype == DType::f32 ? stencil_impl<float>(config) : stencil_impl<double>(config);
}

BenchReport run_options(const BenchConfig& config) {
  validate(config);
  return config.dtype == DType::f32 ? options_impl<float>(config) : options_impl<double>(config);
}

BenchReport run_bench(const BenchConfig& config) {
  return config.app == App::Stencil ? run_stencil(config) : run_options(config);
}

std::vector<double> initial_field(std::int64_t n, std::int64_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amplitude(0.5, 1.5);
  std::uniform_real_distribution<double> center(0.2, 0.8);
  std::uniform_real_distribution<double> width(0.05, 0.2);
  struct Bump {
    double a, cx, cy, s;
  };
  Bump bumps[2];
  for (auto& bump : bumps) bump = {amplitude(rng), center(rng), center(rng), width(rng)};

  std::vector<double> field(static_cast<std::size_t>(n * m));
  for (std::int64_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(n - 1);
    for (std::int64_t j = 0; j < m; ++j) {
      const double y = static_cast<double>(j) / static_cast<double>(m - 1);
      double v = 0.0;
      for (const auto& bump : bumps) {
        const double dx = x - bump.cx;
        const double dy = y - bump.cy;
        v += bump.a * std::exp(-(dx * dx + dy * dy) / (2.0 * bump.s * bump.s));
      }
      field[static_cast<std::size_t>(i * m + j)] = v;
    }
  }
  return field;
}

std::vector<OptionParams> generate_portfolio(std::int64_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> spot(5.0, 30.0);
  std::uniform_real_distribution<double> strike(1.0, 100.0);
  std::uniform_real_distribution<double> years(0.25, 10.0);
  std::uniform_real_distribution<double> rate(0.01, 0.1);
  std::uniform_real_distribution<double> vol(0.1, 0.5);
  std::vector<OptionParams> out(static_cast<std::size_t>(count));
  for (auto& o : out) o = {spot(rng), strike(rng), years(rng), rate(rng), vol(rng)};
  return out;
}

double american_put_binomial(const OptionParams& o, std::int64_t depth) {
  const double dt = o.years / static_cast<double>(depth);
  const double u = std::exp(o.volatility * std::sqrt(dt));
  const double d = 1.0 / u;
  const double growth = std::exp(o.rate * dt);
  const double p = (growth - d) / (u - d);
  const double disc = 1.0 / growth;

  std::vector<double> v(static_cast<std::size_t>(depth + 1));
  for (std::int64_t k = 0; k <= depth; ++k) {
    const double s = o.spot * std::pow(u, static_cast<double>(depth - 2 * k));
    v[static_cast<std::size_t>(k)] = std::max(o.strike - s, 0.0);
  }
  for (std::int64_t step = depth - 1; step >= 0; --step) {
    for (std::int64_t k = 0; k <= step; ++k) {
      const auto idx = static_cast<std::size_t>(k);
      const double hold = disc * (p * v[idx] + (1.0 - p) * v[idx + 1]);
      const double s = o.spot * std::pow(u, static_cast<double>(step - 2 * k));
      v[idx] = std::max(hold, o.strike - s);
    }
  }
  return v[0];
}

}  // namespace smlrt
