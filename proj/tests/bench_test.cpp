#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "smlrt/apps.hpp"
#include "smlrt/error.hpp"
#include "smlrt/inference.hpp"
#include "smlrt/metrics.hpp"
#include "smlrt/report.hpp"
#include "smlrt/srdb.hpp"
#include "support/temp_dir.hpp"

using namespace smlrt;
using testkit::TempDir;

namespace {

ErrorCode code_of(const std::function<void()>& fn, std::string* what = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (what) *what = e.what();
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::IoError;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

BenchConfig stencil(std::int64_t n, std::int64_t steps, BenchMode mode) {
  BenchConfig c;
  c.app = App::Stencil;
  c.n = n;
  c.m = n;
  c.steps = steps;
  c.mode = mode;
  return c;
}

// Slightly wrong Jacobi surrogate: under-weights the centre and adds a bias,
// so errors accumulate with every surrogate step.
Model drifting_model() {
  DenseLayer l;
  l.in_dim = 5;
  l.out_dim = 1;
  l.weights = {0.24f, 0.24f, 0.24f, 0.04f, 0.24f};
  l.bias = {0.001f};
  return Model({l});
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double black_scholes_put(const OptionParams& o) {
  const double st = o.volatility * std::sqrt(o.years);
  const double d1 = (std::log(o.spot / o.strike) + (o.rate + 0.5 * o.volatility * o.volatility) *
                                                       o.years) /
                    st;
  const double d2 = d1 - st;
  return o.strike * std::exp(-o.rate * o.years) * normal_cdf(-d2) - o.spot * normal_cdf(-d1);
}

}  // namespace

TEST(Metrics, RmseOfSmallVectors) {
  const std::vector<double> p{2, 2}, t{1, 3};
  EXPECT_DOUBLE_EQ(compute_rmse(p, t), 1.0);
  EXPECT_EQ(compute_rmse(t, t), 0.0);
  const std::vector<double> a{0, 0, 0}, b{3, 0, 4};
  EXPECT_NEAR(compute_rmse(a, b), std::sqrt(25.0 / 3.0), 1e-15);
}

TEST(Metrics, MapePercentAndEpsilonFloor) {
  const std::vector<double> p{110, 90}, t{100, 100};
  EXPECT_NEAR(compute_mape(p, t), 10.0, 1e-12);
  const std::vector<double> zp{1e-9}, zt{0.0};
  const double m = compute_mape(zp, zt);
  EXPECT_TRUE(std::isfinite(m));
  EXPECT_NEAR(m, 100.0 * 1e-9 / kMapeEpsilon, 1e-9);
}

TEST(Metrics, Errors) {
  const std::vector<double> a{1, 2}, b{1};
  const std::vector<double> empty;
  EXPECT_EQ(code_of([&] { compute_rmse(a, b); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([&] { compute_mape(a, b); }), ErrorCode::LengthMismatch);
  EXPECT_EQ(code_of([&] { compute_rmse(empty, empty); }), ErrorCode::EmptyInput);
  EXPECT_EQ(code_of([&] { compute_mape(empty, empty); }), ErrorCode::EmptyInput);
}

TEST(BenchConfigTest, Validate) {
  TempDir dir("bench");
  auto c = stencil(3, 1, BenchMode::Collect);
  c.db_path = (dir / "db").string();
  EXPECT_NO_THROW(validate(c));
  c.n = 2;
  EXPECT_EQ(code_of([&] { validate(c); }), ErrorCode::SemanticError);
  c.n = 3;
  c.m = 2;
  EXPECT_EQ(code_of([&] { validate(c); }), ErrorCode::SemanticError);
  c.m = 3;
  c.steps = 0;
  EXPECT_EQ(code_of([&] { validate(c); }), ErrorCode::SemanticError);
  c.steps = 1;
  c.db_path.clear();
  EXPECT_EQ(code_of([&] { validate(c); }), ErrorCode::MissingClause);
  c.mode = BenchMode::Infer;
  EXPECT_EQ(code_of([&] { validate(c); }), ErrorCode::MissingClause);
  c.model_path = "m";
  c.interleave = {0, 0};
  EXPECT_EQ(code_of([&] { validate(c); }), ErrorCode::InvalidSchedule);

  BenchConfig o;
  o.app = App::Options;
  o.db_path = "x";
  o.n_options = 0;
  EXPECT_EQ(code_of([&] { validate(o); }), ErrorCode::SemanticError);
  o.n_options = 4;
  o.depth = 0;
  EXPECT_EQ(code_of([&] { validate(o); }), ErrorCode::SemanticError);
}

TEST(BenchConfigTest, ParseInterleaveAndMode) {
  const auto i = parse_interleave("3:1");
  EXPECT_EQ(i.accurate, 3);
  EXPECT_EQ(i.surrogate, 1);
  EXPECT_EQ(parse_interleave("0:1").accurate, 0);
  for (const char* bad : {"", "3", "a:1", "1:", ":1", "-1:2", "0:0", "1:1:1"}) {
    EXPECT_EQ(code_of([&] { parse_interleave(bad); }), ErrorCode::InvalidSchedule) << bad;
  }
  EXPECT_EQ(parse_bench_mode("predicated"), BenchMode::Predicated);
  EXPECT_EQ(code_of([] { parse_bench_mode("train"); }), ErrorCode::SemanticError);
}

TEST(JacobiStep, UpdatesInteriorOnly) {
  std::vector<double> cur(16), next(16, -1.0);
  for (int k = 0; k < 16; ++k) cur[k] = k;
  jacobi_step(cur.data(), next.data(), 4, 4);
  // (1,1): neighbours 1, 9, 4, 6.
  EXPECT_EQ(next[5], (1.0 + 9.0 + 4.0 + 6.0) / 4.0);
  for (int k : {0, 1, 2, 3, 4, 7, 8, 11, 12, 13, 14, 15}) EXPECT_EQ(next[k], -1.0);
}

TEST(StencilBench, CollectSmallGrid) {
  TempDir dir("bench");
  auto c = stencil(4, 3, BenchMode::Collect);
  c.db_path = (dir / "db").string();
  const auto r = run_stencil(c);
  EXPECT_EQ(r.records_written, 3);
  EXPECT_EQ(r.accurate_calls, 3);
  EXPECT_EQ(r.surrogate_calls, 0);
  // Collect mode runs the original kernel: the field matches the reference.
  for (double e : r.per_step_rmse) EXPECT_EQ(e, 0.0);

  const auto info = db_info(c.db_path);
  ASSERT_EQ(info.regions.size(), 1u);
  const auto& reg = info.regions[0];
  EXPECT_EQ(reg.name, "stencil");
  EXPECT_EQ(reg.record_count, 3);
  EXPECT_EQ(reg.input_shape, (Shape{2, 2, 5}));
  EXPECT_EQ(reg.output_shape, (Shape{2, 2, 1}));
  EXPECT_EQ(reg.dtype, DType::f32);
}

TEST(StencilBench, CollectedRecordsFollowTheField) {
  TempDir dir("bench");
  auto c = stencil(5, 2, BenchMode::Collect);
  c.db_path = (dir / "db").string();
  c.dtype = DType::f64;
  run_stencil(c);

  // Independent replay of the field.
  auto field = initial_field(5, 5, c.seed);
  auto db = Database::open(c.db_path, OpenMode::Read);
  const auto recs = db.read_records("stencil", 0, 2);
  for (const auto& rec : recs) {
    auto next = field;
    jacobi_step(field.data(), next.data(), 5, 5);
    const Tensor& in = rec.inputs;
    const Tensor& out = rec.outputs;
    const auto iv = in.values<double>();
    const auto ov = out.values<double>();
    for (int i = 1; i < 4; ++i) {
      for (int j = 1; j < 4; ++j) {
        const std::size_t p = static_cast<std::size_t>((i - 1) * 3 + (j - 1));
        const double want[5] = {field[(i - 1) * 5 + j], field[(i + 1) * 5 + j],
                                field[i * 5 + j - 1], field[i * 5 + j], field[i * 5 + j + 1]};
        for (int f = 0; f < 5; ++f) EXPECT_EQ(iv[p * 5 + f], want[f]);
        EXPECT_EQ(ov[p], next[i * 5 + j]);
      }
    }
    field = next;
  }
}

TEST(StencilBench, ExactModelTracksReference) {
  TempDir dir("bench");
  save_model(jacobi_model(0.25f), dir / "model");
  auto c = stencil(32, 100, BenchMode::Infer);
  c.model_path = (dir / "model").string();
  const auto r = run_stencil(c);
  EXPECT_EQ(r.accurate_calls, 0);
  EXPECT_EQ(r.surrogate_calls, 100);
  ASSERT_EQ(r.per_step_rmse.size(), 100u);
  for (double e : r.per_step_rmse) EXPECT_LE(e, 1e-6);
  EXPECT_GT(r.time_surrogate_phase_ns, 0);
  EXPECT_LE(r.time_map_to_ns + r.time_map_from_ns + r.time_infer_ns, r.time_surrogate_phase_ns);
}

TEST(StencilBench, InterleavingReducesDrift) {
  TempDir dir("bench");
  save_model(drifting_model(), dir / "model");
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    double final_err[3];
    const Interleave schedules[3] = {{0, 1}, {1, 1}, {3, 1}};
    for (int s = 0; s < 3; ++s) {
      auto c = stencil(16, 40, BenchMode::Infer);
      c.seed = seed;
      c.model_path = (dir / "model").string();
      c.interleave = schedules[s];
      final_err[s] = run_stencil(c).qoi_error;
    }
    EXPECT_GT(final_err[0], 0.0);
    EXPECT_LT(final_err[1], final_err[0]) << "seed " << seed;
    EXPECT_LE(final_err[2], final_err[1]) << "seed " << seed;
  }
}

TEST(StencilBench, InterleaveCallCounts) {
  TempDir dir("bench");
  save_model(jacobi_model(0.25f), dir / "model");
  auto c = stencil(8, 10, BenchMode::Predicated);
  c.model_path = (dir / "model").string();
  c.db_path = (dir / "db").string();
  c.interleave = {3, 2};
  const auto r = run_stencil(c);
  // Schedule AAASS AAASS.
  EXPECT_EQ(r.accurate_calls, 6);
  EXPECT_EQ(r.surrogate_calls, 4);
  EXPECT_EQ(r.records_written, 6);
  ASSERT_EQ(r.per_step_path.size(), 10u);
  EXPECT_EQ(r.per_step_path[3], PathTaken::Surrogate);
  EXPECT_EQ(r.per_step_path[5], PathTaken::Accurate);
  EXPECT_EQ(db_info(c.db_path).regions.at(0).record_count, 6);
}

TEST(StencilBench, Reproducible) {
  TempDir dir("bench");
  auto run = [&](const std::string& leaf) {
    auto c = stencil(6, 4, BenchMode::Collect);
    c.seed = 7;
    c.db_path = (dir / leaf).string();
    return run_stencil(c);
  };
  const auto a = run("a");
  const auto b = run("b");
  EXPECT_EQ(a.qoi_error, b.qoi_error);
  for (const char* f : {"inputs.bin", "outputs.bin"}) {
    const auto pa = slurp(dir / "a" / "regions" / "stencil" / f);
    EXPECT_FALSE(pa.empty());
    EXPECT_EQ(pa, slurp(dir / "b" / "regions" / "stencil" / f)) << f;
  }
}

TEST(OptionsBench, CollectOneStep) {
  TempDir dir("bench");
  BenchConfig c;
  c.app = App::Options;
  c.n_options = 1024;
  c.depth = 64;
  c.steps = 1;
  c.db_path = (dir / "db").string();
  const auto r = run_options(c);
  EXPECT_EQ(r.records_written, 1);
  // Prices are stored in f32; the reference is f64.
  EXPECT_LT(r.qoi_error, 1e-4);
  const auto info = db_info(c.db_path);
  const auto* reg = info.find("options");
  ASSERT_NE(reg, nullptr);
  EXPECT_EQ(reg->record_count, 1);
  EXPECT_EQ(reg->input_shape, (Shape{1024, 5}));
  EXPECT_EQ(reg->output_shape, (Shape{1024, 1}));
}

TEST(OptionsBench, MismatchedModelNamesRegion) {
  TempDir dir("bench");
  save_model(identity_model(3), dir / "model");
  BenchConfig c;
  c.app = App::Options;
  c.n_options = 16;
  c.mode = BenchMode::Infer;
  c.model_path = (dir / "model").string();
  std::string what;
  EXPECT_EQ(code_of([&] { run_options(c); }, &what), ErrorCode::ModelShapeMismatch);
  EXPECT_NE(what.find("options"), std::string::npos) << what;
}

TEST(AmericanPut, TextbookValue) {
  // Five-month at-the-money put; the converged tree value is about 4.28.
  const OptionParams o{50.0, 50.0, 5.0 / 12.0, 0.1, 0.4};
  EXPECT_NEAR(american_put_binomial(o, 2000), 4.28, 0.03);
}

TEST(AmericanPut, ZeroRateMatchesEuropean) {
  // Without interest early exercise is never optimal.
  for (const OptionParams o : {OptionParams{40, 45, 1.0, 0.0, 0.3}, OptionParams{20, 10, 2.0, 0.0, 0.5},
                               OptionParams{10, 30, 0.5, 0.0, 0.2}}) {
    EXPECT_NEAR(american_put_binomial(o, 2000), black_scholes_put(o), 5e-3);
  }
}

TEST(AmericanPut, AtLeastIntrinsicAndEuropean) {
  const auto portfolio = generate_portfolio(200, 3);
  for (const auto& o : portfolio) {
    const double v = american_put_binomial(o, 64);
    EXPECT_GE(v, std::max(o.strike - o.spot, 0.0) - 1e-12);
    EXPECT_GE(v, black_scholes_put(o) - 0.05 * std::max(1.0, v));
  }
}

TEST(Portfolio, RangesAndDeterminism) {
  const auto a = generate_portfolio(500, 9);
  const auto b = generate_portfolio(500, 9);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].spot, b[k].spot);
    EXPECT_TRUE(a[k].spot >= 5 && a[k].spot <= 30);
    EXPECT_TRUE(a[k].strike >= 1 && a[k].strike <= 100);
    EXPECT_TRUE(a[k].years >= 0.25 && a[k].years <= 10);
    EXPECT_TRUE(a[k].rate >= 0.01 && a[k].rate <= 0.1);
    EXPECT_TRUE(a[k].volatility >= 0.1 && a[k].volatility <= 0.5);
  }
}

class ReportTest : public ::testing::Test {
 protected:
  void SetUp() override {
    save_model(jacobi_model(0.25f), dir_ / "model");
    auto c = stencil(12, 6, BenchMode::Predicated);
    c.interleave = {1, 2};
    c.model_path = (dir_ / "model").string();
    c.db_path = (dir_ / "db").string();
    report_ = run_stencil(c);
  }
  TempDir dir_{"report"};
  BenchReport report_;
};

TEST_F(ReportTest, JsonRoundTrips) {
  const auto j = nlohmann::json::parse(emit_report(report_, ReportFormat::Json));
  EXPECT_EQ(j["app"], "stencil");
  EXPECT_EQ(j["mode"], "predicated");
  EXPECT_EQ(j["steps"], 6);
  EXPECT_EQ(j["qoi_metric"], "rmse");
  EXPECT_EQ(j["accurate_calls"], 2);
  EXPECT_EQ(j["surrogate_calls"], 4);
  EXPECT_EQ(j["records_written"], 2);
  EXPECT_EQ(j["qoi_error"].get<double>(), report_.qoi_error);
  const auto& b = j["breakdown"];
  for (const char* k : {"time_map_to_ns", "time_map_from_ns", "time_infer_ns",
                        "time_surrogate_phase_ns", "time_total_ns", "mapping_share"}) {
    EXPECT_TRUE(b.contains(k)) << k;
  }
  EXPECT_LE(b["time_map_to_ns"].get<std::int64_t>() + b["time_map_from_ns"].get<std::int64_t>() +
                b["time_infer_ns"].get<std::int64_t>(),
            b["time_surrogate_phase_ns"].get<std::int64_t>());
  EXPECT_LE(b["time_surrogate_phase_ns"].get<std::int64_t>(), b["time_total_ns"].get<std::int64_t>());
  const double share = b["mapping_share"].get<double>();
  EXPECT_GT(share, 0.0);
  EXPECT_LE(share, 1.0);
  EXPECT_EQ(j["per_step_rmse"].size(), 6u);
  EXPECT_EQ(j["per_step_path"][0], "accurate");
  EXPECT_EQ(j["per_step_path"][1], "surrogate");
}

TEST_F(ReportTest, CsvOneRowPerStep) {
  std::istringstream in(emit_report(report_, ReportFormat::Csv));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "step,path,rmse,map_to_ns,map_from_ns,infer_ns,total_ns,mapping_share");
  int rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
    ASSERT_EQ(cols.size(), 8u) << line;
    EXPECT_EQ(std::stoi(cols[0]), rows);
    EXPECT_EQ(std::stod(cols[2]), std::stod(cols[2]));
    const double share = std::stod(cols[7]);
    if (cols[1] == "surrogate") {
      EXPECT_GT(share, 0.0);
      EXPECT_LE(std::stoll(cols[3]) + std::stoll(cols[4]) + std::stoll(cols[5]), std::stoll(cols[6]));
    } else {
      EXPECT_EQ(cols[1], "accurate");
      EXPECT_EQ(share, 0.0);
    }
    ++rows;
  }
  EXPECT_EQ(rows, 6);
}

TEST_F(ReportTest, TextAndFiles) {
  const auto text = emit_report(report_, ReportFormat::Text);
  EXPECT_NE(text.find("mapping share"), std::string::npos);
  EXPECT_EQ(format_for_path("r.json"), ReportFormat::Json);
  EXPECT_EQ(format_for_path("r.csv"), ReportFormat::Csv);
  EXPECT_EQ(format_for_path("r.txt"), ReportFormat::Text);
  EXPECT_EQ(parse_report_format("csv"), ReportFormat::Csv);
  EXPECT_EQ(code_of([] { parse_report_format("xml"); }), ErrorCode::SemanticError);

  write_report(report_, dir_ / "r.json");
  EXPECT_NO_THROW(nlohmann::json::parse(slurp(dir_ / "r.json")));
  EXPECT_EQ(code_of([&] { write_report(report_, dir_ / "missing" / "r.csv"); }), ErrorCode::IoError);
}

TEST(ReportMath, MappingShare) {
  BenchReport r;
  EXPECT_EQ(r.mapping_share(), 0.0);
  r.time_map_to_ns = 30;
  r.time_map_from_ns = 20;
  r.time_surrogate_phase_ns = 200;
  EXPECT_DOUBLE_EQ(r.mapping_share(), 0.25);
}
