// Checked-in files from outside the library (a numpy writer) and golden
// outputs of earlier builds; see fixtures/make_fixtures.py.

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "smlrt/apps.hpp"
#include "smlrt/inference.hpp"
#include "smlrt/srdb.hpp"
#include "support/temp_dir.hpp"

using namespace smlrt;
using testkit::TempDir;

namespace {

const std::filesystem::path kFixtures = SMLRT_FIXTURE_DIR;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Fixtures, ExternallyWrittenDatabase) {
  const auto db = Database::open(kFixtures / "srdb_external", OpenMode::Read);
  const auto* info = db.info().find("toy");
  ASSERT_NE(info, nullptr);
  EXPECT_EQ(info->dtype, DType::f64);
  EXPECT_EQ(info->input_shape, (Shape{3, 2}));
  EXPECT_EQ(info->output_shape, (Shape{3}));
  ASSERT_EQ(info->record_count, 4);
  const auto recs = db.read_records("toy", 0, 4);
  for (std::int64_t r = 0; r < 4; ++r) {
    const auto& rec = recs[static_cast<std::size_t>(r)];
    EXPECT_EQ(rec.index, r);
    EXPECT_EQ(rec.elapsed_ns, static_cast<std::uint64_t>(1000 + r));
    const auto in = rec.inputs.values<double>();
    const auto out = rec.outputs.values<double>();
    ASSERT_EQ(in.size(), 6u);
    ASSERT_EQ(out.size(), 3u);
    for (std::size_t k = 0; k < 6; ++k) EXPECT_EQ(in[k], 100.0 * double(r) + 0.25 * double(k));
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(out[k], -double(r) - 0.5 * double(k));
  }
}

TEST(Fixtures, ExternallyWrittenModel) {
  const Model m = load_model(kFixtures / "mlp_tanh");
  EXPECT_EQ(m.input_features(), 5);
  EXPECT_EQ(m.output_features(), 1);
  EXPECT_EQ(m.parameter_count(), 29);
  const auto j = nlohmann::json::parse(slurp(kFixtures / "mlp_tanh" / "expected.json"));
  const auto rows = j["inputs"].get<std::vector<std::vector<double>>>();
  const auto want = j["outputs"].get<std::vector<std::vector<double>>>();
  std::vector<float> x;
  for (const auto& row : rows) x.insert(x.end(), row.begin(), row.end());
  const Tensor batch = Tensor::from_values<float>({std::int64_t(rows.size()), 5}, x);
  const Tensor y = m.infer(batch);
  const auto got = y.values<float>();
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], want[k][0], 1e-5) << k;
}

TEST(Fixtures, GoldenStencilDatabase) {
  TempDir dir("golden");
  BenchConfig c;
  c.n = 4;
  c.m = 4;
  c.steps = 3;
  c.db_path = (dir / "db").string();
  run_stencil(c);

  const auto golden = db_info(kFixtures / "srdb_stencil_4x4");
  auto fresh = db_info(c.db_path);
  ASSERT_EQ(fresh.regions.size(), 1u);
  fresh.regions[0].created_utc = golden.regions.at(0).created_utc;
  EXPECT_EQ(fresh, golden);
  for (const char* f : {"inputs.bin", "outputs.bin"}) {
    EXPECT_EQ(slurp(dir / "db" / "regions" / "stencil" / f),
              slurp(kFixtures / "srdb_stencil_4x4" / "regions" / "stencil" / f))
        << f;
  }
}

TEST(Fixtures, GoldenJacobiModel) {
  TempDir dir("golden");
  save_model(jacobi_model(0.25f), dir / "m");
  for (const char* f : {"model.json", "weights.bin"}) {
    EXPECT_EQ(slurp(dir / "m" / f), slurp(kFixtures / "jacobi_model" / f)) << f;
  }
  // Feature order [up, down, left, center, right].
  const Model m = load_model(kFixtures / "jacobi_model");
  const Tensor y = m.infer(Tensor::from_values<float>({1, 5}, {1, 9, 4, 5, 6}));
  EXPECT_EQ(y.values<float>()[0], 5.0f);
}
