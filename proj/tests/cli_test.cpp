#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "support/temp_dir.hpp"

using smlrt::testkit::TempDir;

namespace {

const std::string kFixtures = SMLRT_FIXTURE_DIR;

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class Cli : public ::testing::Test {
 protected:
  CliResult run(const std::string& args, const std::string& env = "") {
    const auto out = dir_ / "stdout";
    const auto err = dir_ / "stderr";
    const std::string cmd = env + " '" + std::string(SMLRT_CLI) + "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }
  std::string path(const std::string& leaf) const { return (dir_ / leaf).string(); }

  TempDir dir_{"cli"};
};

}  // namespace

TEST_F(Cli, HelpAndUsage) {
  auto r = run("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("bench"), std::string::npos);
  r = run("bench stencil --bogus");
  EXPECT_EQ(r.code, 1);
  r = run("");
  EXPECT_EQ(r.code, 1);
}

TEST_F(Cli, ParsePrintsCanonicalDirectives) {
  auto r = run("parse '" + kFixtures + "/stencil_listing.directives' -D N=16 -D M=16");
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::vector<std::string> got;
  for (std::string l; std::getline(lines, l);) got.push_back(l);
  ASSERT_EQ(got.size(), 5u);
  EXPECT_EQ(got[0],
            "#pragma approx tensor functor(ifnctr: [i, j, 0:5] = ([i-1, j], [i+1, j], [i, j-1:j+2]))");
  EXPECT_EQ(got[2], "#pragma approx tensor map(to: ifnctr(t[1:15, 1:15]))");

  r = run("parse '" + kFixtures + "/stencil_listing.directives'");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("UnboundVariable"), std::string::npos) << r.err;
}

TEST_F(Cli, ParseSyntaxErrorHasFilePosition) {
  std::ofstream(path("bad.directives")) << "#pragma approx ml(infer) in(a) out(b) model(\"m\")\n"
                                        << "#pragma approx tensor functor(f: [i, 0:1] = ([i] @))\n";
  const auto r = run("parse '" + path("bad.directives") + "'");
  EXPECT_EQ(r.code, 1);
  // '@' sits at line 2, column 50.
  EXPECT_NE(r.err.find("bad.directives:2:50:"), std::string::npos) << r.err;
}

TEST_F(Cli, ParseMissingFileIsIoError) {
  EXPECT_EQ(run("parse '" + path("absent") + "'").code, 2);
}

TEST_F(Cli, DbInfo) {
  auto r = run("db info '" + kFixtures + "/srdb_external'");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["regions"][0]["name"], "toy");
  EXPECT_EQ(j["regions"][0]["record_count"], 4);
  EXPECT_EQ(run("db info '" + path("nope") + "'").code, 2);
}

TEST_F(Cli, ModelJacobiAndInfo) {
  auto r = run("model jacobi --alpha 0.25 --out '" + path("m") + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(path("m") + "/weights.bin"), slurp(kFixtures + "/jacobi_model/weights.bin"));
  r = run("model info '" + path("m") + "'");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("input_features  5"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("5 -> 1 identity"), std::string::npos) << r.out;
  EXPECT_EQ(run("model info '" + path("none") + "'").code, 2);
}

TEST_F(Cli, BenchCollectThenInfo) {
  auto r = run("bench stencil --n 4 --m 4 --steps 3 --mode collect --db '" + path("db") +
               "' --format json");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["records_written"], 3);
  r = run("db info '" + path("db") + "'");
  const auto m = nlohmann::json::parse(r.out);
  EXPECT_EQ(m["regions"][0]["input_shape"], nlohmann::json::array({2, 2, 5}));
  EXPECT_EQ(m["regions"][0]["record_count"], 3);
}

TEST_F(Cli, BenchInferWritesReports) {
  ASSERT_EQ(run("model jacobi --out '" + path("m") + "'").code, 0);
  auto r = run("bench stencil --n 16 --m 16 --steps 10 --mode infer --model '" + path("m") +
               "' --out '" + path("r.json") + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("mapping share"), std::string::npos);
  const auto j = nlohmann::json::parse(slurp(path("r.json")));
  EXPECT_EQ(j["surrogate_calls"], 10);
  EXPECT_EQ(j["accurate_calls"], 0);
  EXPECT_LE(j["qoi_error"].get<double>(), 1e-6);

  r = run("bench stencil --n 8 --m 8 --steps 4 --mode infer --interleave 1:1 --model '" +
          path("m") + "' --out '" + path("r.csv") + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = slurp(path("r.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_NE(csv.find("\n1,surrogate,"), std::string::npos) << csv;
}

TEST_F(Cli, BenchErrorsMapToExitCodes) {
  // Validation failures exit 1.
  EXPECT_EQ(run("bench stencil --n 2 --mode collect --db '" + path("db") + "'").code, 1);
  EXPECT_EQ(run("bench stencil --mode infer").code, 1);
  EXPECT_EQ(run("bench stencil --mode infer --model m --interleave 0:0").code, 1);
  EXPECT_EQ(run("bench stencil --mode warp --db d").code, 1);
  // Missing model files are I/O failures.
  EXPECT_EQ(run("bench stencil --n 4 --m 4 --mode infer --model '" + path("absent") + "'").code, 2);
  // A truncated model manifest is an I/O-class failure as well.
  ASSERT_EQ(run("model jacobi --out '" + path("m") + "'").code, 0);
  std::ofstream(path("m") + "/model.json");
  EXPECT_EQ(run("bench options --count 4 --mode infer --model '" + path("m") + "'").code, 2);
}

TEST_F(Cli, OptionsShapeMismatchNamesRegion) {
  // 3 -> 3 identity; the options region feeds 5 features.
  std::filesystem::create_directories(path("m3"));
  std::vector<float> w{1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0};
  std::ofstream(path("m3") + "/weights.bin", std::ios::binary)
      .write(reinterpret_cast<const char*>(w.data()), static_cast<std::streamsize>(w.size() * 4));
  std::ofstream(path("m3") + "/model.json")
      << R"({"version":1,"dtype":"f32","input_features":3,"output_features":3,)"
      << R"("layers":[{"in":3,"out":3,"activation":"identity","weights_offset":0,"bias_offset":36}]})";
  auto r = run("bench options --count 8 --depth 8 --mode infer --model '" + path("m3") + "'");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("ModelShapeMismatch"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("options"), std::string::npos) << r.err;

  r = run("bench options --count 8 --depth 8 --mode infer --model '" + kFixtures + "/mlp_tanh'");
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(Cli, LogLevelFromEnvironment) {
  const auto r = run("bench stencil --n 4 --m 4 --steps 1 --db '" + path("db") + "'",
                     "SMLRT_LOG=debug");
  EXPECT_EQ(r.code, 0);
}
