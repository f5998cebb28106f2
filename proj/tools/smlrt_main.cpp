// smlrt: directive checker, SRDB inspector and mini-app benchmark harness.
//
//   smlrt parse <file> [-D N=16 ...]
//   smlrt db info <path>
//   smlrt bench stencil --n 32 --m 32 --steps 100 --mode infer --model m/ --out r.json
//   smlrt bench options --count 1024 --depth 64 --mode collect --db db/
//   smlrt model jacobi --alpha 0.25 --out m/
//   smlrt model info <path>
//
// Exit codes: 0 success, 1 validation error, 2 I/O error.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "smlrt/apps.hpp"
#include "smlrt/directive.hpp"
#include "smlrt/error.hpp"
#include "smlrt/inference.hpp"
#include "smlrt/report.hpp"
#include "smlrt/srdb.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

void configure_logging() {
  const char* level = std::getenv("SMLRT_LOG");
  spdlog::set_pattern("[%l] %v");
  if (!level) {
    spdlog::set_level(spdlog::level::warn);
    return;
  }
  const std::string v = level;
  if (v == "debug") spdlog::set_level(spdlog::level::debug);
  else if (v == "info") spdlog::set_level(spdlog::level::info);
  else spdlog::set_level(spdlog::level::err);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw smlrt::Error(smlrt::ErrorCode::IoError, "cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cmd_parse(const std::string& file, const std::vector<std::string>& defines) {
  smlrt::Environment env;
  for (const auto& d : defines) {
    const auto eq = d.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw smlrt::Error(smlrt::ErrorCode::SemanticError, "-D expects NAME=VALUE, got '" + d + "'");
    }
    try {
      env[d.substr(0, eq)] = std::stoll(d.substr(eq + 1));
    } catch (const std::exception&) {
      throw smlrt::Error(smlrt::ErrorCode::SemanticError, "-D value is not an integer: '" + d + "'");
    }
  }
  const std::string text = read_file(file);
  try {
    for (const auto& entry : smlrt::parse_directive_file(text, env)) {
      std::cout << smlrt::pretty_print(entry.directive) << "\n";
    }
  } catch (const smlrt::SyntaxError& e) {
    const auto pos = smlrt::locate(text, e.offset());
    std::cerr << file << ":" << pos.line << ":" << pos.column << ": " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}

int cmd_db_info(const std::string& path) {
  std::cout << smlrt::manifest_to_json(smlrt::db_info(path));
  return 0;
}

int cmd_model_info(const std::string& path) {
  const auto model = smlrt::load_model(path);
  std::cout << "input_features  " << model.input_features() << "\n"
            << "output_features " << model.output_features() << "\n"
            << "parameters      " << model.parameter_count() << "\n";
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const auto& layer = model.layers()[l];
    std::cout << "layer " << l << "         " << layer.in_dim << " -> " << layer.out_dim << " "
              << smlrt::to_string(layer.activation) << "\n";
  }
  return 0;
}

int cmd_bench(smlrt::BenchConfig config, const std::string& mode, const std::string& interleave,
              const std::string& dtype, const std::string& out, const std::string& format) {
  config.mode = smlrt::parse_bench_mode(mode);
  config.interleave = smlrt::parse_interleave(interleave);
  config.dtype = smlrt::parse_dtype(dtype);
  const auto report = smlrt::run_bench(config);
  std::cout << smlrt::emit_report(report, smlrt::parse_report_format(format));
  if (!out.empty()) smlrt::write_report(report, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"smlrt - surrogate model runtime toolkit"};
  app.require_subcommand(1);

  std::string parse_file;
  std::vector<std::string> defines;
  auto* parse = app.add_subcommand("parse", "Parse a directive file and print canonical forms");
  parse->add_option("file", parse_file, "Directive file")->required();
  parse->add_option("-D,--define", defines, "Integer binding NAME=VALUE for map bounds");

  auto* db = app.add_subcommand("db", "Inspect SRDB databases");
  db->require_subcommand(1);
  std::string db_path;
  auto* db_info = db->add_subcommand("info", "Print the manifest of a database");
  db_info->add_option("path", db_path, "Database directory")->required();

  smlrt::BenchConfig config;
  std::string mode = "collect";
  std::string interleave = "0:1";
  std::string dtype = "f32";
  std::string out;
  std::string format = "text";
  auto* bench = app.add_subcommand("bench", "Run a mini-app through the runtime");
  bench->require_subcommand(1);
  auto common = [&](CLI::App* sub) {
    sub->add_option("--steps", config.steps, "Region invocations")->capture_default_str();
    sub->add_option("--mode", mode, "collect | infer | predicated")->capture_default_str();
    sub->add_option("--db", config.db_path, "SRDB directory (collect, predicated)");
    sub->add_option("--model", config.model_path, "Model directory (infer, predicated)");
    sub->add_option("--interleave", interleave, "Accurate:surrogate schedule A:S")
        ->capture_default_str();
    sub->add_option("--seed", config.seed, "Input generator seed")->capture_default_str();
    sub->add_option("--dtype", dtype, "f32 | f64")->capture_default_str();
    sub->add_option("--out", out, "Report file (.json, .csv or text)");
    sub->add_option("--format", format, "stdout format: text | json | csv")->capture_default_str();
  };
  auto* stencil = bench->add_subcommand("stencil", "2-D Jacobi stencil");
  stencil->add_option("--n", config.n, "Grid rows")->capture_default_str();
  stencil->add_option("--m", config.m, "Grid columns")->capture_default_str();
  common(stencil);
  auto* options = bench->add_subcommand("options", "American put portfolio on a binomial tree");
  options->add_option("--count", config.n_options, "Options per step")->capture_default_str();
  options->add_option("--depth", config.depth, "Binomial tree depth")->capture_default_str();
  common(options);

  auto* model = app.add_subcommand("model", "Build or inspect surrogate models");
  model->require_subcommand(1);
  float alpha = 0.25f;
  std::string model_out;
  auto* jacobi = model->add_subcommand("jacobi", "Write the exact 5-point Jacobi model");
  jacobi->add_option("--alpha", alpha, "Neighbour weight")->capture_default_str();
  jacobi->add_option("--out", model_out, "Model directory")->required();
  std::string model_path;
  auto* model_info = model->add_subcommand("info", "Describe a model");
  model_info->add_option("path", model_path, "Model directory or model.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*parse) return cmd_parse(parse_file, defines);
    if (*db_info) return cmd_db_info(db_path);
    if (*stencil) {
      config.app = smlrt::App::Stencil;
      return cmd_bench(config, mode, interleave, dtype, out, format);
    }
    if (*options) {
      config.app = smlrt::App::Options;
      return cmd_bench(config, mode, interleave, dtype, out, format);
    }
    if (*jacobi) {
      smlrt::save_model(smlrt::jacobi_model(alpha), model_out);
      std::cout << "wrote " << model_out << "\n";
      return 0;
    }
    if (*model_info) return cmd_model_info(model_path);
  } catch (const smlrt::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return smlrt::is_io_error(e.code()) ? kExitIo : kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return 0;
}
