// Microbenchmarks for the hot paths: gather/scatter through the five-point
// functors, dense MLP forward passes and SRDB appends.

#include <benchmark/benchmark.h>

#include <filesystem>
#include <numeric>
#include <random>

#include "smlrt/bridge.hpp"
#include "smlrt/directive.hpp"
#include "smlrt/inference.hpp"
#include "smlrt/srdb.hpp"

using namespace smlrt;

namespace {

const FunctorDecl& five_point() {
  static const FunctorDecl f =
      parse_functor_decl("ifnctr: [i, j, 0:5] = ([i-1, j], [i+1, j], [i, j-1:j+2])");
  return f;
}

const FunctorDecl& center() {
  static const FunctorDecl f = parse_functor_decl("ofnctr: [i, j, 0:1] = ([i, j])");
  return f;
}

MapTarget interior(const char* array, std::int64_t n) {
  return parse_tensor_map("map(to: f(" + std::string(array) + "[1:N-1, 1:N-1]))", {{"N", n}})
      .targets[0];
}

void BM_GatherFivePoint(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  std::vector<float> grid(static_cast<std::size_t>(n * n));
  std::iota(grid.begin(), grid.end(), 0.0f);
  const ArrayBuffer array(grid, {n, n});
  const MapPlan plan(five_point(), interior("t", n), Direction::To);
  for (auto _ : state) {
    Tensor t = plan.gather(array);
    benchmark::DoNotOptimize(t.bytes().data());
  }
  state.SetBytesProcessed(state.iterations() * (n - 2) * (n - 2) * 5 *
                          static_cast<std::int64_t>(sizeof(float)));
}
BENCHMARK(BM_GatherFivePoint)->Arg(64)->Arg(256)->Arg(1024);

void BM_ScatterCenter(benchmark::State& state) {
  const std::int64_t n = state.range(0);
  std::vector<float> grid(static_cast<std::size_t>(n * n), 0.0f);
  const ArrayBuffer array(grid, {n, n});
  const MapPlan plan(center(), interior("tnew", n), Direction::From);
  Tensor values(DType::f32, plan.tensor_shape());
  for (auto _ : state) {
    plan.scatter(values, array);
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * (n - 2) * (n - 2));
}
BENCHMARK(BM_ScatterCenter)->Arg(64)->Arg(256)->Arg(1024);

Model mlp(std::int64_t in, std::int64_t hidden, std::int64_t out) {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> w(0.0f, 0.1f);
  auto layer = [&](std::int64_t a, std::int64_t b, Activation act) {
    DenseLayer l{a, b, std::vector<float>(static_cast<std::size_t>(a * b)),
                 std::vector<float>(static_cast<std::size_t>(b)), act};
    for (auto& v : l.weights) v = w(rng);
    for (auto& v : l.bias) v = w(rng);
    return l;
  };
  return Model({layer(in, hidden, Activation::Relu), layer(hidden, hidden, Activation::Tanh),
                layer(hidden, out, Activation::Identity)});
}

void BM_MlpInfer(benchmark::State& state) {
  const std::int64_t batch = state.range(0);
  const Model model = mlp(5, 64, 1);
  Tensor x(DType::f32, {batch, 5});
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  for (auto& v : x.values<float>()) v = u(rng);
  for (auto _ : state) {
    Tensor y = model.infer(x);
    benchmark::DoNotOptimize(y.bytes().data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpInfer)->Arg(1)->Arg(900)->Arg(16384);

void BM_SrdbAppend(benchmark::State& state) {
  const auto dir = std::filesystem::temp_directory_path() / "smlrt-bench-srdb";
  std::filesystem::remove_all(dir);
  const std::int64_t rows = state.range(0);
  Tensor in(DType::f32, {rows, 5});
  Tensor out(DType::f32, {rows, 1});
  {
    auto db = Database::open(dir, OpenMode::Create);
    for (auto _ : state) db.append_record("stencil", in, out, 1000);
  }
  state.SetBytesProcessed(state.iterations() * rows * 6 * static_cast<std::int64_t>(sizeof(float)));
  std::filesystem::remove_all(dir);
}
BENCHMARK(BM_SrdbAppend)->Arg(196)->Arg(16384);

}  // namespace
BENCHMARK_MAIN();
