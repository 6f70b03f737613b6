#include <cmath>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>
#include <Eigen/Geometry>

#include "egogest/geometry.hpp"
#include "egogest/inference.hpp"
#include "egogest/model.hpp"

using namespace egogest;

namespace {

SequenceBatch random_batch(int steps, int batch, int input, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  SequenceBatch b{batch, steps, RowMatrix(steps * batch, input)};
  for (Eigen::Index i = 0; i < b.data.size(); ++i) b.data.data()[i] = n(rng);
  return b;
}

// args: hidden, batch
void BM_ForwardTrain(benchmark::State& st) {
  const auto model = ModelState::initialize({32, static_cast<int>(st.range(0)), 5}, 1);
  const auto batch = random_batch(40, static_cast<int>(st.range(1)), 32, 2);
  ForwardCache cache;
  for (auto _ : st) benchmark::DoNotOptimize(forward(model, batch, Mode::Train, &cache));
  st.SetItemsProcessed(st.iterations() * batch.rows());
}
BENCHMARK(BM_ForwardTrain)->Args({128, 32})->Args({64, 32})->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& st) {
  const auto model = ModelState::initialize({32, static_cast<int>(st.range(0)), 5}, 1);
  const auto batch = random_batch(40, static_cast<int>(st.range(1)), 32, 2);
  std::vector<int> labels(static_cast<std::size_t>(batch.rows()));
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 5);
  ForwardCache cache;
  for (auto _ : st) {
    const auto logits = forward(model, batch, Mode::Train, &cache);
    const auto loss = nll_loss(logits, labels);
    benchmark::DoNotOptimize(backward(model, cache, loss.grad));
  }
  st.SetItemsProcessed(st.iterations() * batch.rows());
}
BENCHMARK(BM_ForwardBackward)->Args({128, 32})->Args({64, 32})->Unit(benchmark::kMillisecond);

// One K-frame streaming batch with carried state, as seen by the latency budget.
void BM_StreamBatch(benchmark::State& st) {
  const int k = static_cast<int>(st.range(0));
  const auto model = ModelState::initialize({32, 128, 5}, 1);
  const auto x = random_batch(k, 1, 32, 3);
  auto carry = RecurrentState::zeros(128);
  for (auto _ : st) benchmark::DoNotOptimize(run_sequence(model, x.data, carry));
  st.SetItemsProcessed(st.iterations() * k);
}
BENCHMARK(BM_StreamBatch)->Arg(10)->Arg(30)->Unit(benchmark::kMicrosecond);

void BM_Dlt(benchmark::State& st) {
  const auto k = CameraIntrinsics::world_default();
  const auto h = homography_from_motion(k, RigidMotion{0.02, -0.01, 0.005, 0.01, 0.0, 0.02}, {0, 0, 1}, 1.5);
  std::vector<Correspondence> pts;
  const int n = static_cast<int>(st.range(0));
  for (int i = 0; i < n; ++i) {
    const Vec2 p(10.0 + 170.0 * std::fmod(0.5 + 0.7548777 * i, 1.0), 10.0 + 120.0 * std::fmod(0.5 + 0.5698403 * i, 1.0));
    const Vec3 q = h.matrix() * p.homogeneous();
    pts.push_back({p, q.hnormalized()});
  }
  for (auto _ : st) benchmark::DoNotOptimize(estimate_homography_dlt(pts));
}
BENCHMARK(BM_Dlt)->Arg(4)->Arg(49)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
