#include <random>

#include <benchmark/benchmark.h>

#include "viewfield/atlas.hpp"
#include "viewfield/blend.hpp"
#include "viewfield/metrics.hpp"
#include "viewfield/tracksim.hpp"

using namespace viewfield;

namespace {

const CameraIntrinsics kIntr{48, 48, 32, 32, 64, 64};

std::vector<ContractedPoint> random_points(int n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ContractedPoint> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  return pts;
}

Atlas small_atlas(int rays) {
  AtlasConfig cfg;
  cfg.intrinsics = kIntr;
  cfg.single_model = true;
  cfg.train.rays_per_batch = rays;
  Atlas atlas(cfg);
  const auto scene = make_scene(1);
  const auto traj = generate_trajectory(TrajectoryKind::Loop, 64, 2.0);
  for (int k = 0; k < 4; ++k) {
    auto gt = raytrace_gt(scene, traj[k], kIntr);
    Keyframe kf{k, traj[k], gt.image, gt.depth, -1, "", ""};
    std::set<int> cov;
    for (int j = 0; j < k; ++j) cov.insert(j);
    atlas.on_keyframe(kf, cov);
  }
  return atlas;
}

void BM_GridEncode(benchmark::State& state) {
  MultiResGrid grid(GridConfig{8, 2, 16, 1.4, 14});
  std::mt19937_64 rng(0);
  grid.init_uniform(rng, 1e-4);
  const auto pts = random_points(1024);
  std::vector<double> out(grid.output_dim());
  for (auto _ : state) {
    for (const auto& p : pts) grid.encode(p, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * pts.size());
}
BENCHMARK(BM_GridEncode);

void BM_ColorMlpForward(benchmark::State& state) {
  Mlp mlp({18, 64, 64, 3});
  std::mt19937_64 rng(0);
  mlp.init_fan_in(rng);
  const Matrix in = Matrix::Random(18, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mlp.forward(in));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ColorMlpForward)->Arg(1024)->Arg(32768);

void BM_TrainStep(benchmark::State& state) {
  Atlas atlas = small_atlas(static_cast<int>(state.range(0)));
  const int ids[] = {0};
  for (auto _ : state) benchmark::DoNotOptimize(atlas.train_step(ids));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_RenderNovelView(benchmark::State& state) {
  Atlas atlas = small_atlas(256);
  const int ids[] = {0};
  for (int i = 0; i < 20; ++i) atlas.train_step(ids);
  const Pose test = atlas.keyframe(1).pose;
  BlendConfig blend;
  blend.use_skipping = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(render_novel_view(atlas, test, kIntr, blend));
}
BENCHMARK(BM_RenderNovelView)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_RaytraceGt(benchmark::State& state) {
  const auto scene = make_scene(1);
  const Pose pose = generate_trajectory(TrajectoryKind::Loop, 8, 2.0)[0];
  for (auto _ : state) benchmark::DoNotOptimize(raytrace_gt(scene, pose, kIntr));
}
BENCHMARK(BM_RaytraceGt)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
  const auto scene = make_scene(1);
  const auto traj = generate_trajectory(TrajectoryKind::Loop, 8, 2.0);
  const Image a = raytrace_gt(scene, traj[0], kIntr).image;
  const Image b = raytrace_gt(scene, traj[1], kIntr).image;
  for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim);

}  // namespace

BENCHMARK_MAIN();
