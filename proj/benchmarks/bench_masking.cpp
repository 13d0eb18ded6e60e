#include <benchmark/benchmark.h>

#include "asma/masking.hpp"

using namespace asma;

static void BM_SampleJoints(benchmark::State& state) {
    const auto g = build_ntu_graph();
    const auto dist = joint_mask_distribution(*g, DegreeWeighting::LowDegree);
    Rng rng(1);
    for (auto _ : state) benchmark::DoNotOptimize(sample_masked_joints(dist, static_cast<std::size_t>(state.range(0)), rng));
}
BENCHMARK(BM_SampleJoints)->Arg(1)->Arg(9);

static void BM_MotionScores(benchmark::State& state) {
    const auto g = build_ntu_graph();
    SkeletonSequence x(3, static_cast<std::size_t>(state.range(0)), g);
    Rng rng(2);
    for (auto& v : x.data()) v = static_cast<real>(rng.uniform(-1, 1));
    for (auto _ : state) benchmark::DoNotOptimize(motion_scores(x));
}
BENCHMARK(BM_MotionScores)->Arg(50)->Arg(300);

static void BM_AsymmetricViews(benchmark::State& state) {
    const auto g = build_ntu_graph();
    SkeletonSequence x(3, 50, g);
    Rng data_rng(3);
    for (auto& v : x.data()) v = static_cast<real>(data_rng.uniform(-1, 1));
    const MaskSpec theta{9, 10, SpatialMode::HDSM, TemporalMode::LMTM};
    const MaskSpec phi{9, 10, SpatialMode::LDSM, TemporalMode::HMTM};
    Rng rng(4);
    for (auto _ : state) benchmark::DoNotOptimize(make_asymmetric_views(x, theta, phi, AugmentationSpec{}, rng));
}
BENCHMARK(BM_AsymmetricViews);
