#include <benchmark/benchmark.h>

#include "asma/ad/ops.hpp"
#include "asma/rng.hpp"

using namespace asma;
using ad::Tensor;

namespace {

Tensor random(ad::Shape shape, std::uint64_t seed, bool grad = false) {
    Rng rng(seed);
    std::vector<real> v(ad::shape_size(shape));
    for (auto& x : v) x = static_cast<real>(rng.uniform(-1, 1));
    return Tensor::from(shape, std::move(v), grad);
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Tensor a = random({n, n}, 1), b = random({n, n}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(ad::matmul(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

static void BM_ConvTemporal(benchmark::State& state) {
    const auto c = static_cast<std::size_t>(state.range(0));
    const Tensor x = random({16, c, 32, 25}, 3), w = random({c, c, 9}, 4);
    for (auto _ : state) benchmark::DoNotOptimize(ad::conv_temporal(x, w, 1, 4));
}
BENCHMARK(BM_ConvTemporal)->Arg(8)->Arg(16)->Arg(64);

static void BM_GraphConv(benchmark::State& state) {
    const auto c = static_cast<std::size_t>(state.range(0));
    const Tensor x = random({16, c, 32, 25}, 5), a = random({25, 25}, 6);
    for (auto _ : state) benchmark::DoNotOptimize(ad::graph_conv(x, a));
}
BENCHMARK(BM_GraphConv)->Arg(8)->Arg(64);

static void BM_SoftmaxBackward(benchmark::State& state) {
    const Tensor x = random({128, 256}, 7, true);
    for (auto _ : state) {
        ad::Tape tape;
        ad::backward(ad::sum_all(ad::mul(ad::softmax(x, 1), x)));
        x.impl()->grad.clear();
    }
}
BENCHMARK(BM_SoftmaxBackward);
