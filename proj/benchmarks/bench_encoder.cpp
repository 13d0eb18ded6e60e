#include <benchmark/benchmark.h>

#include "asma/nn/encoder.hpp"
#include "asma/nn/ssl.hpp"

using namespace asma;
using ad::Tensor;

namespace {

nn::EncoderConfig desk_encoder() {
    nn::EncoderConfig c = nn::EncoderConfig::teacher();
    c.hidden_channels = 8;
    c.widen_on_downsample = false;
    return c;
}

Tensor batch(std::size_t n, std::size_t frames) {
    Rng rng(9);
    Tensor x = Tensor::zeros({n, 3, frames, 25});
    for (auto& v : x.values()) v = static_cast<real>(rng.uniform(-1, 1));
    return x;
}

}  // namespace

static void BM_EncoderForwardEval(benchmark::State& state) {
    const auto g = build_ntu_graph();
    Rng rng(1);
    const nn::StgcnEncoder enc(desk_encoder(), *g, rng);
    const Tensor x = batch(static_cast<std::size_t>(state.range(0)), 32);
    for (auto _ : state) {
        ad::NoGradGuard guard;
        benchmark::DoNotOptimize(enc.forward(x, false).pooled);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncoderForwardEval)->Arg(1)->Arg(16);

static void BM_PretrainStep(benchmark::State& state) {
    const auto g = build_ntu_graph();
    Rng rng(2);
    const auto ec = desk_encoder();
    nn::StgcnEncoder enc(ec, *g, rng);
    nn::Projector proj({ec.embed_dim, 256, 256, 3}, rng);
    const Tensor a = batch(16, 32), s = batch(16, 32), t = batch(16, 32);
    for (auto _ : state) {
        ad::Tape tape;
        auto z = [&](const Tensor& x) { return proj.forward(enc.forward(x, true).pooled, true); };
        const auto loss = nn::branch_loss({z(a), z(s), z(t)}, {});
        ad::backward(loss.total);
        for (auto& p : enc.parameters()) p.zero_grad();
        for (auto& p : proj.parameters()) p.zero_grad();
    }
    state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_PretrainStep)->Unit(benchmark::kMillisecond);
