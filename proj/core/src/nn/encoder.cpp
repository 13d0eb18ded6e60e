#include "asma/nn/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "asma/error.hpp"

ASMA_NAMESPACE_BEGIN
namespace nn {

std::vector<double> normalize_adjacency(const SkeletonGraph& graph) {
    const std::size_t V = graph.num_joints();
    if (V == 0) throw Error(ErrorCode::DegenerateGraph, "graph has no joints");
    std::vector<double> a = graph.adjacency();
    for (std::size_t i = 0; i < V; ++i) a[i * V + i] += 1.0;
    std::vector<double> inv_sqrt(V);
    for (std::size_t i = 0; i < V; ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < V; ++j) d += a[i * V + j];
        inv_sqrt[i] = 1.0 / std::sqrt(d);
    }
    for (std::size_t i = 0; i < V; ++i)
        for (std::size_t j = 0; j < V; ++j) a[i * V + j] *= inv_sqrt[i] * inv_sqrt[j];
    return a;
}

std::vector<std::vector<double>> partition_adjacency(const SkeletonGraph& graph, std::size_t partitions) {
    const std::size_t V = graph.num_joints();
    const auto full = normalize_adjacency(graph);
    if (partitions == 1) return {full};
    if (partitions != 2 && partitions != 3)
        throw Error(ErrorCode::InvalidArgument, "spatial_kernel must be 1, 2 or 3, got " + std::to_string(partitions));
    std::vector<std::vector<double>> parts(partitions, std::vector<double>(V * V, 0.0));
    const auto hops = graph.hop_distances();
    const std::size_t c = graph.center();
    for (std::size_t i = 0; i < V; ++i)
        for (std::size_t j = 0; j < V; ++j) {
            const double w = full[i * V + j];
            if (w == 0.0) continue;
            std::size_t p = 0;
            if (partitions == 2) {
                p = i == j ? 0 : 1;
            } else {
                const std::size_t hi = hops[i * V + c], hj = hops[j * V + c];
                p = hj == hi ? 0 : (hj < hi ? 1 : 2);
            }
            parts[p][i * V + j] = w;
        }
    return parts;
}

void EncoderConfig::validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, "encoder config: " + m); };
    if (num_layers == 0) fail("num_layers must be >= 1");
    if (hidden_channels == 0 || in_channels == 0) fail("channel counts must be >= 1");
    if (embed_dim == 0) fail("embed_dim must be >= 1");
    if (temporal_kernel == 0 || temporal_kernel % 2 == 0) fail("temporal_kernel must be odd");
    if (spatial_kernel < 1 || spatial_kernel > 3) fail("spatial_kernel must be 1, 2 or 3");
    for (auto l : downsample_layers)
        if (l >= num_layers) fail("downsample layer " + std::to_string(l) + " out of range");
}

EncoderConfig EncoderConfig::teacher() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::student() {
    EncoderConfig c;
    c.num_layers = 5;
    c.spatial_kernel = 3;
    c.downsample_layers = {2, 4};
    c.widen_on_downsample = false;
    return c;
}

std::vector<std::size_t> layer_channels(const EncoderConfig& config) {
    std::vector<std::size_t> out;
    std::size_t c = config.hidden_channels;
    for (std::size_t l = 0; l < config.num_layers; ++l) {
        const bool down = std::find(config.downsample_layers.begin(), config.downsample_layers.end(), l) !=
                          config.downsample_layers.end();
        if (down && config.widen_on_downsample && l > 0) c *= 2;
        out.push_back(c);
    }
    return out;
}

namespace {

Tensor he_uniform(ad::Shape shape, std::size_t fan_in, Rng& rng) {
    return uniform_tensor(std::move(shape), std::sqrt(6.0 / static_cast<double>(fan_in)), rng);
}

bool is_downsample(const EncoderConfig& c, std::size_t l) {
    return std::find(c.downsample_layers.begin(), c.downsample_layers.end(), l) != c.downsample_layers.end();
}

}  // namespace

StgcnEncoder::StgcnEncoder(EncoderConfig config, const SkeletonGraph& graph, Rng& rng)
    : config_(std::move(config)), num_joints_(graph.num_joints()) {
    config_.validate();
    const std::size_t V = num_joints_;
    for (const auto& part : partition_adjacency(graph, config_.spatial_kernel)) {
        std::vector<real> vals(part.begin(), part.end());
        adjacency_.push_back(Tensor::from({V, V}, std::move(vals)));
    }
    const auto channels = layer_channels(config_);
    const std::size_t K = config_.temporal_kernel;
    std::size_t cin = config_.in_channels;
    for (std::size_t l = 0; l < config_.num_layers; ++l) {
        const std::size_t cout = channels[l];
        Layer layer;
        for (std::size_t p = 0; p < adjacency_.size(); ++p) layer.gcn_weight.push_back(he_uniform({cout, cin, 1}, cin, rng));
        layer.bn_spatial = BatchNorm(cout);
        layer.tcn_weight = he_uniform({cout, cout, K}, cout * K, rng);
        layer.bn_temporal = BatchNorm(cout);
        layer.stride = is_downsample(config_, l) ? 2 : 1;
        layer.residual = cin == cout && layer.stride == 1;
        layers_.push_back(std::move(layer));
        cin = cout;
    }
    head_ = Linear(cin, config_.embed_dim, rng);
}

EncoderOutput StgcnEncoder::forward(const Tensor& x, bool training) const {
    if (x.rank() != 4 || x.dim(1) != config_.in_channels || x.dim(3) != num_joints_)
        throw Error(ErrorCode::ShapeMismatch, "encoder input " + ad::shape_string(x.shape()) + " vs expected [N, " +
                                                  std::to_string(config_.in_channels) + ", T, " +
                                                  std::to_string(num_joints_) + "]");
    const std::size_t pad = config_.temporal_kernel / 2;
    Tensor h = x;
    for (const auto& layer : layers_) {
        Tensor s;
        for (std::size_t p = 0; p < adjacency_.size(); ++p) {
            // Joint mixing commutes with the 1x1 conv; mix first on the narrower input.
            Tensor part = ad::conv_temporal(ad::graph_conv(h, adjacency_[p]), layer.gcn_weight[p], 1, 0);
            s = p == 0 ? part : ad::add(s, part);
        }
        // Conv biases are omitted: each conv feeds a batch norm whose shift absorbs them.
        s = ad::relu(layer.bn_spatial.forward(s, training));
        Tensor t = layer.bn_temporal.forward(ad::conv_temporal(s, layer.tcn_weight, layer.stride, pad), training);
        if (layer.residual) t = ad::add(t, h);
        h = ad::relu(t);
    }
    // [N, C, T', V] -> [N, T', C] -> [N, T', E]
    Tensor frames = ad::transpose(ad::mean(h, {3}), 1, 2);
    EncoderOutput out;
    out.tokens = head_.forward(frames);
    out.pooled = ad::mean(out.tokens, {1});
    return out;
}

void StgcnEncoder::collect(StateRefs& out, const std::string& prefix) const {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        const std::string base = join_name(prefix, "layers." + std::to_string(l));
        for (std::size_t p = 0; p < layer.gcn_weight.size(); ++p)
            out.params.push_back({base + ".gcn.weight." + std::to_string(p), layer.gcn_weight[p]});
        layer.bn_spatial.collect(out, base + ".bn_spatial");
        out.params.push_back({base + ".tcn.weight", layer.tcn_weight});
        layer.bn_temporal.collect(out, base + ".bn_temporal");
    }
    head_.collect(out, join_name(prefix, "head"));
}

std::size_t count_flops(const EncoderConfig& config, std::size_t frames, std::size_t joints) {
    config.validate();
    const auto channels = layer_channels(config);
    const std::size_t P = config.spatial_kernel, K = config.temporal_kernel, V = joints;
    std::size_t macs = 0, cin = config.in_channels, T = frames;
    for (std::size_t l = 0; l < config.num_layers; ++l) {
        const std::size_t cout = channels[l];
        macs += P * cout * cin * T * V;  // 1x1 projection per partition
        macs += P * cin * T * V * V;     // adjacency mixing
        const std::size_t stride = is_downsample(config, l) ? 2 : 1;
        const std::size_t tout = (T + 2 * (K / 2) - K) / stride + 1;
        macs += cout * cout * K * tout * V;
        T = tout;
        cin = cout;
    }
    macs += T * cin * config.embed_dim;
    return 2 * macs;
}

Tensor stack_batch(const std::vector<const SkeletonSequence*>& items) {
    if (items.empty()) throw Error(ErrorCode::DatasetEmpty, "empty batch");
    const std::size_t C = items[0]->channels(), T = items[0]->frames(), V = items[0]->joints();
    const std::size_t per = C * T * V;
    Tensor out = Tensor::zeros({items.size(), C, T, V});
    for (std::size_t n = 0; n < items.size(); ++n) {
        const auto* s = items[n];
        if (s->channels() != C || s->frames() != T || s->joints() != V)
            throw Error(ErrorCode::ShapeMismatch, "batch items differ in shape");
        std::copy(s->data().begin(), s->data().end(), out.values().begin() + static_cast<std::ptrdiff_t>(n * per));
    }
    return out;
}

Tensor stack_batch(const std::vector<SkeletonSequence>& items) {
    std::vector<const SkeletonSequence*> ptrs;
    ptrs.reserve(items.size());
    for (const auto& s : items) ptrs.push_back(&s);
    return stack_batch(ptrs);
}

}  // namespace nn
ASMA_NAMESPACE_END
