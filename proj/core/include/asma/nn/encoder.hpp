#pragma once

#include <vector>

#include "asma/nn/module.hpp"
#include "asma/skeleton.hpp"

ASMA_NAMESPACE_BEGIN
namespace nn {

/// D^-1/2 (A + I) D^-1/2 as a dense V x V row-major matrix. Throws
/// DegenerateGraph for a graph without joints.
std::vector<double> normalize_adjacency(const SkeletonGraph& graph);

/// Splits the normalized adjacency into `partitions` matrices that sum to it.
///   1: the whole matrix.
///   2: self links / neighbour links.
///   3: links to joints at the same / smaller / larger hop distance from the
///      graph center than the row joint.
std::vector<std::vector<double>> partition_adjacency(const SkeletonGraph& graph, std::size_t partitions);

struct EncoderConfig {
    std::size_t num_layers = 9;
    std::size_t hidden_channels = 16;
    std::size_t spatial_kernel = 1;  ///< adjacency partitions
    std::size_t temporal_kernel = 9;
    std::size_t in_channels = 3;
    std::size_t embed_dim = 256;
    std::vector<std::size_t> downsample_layers{4, 7};  ///< temporal stride 2 here
    bool widen_on_downsample = true;                    ///< double channels at stride-2 layers

    /// Throws InvalidArgument on an unusable configuration.
    void validate() const;

    static EncoderConfig teacher();
    static EncoderConfig student();

    bool operator==(const EncoderConfig&) const = default;
};

/// Output channels of every layer.
std::vector<std::size_t> layer_channels(const EncoderConfig& config);

struct EncoderOutput {
    Tensor tokens;  ///< [N, T', embed_dim], one token per output frame
    Tensor pooled;  ///< [N, embed_dim]
};

/// Stack of spatial graph convolutions and temporal convolutions followed by a
/// joint-average and a linear map to the embedding size.
class StgcnEncoder : public Module {
   public:
    StgcnEncoder(EncoderConfig config, const SkeletonGraph& graph, Rng& rng);

    /// x: [N, in_channels, T, V].
    EncoderOutput forward(const Tensor& x, bool training) const;

    void collect(StateRefs& out, const std::string& prefix) const override;

    const EncoderConfig& config() const { return config_; }
    std::size_t num_joints() const { return num_joints_; }

   private:
    struct Layer {
        std::vector<Tensor> gcn_weight;  ///< per partition, [Cout, Cin, 1]
        BatchNorm bn_spatial;
        Tensor tcn_weight;  ///< [Cout, Cout, K]
        BatchNorm bn_temporal;
        std::size_t stride = 1;
        bool residual = false;
    };

    EncoderConfig config_;
    std::size_t num_joints_;
    std::vector<Tensor> adjacency_;
    std::vector<Layer> layers_;
    Linear head_;
};

/// Forward cost in floating-point operations (2 per multiply-accumulate) of one
/// sample of T frames and V joints. Counts convolutions, graph mixing and the
/// embedding map; normalization and activations are ignored.
std::size_t count_flops(const EncoderConfig& config, std::size_t frames, std::size_t joints);

/// [N, C, T, V] batch from equally shaped sequences.
Tensor stack_batch(const std::vector<const SkeletonSequence*>& items);
Tensor stack_batch(const std::vector<SkeletonSequence>& items);

}  // namespace nn
ASMA_NAMESPACE_END
