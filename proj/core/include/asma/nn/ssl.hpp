#pragma once

#include <vector>

#include "asma/nn/module.hpp"

ASMA_NAMESPACE_BEGIN
namespace nn {

struct ProjectorConfig {
    std::size_t in_dim = 256;
    std::size_t hidden_dim = 6144;
    std::size_t out_dim = 6144;
    std::size_t depth = 3;

    void validate() const;
    bool operator==(const ProjectorConfig&) const = default;
};

/// (linear -> batch norm -> relu) x (depth - 1), then a final linear map.
class Projector : public Module {
   public:
    Projector(ProjectorConfig config, Rng& rng);

    /// h: [N, in_dim] with N >= 2.
    Tensor forward(const Tensor& h, bool training) const;
    void collect(StateRefs& out, const std::string& prefix) const override;

    const ProjectorConfig& config() const { return config_; }

   private:
    ProjectorConfig config_;
    std::vector<Linear> linears_;
    std::vector<BatchNorm> norms_;
};

struct BarlowLossConfig {
    double lambda = 2e-4;
    double eps = 1e-12;
    bool center = true;  ///< subtract the batch mean of every column first

    void validate() const;
};

/// D x D batch cross-correlation of z and z2 ([N, D] each, N >= 2):
/// C_ij = sum_b z_bi z2_bj / (|z_:i| |z2_:j| + eps), columns centered when
/// `center` is set.
Tensor cross_correlation(const Tensor& z, const Tensor& z2, double eps = 1e-12, bool center = true);

/// sum_i (1 - C_ii)^2 + lambda * sum_{i != j} C_ij^2
Tensor barlow_loss(const Tensor& c, double lambda);

/// Convenience: barlow_loss(cross_correlation(z, z2)).
Tensor barlow_pair_loss(const Tensor& z, const Tensor& z2, const BarlowLossConfig& cfg);

/// Projections of one encoder: anchor, spatially masked, temporally masked.
struct BranchProjections {
    Tensor anchor;
    Tensor spatial;
    Tensor temporal;
};

struct BranchLoss {
    Tensor spatial;   ///< anchor vs spatially masked view
    Tensor temporal;  ///< anchor vs temporally masked view
    Tensor total;
};

BranchLoss branch_loss(const BranchProjections& z, const BarlowLossConfig& cfg);

struct AsmaLoss {
    BranchLoss theta;
    BranchLoss phi;
    Tensor total;
};

/// Sum of the four alignment terms over both encoders.
AsmaLoss asma_pretrain_loss(const BranchProjections& theta, const BranchProjections& phi, const BarlowLossConfig& cfg);

}  // namespace nn
ASMA_NAMESPACE_END
