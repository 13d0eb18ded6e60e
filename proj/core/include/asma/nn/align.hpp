#pragma once

#include "asma/nn/module.hpp"

ASMA_NAMESPACE_BEGIN
namespace nn {

/// Softmax(Q K^T / sqrt(d_k)) over the key axis. Q: [B, L, d], K: [B, S, d].
Tensor attention_weights(const Tensor& q, const Tensor& k);

/// attention_weights(Q, K) V with V: [B, S, d_v].
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v);

/// Multi-head attention without projection biases.
class MultiHeadAttention : public Module {
   public:
    MultiHeadAttention() = default;
    MultiHeadAttention(std::size_t model_dim, std::size_t heads, Rng& rng);

    /// query: [N, L, D], context: [N, S, D] -> [N, L, D]
    Tensor forward(const Tensor& query, const Tensor& context) const;
    void collect(StateRefs& out, const std::string& prefix) const override;

    std::size_t heads() const { return heads_; }

    Linear wq, wk, wv, wo;

   private:
    std::size_t heads_ = 1;
};

struct AlignConfig {
    std::size_t num_heads = 4;
    std::size_t model_dim = 256;
    std::size_t num_classes = 60;
    bool layer_norm = false;  ///< normalize the fused tokens before pooling

    void validate() const;
};

/// Cross-attention in both directions between two token sequences, summed,
/// mean-pooled over tokens and classified by a linear head.
class AlignHead : public Module {
   public:
    AlignHead(AlignConfig config, Rng& rng);

    /// tokens_*: [N, L, D] -> [N, D]
    Tensor fuse(const Tensor& tokens_theta, const Tensor& tokens_phi) const;
    /// -> logits [N, num_classes]
    Tensor forward(const Tensor& tokens_theta, const Tensor& tokens_phi) const;

    void collect(StateRefs& out, const std::string& prefix) const override;

    const AlignConfig& config() const { return config_; }

    MultiHeadAttention theta_to_phi;  ///< queries from theta, keys/values from phi
    MultiHeadAttention phi_to_theta;
    Linear classifier;
    Tensor norm_gamma, norm_beta;  ///< defined only with layer_norm

   private:
    AlignConfig config_;
};

/// Normalizes the last axis of x to zero mean and unit variance (eps 1e-5),
/// then applies gamma/beta along it.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta);

}  // namespace nn
ASMA_NAMESPACE_END
