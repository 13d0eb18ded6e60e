#include "asma/nn/align.hpp"

#include <cmath>

#include "asma/error.hpp"

ASMA_NAMESPACE_BEGIN
namespace nn {

Tensor attention_weights(const Tensor& q, const Tensor& k) {
    if (q.rank() != 3 || k.rank() != 3 || q.dim(0) != k.dim(0) || q.dim(2) != k.dim(2))
        throw Error(ErrorCode::ShapeMismatch,
                    "attention: Q " + ad::shape_string(q.shape()) + " vs K " + ad::shape_string(k.shape()));
    const real s = real(1) / std::sqrt(static_cast<real>(q.dim(2)));
    return ad::softmax(ad::scale(ad::batched_matmul(q, ad::transpose(k, 1, 2)), s), 2);
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    if (v.rank() != 3 || v.dim(0) != k.dim(0) || v.dim(1) != k.dim(1))
        throw Error(ErrorCode::ShapeMismatch,
                    "attention: K " + ad::shape_string(k.shape()) + " vs V " + ad::shape_string(v.shape()));
    return ad::batched_matmul(attention_weights(q, k), v);
}

MultiHeadAttention::MultiHeadAttention(std::size_t model_dim, std::size_t heads, Rng& rng)
    : wq(model_dim, model_dim, rng, false),
      wk(model_dim, model_dim, rng, false),
      wv(model_dim, model_dim, rng, false),
      wo(model_dim, model_dim, rng, false),
      heads_(heads) {
    if (heads == 0 || model_dim % heads != 0)
        throw Error(ErrorCode::InvalidArgument,
                    "model_dim " + std::to_string(model_dim) + " not divisible by " + std::to_string(heads) + " heads");
}

namespace {

// [N, L, D] -> [N*H, L, D/H]
Tensor split_heads(const Tensor& x, std::size_t heads) {
    const std::size_t n = x.dim(0), l = x.dim(1), d = x.dim(2) / heads;
    return ad::reshape(ad::transpose(ad::reshape(x, {n, l, heads, d}), 1, 2), {n * heads, l, d});
}

// [N*H, L, d] -> [N, L, H*d]
Tensor merge_heads(const Tensor& x, std::size_t heads) {
    const std::size_t n = x.dim(0) / heads, l = x.dim(1), d = x.dim(2);
    return ad::reshape(ad::transpose(ad::reshape(x, {n, heads, l, d}), 1, 2), {n, l, heads * d});
}

}  // namespace

Tensor MultiHeadAttention::forward(const Tensor& query, const Tensor& context) const {
    if (query.rank() != 3 || context.rank() != 3 || query.dim(0) != context.dim(0) ||
        query.dim(2) != wq.in_features() || context.dim(2) != wq.in_features())
        throw Error(ErrorCode::ShapeMismatch, "attention: query " + ad::shape_string(query.shape()) + " vs context " +
                                                  ad::shape_string(context.shape()));
    Tensor q = split_heads(wq.forward(query), heads_);
    Tensor k = split_heads(wk.forward(context), heads_);
    Tensor v = split_heads(wv.forward(context), heads_);
    return wo.forward(merge_heads(scaled_dot_attention(q, k, v), heads_));
}

void MultiHeadAttention::collect(StateRefs& out, const std::string& prefix) const {
    wq.collect(out, join_name(prefix, "q"));
    wk.collect(out, join_name(prefix, "k"));
    wv.collect(out, join_name(prefix, "v"));
    wo.collect(out, join_name(prefix, "o"));
}

void AlignConfig::validate() const {
    if (num_heads == 0 || model_dim == 0 || model_dim % num_heads != 0)
        throw Error(ErrorCode::InvalidArgument, "align: model_dim " + std::to_string(model_dim) +
                                                    " must be a positive multiple of num_heads " +
                                                    std::to_string(num_heads));
    if (num_classes == 0) throw Error(ErrorCode::InvalidArgument, "align: num_classes must be >= 1");
}

AlignHead::AlignHead(AlignConfig config, Rng& rng) : config_(config) {
    config_.validate();
    theta_to_phi = MultiHeadAttention(config_.model_dim, config_.num_heads, rng);
    phi_to_theta = MultiHeadAttention(config_.model_dim, config_.num_heads, rng);
    classifier = Linear(config_.model_dim, config_.num_classes, rng);
    if (config_.layer_norm) {
        norm_gamma = Tensor::full({config_.model_dim}, real(1), true);
        norm_beta = Tensor::zeros({config_.model_dim}, true);
    }
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    const std::size_t d = x.shape().back();
    const std::size_t rows = x.size() / d;
    Tensor flat = ad::reshape(x, {rows, d});
    Tensor centered = ad::add_bias(flat, ad::neg(ad::mean(flat, {1})), 0);
    Tensor inv_std = ad::div(Tensor::full({rows}, real(1)),
                             ad::sqrt(ad::add_scalar(ad::mean(ad::square(centered), {1}), real(1e-5))));
    Tensor y = ad::add_bias(ad::mul_along(ad::mul_along(centered, inv_std, 0), gamma, 1), beta, 1);
    return ad::reshape(y, x.shape());
}

Tensor AlignHead::fuse(const Tensor& tokens_theta, const Tensor& tokens_phi) const {
    if (tokens_theta.shape() != tokens_phi.shape())
        throw Error(ErrorCode::ShapeMismatch, "align: theta tokens " + ad::shape_string(tokens_theta.shape()) +
                                                  " vs phi tokens " + ad::shape_string(tokens_phi.shape()));
    Tensor fused = ad::add(theta_to_phi.forward(tokens_theta, tokens_phi), phi_to_theta.forward(tokens_phi, tokens_theta));
    if (config_.layer_norm) fused = layer_norm(fused, norm_gamma, norm_beta);
    return ad::mean(fused, {1});
}

Tensor AlignHead::forward(const Tensor& tokens_theta, const Tensor& tokens_phi) const {
    return classifier.forward(fuse(tokens_theta, tokens_phi));
}

void AlignHead::collect(StateRefs& out, const std::string& prefix) const {
    theta_to_phi.collect(out, join_name(prefix, "theta_to_phi"));
    phi_to_theta.collect(out, join_name(prefix, "phi_to_theta"));
    if (config_.layer_norm) {
        out.params.push_back({join_name(prefix, "norm.gamma"), norm_gamma});
        out.params.push_back({join_name(prefix, "norm.beta"), norm_beta});
    }
    classifier.collect(out, join_name(prefix, "classifier"));
}

}  // namespace nn
ASMA_NAMESPACE_END
