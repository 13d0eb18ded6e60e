#pragma once

#include <vector>

#include "asma/ad/tensor.hpp"

ASMA_NAMESPACE_BEGIN
namespace ad {

// Shape rules: elementwise binaries need identical shapes. The only implicit
// expansions are scalar ops (scale/add_scalar) and per-axis vectors
// (add_bias/mul_along). Anything else throws ShapeMismatch.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, real s);
Tensor add_scalar(const Tensor& x, real s);
inline Tensor neg(const Tensor& x) { return scale(x, real(-1)); }
inline Tensor square(const Tensor& x) { return mul(x, x); }

Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
/// The derivative at 0 is taken as 0 so an all-zero column cannot poison a
/// backward pass.
Tensor sqrt(const Tensor& x);

/// [M,K] x [K,N] -> [M,N]
Tensor matmul(const Tensor& a, const Tensor& b);
/// [B,M,K] x [B,K,N] -> [B,M,N]
Tensor batched_matmul(const Tensor& a, const Tensor& b);

/// Swaps two axes (materialized).
Tensor transpose(const Tensor& x, std::size_t axis_a = 0, std::size_t axis_b = 1);
Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Elements [begin, end) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);

Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);

/// Reduces the listed axes away (they do not remain as size-1 dims).
Tensor sum(const Tensor& x, const std::vector<std::size_t>& axes);
Tensor mean(const Tensor& x, const std::vector<std::size_t>& axes);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

/// y = x + b broadcast along `axis` (b has shape [x.dim(axis)]).
Tensor add_bias(const Tensor& x, const Tensor& b, std::size_t axis);
/// y = x * s broadcast along `axis` (s has shape [x.dim(axis)]).
Tensor mul_along(const Tensor& x, const Tensor& s, std::size_t axis);

/// Running statistics of a batch-norm layer; not differentiated.
struct BatchNormState {
    std::vector<real> running_mean;
    std::vector<real> running_var;
    real momentum = real(0.1);
    real eps = real(1e-5);

    explicit BatchNormState(std::size_t channels = 0)
        : running_mean(channels, real(0)), running_var(channels, real(1)) {}
};

/// Normalizes axis 1 of x ([N, C, ...]) over every other axis. Training mode
/// uses batch statistics (biased variance) and updates the running stats
/// (unbiased variance); eval mode is the affine map given by the running stats.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state, bool training);

/// x [N, Cin, T, V], w [Cout, Cin, K] -> [N, Cout, T', V], T' = (T + 2 pad - K) / stride + 1.
/// Convolves along T only; zero padding.
Tensor conv_temporal(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad);

/// Contracts the last axis of x (size V) with adjacency [V, W].
Tensor graph_conv(const Tensor& x, const Tensor& adjacency);

}  // namespace ad
ASMA_NAMESPACE_END
