#include "asma/nn/ssl.hpp"

#include "asma/error.hpp"

ASMA_NAMESPACE_BEGIN
namespace nn {

void ProjectorConfig::validate() const {
    if (in_dim == 0 || hidden_dim == 0) throw Error(ErrorCode::InvalidArgument, "projector dims must be >= 1");
    if (out_dim < 2) throw Error(ErrorCode::InvalidArgument, "projector out_dim must be >= 2");
    if (depth < 1) throw Error(ErrorCode::InvalidArgument, "projector depth must be >= 1");
}

Projector::Projector(ProjectorConfig config, Rng& rng) : config_(config) {
    config_.validate();
    std::size_t in = config_.in_dim;
    for (std::size_t i = 0; i + 1 < config_.depth; ++i) {
        linears_.emplace_back(in, config_.hidden_dim, rng);
        norms_.emplace_back(config_.hidden_dim);
        in = config_.hidden_dim;
    }
    linears_.emplace_back(in, config_.out_dim, rng);
}

Tensor Projector::forward(const Tensor& h, bool training) const {
    if (h.rank() != 2 || h.dim(1) != config_.in_dim)
        throw Error(ErrorCode::ShapeMismatch,
                    "projector input " + ad::shape_string(h.shape()) + ", expected [N, " + std::to_string(config_.in_dim) + "]");
    if (h.dim(0) < 2) throw Error(ErrorCode::BatchTooSmall, "projector needs a batch of at least 2");
    Tensor x = h;
    for (std::size_t i = 0; i < norms_.size(); ++i) x = ad::relu(norms_[i].forward(linears_[i].forward(x), training));
    return linears_.back().forward(x);
}

void Projector::collect(StateRefs& out, const std::string& prefix) const {
    for (std::size_t i = 0; i < linears_.size(); ++i) {
        linears_[i].collect(out, join_name(prefix, "linear." + std::to_string(i)));
        if (i < norms_.size()) norms_[i].collect(out, join_name(prefix, "bn." + std::to_string(i)));
    }
}

void BarlowLossConfig::validate() const {
    if (!(lambda > 0)) throw Error(ErrorCode::InvalidArgument, "barlow lambda must be > 0");
    if (!(eps > 0)) throw Error(ErrorCode::InvalidArgument, "barlow eps must be > 0");
}

namespace {

Tensor center_columns(const Tensor& z) { return ad::add_bias(z, ad::neg(ad::mean(z, {0})), 1); }

Tensor column_norms(const Tensor& z) { return ad::sqrt(ad::sum(ad::square(z), {0})); }

}  // namespace

Tensor cross_correlation(const Tensor& z, const Tensor& z2, double eps, bool center) {
    if (z.rank() != 2 || z.shape() != z2.shape())
        throw Error(ErrorCode::ShapeMismatch,
                    "cross_correlation: " + ad::shape_string(z.shape()) + " vs " + ad::shape_string(z2.shape()));
    if (z.dim(0) < 2) throw Error(ErrorCode::BatchTooSmall, "cross_correlation needs a batch of at least 2");
    const std::size_t D = z.dim(1);
    Tensor a = center ? center_columns(z) : z;
    Tensor b = center ? center_columns(z2) : z2;
    Tensor num = ad::matmul(ad::transpose(a), b);
    Tensor den = ad::matmul(ad::reshape(column_norms(a), {D, 1}), ad::reshape(column_norms(b), {1, D}));
    return ad::div(num, ad::add_scalar(den, static_cast<real>(eps)));
}

Tensor barlow_loss(const Tensor& c, double lambda) {
    if (c.rank() != 2 || c.dim(0) != c.dim(1))
        throw Error(ErrorCode::ShapeMismatch, "barlow_loss needs a square matrix, got " + ad::shape_string(c.shape()));
    const std::size_t D = c.dim(0);
    Tensor eye = Tensor::zeros({D, D});
    Tensor off = Tensor::full({D, D}, static_cast<real>(lambda));
    for (std::size_t i = 0; i < D; ++i) {
        eye[i * D + i] = real(1);
        off[i * D + i] = real(0);
    }
    // (1 - C_ii)^2 on the diagonal plus lambda * C_ij^2 off it.
    Tensor diag_err = ad::mul(ad::sub(eye, c), eye);
    Tensor on = ad::sum_all(ad::square(diag_err));
    Tensor rest = ad::sum_all(ad::mul(ad::square(c), off));
    return ad::add(on, rest);
}

Tensor barlow_pair_loss(const Tensor& z, const Tensor& z2, const BarlowLossConfig& cfg) {
    return barlow_loss(cross_correlation(z, z2, cfg.eps, cfg.center), cfg.lambda);
}

BranchLoss branch_loss(const BranchProjections& z, const BarlowLossConfig& cfg) {
    BranchLoss out;
    out.spatial = barlow_pair_loss(z.anchor, z.spatial, cfg);
    out.temporal = barlow_pair_loss(z.anchor, z.temporal, cfg);
    out.total = ad::add(out.spatial, out.temporal);
    return out;
}

AsmaLoss asma_pretrain_loss(const BranchProjections& theta, const BranchProjections& phi, const BarlowLossConfig& cfg) {
    AsmaLoss out;
    out.theta = branch_loss(theta, cfg);
    out.phi = branch_loss(phi, cfg);
    out.total = ad::add(out.theta.total, out.phi.total);
    return out;
}

}  // namespace nn
ASMA_NAMESPACE_END
