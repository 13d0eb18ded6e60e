#include "asma/nn/distill.hpp"

#include <cmath>

#include "asma/error.hpp"

ASMA_NAMESPACE_BEGIN
namespace nn {

std::string to_string(DistillMode m) { return m == DistillMode::LogitKl ? "logit_kl" : "feature_cosine"; }
std::string to_string(TeacherKind k) { return k == TeacherKind::LinearProbed ? "linear_probed" : "fine_tuned"; }

DistillMode parse_distill_mode(const std::string& s) {
    if (s == "logit_kl") return DistillMode::LogitKl;
    if (s == "feature_cosine") return DistillMode::FeatureCosine;
    throw Error(ErrorCode::InvalidArgument, "unknown distill mode '" + s + "' (logit_kl, feature_cosine)");
}

TeacherKind parse_teacher_kind(const std::string& s) {
    if (s == "linear_probed") return TeacherKind::LinearProbed;
    if (s == "fine_tuned") return TeacherKind::FineTuned;
    throw Error(ErrorCode::InvalidArgument, "unknown teacher kind '" + s + "' (linear_probed, fine_tuned)");
}

void DistillConfig::validate() const {
    if (!(tau > 0)) throw Error(ErrorCode::InvalidArgument, "distill tau must be > 0");
    if (student_tau < 0) throw Error(ErrorCode::InvalidArgument, "distill student_tau must be >= 0");
}

Tensor soften(const Tensor& logits, double tau) {
    if (!(tau > 0)) throw Error(ErrorCode::InvalidArgument, "soften: tau must be > 0");
    return ad::softmax(ad::scale(logits, static_cast<real>(1.0 / tau)), 1);
}

Tensor kd_loss(const Tensor& student_logits, const Tensor& teacher_logits, const DistillConfig& cfg) {
    cfg.validate();
    if (student_logits.rank() != 2 || student_logits.shape() != teacher_logits.shape())
        throw Error(ErrorCode::ShapeMismatch, "kd_loss: student " + ad::shape_string(student_logits.shape()) +
                                                  " vs teacher " + ad::shape_string(teacher_logits.shape()));
    const std::size_t n = student_logits.dim(0), c = student_logits.dim(1);
    // Teacher distribution as constants, computed in double.
    Tensor p_teacher = Tensor::zeros({n, c});
    double entropy_term = 0.0;  // sum p log p
    for (std::size_t i = 0; i < n; ++i) {
        double m = -INFINITY;
        for (std::size_t j = 0; j < c; ++j) m = std::max(m, static_cast<double>(teacher_logits[i * c + j]) / cfg.tau);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(static_cast<double>(teacher_logits[i * c + j]) / cfg.tau - m);
        for (std::size_t j = 0; j < c; ++j) {
            const double logp = static_cast<double>(teacher_logits[i * c + j]) / cfg.tau - m - std::log(z);
            const double p = std::exp(logp);
            p_teacher[i * c + j] = static_cast<real>(p);
            if (p > 0) entropy_term += p * logp;
        }
    }
    Tensor log_q = ad::log_softmax(ad::scale(student_logits, static_cast<real>(1.0 / cfg.student_temperature())), 1);
    Tensor cross = ad::sum_all(ad::mul(p_teacher, log_q));
    const double k = (cfg.scale_by_tau_sq ? cfg.tau * cfg.tau : 1.0) / static_cast<double>(n);
    // k * (sum p log p - sum p log q)
    return ad::add_scalar(ad::scale(cross, static_cast<real>(-k)), static_cast<real>(k * entropy_term));
}

Tensor cosine_distance(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || a.shape() != b.shape())
        throw Error(ErrorCode::ShapeMismatch,
                    "cosine: " + ad::shape_string(a.shape()) + " vs " + ad::shape_string(b.shape()));
    Tensor na = ad::sqrt(ad::sum(ad::square(a), {1}));
    Tensor nb = ad::sqrt(ad::sum(ad::square(b), {1}));
    for (std::size_t i = 0; i < na.size(); ++i)
        if (na[i] < real(1e-12) || nb[i] < real(1e-12))
            throw Error(ErrorCode::ZeroVector, "cosine: row " + std::to_string(i) + " has zero norm");
    Tensor cos = ad::div(ad::sum(ad::mul(a, b), {1}), ad::mul(na, nb));
    return ad::add_scalar(ad::neg(ad::mean_all(cos)), real(1));
}

FeatureDistill::FeatureDistill(std::size_t teacher_dim, std::size_t student_dim, Rng& rng)
    : proj(teacher_dim, student_dim, rng) {}

Tensor FeatureDistill::loss(const Tensor& student_features, const Tensor& teacher_features) const {
    return cosine_distance(student_features, proj.forward(teacher_features));
}

void FeatureDistill::collect(StateRefs& out, const std::string& prefix) const { proj.collect(out, join_name(prefix, "proj")); }

}  // namespace nn
ASMA_NAMESPACE_END
