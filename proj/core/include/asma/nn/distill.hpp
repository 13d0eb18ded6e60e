#pragma once

#include "asma/nn/module.hpp"

ASMA_NAMESPACE_BEGIN
namespace nn {

enum class DistillMode { LogitKl, FeatureCosine };
enum class TeacherKind { LinearProbed, FineTuned };

std::string to_string(DistillMode m);
std::string to_string(TeacherKind k);
DistillMode parse_distill_mode(const std::string& s);
TeacherKind parse_teacher_kind(const std::string& s);

struct DistillConfig {
    double tau = 8.0;
    double student_tau = 0.0;  ///< temperature on the student side; 0 means same as tau
    bool scale_by_tau_sq = true;
    DistillMode mode = DistillMode::LogitKl;
    TeacherKind teacher = TeacherKind::LinearProbed;

    void validate() const;
    double student_temperature() const { return student_tau > 0 ? student_tau : tau; }
};

/// Row-wise softmax(logits / tau).
Tensor soften(const Tensor& logits, double tau);

/// Batch mean of KL(teacher || student) with both sides softened, times tau^2
/// when configured. Only the student receives gradient.
Tensor kd_loss(const Tensor& student_logits, const Tensor& teacher_logits, const DistillConfig& cfg);

/// 1 - mean_b cos(a_b, b_b) for [N, d] inputs. Throws ZeroVector when any row
/// norm is below 1e-12.
Tensor cosine_distance(const Tensor& a, const Tensor& b);

/// Cosine loss between student features and a learned projection of the
/// teacher features.
class FeatureDistill : public Module {
   public:
    FeatureDistill(std::size_t teacher_dim, std::size_t student_dim, Rng& rng);

    Tensor loss(const Tensor& student_features, const Tensor& teacher_features) const;
    void collect(StateRefs& out, const std::string& prefix) const override;

    Linear proj;
};

}  // namespace nn
ASMA_NAMESPACE_END
