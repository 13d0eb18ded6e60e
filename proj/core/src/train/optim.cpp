#include "asma/train/optim.hpp"

#include <cmath>
#include <numbers>

ASMA_NAMESPACE_BEGIN
namespace train {

Adam::Adam(std::vector<ad::Tensor> params, AdamOptions options) : params_(std::move(params)), opt_(options) {
    for (const auto& p : params_) {
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void Adam::step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        ad::Tensor p = params_[k];
        const auto& grad = p.impl()->grad;
        auto values = p.values();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double w = values[i];
            const double g = (grad.empty() ? 0.0 : static_cast<double>(grad[i])) + opt_.weight_decay * w;
            m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * g;
            v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * g * g;
            const double mhat = m[i] / c1, vhat = v[i] / c2;
            values[i] = static_cast<real>(w - lr * mhat / (std::sqrt(vhat) + opt_.eps));
        }
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) {
        ad::Tensor h = p;
        h.zero_grad();
    }
}

double lr_at(double epoch, const Schedule& s) {
    if (epoch < s.warmup_epochs) return s.base_lr * epoch / s.warmup_epochs;
    const double span = s.epochs - s.warmup_epochs;
    if (span <= 0) return s.base_lr;
    return s.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * (epoch - s.warmup_epochs) / span));
}

}  // namespace train
ASMA_NAMESPACE_END
