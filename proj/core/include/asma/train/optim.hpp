#pragma once

#include <vector>

#include "asma/ad/tensor.hpp"

ASMA_NAMESPACE_BEGIN
namespace train {

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  ///< added to the gradient as weight_decay * w
};

/// Adam over a fixed list of tensors. Parameters without a gradient this step
/// are treated as having a zero gradient.
class Adam {
   public:
    Adam(std::vector<ad::Tensor> params, AdamOptions options = {});

    void step(double lr);
    void zero_grad();

    std::size_t steps() const { return t_; }
    const std::vector<ad::Tensor>& params() const { return params_; }

   private:
    std::vector<ad::Tensor> params_;
    AdamOptions opt_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t t_ = 0;
};

struct Schedule {
    double base_lr = 1e-3;
    double warmup_epochs = 0;
    double epochs = 1;
};

/// Linear warmup from 0 to base_lr over warmup_epochs, then cosine annealing
/// to 0 at `epochs`. `epoch` may be fractional.
double lr_at(double epoch, const Schedule& s);

}  // namespace train
ASMA_NAMESPACE_END
