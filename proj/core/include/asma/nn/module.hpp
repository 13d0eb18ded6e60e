#pragma once

#include <string>
#include <vector>

#include "asma/ad/ops.hpp"
#include "asma/rng.hpp"

ASMA_NAMESPACE_BEGIN
namespace nn {

using ad::Tensor;

/// Learnable tensor with a stable dotted name ("layers.3.tcn.weight").
struct NamedParam {
    std::string name;
    Tensor tensor;
};

/// Non-learnable state saved with a checkpoint (batch-norm running stats).
struct NamedBuffer {
    std::string name;
    std::vector<real>* values;
};

struct StateRefs {
    std::vector<NamedParam> params;
    std::vector<NamedBuffer> buffers;

    std::vector<Tensor> tensors() const;
    void append(const StateRefs& other);
};

class Module {
   public:
    virtual ~Module() = default;
    virtual void collect(StateRefs& out, const std::string& prefix) const = 0;

    StateRefs state(const std::string& prefix = "") const {
        StateRefs s;
        collect(s, prefix);
        return s;
    }
    std::vector<Tensor> parameters() const { return state().tensors(); }

    void set_requires_grad(bool flag) const;
};

/// Total learnable scalar count.
std::size_t count_params(const Module& m);
std::size_t count_params(const StateRefs& s);

std::string join_name(const std::string& prefix, const std::string& name);

/// Uniform(-bound, bound) tensor.
Tensor uniform_tensor(ad::Shape shape, double bound, Rng& rng, bool requires_grad = true);

/// y = x W + b with W [in, out]. Accepts [N, in] or [N, L, in].
class Linear : public Module {
   public:
    Linear() = default;
    Linear(std::size_t in, std::size_t out, Rng& rng, bool bias = true);

    Tensor forward(const Tensor& x) const;
    void collect(StateRefs& out, const std::string& prefix) const override;

    std::size_t in_features() const { return weight.dim(0); }
    std::size_t out_features() const { return weight.dim(1); }

    Tensor weight;
    Tensor bias;  ///< undefined when constructed without bias
};

/// Batch norm over axis 1 with learnable affine parameters.
class BatchNorm : public Module {
   public:
    BatchNorm() = default;
    explicit BatchNorm(std::size_t channels);

    Tensor forward(const Tensor& x, bool training) const;
    void collect(StateRefs& out, const std::string& prefix) const override;

    Tensor gamma;
    Tensor beta;
    mutable ad::BatchNormState stats;
};

/// Mean softmax cross-entropy of logits [N, C] against integer labels.
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels);

/// Row-wise argmax of a [N, C] tensor.
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace nn
ASMA_NAMESPACE_END
