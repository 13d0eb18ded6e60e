#include "asma/nn/module.hpp"

#include <cmath>

#include "asma/error.hpp"

ASMA_NAMESPACE_BEGIN
namespace nn {

std::vector<Tensor> StateRefs::tensors() const {
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(p.tensor);
    return out;
}

void StateRefs::append(const StateRefs& other) {
    params.insert(params.end(), other.params.begin(), other.params.end());
    buffers.insert(buffers.end(), other.buffers.begin(), other.buffers.end());
}

void Module::set_requires_grad(bool flag) const {
    for (auto& t : parameters()) {
        Tensor h = t;
        h.set_requires_grad(flag);
    }
}

std::size_t count_params(const StateRefs& s) {
    std::size_t n = 0;
    for (const auto& p : s.params) n += p.tensor.size();
    return n;
}

std::size_t count_params(const Module& m) { return count_params(m.state()); }

std::string join_name(const std::string& prefix, const std::string& name) {
    return prefix.empty() ? name : prefix + "." + name;
}

Tensor uniform_tensor(ad::Shape shape, double bound, Rng& rng, bool requires_grad) {
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    for (auto& v : t.values()) v = static_cast<real>(rng.uniform(-bound, bound));
    return t;
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng, bool with_bias) {
    if (in == 0 || out == 0) throw Error(ErrorCode::InvalidArgument, "Linear needs nonzero sizes");
    weight = uniform_tensor({in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng);
    if (with_bias) bias = Tensor::zeros({out}, true);
}

Tensor Linear::forward(const Tensor& x) const {
    if (x.rank() == 3) {
        const std::size_t n = x.dim(0), l = x.dim(1);
        Tensor y = forward(ad::reshape(x, {n * l, x.dim(2)}));
        return ad::reshape(y, {n, l, out_features()});
    }
    Tensor y = ad::matmul(x, weight);
    return bias.defined() ? ad::add_bias(y, bias, 1) : y;
}

void Linear::collect(StateRefs& out, const std::string& prefix) const {
    out.params.push_back({join_name(prefix, "weight"), weight});
    if (bias.defined()) out.params.push_back({join_name(prefix, "bias"), bias});
}

BatchNorm::BatchNorm(std::size_t channels)
    : gamma(Tensor::full({channels}, real(1), true)), beta(Tensor::zeros({channels}, true)), stats(channels) {}

Tensor BatchNorm::forward(const Tensor& x, bool training) const { return ad::batch_norm(x, gamma, beta, stats, training); }

void BatchNorm::collect(StateRefs& out, const std::string& prefix) const {
    out.params.push_back({join_name(prefix, "gamma"), gamma});
    out.params.push_back({join_name(prefix, "beta"), beta});
    out.buffers.push_back({join_name(prefix, "running_mean"), &stats.running_mean});
    out.buffers.push_back({join_name(prefix, "running_var"), &stats.running_var});
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2 || logits.dim(0) != labels.size())
        throw Error(ErrorCode::ShapeMismatch, "cross_entropy: logits " + ad::shape_string(logits.shape()) + " vs " +
                                                  std::to_string(labels.size()) + " labels");
    const std::size_t n = logits.dim(0), c = logits.dim(1);
    Tensor onehot = Tensor::zeros({n, c});
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c)
            throw Error(ErrorCode::LabelSpaceMismatch,
                        "label " + std::to_string(labels[i]) + " outside " + std::to_string(c) + " classes");
        onehot[i * c + static_cast<std::size_t>(labels[i])] = real(1);
    }
    Tensor picked = ad::sum_all(ad::mul(ad::log_softmax(logits, 1), onehot));
    return ad::scale(picked, real(-1) / static_cast<real>(n));
}

std::vector<int> argmax_rows(const Tensor& logits) {
    const std::size_t n = logits.dim(0), c = logits.dim(1);
    std::vector<int> out(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < c; ++j)
            if (logits[i * c + j] > logits[i * c + best]) best = j;
        out[i] = static_cast<int>(best);
    }
    return out;
}

}  // namespace nn
ASMA_NAMESPACE_END
