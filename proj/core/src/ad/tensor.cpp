#include "asma/ad/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "asma/error.hpp"

ASMA_NAMESPACE_BEGIN
namespace ad {

struct TapeState {
    std::vector<std::function<void()>> nodes;
};

namespace {
thread_local Tape* g_active = nullptr;
bool g_finite_checks = false;
}  // namespace

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
}

Tensor make_tensor(Shape shape) {
    auto impl = std::make_shared<TensorImpl>();
    impl->value.assign(shape_size(shape), real(0));
    impl->shape = std::move(shape);
    return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    Tensor t = make_tensor(std::move(shape));
    t.set_requires_grad(requires_grad);
    return t;
}

Tensor Tensor::full(Shape shape, real value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.impl_->value.begin(), t.impl_->value.end(), value);
    return t;
}

Tensor Tensor::from(Shape shape, std::vector<real> values, bool requires_grad) {
    if (values.size() != shape_size(shape))
        throw Error(ErrorCode::ShapeMismatch, std::to_string(values.size()) + " values for shape " + shape_string(shape));
    Tensor t = make_tensor(std::move(shape));
    t.impl_->value = std::move(values);
    t.set_requires_grad(requires_grad);
    return t;
}

Tensor Tensor::scalar(real value, bool requires_grad) { return from({}, {value}, requires_grad); }

real Tensor::item() const {
    if (size() != 1) throw Error(ErrorCode::NotScalar, "item() on tensor of shape " + shape_string(shape()));
    return impl_->value[0];
}

std::vector<real> Tensor::grad() const {
    if (impl_->grad.empty()) return std::vector<real>(size(), real(0));
    return impl_->grad;
}

Tensor Tensor::clone() const { return from(shape(), impl_->value); }

bool Tensor::all_finite() const {
    return std::all_of(impl_->value.begin(), impl_->value.end(), [](real v) { return std::isfinite(v); });
}

Tape::Tape() : state_(std::make_shared<TapeState>()), previous_(g_active) { g_active = this; }

Tape::~Tape() { g_active = previous_; }

std::size_t Tape::size() const { return state_->nodes.size(); }

Tape* Tape::active() { return g_active; }

void Tape::record(const Tensor& out, std::function<void()> backward_fn) {
    out.impl()->requires_grad = true;
    out.impl()->tape = state_;
    state_->nodes.push_back(std::move(backward_fn));
}

NoGradGuard::NoGradGuard() : previous_(g_active) { g_active = nullptr; }

NoGradGuard::~NoGradGuard() { g_active = previous_; }

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw Error(ErrorCode::NotScalar,
                    "backward needs a scalar loss, got shape " + (loss.defined() ? shape_string(loss.shape()) : "[]"));
    auto state = loss.impl()->tape.lock();
    if (!state || state->nodes.empty())
        throw Error(ErrorCode::NoTape, "loss was not produced under an active tape (or the tape was consumed)");
    loss.impl()->grad_buffer()[0] += real(1);
    auto nodes = std::move(state->nodes);
    state->nodes.clear();
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) (*it)();
    loss.impl()->tape.reset();
}

void set_debug_finite_checks(bool enabled) { g_finite_checks = enabled; }

bool debug_finite_checks() { return g_finite_checks; }

}  // namespace ad
ASMA_NAMESPACE_END
