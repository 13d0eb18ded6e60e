#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "asma/precision.hpp"

ASMA_NAMESPACE_BEGIN
namespace ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct TapeState;

struct TensorImpl {
    Shape shape;
    std::vector<real> value;
    std::vector<real> grad;  ///< empty until something accumulates into it
    bool requires_grad = false;
    std::weak_ptr<TapeState> tape;  ///< set for tensors produced by a recorded op

    std::vector<real>& grad_buffer() {
        if (grad.empty()) grad.assign(value.size(), real(0));
        return grad;
    }
};

/// Dense row-major array with shared storage. Copies alias; use clone() for
/// an independent copy.
class Tensor {
   public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, real value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<real> values, bool requires_grad = false);
    static Tensor scalar(real value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }

    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
    std::size_t size() const { return impl_->value.size(); }

    std::span<const real> values() const { return impl_->value; }
    std::span<real> values() { return impl_->value; }
    real operator[](std::size_t i) const { return impl_->value[i]; }
    real& operator[](std::size_t i) { return impl_->value[i]; }
    real item() const;

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool flag) { impl_->requires_grad = flag; }

    bool has_grad() const { return !impl_->grad.empty(); }
    /// Gradient values; zeros when nothing has been accumulated.
    std::vector<real> grad() const;
    void zero_grad() { impl_->grad.clear(); }

    /// Independent copy of the values, no gradient, not on any tape.
    Tensor clone() const;

    bool all_finite() const;

    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

   private:
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<TensorImpl> impl_;

    friend Tensor make_tensor(Shape shape);
};

Tensor make_tensor(Shape shape);

/// Records primitive applications while alive on the current thread.
/// Scopes nest; destruction restores the previously active tape.
class Tape {
   public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::size_t size() const;

    /// Innermost active tape on this thread, or nullptr.
    static Tape* active();

    /// Appends a backward closure and marks `out` as produced on this tape.
    void record(const Tensor& out, std::function<void()> backward_fn);

    const std::shared_ptr<TapeState>& state() const { return state_; }

   private:
    std::shared_ptr<TapeState> state_;
    Tape* previous_;
};

/// Temporarily disables recording on this thread.
class NoGradGuard {
   public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

   private:
    Tape* previous_;
};

/// Seeds d(loss)/d(loss) = 1 and runs the tape in reverse, accumulating into
/// every requires_grad tensor it reaches. The tape is consumed. Throws
/// NotScalar for non-scalar losses and NoTape when `loss` was not recorded.
void backward(const Tensor& loss);

/// When enabled, every primitive checks its output for NaN/Inf and throws
/// NonFiniteDetected. Off by default.
void set_debug_finite_checks(bool enabled);
bool debug_finite_checks();

}  // namespace ad
ASMA_NAMESPACE_END
