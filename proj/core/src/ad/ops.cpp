#include "asma/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "asma/error.hpp"

ASMA_NAMESPACE_BEGIN
namespace ad {

namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;

Tape* recording(std::initializer_list<const Tensor*> inputs) {
    Tape* tape = Tape::active();
    if (!tape) return nullptr;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return tape;
    return nullptr;
}

void check_finite(const char* op, const Tensor& out) {
    if (debug_finite_checks() && !out.all_finite())
        throw Error(ErrorCode::NonFiniteDetected, std::string(op) + " produced a non-finite value");
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw Error(ErrorCode::ShapeMismatch,
                    std::string(op) + ": " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
    if (x.rank() != rank)
        throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": expected rank " + std::to_string(rank) +
                                                  ", got " + shape_string(x.shape()));
}

void require_axis(const char* op, const Tensor& x, std::size_t axis) {
    if (axis >= x.rank())
        throw Error(ErrorCode::ShapeMismatch,
                    std::string(op) + ": axis " + std::to_string(axis) + " out of range for " + shape_string(x.shape()));
}

// outer * n * inner decomposition around `axis`.
struct AxisSplit {
    std::size_t outer = 1, n = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.n = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

inline void axpy(real* y, const real* x, real a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// Eight interleaved partial sums combined in a fixed order: deterministic, and
// lets the compiler vectorize without reassociating.
inline real dot(const real* a, const real* b, std::size_t n) {
    real acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
    for (; i < n; ++i) acc[i % 8] += a[i] * b[i];
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

// Hands the output gradient to an input that holds none yet so elementwise
// backward passes can update it in place.
inline bool adopt_grad(TensorImpl& in, TensorImpl& out) {
    if (!in.grad.empty() || &in == &out) return false;
    in.grad = std::move(out.grad);
    out.grad.clear();
    return true;
}

template <class Fwd, class Bwd>
Tensor unary(const char* name, const Tensor& x, Fwd fwd, Bwd dfdx) {
    Tensor out = make_tensor(x.shape());
    const auto xv = x.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = fwd(xv[i]);
    check_finite(name, out);
    if (Tape* tape = recording({&x})) {
        ImplPtr xi = x.impl(), oi = out.impl();
        tape->record(out, [xi, oi, dfdx] {
            if (oi->grad.empty() || !xi->requires_grad) return;
            if (adopt_grad(*xi, *oi)) {
                auto& gx = xi->grad;
                for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= dfdx(xi->value[i], oi->value[i]);
                return;
            }
            auto& gx = xi->grad_buffer();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += oi->grad[i] * dfdx(xi->value[i], oi->value[i]);
        });
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    Tensor out = make_tensor(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    if (Tape* tape = recording({&a, &b})) {
        ImplPtr ai = a.impl(), bi = b.impl(), oi = out.impl();
        tape->record(out, [ai, bi, oi] {
            if (oi->grad.empty()) return;
            // a adopts last, and only when it is not also b.
            const bool distinct = ai != bi;
            for (auto* in : {bi.get(), ai.get()}) {
                if (!in->requires_grad || (distinct && in == ai.get() && adopt_grad(*in, *oi))) continue;
                auto& g = in->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i];
            }
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    Tensor out = make_tensor(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    if (Tape* tape = recording({&a, &b})) {
        ImplPtr ai = a.impl(), bi = b.impl(), oi = out.impl();
        tape->record(out, [ai, bi, oi] {
            if (oi->grad.empty()) return;
            if (ai->requires_grad) {
                auto& g = ai->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i];
            }
            if (bi->requires_grad) {
                auto& g = bi->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] -= oi->grad[i];
            }
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    Tensor out = make_tensor(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    if (Tape* tape = recording({&a, &b})) {
        ImplPtr ai = a.impl(), bi = b.impl(), oi = out.impl();
        tape->record(out, [ai, bi, oi] {
            if (oi->grad.empty()) return;
            // Read both operands before writing: a and b may alias.
            const std::size_t n = oi->grad.size();
            if (ai->requires_grad) {
                std::vector<real> d(n);
                for (std::size_t i = 0; i < n; ++i) d[i] = oi->grad[i] * bi->value[i];
                auto& g = ai->grad_buffer();
                for (std::size_t i = 0; i < n; ++i) g[i] += d[i];
            }
            if (bi->requires_grad) {
                auto& g = bi->grad_buffer();
                for (std::size_t i = 0; i < n; ++i) g[i] += oi->grad[i] * ai->value[i];
            }
        });
    }
    return out;
}

Tensor div(const Tensor& a, const Tensor& b) {
    require_same_shape("div", a, b);
    Tensor out = make_tensor(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] / b[i];
    check_finite("div", out);
    if (Tape* tape = recording({&a, &b})) {
        ImplPtr ai = a.impl(), bi = b.impl(), oi = out.impl();
        tape->record(out, [ai, bi, oi] {
            if (oi->grad.empty()) return;
            const std::size_t n = oi->grad.size();
            if (ai->requires_grad) {
                std::vector<real> d(n);
                for (std::size_t i = 0; i < n; ++i) d[i] = oi->grad[i] / bi->value[i];
                auto& g = ai->grad_buffer();
                for (std::size_t i = 0; i < n; ++i) g[i] += d[i];
            }
            if (bi->requires_grad) {
                auto& g = bi->grad_buffer();
                for (std::size_t i = 0; i < n; ++i) g[i] -= oi->grad[i] * oi->value[i] / bi->value[i];
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& x, real s) {
    return unary("scale", x, [s](real v) { return v * s; }, [s](real, real) { return s; });
}

Tensor add_scalar(const Tensor& x, real s) {
    return unary("add_scalar", x, [s](real v) { return v + s; }, [](real, real) { return real(1); });
}

Tensor relu(const Tensor& x) {
    return unary("relu", x, [](real v) { return v > real(0) ? v : real(0); },
                 [](real v, real) { return v > real(0) ? real(1) : real(0); });
}

Tensor exp(const Tensor& x) {
    return unary("exp", x, [](real v) { return std::exp(v); }, [](real, real y) { return y; });
}

Tensor log(const Tensor& x) {
    return unary("log", x, [](real v) { return std::log(v); }, [](real v, real) { return real(1) / v; });
}

Tensor sqrt(const Tensor& x) {
    return unary("sqrt", x, [](real v) { return std::sqrt(v); }, [](real, real y) { return y > real(0) ? real(0.5) / y : real(0); });
}

namespace {

// C[M,N] += A[M,K] B[K,N]
void gemm_nn(const real* A, const real* B, real* C, std::size_t M, std::size_t K, std::size_t N) {
    for (std::size_t i = 0; i < M; ++i) {
        real* c = C + i * N;
        const real* a = A + i * K;
        for (std::size_t k = 0; k < K; ++k) {
            const real av = a[k];
            if (av != real(0)) axpy(c, B + k * N, av, N);
        }
    }
}

// dA[M,K] += dC[M,N] B[K,N]^T
void gemm_nt(const real* dC, const real* B, real* dA, std::size_t M, std::size_t K, std::size_t N) {
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t k = 0; k < K; ++k) dA[i * K + k] += dot(dC + i * N, B + k * N, N);
}

// dB[K,N] += A[M,K]^T dC[M,N]
void gemm_tn(const real* A, const real* dC, real* dB, std::size_t M, std::size_t K, std::size_t N) {
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t k = 0; k < K; ++k) {
            const real av = A[i * K + k];
            if (av != real(0)) axpy(dB + k * N, dC + i * N, av, N);
        }
}

Tensor matmul_impl(const char* name, const Tensor& a, const Tensor& b, std::size_t batch, std::size_t M,
                   std::size_t K, std::size_t N, Shape out_shape) {
    Tensor out = make_tensor(std::move(out_shape));
    for (std::size_t p = 0; p < batch; ++p)
        gemm_nn(a.values().data() + p * M * K, b.values().data() + p * K * N, out.values().data() + p * M * N, M, K, N);
    check_finite(name, out);
    if (Tape* tape = recording({&a, &b})) {
        ImplPtr ai = a.impl(), bi = b.impl(), oi = out.impl();
        tape->record(out, [ai, bi, oi, batch, M, K, N] {
            if (oi->grad.empty()) return;
            if (ai->requires_grad) {
                std::vector<real> d(ai->value.size(), real(0));
                for (std::size_t p = 0; p < batch; ++p)
                    gemm_nt(oi->grad.data() + p * M * N, bi->value.data() + p * K * N, d.data() + p * M * K, M, K, N);
                auto& g = ai->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i];
            }
            if (bi->requires_grad) {
                auto& g = bi->grad_buffer();
                for (std::size_t p = 0; p < batch; ++p)
                    gemm_tn(ai->value.data() + p * M * K, oi->grad.data() + p * M * N, g.data() + p * K * N, M, K, N);
            }
        });
    }
    return out;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank("matmul", a, 2);
    require_rank("matmul", b, 2);
    if (a.dim(1) != b.dim(0))
        throw Error(ErrorCode::ShapeMismatch, "matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    return matmul_impl("matmul", a, b, 1, a.dim(0), a.dim(1), b.dim(1), {a.dim(0), b.dim(1)});
}

Tensor batched_matmul(const Tensor& a, const Tensor& b) {
    require_rank("batched_matmul", a, 3);
    require_rank("batched_matmul", b, 3);
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1))
        throw Error(ErrorCode::ShapeMismatch,
                    "batched_matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    return matmul_impl("batched_matmul", a, b, a.dim(0), a.dim(1), a.dim(2), b.dim(2), {a.dim(0), a.dim(1), b.dim(2)});
}

namespace {

std::vector<std::size_t> strides_of(const Shape& shape) {
    std::vector<std::size_t> st(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;) st[i - 1] = st[i] * shape[i];
    return st;
}

// For each flat index of `shape` (row-major), the offset given by `strides`.
std::vector<std::size_t> gather_offsets(const Shape& shape, const std::vector<std::size_t>& strides) {
    const std::size_t total = shape_size(shape);
    std::vector<std::size_t> offsets(total);
    std::vector<std::size_t> idx(shape.size(), 0);
    std::size_t off = 0;
    for (std::size_t flat = 0; flat < total; ++flat) {
        offsets[flat] = off;
        for (std::size_t d = shape.size(); d-- > 0;) {
            ++idx[d];
            off += strides[d];
            if (idx[d] < shape[d]) break;
            off -= strides[d] * idx[d];
            idx[d] = 0;
        }
    }
    return offsets;
}

}  // namespace

Tensor transpose(const Tensor& x, std::size_t axis_a, std::size_t axis_b) {
    require_axis("transpose", x, axis_a);
    require_axis("transpose", x, axis_b);
    Shape out_shape = x.shape();
    std::swap(out_shape[axis_a], out_shape[axis_b]);
    auto in_strides = strides_of(x.shape());
    std::swap(in_strides[axis_a], in_strides[axis_b]);
    auto offsets = gather_offsets(out_shape, in_strides);
    Tensor out = make_tensor(out_shape);
    for (std::size_t i = 0; i < offsets.size(); ++i) out[i] = x[offsets[i]];
    if (Tape* tape = recording({&x})) {
        ImplPtr xi = x.impl(), oi = out.impl();
        tape->record(out, [xi, oi, offsets = std::move(offsets)] {
            if (oi->grad.empty() || !xi->requires_grad) return;
            auto& g = xi->grad_buffer();
            for (std::size_t i = 0; i < offsets.size(); ++i) g[offsets[i]] += oi->grad[i];
        });
    }
    return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_size(shape) != x.size())
        throw Error(ErrorCode::ShapeMismatch, "reshape: " + shape_string(x.shape()) + " -> " + shape_string(shape));
    Tensor out = Tensor::from(std::move(shape), std::vector<real>(x.values().begin(), x.values().end()));
    if (Tape* tape = recording({&x})) {
        ImplPtr xi = x.impl(), oi = out.impl();
        tape->record(out, [xi, oi] {
            if (oi->grad.empty() || !xi->requires_grad || adopt_grad(*xi, *oi)) return;
            auto& g = xi->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i];
        });
    }
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "concat of nothing");
    require_axis("concat", parts[0], axis);
    Shape out_shape = parts[0].shape();
    out_shape[axis] = 0;
    for (const auto& p : parts) {
        Shape a = p.shape(), b = parts[0].shape();
        if (a.size() != b.size()) throw Error(ErrorCode::ShapeMismatch, "concat: rank differs");
        a[axis] = b[axis] = 0;
        if (a != b)
            throw Error(ErrorCode::ShapeMismatch,
                        "concat: " + shape_string(p.shape()) + " vs " + shape_string(parts[0].shape()));
        out_shape[axis] += p.dim(axis);
    }
    Tensor out = make_tensor(out_shape);
    const auto total = split_at(out_shape, axis);
    std::vector<std::size_t> begins;
    std::size_t begin = 0;
    for (const auto& p : parts) {
        begins.push_back(begin);
        const auto s = split_at(p.shape(), axis);
        for (std::size_t o = 0; o < s.outer; ++o)
            std::copy_n(p.values().data() + o * s.n * s.inner, s.n * s.inner,
                        out.values().data() + (o * total.n + begin) * total.inner);
        begin += s.n;
    }
    Tape* tape = Tape::active();
    bool any = false;
    for (const auto& p : parts) any = any || p.requires_grad();
    if (tape && any) {
        std::vector<ImplPtr> ins;
        for (const auto& p : parts) ins.push_back(p.impl());
        ImplPtr oi = out.impl();
        tape->record(out, [ins, oi, begins, axis, total] {
            if (oi->grad.empty()) return;
            for (std::size_t k = 0; k < ins.size(); ++k) {
                if (!ins[k]->requires_grad) continue;
                const auto s = split_at(ins[k]->shape, axis);
                auto& g = ins[k]->grad_buffer();
                for (std::size_t o = 0; o < s.outer; ++o) {
                    const real* src = oi->grad.data() + (o * total.n + begins[k]) * total.inner;
                    real* dst = g.data() + o * s.n * s.inner;
                    for (std::size_t i = 0; i < s.n * s.inner; ++i) dst[i] += src[i];
                }
            }
        });
    }
    return out;
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
    require_axis("slice", x, axis);
    if (begin > end || end > x.dim(axis))
        throw Error(ErrorCode::ShapeMismatch, "slice [" + std::to_string(begin) + "," + std::to_string(end) +
                                                  ") out of range for " + shape_string(x.shape()));
    Shape out_shape = x.shape();
    out_shape[axis] = end - begin;
    Tensor out = make_tensor(out_shape);
    const auto s = split_at(x.shape(), axis);
    const std::size_t len = (end - begin) * s.inner;
    for (std::size_t o = 0; o < s.outer; ++o)
        std::copy_n(x.values().data() + (o * s.n + begin) * s.inner, len, out.values().data() + o * len);
    if (Tape* tape = recording({&x})) {
        ImplPtr xi = x.impl(), oi = out.impl();
        tape->record(out, [xi, oi, s, begin, len] {
            if (oi->grad.empty() || !xi->requires_grad) return;
            auto& g = xi->grad_buffer();
            for (std::size_t o = 0; o < s.outer; ++o) {
                real* dst = g.data() + (o * s.n + begin) * s.inner;
                const real* src = oi->grad.data() + o * len;
                for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
            }
        });
    }
    return out;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
    require_axis("softmax", x, axis);
    const auto s = split_at(x.shape(), axis);
    Tensor out = make_tensor(x.shape());
    const real* xv = x.values().data();
    real* ov = out.values().data();
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t base = o * s.n * s.inner + i;
            real m = -std::numeric_limits<real>::infinity();
            for (std::size_t j = 0; j < s.n; ++j) m = std::max(m, xv[base + j * s.inner]);
            real z = 0;
            for (std::size_t j = 0; j < s.n; ++j) {
                const real e = std::exp(xv[base + j * s.inner] - m);
                ov[base + j * s.inner] = e;
                z += e;
            }
            for (std::size_t j = 0; j < s.n; ++j) ov[base + j * s.inner] /= z;
        }
    if (Tape* tape = recording({&x})) {
        ImplPtr xi = x.impl(), oi = out.impl();
        tape->record(out, [xi, oi, s] {
            if (oi->grad.empty() || !xi->requires_grad) return;
            auto& g = xi->grad_buffer();
            const real* y = oi->value.data();
            const real* dy = oi->grad.data();
            for (std::size_t o = 0; o < s.outer; ++o)
                for (std::size_t i = 0; i < s.inner; ++i) {
                    const std::size_t base = o * s.n * s.inner + i;
                    real d = 0;
                    for (std::size_t j = 0; j < s.n; ++j) d += dy[base + j * s.inner] * y[base + j * s.inner];
                    for (std::size_t j = 0; j < s.n; ++j) {
                        const std::size_t k = base + j * s.inner;
                        g[k] += y[k] * (dy[k] - d);
                    }
                }
        });
    }
    return out;
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
    require_axis("log_softmax", x, axis);
    const auto s = split_at(x.shape(), axis);
    Tensor out = make_tensor(x.shape());
    const real* xv = x.values().data();
    real* ov = out.values().data();
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t i = 0; i < s.inner; ++i) {
            const std::size_t base = o * s.n * s.inner + i;
            real m = -std::numeric_limits<real>::infinity();
            for (std::size_t j = 0; j < s.n; ++j) m = std::max(m, xv[base + j * s.inner]);
            real z = 0;
            for (std::size_t j = 0; j < s.n; ++j) z += std::exp(xv[base + j * s.inner] - m);
            const real lz = m + std::log(z);
            for (std::size_t j = 0; j < s.n; ++j) ov[base + j * s.inner] = xv[base + j * s.inner] - lz;
        }
    if (Tape* tape = recording({&x})) {
        ImplPtr xi = x.impl(), oi = out.impl();
        tape->record(out, [xi, oi, s] {
            if (oi->grad.empty() || !xi->requires_grad) return;
            auto& g = xi->grad_buffer();
            const real* y = oi->value.data();
            const real* dy = oi->grad.data();
            for (std::size_t o = 0; o < s.outer; ++o)
                for (std::size_t i = 0; i < s.inner; ++i) {
                    const std::size_t base = o * s.n * s.inner + i;
                    real total = 0;
                    for (std::size_t j = 0; j < s.n; ++j) total += dy[base + j * s.inner];
                    for (std::size_t j = 0; j < s.n; ++j) {
                        const std::size_t k = base + j * s.inner;
                        g[k] += dy[k] - std::exp(y[k]) * total;
                    }
                }
        });
    }
    return out;
}

Tensor sum(const Tensor& x, const std::vector<std::size_t>& axes) {
    std::vector<bool> reduced(x.rank(), false);
    for (auto a : axes) {
        require_axis("sum", x, a);
        reduced[a] = true;
    }
    Shape out_shape;
    for (std::size_t d = 0; d < x.rank(); ++d)
        if (!reduced[d]) out_shape.push_back(x.dim(d));
    // Stride of each input axis in the output (0 for reduced axes).
    std::vector<std::size_t> out_strides(x.rank(), 0);
    std::size_t st = 1;
    for (std::size_t d = x.rank(); d-- > 0;)
        if (!reduced[d]) {
            out_strides[d] = st;
            st *= x.dim(d);
        }
    auto offsets = gather_offsets(x.shape(), out_strides);
    Tensor out = make_tensor(out_shape);
    for (std::size_t i = 0; i < offsets.size(); ++i) out[offsets[i]] += x[i];
    if (Tape* tape = recording({&x})) {
        ImplPtr xi = x.impl(), oi = out.impl();
        tape->record(out, [xi, oi, offsets = std::move(offsets)] {
            if (oi->grad.empty() || !xi->requires_grad) return;
            auto& g = xi->grad_buffer();
            for (std::size_t i = 0; i < offsets.size(); ++i) g[i] += oi->grad[offsets[i]];
        });
    }
    return out;
}

Tensor mean(const Tensor& x, const std::vector<std::size_t>& axes) {
    std::size_t count = 1;
    for (auto a : axes) {
        require_axis("mean", x, a);
        count *= x.dim(a);
    }
    return scale(sum(x, axes), real(1) / static_cast<real>(count));
}

Tensor sum_all(const Tensor& x) {
    std::vector<std::size_t> axes(x.rank());
    for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = i;
    return sum(x, axes);
}

Tensor mean_all(const Tensor& x) { return scale(sum_all(x), real(1) / static_cast<real>(x.size())); }

Tensor add_bias(const Tensor& x, const Tensor& b, std::size_t axis) {
    require_axis("add_bias", x, axis);
    if (b.rank() != 1 || b.dim(0) != x.dim(axis))
        throw Error(ErrorCode::ShapeMismatch, "add_bias: bias " + shape_string(b.shape()) + " for axis " +
                                                  std::to_string(axis) + " of " + shape_string(x.shape()));
    const auto s = split_at(x.shape(), axis);
    Tensor out = make_tensor(x.shape());
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t j = 0; j < s.n; ++j) {
            const std::size_t base = (o * s.n + j) * s.inner;
            const real bj = b[j];
            for (std::size_t i = 0; i < s.inner; ++i) out[base + i] = x[base + i] + bj;
        }
    if (Tape* tape = recording({&x, &b})) {
        ImplPtr xi = x.impl(), bi = b.impl(), oi = out.impl();
        tape->record(out, [xi, bi, oi, s] {
            if (oi->grad.empty()) return;
            if (bi->requires_grad) {
                auto& g = bi->grad_buffer();
                for (std::size_t o = 0; o < s.outer; ++o)
                    for (std::size_t j = 0; j < s.n; ++j) {
                        const real* dy = oi->grad.data() + (o * s.n + j) * s.inner;
                        real acc = 0;
                        for (std::size_t i = 0; i < s.inner; ++i) acc += dy[i];
                        g[j] += acc;
                    }
            }
            if (xi->requires_grad && !adopt_grad(*xi, *oi)) {
                auto& g = xi->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += oi->grad[i];
            }
        });
    }
    return out;
}

Tensor mul_along(const Tensor& x, const Tensor& sv, std::size_t axis) {
    require_axis("mul_along", x, axis);
    if (sv.rank() != 1 || sv.dim(0) != x.dim(axis))
        throw Error(ErrorCode::ShapeMismatch, "mul_along: scale " + shape_string(sv.shape()) + " for axis " +
                                                  std::to_string(axis) + " of " + shape_string(x.shape()));
    const auto s = split_at(x.shape(), axis);
    Tensor out = make_tensor(x.shape());
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t j = 0; j < s.n; ++j) {
            const std::size_t base = (o * s.n + j) * s.inner;
            const real k = sv[j];
            for (std::size_t i = 0; i < s.inner; ++i) out[base + i] = x[base + i] * k;
        }
    if (Tape* tape = recording({&x, &sv})) {
        ImplPtr xi = x.impl(), si = sv.impl(), oi = out.impl();
        tape->record(out, [xi, si, oi, s] {
            if (oi->grad.empty()) return;
            std::vector<real> ds(s.n, real(0));
            for (std::size_t o = 0; o < s.outer; ++o)
                for (std::size_t j = 0; j < s.n; ++j) {
                    const std::size_t base = (o * s.n + j) * s.inner;
                    ds[j] += dot(oi->grad.data() + base, xi->value.data() + base, s.inner);
                }
            if (xi->requires_grad) {
                auto& g = xi->grad_buffer();
                for (std::size_t o = 0; o < s.outer; ++o)
                    for (std::size_t j = 0; j < s.n; ++j) {
                        const std::size_t base = (o * s.n + j) * s.inner;
                        axpy(g.data() + base, oi->grad.data() + base, si->value[j], s.inner);
                    }
            }
            if (si->requires_grad) {
                auto& g = si->grad_buffer();
                for (std::size_t j = 0; j < s.n; ++j) g[j] += ds[j];
            }
        });
    }
    return out;
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, BatchNormState& state, bool training) {
    if (x.rank() < 2) throw Error(ErrorCode::ShapeMismatch, "batch_norm needs [N, C, ...], got " + shape_string(x.shape()));
    const std::size_t N = x.dim(0), C = x.dim(1);
    const std::size_t inner = x.size() / (N * C);
    if (gamma.shape() != Shape{C} || beta.shape() != Shape{C})
        throw Error(ErrorCode::ShapeMismatch, "batch_norm affine params must be [" + std::to_string(C) + "]");
    if (state.running_mean.size() != C)
        throw Error(ErrorCode::ShapeMismatch, "batch_norm running stats sized for " +
                                                  std::to_string(state.running_mean.size()) + " channels, input has " +
                                                  std::to_string(C));
    const std::size_t M = N * inner;
    if (training && M < 2) throw Error(ErrorCode::BatchTooSmall, "batch_norm in training mode needs >= 2 values per channel");

    std::vector<real> mu(C), inv_std(C);
    const real* xv = x.values().data();
    if (training) {
        for (std::size_t c = 0; c < C; ++c) {
            double s = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                const real* p = xv + (n * C + c) * inner;
                for (std::size_t i = 0; i < inner; ++i) s += p[i];
            }
            const double m = s / static_cast<double>(M);
            double ss = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                const real* p = xv + (n * C + c) * inner;
                for (std::size_t i = 0; i < inner; ++i) {
                    const double d = p[i] - m;
                    ss += d * d;
                }
            }
            const double var = ss / static_cast<double>(M);
            mu[c] = static_cast<real>(m);
            inv_std[c] = static_cast<real>(1.0 / std::sqrt(var + static_cast<double>(state.eps)));
            const double unbiased = ss / static_cast<double>(M - 1);
            state.running_mean[c] = static_cast<real>((1.0 - state.momentum) * state.running_mean[c] + state.momentum * m);
            state.running_var[c] =
                static_cast<real>((1.0 - state.momentum) * state.running_var[c] + state.momentum * unbiased);
        }
    } else {
        for (std::size_t c = 0; c < C; ++c) {
            mu[c] = state.running_mean[c];
            inv_std[c] = static_cast<real>(1.0 / std::sqrt(static_cast<double>(state.running_var[c]) + state.eps));
        }
    }

    Tensor out = make_tensor(x.shape());
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c) {
            const std::size_t base = (n * C + c) * inner;
            const real g = gamma[c], b = beta[c], m = mu[c], is = inv_std[c];
            for (std::size_t i = 0; i < inner; ++i) out[base + i] = g * ((xv[base + i] - m) * is) + b;
        }
    check_finite("batch_norm", out);

    if (Tape* tape = recording({&x, &gamma, &beta})) {
        ImplPtr xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), oi = out.impl();
        tape->record(out, [xi, gi, bi, oi, mu, inv_std, N, C, inner, M, training] {
            if (oi->grad.empty()) return;
            const real* xv = xi->value.data();
            std::vector<real> sum_dy(C, real(0)), sum_dy_h(C, real(0));
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t c = 0; c < C; ++c) {
                    const std::size_t base = (n * C + c) * inner;
                    const real* dy = oi->grad.data() + base;
                    const real m = mu[c], is = inv_std[c];
                    real a = 0, b = 0;
                    for (std::size_t i = 0; i < inner; ++i) {
                        a += dy[i];
                        b += dy[i] * ((xv[base + i] - m) * is);
                    }
                    sum_dy[c] += a;
                    sum_dy_h[c] += b;
                }
            if (gi->requires_grad) {
                auto& g = gi->grad_buffer();
                for (std::size_t c = 0; c < C; ++c) g[c] += sum_dy_h[c];
            }
            if (bi->requires_grad) {
                auto& g = bi->grad_buffer();
                for (std::size_t c = 0; c < C; ++c) g[c] += sum_dy[c];
            }
            if (!xi->requires_grad) return;
            // In place when the input adopts the output gradient: each element
            // reads only its own dy.
            const bool adopted = adopt_grad(*xi, *oi);
            auto& gx = adopted ? xi->grad : xi->grad_buffer();
            const real* dyv = adopted ? gx.data() : oi->grad.data();
            const real invM = real(1) / static_cast<real>(M);
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t c = 0; c < C; ++c) {
                    const std::size_t base = (n * C + c) * inner;
                    const real k = gi->value[c] * inv_std[c];
                    const real m = mu[c], is = inv_std[c];
                    const real mdy = training ? sum_dy[c] * invM : real(0);
                    const real mdyh = training ? sum_dy_h[c] * invM : real(0);
                    real* g = gx.data() + base;
                    const real* dy = dyv + base;
                    if (adopted) {
                        for (std::size_t i = 0; i < inner; ++i)
                            g[i] = k * (dy[i] - mdy - ((xv[base + i] - m) * is) * mdyh);
                    } else {
                        for (std::size_t i = 0; i < inner; ++i)
                            g[i] += k * (dy[i] - mdy - ((xv[base + i] - m) * is) * mdyh);
                    }
                }
        });
    }
    return out;
}

Tensor conv_temporal(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad) {
    require_rank("conv_temporal input", x, 4);
    require_rank("conv_temporal weight", w, 3);
    const std::size_t N = x.dim(0), Cin = x.dim(1), T = x.dim(2), V = x.dim(3);
    const std::size_t Cout = w.dim(0), K = w.dim(2);
    if (w.dim(1) != Cin)
        throw Error(ErrorCode::ShapeMismatch,
                    "conv_temporal: input " + shape_string(x.shape()) + " vs weight " + shape_string(w.shape()));
    if (stride == 0 || T + 2 * pad < K)
        throw Error(ErrorCode::ShapeMismatch, "conv_temporal: kernel " + std::to_string(K) + " does not fit T=" +
                                                  std::to_string(T) + " with pad " + std::to_string(pad));
    const std::size_t Tout = (T + 2 * pad - K) / stride + 1;
    Tensor out = make_tensor({N, Cout, Tout, V});

    // Output frames `to` reading input frame to*stride - pad + k inside [0, T).
    auto valid_range = [=](std::size_t k) {
        // to*stride + k >= pad  and  to*stride + k < T + pad
        std::size_t lo = k >= pad ? 0 : (pad - k + stride - 1) / stride;
        std::size_t hi = T + pad > k ? (T + pad - k + stride - 1) / stride : 0;
        hi = std::min(hi, Tout);
        return std::pair<std::size_t, std::size_t>{lo, std::max(lo, hi)};
    };

    const real* xv = x.values().data();
    const real* wv = w.values().data();
    real* ov = out.values().data();
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t co = 0; co < Cout; ++co) {
            real* y = ov + (n * Cout + co) * Tout * V;
            for (std::size_t ci = 0; ci < Cin; ++ci) {
                const real* xs = xv + (n * Cin + ci) * T * V;
                for (std::size_t k = 0; k < K; ++k) {
                    const real a = wv[(co * Cin + ci) * K + k];
                    if (a == real(0)) continue;
                    const auto [lo, hi] = valid_range(k);
                    if (stride == 1) {
                        if (hi > lo) axpy(y + lo * V, xs + (lo + k - pad) * V, a, (hi - lo) * V);
                    } else {
                        for (std::size_t to = lo; to < hi; ++to) axpy(y + to * V, xs + (to * stride + k - pad) * V, a, V);
                    }
                }
            }
        }
    check_finite("conv_temporal", out);

    if (Tape* tape = recording({&x, &w})) {
        ImplPtr xi = x.impl(), wi = w.impl(), oi = out.impl();
        tape->record(out, [xi, wi, oi, N, Cin, T, V, Cout, K, Tout, stride, pad, valid_range] {
            if (oi->grad.empty()) return;
            const real* dy = oi->grad.data();
            if (wi->requires_grad) {
                auto& gw = wi->grad_buffer();
                const real* xs0 = xi->value.data();
                for (std::size_t co = 0; co < Cout; ++co)
                    for (std::size_t ci = 0; ci < Cin; ++ci)
                        for (std::size_t k = 0; k < K; ++k) {
                            const auto [lo, hi] = valid_range(k);
                            real acc = 0;
                            for (std::size_t n = 0; n < N; ++n) {
                                const real* g = dy + (n * Cout + co) * Tout * V;
                                const real* xs = xs0 + (n * Cin + ci) * T * V;
                                if (stride == 1) {
                                    if (hi > lo) acc += dot(g + lo * V, xs + (lo + k - pad) * V, (hi - lo) * V);
                                } else {
                                    for (std::size_t to = lo; to < hi; ++to)
                                        acc += dot(g + to * V, xs + (to * stride + k - pad) * V, V);
                                }
                            }
                            gw[(co * Cin + ci) * K + k] += acc;
                        }
            }
            if (xi->requires_grad) {
                auto& gx = xi->grad_buffer();
                const real* wv = wi->value.data();
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t ci = 0; ci < Cin; ++ci) {
                        real* dx = gx.data() + (n * Cin + ci) * T * V;
                        for (std::size_t co = 0; co < Cout; ++co) {
                            const real* g = dy + (n * Cout + co) * Tout * V;
                            for (std::size_t k = 0; k < K; ++k) {
                                const real a = wv[(co * Cin + ci) * K + k];
                                if (a == real(0)) continue;
                                const auto [lo, hi] = valid_range(k);
                                if (stride == 1) {
                                    if (hi > lo) axpy(dx + (lo + k - pad) * V, g + lo * V, a, (hi - lo) * V);
                                } else {
                                    for (std::size_t to = lo; to < hi; ++to)
                                        axpy(dx + (to * stride + k - pad) * V, g + to * V, a, V);
                                }
                            }
                        }
                    }
            }
        });
    }
    return out;
}

Tensor graph_conv(const Tensor& x, const Tensor& adjacency) {
    require_rank("graph_conv adjacency", adjacency, 2);
    if (x.rank() < 1 || x.shape().back() != adjacency.dim(0))
        throw Error(ErrorCode::ShapeMismatch,
                    "graph_conv: input " + shape_string(x.shape()) + " vs adjacency " + shape_string(adjacency.shape()));
    const std::size_t V = adjacency.dim(0), W = adjacency.dim(1);
    const std::size_t R = x.size() / V;
    Shape out_shape = x.shape();
    out_shape.back() = W;
    Tensor out = make_tensor(out_shape);
    gemm_nn(x.values().data(), adjacency.values().data(), out.values().data(), R, V, W);
    check_finite("graph_conv", out);
    if (Tape* tape = recording({&x, &adjacency})) {
        ImplPtr xi = x.impl(), ai = adjacency.impl(), oi = out.impl();
        tape->record(out, [xi, ai, oi, R, V, W] {
            if (oi->grad.empty()) return;
            if (xi->requires_grad) gemm_nt(oi->grad.data(), ai->value.data(), xi->grad_buffer().data(), R, V, W);
            if (ai->requires_grad) gemm_tn(xi->value.data(), oi->grad.data(), ai->grad_buffer().data(), R, V, W);
        });
    }
    return out;
}

}  // namespace ad
ASMA_NAMESPACE_END
