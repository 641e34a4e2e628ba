#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "moegate/common.hpp"
#include "moegate/rng.hpp"
#include "moegate/tape.hpp"
#include "moegate/tensor.hpp"

namespace moegate {
namespace detail {

// C[M,N] = op(A)*op(B), optionally accumulating into C. op(A) is A[M,K] or
// A[K,M] when trans_a; op(B) is B[K,N] or B[N,K] when trans_b. Accumulation
// runs in double regardless of T. Rows of C are distributed over threads;
// each element is produced by exactly one thread.
template <typename T>
void gemm(bool trans_a, bool trans_b, int M, int N, int K, const T* A, const T* B, T* C, bool accumulate) {
    const std::int64_t row_cost = static_cast<std::int64_t>(N) * K + 1;
    const std::int64_t grain = std::max<std::int64_t>(1, 262144 / row_cost);
    if (!trans_a && trans_b) {
        // C[i,j] = dot(A row i, B row j); both contiguous.
        parallel_for(M, grain, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t i = lo; i < hi; ++i) {
                const T* a = A + i * K;
                for (int j = 0; j < N; ++j) {
                    const T* b = B + static_cast<std::int64_t>(j) * K;
                    double acc = 0.0;
                    for (int k = 0; k < K; ++k)
                        acc += static_cast<double>(a[k]) * static_cast<double>(b[k]);
                    T* c = C + i * N + j;
                    *c = accumulate ? static_cast<T>(static_cast<double>(*c) + acc) : static_cast<T>(acc);
                }
            }
        });
        return;
    }
    // NN and TN share the row-buffer form: C row i accumulates a[k]*B[k,:].
    parallel_for(M, grain, [&](std::int64_t lo, std::int64_t hi) {
        std::vector<double> buf(static_cast<std::size_t>(N));
        for (std::int64_t i = lo; i < hi; ++i) {
            T* c = C + i * N;
            if (accumulate) {
                for (int j = 0; j < N; ++j) buf[j] = static_cast<double>(c[j]);
            } else {
                std::fill(buf.begin(), buf.end(), 0.0);
            }
            for (int k = 0; k < K; ++k) {
                const double a = static_cast<double>(trans_a ? A[static_cast<std::int64_t>(k) * M + i]
                                                             : A[i * K + k]);
                if (a == 0.0) continue;
                const T* b = B + static_cast<std::int64_t>(k) * N;  // trans_b unused in this form
                for (int j = 0; j < N; ++j)
                    buf[j] += a * static_cast<double>(b[j]);
            }
            for (int j = 0; j < N; ++j) c[j] = static_cast<T>(buf[j]);
        }
    });
}

template <typename T>
bool wants_grad(const Tape<T>& tape, std::initializer_list<const Tensor<T>*> ins) {
    if (!tape.recording()) return false;
    for (const auto* t : ins)
        if ((*t).requires_grad()) return true;
    return false;
}

}  // namespace detail

namespace ops {

template <typename T>
Tensor<T> zeros(std::vector<int> shape) {
    return Tensor<T>(std::move(shape));
}

// ---------------------------------------------------------------------------
// elementwise

template <typename T>
Tensor<T> add(Tape<T>& tape, Tensor<T> a, Tensor<T> b) {
    if (a.shape() != b.shape())
        throw DimensionError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor<T> out(a.shape());
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
    check_finite(out.values(), "add", "output");
    if (detail::wants_grad(tape, {&a, &b})) {
        out.set_requires_grad(true);
        tape.record("add", out, {a, b}, [out, a, b]() mutable {
            const auto& g = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, Tensor<T> a, Tensor<T> b) {
    if (a.shape() != b.shape())
        throw DimensionError("mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor<T> out(a.shape());
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
    check_finite(out.values(), "mul", "output");
    if (detail::wants_grad(tape, {&a, &b})) {
        out.set_requires_grad(true);
        tape.record("mul", out, {a, b}, [out, a, b]() mutable {
            const auto& g = out.grad();
            if (a.requires_grad()) {
                auto& ga = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.data()[i];
            }
            if (b.requires_grad()) {
                auto& gb = b.grad();
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.data()[i];
            }
        });
    }
    return out;
}

// x[B,d] + r broadcast over rows; r is [d] or [1,d].
template <typename T>
Tensor<T> add_rowvec(Tape<T>& tape, Tensor<T> x, Tensor<T> r) {
    if (x.rank() != 2)
        throw DimensionError("add_rowvec: expected rank-2 input, got " + shape_str(x.shape()));
    const int rows = x.dim(0), cols = x.dim(1);
    if (static_cast<int>(r.size()) != cols)
        throw DimensionError("add_rowvec: row vector " + shape_str(r.shape()) + " does not match width " +
                             std::to_string(cols));
    Tensor<T> out(x.shape());
    for (int b = 0; b < rows; ++b)
        for (int j = 0; j < cols; ++j)
            out.data()[static_cast<std::size_t>(b) * cols + j] =
                x.data()[static_cast<std::size_t>(b) * cols + j] + r.data()[j];
    check_finite(out.values(), "add_rowvec", "output");
    if (detail::wants_grad(tape, {&x, &r})) {
        out.set_requires_grad(true);
        tape.record("add_rowvec", out, {x, r}, [out, x, r, rows, cols]() mutable {
            const auto& g = out.grad();
            if (x.requires_grad()) {
                auto& gx = x.grad();
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
            }
            if (r.requires_grad()) {
                auto& gr = r.grad();
                for (int j = 0; j < cols; ++j) {
                    double acc = 0.0;
                    for (int b = 0; b < rows; ++b)
                        acc += static_cast<double>(g[static_cast<std::size_t>(b) * cols + j]);
                    gr[j] += static_cast<T>(acc);
                }
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> relu(Tape<T>& tape, Tensor<T> x) {
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = x.data()[i] > T(0) ? x.data()[i] : T(0);
    check_finite(out.values(), "relu", "output");
    if (detail::wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record("relu", out, {x}, [out, x]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            for (std::size_t i = 0; i < g.size(); ++i)
                if (x.data()[i] > T(0)) gx[i] += g[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> sigmoid(Tape<T>& tape, Tensor<T> x) {
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = static_cast<double>(x.data()[i]);
        double s;
        if (v >= 0.0) {
            s = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            s = e / (1.0 + e);
        }
        out.data()[i] = static_cast<T>(s);
    }
    check_finite(out.values(), "sigmoid", "output");
    if (detail::wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record("sigmoid", out, {x}, [out, x]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            for (std::size_t i = 0; i < g.size(); ++i) {
                const T s = out.data()[i];
                gx[i] += g[i] * s * (T(1) - s);
            }
        });
    }
    return out;
}

// Softmax along `axis` with max-subtraction; sums accumulate in double.
template <typename T>
Tensor<T> softmax(Tape<T>& tape, Tensor<T> x, int axis) {
    const int rank = x.rank();
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank)
        throw DimensionError("softmax: axis out of range for " + shape_str(x.shape()));
    std::int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= x.dim(i);
    for (int i = axis + 1; i < rank; ++i) inner *= x.dim(i);
    const int n = x.dim(axis);
    Tensor<T> out(x.shape());
    for (std::int64_t o = 0; o < outer; ++o) {
        for (std::int64_t in = 0; in < inner; ++in) {
            const std::int64_t base = o * n * inner + in;
            double mx = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < n; ++j)
                mx = std::max(mx, static_cast<double>(x.data()[base + j * inner]));
            double den = 0.0;
            for (int j = 0; j < n; ++j) {
                const double e = std::exp(static_cast<double>(x.data()[base + j * inner]) - mx);
                out.data()[base + j * inner] = static_cast<T>(e);
                den += e;
            }
            for (int j = 0; j < n; ++j)
                out.data()[base + j * inner] = static_cast<T>(static_cast<double>(out.data()[base + j * inner]) / den);
        }
    }
    check_finite(out.values(), "softmax", "output");
    if (detail::wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record("softmax", out, {x}, [out, x, outer, inner, n]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            for (std::int64_t o = 0; o < outer; ++o) {
                for (std::int64_t in = 0; in < inner; ++in) {
                    const std::int64_t base = o * n * inner + in;
                    double dot = 0.0;
                    for (int j = 0; j < n; ++j)
                        dot += static_cast<double>(g[base + j * inner]) *
                               static_cast<double>(out.data()[base + j * inner]);
                    for (int j = 0; j < n; ++j) {
                        const std::int64_t at = base + j * inner;
                        gx[at] += static_cast<T>(static_cast<double>(out.data()[at]) *
                                                 (static_cast<double>(g[at]) - dot));
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// matmul / linear

template <typename T>
Tensor<T> matmul(Tape<T>& tape, Tensor<T> a, Tensor<T> b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor<T> out({m, n});
    detail::gemm(false, false, m, n, k, a.data(), b.data(), out.data(), false);
    check_finite(out.values(), "matmul", "output");
    if (detail::wants_grad(tape, {&a, &b})) {
        out.set_requires_grad(true);
        tape.record("matmul", out, {a, b}, [out, a, b, m, k, n]() mutable {
            const auto& g = out.grad();
            if (a.requires_grad())
                detail::gemm(false, true, m, k, n, g.data(), b.data(), a.grad().data(), true);
            if (b.requires_grad())
                detail::gemm(true, false, k, n, m, a.data(), g.data(), b.grad().data(), true);
        });
    }
    return out;
}

// y = x * w^T + bias with w stored [out,in].
template <typename T>
Tensor<T> linear(Tape<T>& tape, Tensor<T> x, Tensor<T> w, Tensor<T> bias) {
    if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1))
        throw DimensionError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                             shape_str(w.shape()));
    const int rows = x.dim(0), in = x.dim(1), outw = w.dim(0);
    if (static_cast<int>(bias.size()) != outw)
        throw DimensionError("linear: bias " + shape_str(bias.shape()) + " does not match out width " +
                             std::to_string(outw));
    Tensor<T> out({rows, outw});
    detail::gemm(false, true, rows, outw, in, x.data(), w.data(), out.data(), false);
    for (int b = 0; b < rows; ++b)
        for (int o = 0; o < outw; ++o)
            out.data()[static_cast<std::size_t>(b) * outw + o] += bias.data()[o];
    check_finite(out.values(), "linear", "output");
    if (detail::wants_grad(tape, {&x, &w, &bias})) {
        out.set_requires_grad(true);
        tape.record("linear", out, {x, w, bias}, [out, x, w, bias, rows, in, outw]() mutable {
            const auto& g = out.grad();
            if (x.requires_grad())
                detail::gemm(false, false, rows, in, outw, g.data(), w.data(), x.grad().data(), true);
            if (w.requires_grad())
                detail::gemm(true, false, outw, in, rows, g.data(), x.data(), w.grad().data(), true);
            if (bias.requires_grad()) {
                auto& gb = bias.grad();
                for (int o = 0; o < outw; ++o) {
                    double acc = 0.0;
                    for (int b = 0; b < rows; ++b)
                        acc += static_cast<double>(g[static_cast<std::size_t>(b) * outw + o]);
                    gb[o] += static_cast<T>(acc);
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// convolution / pooling

namespace conv_detail {

template <typename T>
void im2col(const T* in, int C, int H, int W, int kh, int kw, int s0, int S, int Ho, int Wo, T* col) {
    // col is [C*kh*kw, S*Ho*Wo]; in indexed from sample s0.
    const std::int64_t patch = static_cast<std::int64_t>(S) * Ho * Wo;
    parallel_for(static_cast<std::int64_t>(C) * kh * kw, 4, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t r = lo; r < hi; ++r) {
            const int c = static_cast<int>(r / (kh * kw));
            const int dy = static_cast<int>((r / kw) % kh);
            const int dx = static_cast<int>(r % kw);
            T* dst = col + r * patch;
            for (int s = 0; s < S; ++s) {
                const T* src = in + ((static_cast<std::int64_t>(s0 + s) * C + c) * H + dy) * W + dx;
                for (int y = 0; y < Ho; ++y) {
                    const T* row = src + static_cast<std::int64_t>(y) * W;
                    for (int x = 0; x < Wo; ++x) *dst++ = row[x];
                }
            }
        }
    });
}

template <typename T>
void col2im_add(const T* col, int C, int H, int W, int kh, int kw, int s0, int S, int Ho, int Wo, T* gin) {
    const std::int64_t patch = static_cast<std::int64_t>(S) * Ho * Wo;
    parallel_for(S, 1, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t s = lo; s < hi; ++s) {
            for (int c = 0; c < C; ++c) {
                for (int dy = 0; dy < kh; ++dy) {
                    for (int dx = 0; dx < kw; ++dx) {
                        const std::int64_t r = (static_cast<std::int64_t>(c) * kh + dy) * kw + dx;
                        const T* src = col + r * patch + s * Ho * Wo;
                        T* dst = gin + ((static_cast<std::int64_t>(s0 + s) * C + c) * H + dy) * W + dx;
                        for (int y = 0; y < Ho; ++y) {
                            T* row = dst + static_cast<std::int64_t>(y) * W;
                            const T* g = src + static_cast<std::int64_t>(y) * Wo;
                            for (int x = 0; x < Wo; ++x) row[x] += g[x];
                        }
                    }
                }
            }
        }
    });
}

}  // namespace conv_detail

// Valid padding, stride 1, cross-correlation orientation.
template <typename T>
Tensor<T> conv2d(Tape<T>& tape, Tensor<T> input, Tensor<T> kernel, Tensor<T> bias) {
    if (input.rank() != 4 || kernel.rank() != 4)
        throw DimensionError("conv2d: expected input[B,C,H,W] and kernel[O,C,kh,kw], got " +
                             shape_str(input.shape()) + " and " + shape_str(kernel.shape()));
    const int B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const int O = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    if (kernel.dim(1) != C)
        throw DimensionError("conv2d: kernel channels " + std::to_string(kernel.dim(1)) +
                             " do not match input channels " + std::to_string(C));
    if (kh > H || kw > W)
        throw DimensionError("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                             " larger than input " + std::to_string(H) + "x" + std::to_string(W));
    if (static_cast<int>(bias.size()) != O)
        throw DimensionError("conv2d: bias size " + std::to_string(bias.size()) + " does not match " +
                             std::to_string(O) + " output channels");
    const int Ho = H - kh + 1, Wo = W - kw + 1;
    const int CK = C * kh * kw;
    const int slice = 128;  // keeps the col buffer bounded for large eval batches
    Tensor<T> out({B, O, Ho, Wo});

    auto run_forward = [&](Tensor<T>& dst) {
        std::vector<T> col;
        std::vector<T> mat;
        for (int b0 = 0; b0 < B; b0 += slice) {
            const int S = std::min(slice, B - b0);
            const std::int64_t patch = static_cast<std::int64_t>(S) * Ho * Wo;
            col.assign(static_cast<std::size_t>(CK) * patch, T(0));
            mat.assign(static_cast<std::size_t>(O) * patch, T(0));
            conv_detail::im2col(input.data(), C, H, W, kh, kw, b0, S, Ho, Wo, col.data());
            detail::gemm(false, false, O, static_cast<int>(patch), CK, kernel.data(), col.data(), mat.data(), false);
            for (int o = 0; o < O; ++o) {
                const T bv = bias.data()[o];
                for (int s = 0; s < S; ++s) {
                    const T* src = mat.data() + (static_cast<std::int64_t>(o) * S + s) * Ho * Wo;
                    T* d = dst.data() + ((static_cast<std::int64_t>(b0 + s) * O + o) * Ho) * Wo;
                    for (int i = 0; i < Ho * Wo; ++i) d[i] = src[i] + bv;
                }
            }
        }
    };
    run_forward(out);
    check_finite(out.values(), "conv2d", "output");

    if (detail::wants_grad(tape, {&input, &kernel, &bias})) {
        out.set_requires_grad(true);
        tape.record("conv2d", out, {input, kernel, bias},
                    [out, input, kernel, bias, B, C, H, W, O, kh, kw, Ho, Wo, CK, slice]() mutable {
                        const auto& g = out.grad();
                        std::vector<T> col, gmat, gcol;
                        for (int b0 = 0; b0 < B; b0 += slice) {
                            const int S = std::min(slice, B - b0);
                            const std::int64_t patch = static_cast<std::int64_t>(S) * Ho * Wo;
                            gmat.assign(static_cast<std::size_t>(O) * patch, T(0));
                            for (int o = 0; o < O; ++o)
                                for (int s = 0; s < S; ++s) {
                                    const T* src = g.data() + ((static_cast<std::int64_t>(b0 + s) * O + o) * Ho) * Wo;
                                    T* dst = gmat.data() + (static_cast<std::int64_t>(o) * S + s) * Ho * Wo;
                                    for (int i = 0; i < Ho * Wo; ++i) dst[i] = src[i];
                                }
                            if (bias.requires_grad()) {
                                auto& gb = bias.grad();
                                for (int o = 0; o < O; ++o) {
                                    double acc = 0.0;
                                    const T* src = gmat.data() + static_cast<std::int64_t>(o) * patch;
                                    for (std::int64_t i = 0; i < patch; ++i) acc += static_cast<double>(src[i]);
                                    gb[o] += static_cast<T>(acc);
                                }
                            }
                            if (kernel.requires_grad() || input.requires_grad()) {
                                col.assign(static_cast<std::size_t>(CK) * patch, T(0));
                                conv_detail::im2col(input.data(), C, H, W, kh, kw, b0, S, Ho, Wo, col.data());
                            }
                            if (kernel.requires_grad())
                                detail::gemm(false, true, O, CK, static_cast<int>(patch), gmat.data(), col.data(),
                                             kernel.grad().data(), true);
                            if (input.requires_grad()) {
                                gcol.assign(static_cast<std::size_t>(CK) * patch, T(0));
                                detail::gemm(true, false, CK, static_cast<int>(patch), O, kernel.data(), gmat.data(),
                                             gcol.data(), false);
                                conv_detail::col2im_add(gcol.data(), C, H, W, kh, kw, b0, S, Ho, Wo,
                                                        input.grad().data());
                            }
                        }
                    });
    }
    return out;
}

// 2x2 window, stride 2; gradient routes to the first maximum in scan order.
template <typename T>
Tensor<T> maxpool2d(Tape<T>& tape, Tensor<T> input) {
    if (input.rank() != 4)
        throw DimensionError("maxpool2d: expected input[B,C,H,W], got " + shape_str(input.shape()));
    const int B = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    if (H % 2 != 0 || W % 2 != 0)
        throw DimensionError("maxpool2d: spatial extents must be even, got " + std::to_string(H) + "x" +
                             std::to_string(W));
    const int Ho = H / 2, Wo = W / 2;
    Tensor<T> out({B, C, Ho, Wo});
    auto argmax = std::make_shared<std::vector<std::int64_t>>(out.size());
    const std::int64_t planes = static_cast<std::int64_t>(B) * C;
    for (std::int64_t p = 0; p < planes; ++p) {
        const T* in = input.data() + p * H * W;
        T* o = out.data() + p * Ho * Wo;
        std::int64_t* am = argmax->data() + p * Ho * Wo;
        for (int y = 0; y < Ho; ++y) {
            for (int x = 0; x < Wo; ++x) {
                std::int64_t best = static_cast<std::int64_t>(2 * y) * W + 2 * x;
                T bv = in[best];
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        const std::int64_t at = static_cast<std::int64_t>(2 * y + dy) * W + (2 * x + dx);
                        if (in[at] > bv) {
                            bv = in[at];
                            best = at;
                        }
                    }
                o[y * Wo + x] = bv;
                am[y * Wo + x] = p * H * W + best;
            }
        }
    }
    check_finite(out.values(), "maxpool2d", "output");
    if (detail::wants_grad(tape, {&input})) {
        out.set_requires_grad(true);
        tape.record("maxpool2d", out, {input}, [out, input, argmax]() mutable {
            const auto& g = out.grad();
            auto& gx = input.grad();
            for (std::size_t i = 0; i < g.size(); ++i) gx[(*argmax)[i]] += g[i];
        });
    }
    return out;
}

// Column-wise max over the row axis: [R,C] -> [1,C]; ties keep the first row.
template <typename T>
Tensor<T> max_over_rows(Tape<T>& tape, Tensor<T> x) {
    if (x.rank() != 2)
        throw DimensionError("max_over_rows: expected rank-2 input, got " + shape_str(x.shape()));
    const int R = x.dim(0), C = x.dim(1);
    Tensor<T> out({1, C});
    auto argmax = std::make_shared<std::vector<int>>(C, 0);
    for (int j = 0; j < C; ++j) {
        T bv = x.data()[j];
        int br = 0;
        for (int i = 1; i < R; ++i)
            if (x.data()[static_cast<std::size_t>(i) * C + j] > bv) {
                bv = x.data()[static_cast<std::size_t>(i) * C + j];
                br = i;
            }
        out.data()[j] = bv;
        (*argmax)[j] = br;
    }
    check_finite(out.values(), "max_over_rows", "output");
    if (detail::wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record("max_over_rows", out, {x}, [out, x, argmax, C]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            for (int j = 0; j < C; ++j) gx[static_cast<std::size_t>((*argmax)[j]) * C + j] += g[j];
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// shape / gather / scatter

template <typename T>
Tensor<T> reshape(Tape<T>& tape, Tensor<T> x, std::vector<int> shape) {
    if (shape_size(shape) != x.size())
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    Tensor<T> out(std::move(shape), x.values());
    if (detail::wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record("reshape", out, {x}, [out, x]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        });
    }
    return out;
}

template <typename T>
Tensor<T> flatten(Tape<T>& tape, Tensor<T> x) {
    std::int64_t rest = 1;
    for (int i = 1; i < x.rank(); ++i) rest *= x.dim(i);
    const int batch = x.dim(0);
    return reshape(tape, std::move(x), {batch, static_cast<int>(rest)});
}

template <typename T>
Tensor<T> take_rows(Tape<T>& tape, Tensor<T> x, std::vector<int> rows) {
    if (x.rank() != 2)
        throw DimensionError("take_rows: expected rank-2 input, got " + shape_str(x.shape()));
    const int R = x.dim(0), C = x.dim(1);
    for (int r : rows)
        if (r < 0 || r >= R)
            throw IndexError("take_rows: row " + std::to_string(r) + " out of range [0," + std::to_string(R) + ")");
    Tensor<T> out({static_cast<int>(rows.size()), C});
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(x.data() + static_cast<std::size_t>(rows[i]) * C, C, out.data() + i * C);
    if (detail::wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record("take_rows", out, {x}, [out, x, rows = std::move(rows), C]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (int j = 0; j < C; ++j)
                    gx[static_cast<std::size_t>(rows[i]) * C + j] += g[i * C + j];
        });
    }
    return out;
}

// Places row i of x at row rows[i] of a zero [R,C] tensor (duplicates add).
template <typename T>
Tensor<T> scatter_rows(Tape<T>& tape, Tensor<T> x, std::vector<int> rows, int R) {
    if (x.rank() != 2 || static_cast<int>(rows.size()) != x.dim(0))
        throw DimensionError("scatter_rows: index count does not match rows of " + shape_str(x.shape()));
    const int C = x.dim(1);
    for (int r : rows)
        if (r < 0 || r >= R)
            throw IndexError("scatter_rows: row " + std::to_string(r) + " out of range [0," + std::to_string(R) + ")");
    Tensor<T> out({R, C});
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < C; ++j)
            out.data()[static_cast<std::size_t>(rows[i]) * C + j] += x.data()[i * C + j];
    if (detail::wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record("scatter_rows", out, {x}, [out, x, rows = std::move(rows), C]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (int j = 0; j < C; ++j)
                    gx[i * C + j] += g[static_cast<std::size_t>(rows[i]) * C + j];
        });
    }
    return out;
}

// Per-row column gather: out[b,s] = x[b, idx[b*K+s]].
template <typename T>
Tensor<T> select_cols(Tape<T>& tape, Tensor<T> x, std::vector<int> idx, int K) {
    if (x.rank() != 2)
        throw DimensionError("select_cols: expected rank-2 input, got " + shape_str(x.shape()));
    const int B = x.dim(0), N = x.dim(1);
    if (static_cast<int>(idx.size()) != B * K)
        throw DimensionError("select_cols: index count " + std::to_string(idx.size()) + " != B*K");
    for (int c : idx)
        if (c < 0 || c >= N)
            throw IndexError("select_cols: column " + std::to_string(c) + " out of range [0," + std::to_string(N) + ")");
    Tensor<T> out({B, K});
    for (int b = 0; b < B; ++b)
        for (int s = 0; s < K; ++s)
            out.data()[static_cast<std::size_t>(b) * K + s] =
                x.data()[static_cast<std::size_t>(b) * N + idx[static_cast<std::size_t>(b) * K + s]];
    if (detail::wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record("select_cols", out, {x}, [out, x, idx = std::move(idx), K, N]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            const int B = x.dim(0);
            for (int b = 0; b < B; ++b)
                for (int s = 0; s < K; ++s)
                    gx[static_cast<std::size_t>(b) * N + idx[static_cast<std::size_t>(b) * K + s]] +=
                        g[static_cast<std::size_t>(b) * K + s];
        });
    }
    return out;
}

// Flat gather: out[i] = x.values()[idx[i]].
template <typename T>
Tensor<T> take_elems(Tape<T>& tape, Tensor<T> x, std::vector<int> idx) {
    for (int i : idx)
        if (i < 0 || static_cast<std::size_t>(i) >= x.size())
            throw IndexError("take_elems: index " + std::to_string(i) + " out of range");
    Tensor<T> out({static_cast<int>(idx.size())});
    for (std::size_t i = 0; i < idx.size(); ++i) out.data()[i] = x.data()[idx[i]];
    if (detail::wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record("take_elems", out, {x}, [out, x, idx = std::move(idx)]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            for (std::size_t i = 0; i < idx.size(); ++i) gx[idx[i]] += g[i];
        });
    }
    return out;
}

// out[i,:] = x[i,:] * w[i]; w is [n] or [n,1].
template <typename T>
Tensor<T> scale_rows(Tape<T>& tape, Tensor<T> x, Tensor<T> w) {
    if (x.rank() != 2 || static_cast<int>(w.size()) != x.dim(0))
        throw DimensionError("scale_rows: weight " + shape_str(w.shape()) + " does not match rows of " +
                             shape_str(x.shape()));
    const int R = x.dim(0), C = x.dim(1);
    Tensor<T> out(x.shape());
    for (int i = 0; i < R; ++i)
        for (int j = 0; j < C; ++j)
            out.data()[static_cast<std::size_t>(i) * C + j] = x.data()[static_cast<std::size_t>(i) * C + j] * w.data()[i];
    check_finite(out.values(), "scale_rows", "output");
    if (detail::wants_grad(tape, {&x, &w})) {
        out.set_requires_grad(true);
        tape.record("scale_rows", out, {x, w}, [out, x, w, R, C]() mutable {
            const auto& g = out.grad();
            if (x.requires_grad()) {
                auto& gx = x.grad();
                for (int i = 0; i < R; ++i)
                    for (int j = 0; j < C; ++j)
                        gx[static_cast<std::size_t>(i) * C + j] += g[static_cast<std::size_t>(i) * C + j] * w.data()[i];
            }
            if (w.requires_grad()) {
                auto& gw = w.grad();
                for (int i = 0; i < R; ++i) {
                    double acc = 0.0;
                    for (int j = 0; j < C; ++j)
                        acc += static_cast<double>(g[static_cast<std::size_t>(i) * C + j]) *
                               static_cast<double>(x.data()[static_cast<std::size_t>(i) * C + j]);
                    gw[i] += static_cast<T>(acc);
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// reductions / loss

template <typename T>
Tensor<T> sum(Tape<T>& tape, Tensor<T> x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += static_cast<double>(x.data()[i]);
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc));
    check_finite(out.values(), "sum", "output");
    if (detail::wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record("sum", out, {x}, [out, x]() mutable {
            const T g = out.grad()[0];
            auto& gx = x.grad();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
        });
    }
    return out;
}

template <typename T>
Tensor<T> mean(Tape<T>& tape, Tensor<T> x) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += static_cast<double>(x.data()[i]);
    const double inv = 1.0 / static_cast<double>(x.size());
    Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc * inv));
    check_finite(out.values(), "mean", "output");
    if (detail::wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record("mean", out, {x}, [out, x, inv]() mutable {
            const T g = static_cast<T>(static_cast<double>(out.grad()[0]) * inv);
            auto& gx = x.grad();
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
        });
    }
    return out;
}

// Per-sample negative log-likelihood via a fused log-sum-exp.
template <typename T>
Tensor<T> cross_entropy_nll(Tape<T>& tape, Tensor<T> logits, const std::vector<int>& labels) {
    if (logits.rank() != 2)
        throw DimensionError("cross_entropy: expected logits[B,C], got " + shape_str(logits.shape()));
    const int B = logits.dim(0), C = logits.dim(1);
    if (static_cast<int>(labels.size()) != B)
        throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                             std::to_string(B));
    for (int b = 0; b < B; ++b)
        if (labels[b] < 0 || labels[b] >= C)
            throw IndexError("cross_entropy: label " + std::to_string(labels[b]) + " out of range [0," +
                             std::to_string(C) + ") at batch index " + std::to_string(b));
    auto lse = std::make_shared<std::vector<double>>(B);
    Tensor<T> out({B});
    for (int b = 0; b < B; ++b) {
        const T* row = logits.data() + static_cast<std::size_t>(b) * C;
        double mx = static_cast<double>(row[0]);
        for (int c = 1; c < C; ++c) mx = std::max(mx, static_cast<double>(row[c]));
        double den = 0.0;
        for (int c = 0; c < C; ++c) den += std::exp(static_cast<double>(row[c]) - mx);
        (*lse)[b] = mx + std::log(den);
        out.data()[b] = static_cast<T>((*lse)[b] - static_cast<double>(row[labels[b]]));
    }
    check_finite(out.values(), "cross_entropy", "output");
    if (detail::wants_grad(tape, {&logits})) {
        out.set_requires_grad(true);
        tape.record("cross_entropy", out, {logits}, [out, logits, labels, lse, B, C]() mutable {
            const auto& g = out.grad();
            auto& gx = logits.grad();
            for (int b = 0; b < B; ++b) {
                const T* row = logits.data() + static_cast<std::size_t>(b) * C;
                const double coeff = static_cast<double>(g[b]);
                if (coeff == 0.0) continue;
                for (int c = 0; c < C; ++c) {
                    const double p = std::exp(static_cast<double>(row[c]) - (*lse)[b]);
                    gx[static_cast<std::size_t>(b) * C + c] +=
                        static_cast<T>(coeff * (p - (c == labels[b] ? 1.0 : 0.0)));
                }
            }
        });
    }
    return out;
}

// Mean over the batch of the per-sample NLL.
template <typename T>
Tensor<T> cross_entropy(Tape<T>& tape, Tensor<T> logits, const std::vector<int>& labels) {
    return mean(tape, cross_entropy_nll(tape, std::move(logits), labels));
}

// Inverted dropout; identity in eval mode or at p == 0.
template <typename T>
Tensor<T> dropout(Tape<T>& tape, Tensor<T> x, double p, bool training, Rng& rng) {
    if (p < 0.0 || p >= 1.0)
        throw ConfigError("dropout: rate must lie in [0,1), got " + std::to_string(p));
    if (!training || p == 0.0) return x;
    const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
    auto mask = std::make_shared<std::vector<T>>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        (*mask)[i] = rng.bernoulli(p) ? T(0) : keep_scale;
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = x.data()[i] * (*mask)[i];
    check_finite(out.values(), "dropout", "output");
    if (detail::wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record("dropout", out, {x}, [out, x, mask]() mutable {
            const auto& g = out.grad();
            auto& gx = x.grad();
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (*mask)[i];
        });
    }
    return out;
}

// Row-wise top-K selection; pure index computation, no tape node. Returned
// indices are ordered by descending logit, ties broken by lower index.
template <typename T>
std::vector<int> topk_rows(const Tensor<T>& logits, int K) {
    if (logits.rank() != 2)
        throw DimensionError("topk: expected logits[B,N], got " + shape_str(logits.shape()));
    const int B = logits.dim(0), N = logits.dim(1);
    if (K < 1 || K > N)
        throw ConfigError("topk: K=" + std::to_string(K) + " must lie in [1," + std::to_string(N) + "]");
    std::vector<int> out(static_cast<std::size_t>(B) * K);
    std::vector<int> order(N);
    for (int b = 0; b < B; ++b) {
        const T* row = logits.data() + static_cast<std::size_t>(b) * N;
        for (int i = 0; i < N; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [row](int i, int j) {
            if (row[i] != row[j]) return row[i] > row[j];
            return i < j;
        });
        for (int s = 0; s < K; ++s) out[static_cast<std::size_t>(b) * K + s] = order[s];
    }
    return out;
}

}  // namespace ops
}  // namespace moegate
