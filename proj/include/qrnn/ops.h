#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qrnn/graph.h"

namespace qrnn {

// Row-major C = alpha * op(A) * op(B) + beta * C, with op(A) M x K and
// op(B) K x N.
template <Real T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, T alpha, const T* a, const T* b, T beta, T* c);

enum class TemporalPadding { kSame, kCausal };

// All ops below are differentiable with respect to every Var argument.
// Elementwise ops require equal shapes; the only broadcasts are the
// explicitly named ones (add_bias, mul_broadcast).

template <Real T> Var<T> matmul(Var<T> a, Var<T> b);
template <Real T> Var<T> add(Var<T> a, Var<T> b);
template <Real T> Var<T> sub(Var<T> a, Var<T> b);
template <Real T> Var<T> hadamard(Var<T> a, Var<T> b);
template <Real T> Var<T> scale(Var<T> a, T s);
// alpha * a + beta
template <Real T> Var<T> affine(Var<T> a, T alpha, T beta);
// x[..., n] + b[n]
template <Real T> Var<T> add_bias(Var<T> x, Var<T> b);
// x[B, rest...] * w[rest...], w shared across the leading axis.
template <Real T> Var<T> mul_broadcast(Var<T> x, Var<T> w);

// Outputs are clamped into the open intervals (0, 1) and (-1, 1).
template <Real T> Var<T> sigmoid(Var<T> x);
template <Real T> Var<T> tanh_op(Var<T> x);
template <Real T> Var<T> softmax_last(Var<T> x);

template <Real T> Var<T> sum(Var<T> x);
template <Real T> Var<T> mean(Var<T> x);

template <Real T> Var<T> concat(std::span<const Var<T>> parts, std::size_t axis);
template <Real T>
Var<T> slice(Var<T> x, std::size_t axis, std::size_t start, std::size_t length);
// Inserts a new axis of extent parts.size() at `axis`.
template <Real T> Var<T> stack(std::span<const Var<T>> parts, std::size_t axis);
// Removes `axis`, keeping slot `index`.
template <Real T> Var<T> select(Var<T> x, std::size_t axis, std::size_t index);

// Same-padded cross-correlation. x is [C_in, H, W] or [N, C_in, H, W];
// k is [C_out, C_in, kh, kw] with odd kh, kw; b is [C_out] or unset.
template <Real T> Var<T> conv2d_same(Var<T> x, Var<T> k, Var<T> b);
// x is [C_in, T, H, W] or [N, C_in, T, H, W]; k is [C_out, C_in, kt, kh, kw].
// kCausal drops the kernel taps that would read later time steps.
template <Real T>
Var<T> conv3d_same(Var<T> x, Var<T> k, Var<T> b,
                   TemporalPadding temporal = TemporalPadding::kSame);

// Rows of table[V, E] for each id; ids outside [0, V) raise DataError.
template <Real T>
Var<T> embedding_lookup(Var<T> table, std::span<const std::int32_t> ids);

// Per-channel (axis 1) normalization using the batch's own statistics.
// The biased batch mean/variance are written to mean_out/var_out.
template <Real T>
Var<T> batch_norm_train(Var<T> x, Var<T> gamma, Var<T> beta, T eps,
                        Tensor<T>* mean_out, Tensor<T>* var_out);
// Same normalization with fixed statistics.
template <Real T>
Var<T> batch_norm_fixed(Var<T> x, Var<T> gamma, Var<T> beta,
                        const Tensor<T>& mean, const Tensor<T>& var, T eps);

}  // namespace qrnn
