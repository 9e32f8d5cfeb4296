#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gacg/numerics/tensor.hpp"

namespace gacg::num {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// a[..., d] + bias[d], broadcast over all leading dimensions.
Tensor add_bias(const Tensor& a, const Tensor& bias);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double c);

// [r,k] x [k,c]. Zero entries of the left operand are skipped, so sparse
// inputs (observation windows) are cheap.
Tensor matmul(const Tensor& a, const Tensor& b);
// [B,r,k] x [B,k,c].
Tensor bmm(const Tensor& a, const Tensor& b);
// Swaps the last two dimensions of a 2-D or 3-D tensor.
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
// Concatenate 2-D tensors along columns.
Tensor concat(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor elu(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
// a^p for strictly positive a.
Tensor pow(const Tensor& a, double p);
// Clamp to [0,1]; subgradient 0 outside the interval.
Tensor clamp01(const Tensor& a);
// max(a, floor); gradient 0 where a < floor.
Tensor floor_at(const Tensor& a, double floor);

Tensor softmax_rows(const Tensor& a);
// Euclidean norm of the whole tensor (scalar). Gradient at 0 is 0.
Tensor l2_norm(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Sum over the last dimension.
Tensor sum_last(const Tensor& a);

// out[r] = a[r, index[r]] for a 2-D tensor.
Tensor gather_cols(const Tensor& a, std::span<const std::size_t> index);

// [B,n,d] -> [B,n,n] of pairwise row distances; diagonal is exactly 0 and
// carries no gradient.
Tensor pairwise_l2(const Tensor& a);
// out[b,i,j] = d[b,i] * c[b,i,j] * d[b,j] for c [B,n,n], d [B,n].
Tensor scale_sym(const Tensor& c, const Tensor& d);
// Copy of c [B,n,n] with diagonal set to 1 (no gradient through diagonal).
Tensor with_unit_diagonal(const Tensor& c);

enum class ArithKind {
  kAdd,
  kSub,
  kMul,
  kMatmul,
  kRelu,
  kSigmoid,
  kSoftmaxRows,
  kL2Norm,
  kConcat,
  kScale,
  kClamp01,
};

// Single entry point over the basic op set. Unary kinds ignore `b`; kScale
// multiplies by `factor`.
Tensor tensor_arith(ArithKind kind, const Tensor& a, const Tensor* b = nullptr,
                    double factor = 1.0);

}  // namespace gacg::num
