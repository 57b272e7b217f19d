#pragma once

#include <vector>

#include "uie/tape.hpp"

namespace uie {
namespace ops {

// elementwise / arithmetic
Value add(Tape& t, Value a, Value b);
Value sub(Tape& t, Value a, Value b);
Value mul(Tape& t, Value a, Value b);
Value scale(Tape& t, Value a, double s);
Value silu(Tape& t, Value a);
Value relu(Tape& t, Value a);
Value sigmoid(Tape& t, Value a);

// reductions to scalar
Value mean_abs(Tape& t, Value a);
Value mean_sq(Tape& t, Value a);
Value sqrt_scalar(Tape& t, Value a);

// spatial ops on {H, W, C}
// weights layout {K*K*Cin, Cout} (tap-major: (dy,dx) row blocks of Cin), bias {Cout}
Value conv2d(Tape& t, Value x, Value w, Value b, int ksize);
Value avg_pool2(Tape& t, Value x);
Value upsample_bilinear(Tape& t, Value x, int factor);
Value global_avg_pool(Tape& t, Value x);

// fixed (non-learnable) image ops
Value grayscale(Tape& t, Value img);           // {H,W,3} -> {H,W,1}, BT.601
Value sobel_pair(Tape& t, Value gray);         // {H,W,1} -> {H,W,2}, reflect padding

Value concat_channels(Tape& t, Value a, Value b);  // {H,W,Ca}+{H,W,Cb} -> {H,W,Ca+Cb}

// shape / linear algebra
Value channels_to_rows(Tape& t, Value x);      // {H,W,C} -> {C, H*W}
Value gram(Tape& t, Value x);                  // {A,B} -> {A,A}, X*X^T/(A*B)
Value matmul(Tape& t, Value a, Value b);       // {M,K}x{K,N} -> {M,N}
Value transpose(Tape& t, Value a);             // {M,N} -> {N,M}
Value flatten(Tape& t, Value a);               // any -> {numel}
Value concat(Tape& t, Value a, Value b);       // {N},{M} -> {N+M}
Value linear(Tape& t, Value w, Value x, Value b);  // {O,I}x{I}+{O} -> {O}

// routing
// value copy that blocks gradient flow
Value detach(Tape& t, Value a);

Value stack_scalars(Tape& t, const std::vector<Value>& xs);  // -> {n}
Value softmax(Tape& t, Value logits);                        // stable
Value ce_with_logits(Tape& t, Value logits, int label);      // -> scalar
Value fuse(Tape& t, const std::vector<Value>& candidates, Value weights);

}  // namespace ops

// Reflect-101 boundary index (…2 1 | 0 1 2 … n-1 | n-2 n-3…).
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

}  // namespace uie
