#pragma once

#include <optional>
#include <vector>

#include "ifgan/tensor.hpp"

namespace ifgan::ops {

enum class EwKind { add, sub, mul, neg, abs, tanh, sigmoid, relu, leaky_relu };

EwKind parse_ew_kind(const std::string& name);  // unknown name -> error
const char* ew_kind_name(EwKind kind);
bool ew_kind_is_binary(EwKind kind);

// Binary kinds require matching shapes or a one-element b (scalar broadcast).
Tensor elementwise(EwKind kind, const Tensor& a, const Tensor* b = nullptr,
                   double leaky_slope = 0.2);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.2);

Tensor scale(const Tensor& a, double c);

// y[b,c,...] = x[b,c,...] + bias[c] along `axis`
Tensor bias_add(const Tensor& x, const Tensor& bias, int axis = 1);

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

// Cross-correlation (no kernel flip). x[B,Cin,H,W], w[Cout,Cin,kh,kw].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad);

// Adjoint of conv2d in its input: x[B,Cin,H,W], w[Cin,Cout,kh,kw],
// H' = (H-1)*stride - 2*pad + kh. No bias (follow with bias_add if needed).
Tensor conv_transpose2d(const Tensor& x, const Tensor& w, int stride, int pad);

enum class NormMode { batch, instance };

struct Norm2dStats {
    Tensor running_mean;  // [C]
    Tensor running_var;   // [C]
    double momentum = 0.1;
};

// Per-channel standardization followed by gamma/beta. Batch mode normalizes
// over (B,H,W) and, in training, updates the running stats used at
// inference; instance mode normalizes over (H,W) per sample and ignores
// `stats`.
Tensor norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta, NormMode mode,
              double eps, bool training, Norm2dStats* stats = nullptr);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t len);
Tensor reshape(const Tensor& x, Shape shape);
Tensor upsample_nearest(const Tensor& x, int factor);      // [B,C,H,W]
Tensor avgpool(const Tensor& x, int k);                    // non-overlapping k x k
Tensor mean(const Tensor& x, std::vector<int> axes = {});  // empty = all axes
Tensor pad_zero(const Tensor& x, int pad_h, int pad_w);    // [B,C,H,W]

// mean over all elements of the numerically stable binary cross entropy
// between sigmoid(logits) and the constant target.
Tensor bce_with_logits_mean(const Tensor& logits, double target);

// mean over rows of log-sum-exp softmax cross entropy; labels in [0, K)
Tensor softmax_cross_entropy_mean(const Tensor& logits, const std::vector<int>& labels);

// test hook: scales conv2d's weight gradient by (1 + 1e-3) when set, so the
// gradcheck harness can prove it detects a corrupted backward rule
void set_backward_mutation(bool enabled);
bool backward_mutation_enabled();

}  // namespace ifgan::ops
