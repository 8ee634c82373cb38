#pragma once

#include "hint/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace hint {

// Differentiable tensor primitives. All take tensors by value (cheap: shared
// storage) and return fresh outputs; gradients are accumulated by the tape.

Tensor add(const Tensor& a, const Tensor& b);          // elementwise, same shape
Tensor mul(const Tensor& a, const Tensor& b);          // elementwise, same shape
Tensor scale(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);       // [m x p] * [p x q]
Tensor transpose(const Tensor& a);                     // 2-D
Tensor gelu(const Tensor& a);                          // exact: x * Phi(x)
Tensor softmax_rows(const Tensor& a);                  // 2-D, rowwise
Tensor softmax_vec(const Tensor& a);                   // 1-D
Tensor rmsnorm(const Tensor& x, const Tensor& gain);   // rowwise over last dim
Tensor embedding_lookup(const Tensor& table, std::span<const int> ids);
Tensor slice_rows(const Tensor& a, int r0, int n);
Tensor slice_cols(const Tensor& a, int c0, int n);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor sum_all(const Tensor& a);                       // -> scalar
Tensor mean_all(const Tensor& a);                      // -> scalar

// Mean cross-entropy over rows of `logits` [n x v] against `targets` (n ids).
// Log-sum-exp is max-stabilized.
Tensor cross_entropy_mean(const Tensor& logits, std::span<const int> targets);

inline constexpr double rmsnorm_eps = 1e-6;

// ---------------------------------------------------------------------------
// Multiply-accumulate instrumentation. matmul adds m*p*q to the active
// counter; everything else is ignored by convention (attention and FFNs are
// matmul-dominated). Used to cross-check the analytic cost model.

class MacCounter {
public:
    MacCounter();
    ~MacCounter();
    MacCounter(const MacCounter&) = delete;
    MacCounter& operator=(const MacCounter&) = delete;
    std::int64_t count() const;

private:
    std::int64_t start_;
};

std::int64_t mac_count_raw();

} // namespace hint
