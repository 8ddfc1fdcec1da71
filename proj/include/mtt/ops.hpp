#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "mtt/autodiff.hpp"
#include "mtt/tensor.hpp"

namespace mtt {

// Boolean attention mask, true = position visible. Masked positions come out
// of softmax_rows as exactly 0.
struct Mask {
    int rows = 0;
    int cols = 0;
    std::vector<uint8_t> keep;

    static Mask all_visible(int rows, int cols);
    static Mask causal(int t);  // row i sees columns j <= i
    bool at(int i, int j) const { return keep[static_cast<size_t>(i) * cols + j] != 0; }
};

// Every op validates shapes, refuses to emit non-finite values, and records
// its backward rule on `tape` when given one and when gradients can flow.
// Passing tape = nullptr runs plain inference.

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);

// Elementwise add of equal shapes, or row-broadcast of a rank-1 tensor
// across the rows of a rank-2 tensor.
Tensor add(const Tensor& a, const Tensor& b, Tape* tape = nullptr);

Tensor scale(const Tensor& a, double s, Tape* tape = nullptr);

Tensor transpose(const Tensor& a, Tape* tape = nullptr);

// Concatenate along the last axis: [m x p] ++ [m x q] -> [m x (p+q)], or
// rank-1 [p] ++ [q] -> [p+q].
Tensor concat_last(const Tensor& a, const Tensor& b, Tape* tape = nullptr);

// Rows [begin, end) of the first axis.
Tensor slice_rows(const Tensor& a, int begin, int end, Tape* tape = nullptr);

// Mean over all elements -> shape [1].
Tensor mean_reduce(const Tensor& a, Tape* tape = nullptr);

// Row-wise softmax with numerical stabilisation (row max subtracted).
// Masked positions are pushed to -1e30 before the softmax and zeroed exactly
// afterwards. A fully masked row throws MaskError.
Tensor softmax_rows(const Tensor& x, const Mask* mask = nullptr, Tape* tape = nullptr);

Tensor leaky_relu(const Tensor& x, double slope = 0.01, Tape* tape = nullptr);

// Scalar-valued function of one tensor, built through the given tape when
// one is supplied.
using ScalarFn = std::function<Tensor(const Tensor&, Tape*)>;

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
double finite_difference_check(const ScalarFn& f, const Tensor& x, double eps = 1e-5);

}  // namespace mtt
