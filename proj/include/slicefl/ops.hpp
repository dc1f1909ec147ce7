// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "slicefl/tensor.hpp"

namespace slicefl {

// All ops treat a 1-D tensor of length n as a 1 x n row where a matrix is
// expected. Every op is differentiable in every tensor argument.

/// [m x k] . [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
/// a . b^T for a [m x k], b [n x k]; the layout of a linear layer x . W^T.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise product.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
/// Adds a bias of length cols() to every row.
Tensor add_bias(const Tensor& a, const Tensor& bias);
/// x . W^T + b
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Column means: [m x n] -> [1 x n].
Tensor mean_rows(const Tensor& a);

/// Per-row normalisation over the last dimension followed by gamma/beta.
Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 double eps = 1e-5);
/// Row-wise softmax over the last dimension.
Tensor softmax(const Tensor& x);
/// Exact (erf) GELU.
Tensor gelu(const Tensor& x);
/// Negative log-likelihood of `label` under softmax(logits); logits is a
/// single row of class scores.
Tensor cross_entropy(const Tensor& logits, std::size_t label);

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
/// Rows of a 2-D tensor (or entries of a 1-D tensor) in index order.
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index);
/// Places column j of parts[p] at output column index[p][j]. The index
/// lists must cover [0, total_cols) exactly once.
Tensor scatter_cols(const std::vector<Tensor>& parts,
                    const std::vector<std::vector<std::size_t>>& index,
                    std::size_t total_cols);

}  // namespace slicefl
