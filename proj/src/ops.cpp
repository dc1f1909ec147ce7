// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include "slicefl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "slicefl/errors.hpp"
#include "slicefl/precision.hpp"

namespace slicefl {
namespace {

void require_2d(const Tensor& t, const char* op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
  if (t.ndim() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         shape_str(t.shape()));
  }
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

// c[m x n] (+)= a[m x k] . b[k x n]
void gemm_nn(std::size_t m, std::size_t k, std::size_t n, const double* a,
             const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[m x n] (+)= a[m x k] . b[n x k]^T
void gemm_nt(std::size_t m, std::size_t k, std::size_t n, const double* a,
             const double* b, double* c) {
  thread_local std::vector<double> bt;
  bt.resize(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = b[j * k + p];
  }
  gemm_nn(m, k, n, a, bt.data(), c);
}

// c[m x n] (+)= a[k x m]^T . b[k x n]
void gemm_tn(std::size_t m, std::size_t k, std::size_t n, const double* a,
             const double* b, double* c) {
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[p * m + i];
      const double* brow = b + p * n;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dims " + shape_str(a.shape()) + " . " +
                         shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  gemm_nn(m, k, n, a.values().data(), b.values().data(), out.data());
  return make_result({m, n}, std::move(out), {a, b},
                     [a, b, m, k, n](std::span<const double> g,
                                     std::span<std::vector<double>*> in) {
                       if (in[0]) gemm_nt(m, n, k, g.data(), b.values().data(), in[0]->data());
                       if (in[1]) gemm_tn(k, m, n, a.values().data(), g.data(), in[1]->data());
                     });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul_nt");
  require_2d(b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw DimensionError("matmul_nt: inner dims " + shape_str(a.shape()) +
                         " . " + shape_str(b.shape()) + "^T");
  }
  std::vector<double> out(m * n, 0.0);
  gemm_nt(m, k, n, a.values().data(), b.values().data(), out.data());
  return make_result({m, n}, std::move(out), {a, b},
                     [a, b, m, k, n](std::span<const double> g,
                                     std::span<std::vector<double>*> in) {
                       // dA = G . B, dB = G^T . A
                       if (in[0]) gemm_nn(m, n, k, g.data(), b.values().data(), in[0]->data());
                       if (in[1]) gemm_tn(n, m, k, g.data(), a.values().data(), in[1]->data());
                     });
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(r * c);
  const auto v = a.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = v[i * c + j];
  return make_result({c, r}, std::move(out), {a},
                     [r, c](std::span<const double> g, std::span<std::vector<double>*> in) {
                       auto& ga = *in[0];
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
                     });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same(a, b, "add");
  std::vector<double> out(a.numel());
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), {a, b},
                     [](std::span<const double> g, std::span<std::vector<double>*> in) {
                       for (auto* buf : in)
                         if (buf)
                           for (std::size_t i = 0; i < g.size(); ++i) (*buf)[i] += g[i];
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same(a, b, "sub");
  std::vector<double> out(a.numel());
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.shape(), std::move(out), {a, b},
                     [](std::span<const double> g, std::span<std::vector<double>*> in) {
                       if (in[0])
                         for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i];
                       if (in[1])
                         for (std::size_t i = 0; i < g.size(); ++i) (*in[1])[i] -= g[i];
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same(a, b, "mul");
  std::vector<double> out(a.numel());
  const auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.shape(), std::move(out), {a, b},
                     [a, b](std::span<const double> g, std::span<std::vector<double>*> in) {
                       const auto av = a.values(), bv = b.values();
                       if (in[0])
                         for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i] * bv[i];
                       if (in[1])
                         for (std::size_t i = 0; i < g.size(); ++i) (*in[1])[i] += g[i] * av[i];
                     });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (double& v : out) v *= s;
  return make_result(a.shape(), std::move(out), {a},
                     [s](std::span<const double> g, std::span<std::vector<double>*> in) {
                       for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += s * g[i];
                     });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  const std::size_t r = a.rows(), c = a.cols();
  if (bias.numel() != c) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) +
                         " for rows of width " + std::to_string(c));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = bias.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bv[j];
  return make_result(a.shape(), std::move(out), {a, bias},
                     [r, c](std::span<const double> g, std::span<std::vector<double>*> in) {
                       if (in[0])
                         for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[i] += g[i];
                       if (in[1])
                         for (std::size_t i = 0; i < r; ++i)
                           for (std::size_t j = 0; j < c; ++j) (*in[1])[j] += g[i * c + j];
                     });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_bias(matmul_nt(x, w), b);
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return make_result({1}, {acc}, {a},
                     [](std::span<const double> g, std::span<std::vector<double>*> in) {
                       for (double& v : *in[0]) v += g[0];
                     });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw DimensionError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor mean_rows(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  if (r == 0) throw DimensionError("mean_rows of an empty tensor");
  std::vector<double> out(c, 0.0);
  const auto v = a.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += v[i * c + j];
  const double inv = 1.0 / static_cast<double>(r);
  for (double& o : out) o *= inv;
  return make_result({1, c}, std::move(out), {a},
                     [r, c, inv](std::span<const double> g, std::span<std::vector<double>*> in) {
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < c; ++j) (*in[0])[i * c + j] += g[j] * inv;
                     });
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t r = x.rows(), c = x.cols();
  if (c == 0) throw DimensionError("layernorm: zero-length rows");
  if (gamma.numel() != c || beta.numel() != c) {
    throw DimensionError("layernorm: gamma/beta must match the last dim " +
                         std::to_string(c));
  }
  std::vector<double> out(r * c), normed(r * c), inv_std(r);
  const auto xv = x.values(), gv = gamma.values(), bv = beta.values();
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = xv.data() + i * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      normed[i * c + j] = (row[j] - mu) * inv_std[i];
      out[i * c + j] = normed[i * c + j] * gv[j] + bv[j];
    }
  }
  return make_result(
      x.shape(), std::move(out), {x, gamma, beta},
      [gamma, r, c, normed = std::move(normed), inv_std = std::move(inv_std)](
          std::span<const double> g, std::span<std::vector<double>*> in) {
        const auto gv = gamma.values();
        for (std::size_t i = 0; i < r; ++i) {
          const double* n = normed.data() + i * c;
          const double* gr = g.data() + i * c;
          if (in[0]) {
            double mean_d = 0.0, mean_dn = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double d = gr[j] * gv[j];
              mean_d += d;
              mean_dn += d * n[j];
            }
            mean_d /= static_cast<double>(c);
            mean_dn /= static_cast<double>(c);
            for (std::size_t j = 0; j < c; ++j) {
              const double d = gr[j] * gv[j];
              (*in[0])[i * c + j] += inv_std[i] * (d - mean_d - n[j] * mean_dn);
            }
          }
          if (in[1])
            for (std::size_t j = 0; j < c; ++j) (*in[1])[j] += gr[j] * n[j];
          if (in[2])
            for (std::size_t j = 0; j < c; ++j) (*in[2])[j] += gr[j];
        }
      });
}

Tensor softmax(const Tensor& x) {
  const std::size_t r = x.rows(), c = x.cols();
  if (c == 0) throw DimensionError("softmax: empty last dimension");
  std::vector<double> out(r * c);
  const auto xv = x.values();
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = xv.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (out[i * c + j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= z;
  }
  // Backward reads the outputs; quantize first so it sees what callers see.
  for (double& v : out) v = quantize(v);
  std::vector<double> y = out;
  return make_result(x.shape(), std::move(out), {x},
                     [y, r, c](std::span<const double> g, std::span<std::vector<double>*> in) {
                       for (std::size_t i = 0; i < r; ++i) {
                         double dot = 0.0;
                         for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
                         for (std::size_t j = 0; j < c; ++j)
                           (*in[0])[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
                       }
                     });
}

Tensor gelu(const Tensor& x) {
  std::vector<double> out(x.numel());
  const auto xv = x.values();
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = 0.5 * xv[i] * (1.0 + std::erf(xv[i] * kInvSqrt2));
  }
  return make_result(x.shape(), std::move(out), {x},
                     [x](std::span<const double> g, std::span<std::vector<double>*> in) {
                       const auto xv = x.values();
                       const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         const double v = xv[i];
                         const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
                         const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
                         (*in[0])[i] += g[i] * (cdf + v * pdf);
                       }
                     });
}

Tensor cross_entropy(const Tensor& logits, std::size_t label) {
  if (logits.rows() != 1) {
    throw DimensionError("cross_entropy: expected one row of logits, got " +
                         shape_str(logits.shape()));
  }
  const std::size_t c = logits.cols();
  if (c == 0) throw DimensionError("cross_entropy: no classes");
  if (label >= c) {
    throw ContractError("cross_entropy: label " + std::to_string(label) +
                        " out of range for " + std::to_string(c) + " classes");
  }
  const auto z = logits.values();
  const double mx = *std::max_element(z.begin(), z.end());
  double sum_exp = 0.0;
  for (double v : z) sum_exp += std::exp(v - mx);
  const double lse = mx + std::log(sum_exp);
  std::vector<double> probs(c);
  for (std::size_t j = 0; j < c; ++j) probs[j] = std::exp(z[j] - lse);
  return make_result({1}, {lse - z[label]}, {logits},
                     [probs = std::move(probs), label](std::span<const double> g,
                                                       std::span<std::vector<double>*> in) {
                       for (std::size_t j = 0; j < probs.size(); ++j) {
                         (*in[0])[j] += g[0] * (probs[j] - (j == label ? 1.0 : 0.0));
                       }
                     });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  require_2d(a, "slice_rows");
  const std::size_t c = a.cols();
  if (begin > end || end > a.rows()) throw DimensionError("slice_rows: range out of bounds");
  const auto v = a.values();
  std::vector<double> out(v.begin() + begin * c, v.begin() + end * c);
  return make_result({end - begin, c}, std::move(out), {a},
                     [begin, c](std::span<const double> g, std::span<std::vector<double>*> in) {
                       for (std::size_t i = 0; i < g.size(); ++i) (*in[0])[begin * c + i] += g[i];
                     });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_2d(a, "slice_cols");
  const std::size_t r = a.rows(), c = a.cols(), w = end - begin;
  if (begin > end || end > c) throw DimensionError("slice_cols: range out of bounds");
  const auto v = a.values();
  std::vector<double> out(r * w);
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(v.begin() + i * c + begin, w, out.begin() + i * w);
  return make_result({r, w}, std::move(out), {a},
                     [r, c, w, begin](std::span<const double> g, std::span<std::vector<double>*> in) {
                       for (std::size_t i = 0; i < r; ++i)
                         for (std::size_t j = 0; j < w; ++j) (*in[0])[i * c + begin + j] += g[i * w + j];
                     });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  const std::size_t c = parts.front().cols();
  std::size_t r = 0;
  std::vector<std::size_t> offsets;
  for (const Tensor& p : parts) {
    require_2d(p, "concat_rows");
    if (p.cols() != c) throw DimensionError("concat_rows: column count mismatch");
    offsets.push_back(r * c);
    r += p.rows();
  }
  std::vector<double> out;
  out.reserve(r * c);
  for (const Tensor& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return make_result({r, c}, std::move(out), parts,
                     [offsets](std::span<const double> g, std::span<std::vector<double>*> in) {
                       for (std::size_t p = 0; p < in.size(); ++p) {
                         if (!in[p]) continue;
                         for (std::size_t i = 0; i < in[p]->size(); ++i)
                           (*in[p])[i] += g[offsets[p] + i];
                       }
                     });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  const std::size_t r = parts.front().rows();
  std::size_t c = 0;
  std::vector<std::size_t> offsets, widths;
  for (const Tensor& p : parts) {
    require_2d(p, "concat_cols");
    if (p.rows() != r) throw DimensionError("concat_cols: row count mismatch");
    offsets.push_back(c);
    widths.push_back(p.cols());
    c += p.cols();
  }
  std::vector<double> out(r * c);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto v = parts[p].values();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(v.begin() + i * widths[p], widths[p], out.begin() + i * c + offsets[p]);
  }
  return make_result({r, c}, std::move(out), parts,
                     [r, c, offsets, widths](std::span<const double> g,
                                             std::span<std::vector<double>*> in) {
                       for (std::size_t p = 0; p < in.size(); ++p) {
                         if (!in[p]) continue;
                         for (std::size_t i = 0; i < r; ++i)
                           for (std::size_t j = 0; j < widths[p]; ++j)
                             (*in[p])[i * widths[p] + j] += g[i * c + offsets[p] + j];
                       }
                     });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index) {
  const bool flat = a.ndim() == 1;
  const std::size_t r = flat ? a.numel() : a.rows();
  const std::size_t c = flat ? 1 : a.cols();
  std::vector<std::size_t> idx(index.begin(), index.end());
  std::vector<double> out;
  out.reserve(idx.size() * c);
  const auto v = a.values();
  for (std::size_t i : idx) {
    if (i >= r) throw DimensionError("gather_rows: index " + std::to_string(i) + " out of range");
    out.insert(out.end(), v.begin() + i * c, v.begin() + (i + 1) * c);
  }
  Shape shape = flat ? Shape{idx.size()} : Shape{idx.size(), c};
  return make_result(std::move(shape), std::move(out), {a},
                     [idx, c](std::span<const double> g, std::span<std::vector<double>*> in) {
                       for (std::size_t k = 0; k < idx.size(); ++k)
                         for (std::size_t j = 0; j < c; ++j) (*in[0])[idx[k] * c + j] += g[k * c + j];
                     });
}

Tensor scatter_cols(const std::vector<Tensor>& parts,
                    const std::vector<std::vector<std::size_t>>& index,
                    std::size_t total_cols) {
  if (parts.empty() || parts.size() != index.size()) {
    throw DimensionError("scatter_cols: parts and index lists disagree");
  }
  const std::size_t r = parts.front().rows();
  std::vector<int> hit(total_cols, 0);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    if (parts[p].rows() != r || parts[p].cols() != index[p].size()) {
      throw DimensionError("scatter_cols: part " + std::to_string(p) + " has shape " +
                           shape_str(parts[p].shape()));
    }
    for (std::size_t j : index[p]) {
      if (j >= total_cols || hit[j]++) throw DimensionError("scatter_cols: index lists do not partition the output");
    }
  }
  if (std::count(hit.begin(), hit.end(), 1) != static_cast<long>(total_cols)) {
    throw DimensionError("scatter_cols: index lists do not cover the output");
  }
  std::vector<double> out(r * total_cols);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto v = parts[p].values();
    const std::size_t w = index[p].size();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) out[i * total_cols + index[p][j]] = v[i * w + j];
  }
  return make_result({r, total_cols}, std::move(out), parts,
                     [r, total_cols, index](std::span<const double> g,
                                            std::span<std::vector<double>*> in) {
                       for (std::size_t p = 0; p < in.size(); ++p) {
                         if (!in[p]) continue;
                         const std::size_t w = index[p].size();
                         for (std::size_t i = 0; i < r; ++i)
                           for (std::size_t j = 0; j < w; ++j)
                             (*in[p])[i * w + j] += g[i * total_cols + index[p][j]];
                       }
                     });
}

}  // namespace slicefl
