// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "slicefl/checkpoint.hpp"
#include "slicefl/errors.hpp"
#include "slicefl/ops.hpp"
#include "slicefl/optim.hpp"
#include "slicefl/precision.hpp"
#include "slicefl/rng.hpp"
#include "slicefl/tensor.hpp"
#include "test_util.hpp"

namespace slicefl {
namespace {

using testing::numeric_grad;
using testing::random_param;
using testing::random_tensor;
using testing::rel_err;

// Triple-loop reference product.
std::vector<double> naive_matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) c[i * n + j] += a.at(i, p) * b.at(p, j);
  return c;
}

TEST(Precision, SimHalfKeepsElevenSignificantBits) {
  EXPECT_EQ(sim_half(1.0), 1.0);
  EXPECT_EQ(sim_half(0.0), 0.0);
  EXPECT_EQ(sim_half(1.0 + 1.0 / 4096), 1.0);  // below half an ulp
  EXPECT_EQ(sim_half(1.0 + 3.0 / 2048), 1.0 + 2.0 / 1024);  // ties to even
  EXPECT_EQ(sim_half(-3.0 / 1024 - 1.0), -(1.0 + 3.0 / 1024));
  Rng rng(7, 0);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-100, 100);
    EXPECT_LE(std::abs(sim_half(x) - x), std::abs(x) * std::ldexp(1.0, -11));
  }
}

TEST(Precision, ScopeRestoresPreviousMode) {
  EXPECT_EQ(current_precision(), Precision::Exact);
  {
    PrecisionScope s(Precision::SimHalf);
    EXPECT_EQ(current_precision(), Precision::SimHalf);
    EXPECT_EQ(quantize(1.0 + 1.0 / 4096), 1.0);
  }
  EXPECT_EQ(current_precision(), Precision::Exact);
  EXPECT_THROW(parse_precision("fp8"), ContractError);
}

TEST(Rng, DeterministicPerSeedAndStream) {
  Rng a(1, 2), b(1, 2), c(1, 3);
  for (int i = 0; i < 10; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
  }
  EXPECT_NE(stream_id("a", 1), stream_id("a", 2));
  EXPECT_NE(stream_id("a"), stream_id("b"));
}

TEST(Rng, UniformAndBelowStayInRange) {
  Rng rng(3, 0);
  double sum = 0;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    ASSERT_LT(rng.below(7), 7u);
  }
  EXPECT_NEAR(sum / 20000, 0.5, 0.01);
}

TEST(Tensor, ShapeChecks) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  const Tensor t = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t.at(1, 2), 6.0);
  EXPECT_THROW(t.item(), ContractError);
  EXPECT_THROW(Tensor::matrix({{1, 2}, {3}}), DimensionError);
}

TEST(Tensor, DetachDropsGraph) {
  Tensor a = Tensor::matrix({{1, 2}}).set_requires_grad(true);
  const Tensor b = scale(a, 2.0);
  EXPECT_TRUE(b.requires_grad());
  EXPECT_FALSE(b.is_leaf());
  const Tensor d = b.detach();
  EXPECT_FALSE(d.requires_grad());
  EXPECT_TRUE(d.is_leaf());
}

TEST(Ops, MatmulMatchesTripleLoop) {
  Rng rng(11, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + rng.below(7), k = 1 + rng.below(7), n = 1 + rng.below(7);
    const Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng);
    EXPECT_LT(testing::rel_err(matmul(a, b).values(), naive_matmul(a, b)), 1e-14);
    EXPECT_LT(rel_err(matmul_nt(a, transpose(b)), matmul(a, b)), 1e-14);
  }
  EXPECT_THROW(matmul(Tensor({2, 3}), Tensor({2, 3})), DimensionError);
}

TEST(Ops, LayerNormMomentsAndAffine) {
  Rng rng(5, 0);
  const Tensor x = random_tensor({4, 16}, rng, -3, 5);
  const Tensor y = layernorm(x, Tensor::filled({16}, 1.0), Tensor({16}));
  for (std::size_t r = 0; r < 4; ++r) {
    double mean = 0, var = 0;
    for (std::size_t c = 0; c < 16; ++c) mean += y.at(r, c);
    mean /= 16;
    for (std::size_t c = 0; c < 16; ++c) var += (y.at(r, c) - mean) * (y.at(r, c) - mean);
    var /= 16;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-4);  // eps = 1e-5 shrinks the variance slightly
  }
  EXPECT_THROW(layernorm(x, Tensor({8}), Tensor({16})), DimensionError);
}

TEST(Ops, SoftmaxRowsAreDistributions) {
  Rng rng(6, 0);
  const Tensor p = softmax(random_tensor({5, 9}, rng, -30, 30));
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 9; ++c) {
      EXPECT_GE(p.at(r, c), 0.0);
      s += p.at(r, c);
    }
    EXPECT_NEAR(s, 1.0, 1e-14);
  }
}

TEST(Ops, CrossEntropyOfUniformLogits) {
  EXPECT_NEAR(cross_entropy(Tensor({1, 4}), 2).item(), std::log(4.0), 1e-15);
  EXPECT_THROW(cross_entropy(Tensor({1, 4}), 4), ContractError);
}

TEST(Ops, SliceConcatGatherScatterRoundTrip) {
  Rng rng(8, 0);
  const Tensor a = random_tensor({6, 5}, rng);
  EXPECT_EQ(concat_rows({slice_rows(a, 0, 2), slice_rows(a, 2, 6)}).values().size(), 30u);
  EXPECT_EQ(rel_err(concat_cols({slice_cols(a, 0, 3), slice_cols(a, 3, 5)}), a), 0.0);
  const std::vector<std::size_t> idx = {4, 0, 0};
  const Tensor g = gather_rows(a, idx);
  EXPECT_EQ(g.at(0, 1), a.at(4, 1));
  EXPECT_EQ(g.at(2, 3), a.at(0, 3));
  const Tensor left = slice_cols(a, 0, 2), right = slice_cols(a, 2, 5);
  const Tensor back = scatter_cols({right, left}, {{2, 3, 4}, {0, 1}}, 5);
  EXPECT_EQ(rel_err(back, a), 0.0);
  EXPECT_THROW(slice_rows(a, 4, 7), DimensionError);
}

struct GradCase {
  const char* name;
  std::function<Tensor(const std::vector<Tensor>&)> f;
  std::vector<Shape> shapes;
};

class OpGradient : public ::testing::TestWithParam<GradCase> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  const GradCase& gc = GetParam();
  Rng rng(21, 0);
  std::vector<Tensor> in;
  for (const Shape& s : gc.shapes) in.push_back(random_param(s, rng, -1.5, 1.5));
  // A fixed random projection turns any output into a scalar loss.
  const Tensor probe_out = gc.f(in);
  const Tensor proj = random_tensor(probe_out.shape(), rng);
  auto loss = [&] { return sum(mul(gc.f(in), proj)); };
  const Tensor l = loss();
  backward(l);
  for (Tensor& t : in) {
    const std::vector<double> num = numeric_grad(t, [&] { return loss().item(); });
    EXPECT_LT(testing::rel_err(t.grad(), num), 1e-6) << gc.name;
  }
}

INSTANTIATE_TEST_SUITE_P(
    Ops, OpGradient,
    ::testing::Values(
        GradCase{"matmul", [](auto& v) { return matmul(v[0], v[1]); }, {{3, 4}, {4, 2}}},
        GradCase{"matmul_nt", [](auto& v) { return matmul_nt(v[0], v[1]); }, {{3, 4}, {5, 4}}},
        GradCase{"transpose", [](auto& v) { return transpose(v[0]); }, {{3, 2}}},
        GradCase{"add", [](auto& v) { return add(v[0], v[1]); }, {{2, 3}, {2, 3}}},
        GradCase{"sub", [](auto& v) { return sub(v[0], v[1]); }, {{2, 3}, {2, 3}}},
        GradCase{"mul", [](auto& v) { return mul(v[0], v[1]); }, {{2, 3}, {2, 3}}},
        GradCase{"add_bias", [](auto& v) { return add_bias(v[0], v[1]); }, {{3, 4}, {4}}},
        GradCase{"linear", [](auto& v) { return linear(v[0], v[1], v[2]); },
                 {{3, 4}, {2, 4}, {2}}},
        GradCase{"mean_rows", [](auto& v) { return mean_rows(v[0]); }, {{4, 3}}},
        GradCase{"layernorm", [](auto& v) { return layernorm(v[0], v[1], v[2]); },
                 {{3, 6}, {6}, {6}}},
        GradCase{"softmax", [](auto& v) { return softmax(v[0]); }, {{3, 5}}},
        GradCase{"gelu", [](auto& v) { return gelu(v[0]); }, {{3, 5}}},
        GradCase{"cross_entropy", [](auto& v) { return cross_entropy(v[0], 2); }, {{1, 4}}},
        GradCase{"slice_concat",
                 [](auto& v) {
                   return concat_cols({slice_cols(v[0], 2, 4), slice_rows(v[1], 1, 3)});
                 },
                 {{2, 5}, {4, 3}}},
        GradCase{"gather_rows",
                 [](auto& v) {
                   const std::vector<std::size_t> idx = {2, 0, 2};
                   return gather_rows(v[0], idx);
                 },
                 {{3, 4}}},
        GradCase{"scatter_cols",
                 [](auto& v) { return scatter_cols({v[0], v[1]}, {{1, 3}, {0, 2}}, 4); },
                 {{3, 2}, {3, 2}}}),
    [](const auto& info) { return std::string(info.param.name); });

TEST(Autodiff, SharedSubgraphAccumulatesOnce) {
  Tensor x = Tensor::matrix({{2.0}}).set_requires_grad(true);
  const Tensor y = mul(x, x);
  backward(sum(add(y, y)));  // d/dx 2x^2 = 4x
  EXPECT_DOUBLE_EQ(x.grad()[0], 8.0);
  x.zero_grad();
  backward(sum(y));  // stale interior grads must not leak into this sweep
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
  EXPECT_THROW(backward(Tensor({2})), ContractError);
}

TEST(Adam, ZeroGradientEntriesNeverMove) {
  Tensor w = Tensor::matrix({{1.0, 2.0, 3.0}}).set_requires_grad(true);
  Adam opt({w}, AdamOptions{.lr = 0.1});
  const Tensor mask = Tensor::matrix({{1.0, 0.0, 1.0}});
  for (int i = 0; i < 100; ++i) {
    opt.zero_grad();
    backward(sum(mul(mul(w, w), mask)));
    opt.step();
  }
  EXPECT_EQ(w.values()[1], 2.0);
  EXPECT_LT(std::abs(w.values()[0]), 0.5);
  EXPECT_EQ(opt.steps(), 100);
}

TEST(Adam, ZeroLearningRateIsIdentity) {
  Tensor w = Tensor::matrix({{1.0, -2.0}}).set_requires_grad(true);
  Adam opt({w}, AdamOptions{.lr = 0.0});
  backward(sum(mul(w, w)));
  opt.step();
  EXPECT_EQ(w.values()[0], 1.0);
  EXPECT_EQ(w.values()[1], -2.0);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(4, 0);
  const NamedTensors in = {{"a", random_tensor({3, 4}, rng)}, {"b.c", random_tensor({5}, rng)}};
  const NamedTensors out = decode_checkpoint(encode_checkpoint(in));
  ASSERT_EQ(out.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(out[i].first, in[i].first);
    EXPECT_EQ(out[i].second.shape(), in[i].second.shape());
    EXPECT_EQ(testing::to_vec(out[i].second.values()), testing::to_vec(in[i].second.values()));
  }
  std::vector<std::uint8_t> bytes = encode_checkpoint(in);
  bytes.resize(bytes.size() - 3);
  EXPECT_THROW(decode_checkpoint(bytes), FormatError);
  bytes = encode_checkpoint(in);
  bytes[0] ^= 0xFF;
  EXPECT_THROW(decode_checkpoint(bytes), FormatError);
}

TEST(Checkpoint, SaveWritesManifest) {
  const auto dir = std::filesystem::temp_directory_path() / "slicefl_ckpt_test";
  std::filesystem::remove_all(dir);
  save_checkpoint(dir, "adapters", {{"w", Tensor::matrix({{1, 2}})}});
  EXPECT_TRUE(std::filesystem::exists(dir / "adapters.json"));
  const NamedTensors back = load_checkpoint(dir / "adapters.bin");
  EXPECT_EQ(back.at(0).second.values()[1], 2.0);
}

}  // namespace
}  // namespace slicefl
