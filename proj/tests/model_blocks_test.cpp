// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "slicefl/adapters.hpp"
#include "slicefl/errors.hpp"
#include "slicefl/model.hpp"
#include "slicefl/ops.hpp"
#include "slicefl/optim.hpp"
#include "slicefl/transformer.hpp"
#include "test_util.hpp"

namespace slicefl {
namespace {

using testing::random_tensor;
using testing::rel_err;
using Mat = std::vector<std::vector<double>>;

// ---- loop-based reference encoder ----

Mat to_mat(const Tensor& t) {
  Mat m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t.at(r, c);
  return m;
}

Mat ref_linear(const Mat& x, const Tensor& w, const Tensor* b) {
  Mat y(x.size(), std::vector<double>(w.rows(), 0.0));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t o = 0; o < w.rows(); ++o) {
      double s = b ? b->values()[o] : 0.0;
      for (std::size_t j = 0; j < w.cols(); ++j) s += x[i][j] * w.at(o, j);
      y[i][o] = s;
    }
  return y;
}

Mat ref_ln(const Mat& x, const Tensor& g, const Tensor& b) {
  Mat y = x;
  for (auto& row : y) {
    const double n = static_cast<double>(row.size());
    const double mu = std::accumulate(row.begin(), row.end(), 0.0) / n;
    double var = 0;
    for (double v : row) var += (v - mu) * (v - mu);
    var /= n;
    for (std::size_t j = 0; j < row.size(); ++j)
      row[j] = (row[j] - mu) / std::sqrt(var + 1e-5) * g.values()[j] + b.values()[j];
  }
  return y;
}

void ref_add_into(Mat& a, const Mat& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += b[i][j];
}

Mat ref_apply(const Mat& x, const BlockWeights& blk, LinearKind kind, std::size_t layer,
              const Adapters& ad) {
  Mat y = ref_linear(x, blk.weight(kind), &blk.bias(kind));
  if (auto it = ad.lora.find({layer, kind}); it != ad.lora.end()) {
    Mat d = ref_linear(ref_linear(x, it->second.a, nullptr), it->second.b, nullptr);
    for (auto& row : d)
      for (double& v : row) v *= it->second.scaling();
    ref_add_into(y, d);
  }
  return y;
}

std::vector<double> reference_logits(const BaseModel& m, const Adapters& ad,
                                     const std::vector<std::uint32_t>& tokens) {
  const TransformerConfig& c = m.config;
  const std::size_t s = tokens.size(), dh = c.d_head;
  Mat x(s, std::vector<double>(c.d_model));
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < c.d_model; ++j)
      x[i][j] = m.tok_emb.at(tokens[i], j) + m.pos_emb.at(i, j);
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    const BlockWeights& blk = m.blocks[l];
    const Mat qkv = ref_apply(ref_ln(x, blk.ln1_gamma, blk.ln1_beta), blk, LinearKind::Qkv, l, ad);
    const std::size_t p = ad.prefix ? ad.prefix->prefix_len : 0;
    Mat ctx(s, std::vector<double>(c.d_model, 0.0));
    for (std::size_t h = 0; h < c.n_heads; ++h) {
      const std::size_t base = h * 3 * dh;
      auto key = [&](std::size_t n, std::size_t e) {
        return n < p ? ad.prefix->keys[l].at(n, h * dh + e) : qkv[n - p][base + dh + e];
      };
      auto val = [&](std::size_t n, std::size_t e) {
        return n < p ? ad.prefix->values[l].at(n, h * dh + e) : qkv[n - p][base + 2 * dh + e];
      };
      for (std::size_t i = 0; i < s; ++i) {
        std::vector<double> sc(s + p);
        for (std::size_t n = 0; n < s + p; ++n) {
          double dot = 0;
          for (std::size_t e = 0; e < dh; ++e) dot += qkv[i][base + e] * key(n, e);
          sc[n] = dot / std::sqrt(static_cast<double>(dh));
        }
        const double mx = *std::max_element(sc.begin(), sc.end());
        double z = 0;
        for (double& v : sc) z += (v = std::exp(v - mx));
        for (std::size_t n = 0; n < s + p; ++n)
          for (std::size_t e = 0; e < dh; ++e) ctx[i][h * dh + e] += sc[n] / z * val(n, e);
      }
    }
    ref_add_into(x, ref_apply(ctx, blk, LinearKind::Dense, l, ad));
    Mat f = ref_apply(ref_ln(x, blk.ln2_gamma, blk.ln2_beta), blk, LinearKind::Fc1, l, ad);
    for (auto& row : f)
      for (double& v : row) v = 0.5 * v * (1 + std::erf(v / std::sqrt(2.0)));
    ref_add_into(x, ref_apply(f, blk, LinearKind::Fc2, l, ad));
  }
  const Mat h = ref_ln(x, m.lnf_gamma, m.lnf_beta);
  Mat pooled(1, std::vector<double>(c.d_model, 0.0));
  for (const auto& row : h)
    for (std::size_t j = 0; j < c.d_model; ++j) pooled[0][j] += row[j] / static_cast<double>(s);
  return ref_linear(pooled, ad.head_w, &ad.head_b)[0];
}

std::vector<std::uint32_t> random_tokens(Rng& rng, std::size_t n, std::size_t vocab) {
  std::vector<std::uint32_t> t(n);
  for (auto& v : t) v = static_cast<std::uint32_t>(rng.below(vocab));
  return t;
}

void randomize(Tensor& t, Rng& rng) {
  for (double& v : t.mutable_values()) v = rng.uniform(-0.3, 0.3);
}

class ForwardOracle : public ::testing::TestWithParam<TuningMode> {};

TEST_P(ForwardOracle, MatchesLoopReference) {
  const BaseModel base = BaseModel::random(TransformerConfig{}, 3);
  TuningConfig tc;
  tc.mode = GetParam();
  tc.lora_targets = {LinearKind::Qkv, LinearKind::Dense, LinearKind::Fc1, LinearKind::Fc2};
  Adapters ad = Adapters::create(base, tc, 4);
  Rng rng(5, 0);
  for (auto& [k, l] : ad.lora) randomize(l.b, rng);  // make the adapter path non-trivial
  const Transformer model(base, ad);
  PlainBackend plain;
  for (int trial = 0; trial < 5; ++trial) {
    const auto tokens = random_tokens(rng, 1 + rng.below(16), 32);
    const Tensor got = model.logits(tokens, plain);
    EXPECT_LT(testing::rel_err(got.values(), reference_logits(base, ad, tokens)), 1e-12);
  }
}

INSTANTIATE_TEST_SUITE_P(Tunings, ForwardOracle,
                         ::testing::Values(TuningMode::None, TuningMode::Lora,
                                           TuningMode::PtuningV2),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Transformer, RejectsBadInputs) {
  const BaseModel base = BaseModel::random(TransformerConfig{}, 1);
  const Adapters ad = Adapters::create(base, TuningConfig{}, 1);
  const Transformer model(base, ad);
  PlainBackend plain;
  EXPECT_THROW(model.logits(std::vector<std::uint32_t>(17, 0), plain), DimensionError);
  EXPECT_THROW(model.logits(std::vector<std::uint32_t>{40}, plain), DimensionError);
  EXPECT_THROW(model.logits(std::vector<std::uint32_t>{}, plain), DimensionError);
  EXPECT_THROW(model.forward_block(Tensor({2, 16}), 0, plain), DimensionError);
}

TEST(TransformerConfig, Validates) {
  TransformerConfig c;
  c.n_heads = 5;
  EXPECT_THROW(c.validate(), ContractError);
  EXPECT_NO_THROW(TransformerConfig{}.validate());
}

TEST(Lora, FreshAdapterIsIdentity) {
  const BaseModel base = BaseModel::random(TransformerConfig{}, 2);
  TuningConfig tc;
  tc.lora_targets = {LinearKind::Qkv, LinearKind::Fc2};
  const Adapters ad = Adapters::create(base, tc, 9);
  Adapters bare = ad.clone();
  bare.lora.clear();
  Rng rng(1, 0);
  PlainBackend plain;
  const auto tokens = random_tokens(rng, 12, 32);
  const Tensor a = Transformer(base, ad).logits(tokens, plain);
  const Tensor b = Transformer(base, bare).logits(tokens, plain);
  EXPECT_EQ(testing::to_vec(a.values()), testing::to_vec(b.values()));
}

TEST(Lora, DeltaMatchesScaledLowRankProduct) {
  Rng rng(6, 0);
  LoraAdapter l = LoraAdapter::create(8, 6, 2, 4.0, 0.0, 0, LinearKind::Dense, rng);
  randomize(l.b, rng);
  const Tensor x = random_tensor({3, 8}, rng), w = random_tensor({6, 8}, rng);
  const Tensor oracle = add(matmul_nt(x, w), scale(matmul_nt(matmul_nt(x, l.a), l.b), 2.0));
  EXPECT_LT(rel_err(lora_forward(x, w, l), oracle), 1e-14);
  EXPECT_DOUBLE_EQ(l.scaling(), 2.0);
}

TEST(Lora, DropoutOnlyWhenRngGiven) {
  Rng rng(7, 0);
  LoraAdapter l = LoraAdapter::create(8, 6, 2, 4.0, 0.5, 0, LinearKind::Dense, rng);
  randomize(l.b, rng);
  const Tensor x = random_tensor({20, 8}, rng);
  const Tensor eval1 = lora_delta(x, l, nullptr), eval2 = lora_delta(x, l, nullptr);
  EXPECT_EQ(rel_err(eval1, eval2), 0.0);
  Rng drop(8, 0);
  EXPECT_GT(rel_err(lora_delta(x, l, &drop), eval1), 1e-3);
}

TEST(Prefix, ExtendsKeysNotQueries) {
  const BaseModel base = BaseModel::random(TransformerConfig{}, 2);
  TuningConfig tc;
  tc.mode = TuningMode::PtuningV2;
  tc.prefix_len = 3;
  const Adapters ad = Adapters::create(base, tc, 1);
  ASSERT_TRUE(ad.prefix);
  EXPECT_EQ(ad.prefix->keys.size(), 6u);
  EXPECT_EQ(ad.prefix->keys[0].shape(), (Shape{3, 32}));
  // Output rows follow the query count, not the key count.
  PlainBackend plain;
  const Tensor out = Transformer(base, ad).forward_block(Tensor({5, 32}), 0, plain);
  EXPECT_EQ(out.shape(), (Shape{5, 32}));
}

// ---- SPF ----

std::vector<std::size_t> brute_force_top(const Tensor& w, std::size_t groups, std::size_t k) {
  const std::size_t rows_per = w.rows() / groups;
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t g = 0; g < groups; ++g) {
    double s = 0;
    for (std::size_t r = g * rows_per; r < (g + 1) * rows_per; ++r)
      for (std::size_t j = 0; j < w.cols(); ++j) s += std::abs(w.at(r, j));
    scored.emplace_back(-s, g);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<std::size_t> top;
  for (std::size_t i = 0; i < k; ++i) top.push_back(scored[i].second);
  std::sort(top.begin(), top.end());
  return top;
}

TEST(Spf, GroupCount) {
  EXPECT_EQ(spf_train_group_count(8, 0.25), 2u);
  EXPECT_EQ(spf_train_group_count(8, 0.625), 5u);
  EXPECT_EQ(spf_train_group_count(8, 1.0), 8u);
  EXPECT_EQ(spf_train_group_count(8, 0.01), 1u);
  EXPECT_EQ(spf_train_group_count(3, 0.5), 2u);
  EXPECT_THROW(spf_train_group_count(8, 0.0), ContractError);
  EXPECT_THROW(spf_train_group_count(8, 1.5), ContractError);
}

TEST(Spf, SelectionMatchesBruteForce) {
  Rng rng(10, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t groups = 2 + rng.below(7), per = 1 + rng.below(4);
    const double ratio = (1 + rng.below(8)) / 8.0;
    const Tensor w = random_tensor({groups * per, 1 + rng.below(6)}, rng);
    const SpfPartition p = spf_select_heads(w, Tensor({groups * per}), groups, ratio);
    const std::size_t k = spf_train_group_count(groups, ratio);
    EXPECT_EQ(p.train_heads, brute_force_top(w, groups, k));
    EXPECT_EQ(p.train_heads.size() + p.freeze_heads.size(), groups);
  }
  EXPECT_THROW(spf_select_heads(Tensor({7, 2}), Tensor({7}), 2, 0.5), DimensionError);
}

TEST(Spf, ForwardEqualsDenseLinear) {
  Rng rng(11, 0);
  for (double ratio : {0.25, 0.5, 1.0}) {
    const Tensor x = random_tensor({5, 8}, rng), w = random_tensor({16, 8}, rng);
    const Tensor b = random_tensor({16}, rng);
    const SpfPartition p = spf_select_heads(w, b, 8, ratio);
    EXPECT_LT(rel_err(spf_forward(x, w, b, p), linear(x, w, b)), 1e-12) << ratio;
  }
}

TEST(Spf, FrozenRowsNeverMove) {
  Rng rng(12, 0);
  Tensor w = random_tensor({16, 8}, rng), b = random_tensor({16}, rng);
  w.set_requires_grad(true);
  b.set_requires_grad(true);
  const Tensor w0 = w.detach(), b0 = b.detach();
  const SpfPartition p = spf_select_heads(w, b, 8, 0.25);
  Adam opt({w, b}, AdamOptions{.lr = 0.05});
  for (int step = 0; step < 100; ++step) {
    opt.zero_grad();
    const Tensor x = random_tensor({4, 8}, rng);
    backward(sum(mul(spf_forward(x, w, b, p), spf_forward(x, w, b, p))));
    opt.step();
  }
  for (std::size_t r : p.freeze_rows()) {
    EXPECT_EQ(b.values()[r], b0.values()[r]);
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(w.at(r, j), w0.at(r, j));
  }
  double moved = 0;
  for (std::size_t r : p.train_rows()) moved += std::abs(w.at(r, 0) - w0.at(r, 0));
  EXPECT_GT(moved, 0.0);
}

// ---- parameter counts ----

TEST(ParamCount, LoraClosedForm) {
  const TransformerConfig c;
  const BaseModel base = BaseModel::random(c, 1);
  for (std::size_t rank : {1u, 4u, 8u}) {
    TuningConfig tc;
    tc.lora_rank = rank;
    tc.lora_targets = {LinearKind::Qkv, LinearKind::Fc1};
    tc.train_head = false;
    // qkv: d -> 3d, fc1: d -> ff
    const std::size_t expected = 6 * rank * ((32 + 96) + (32 + 64));
    EXPECT_EQ(count_trainable_params(c, tc), expected);
    EXPECT_EQ(count_trainable_params(Adapters::create(base, tc, 1)), expected);
  }
}

TEST(ParamCount, ClosedFormMatchesBuiltAdapters) {
  const TransformerConfig c;
  const BaseModel base = BaseModel::random(c, 1);
  for (TuningMode mode : {TuningMode::Lora, TuningMode::PtuningV2, TuningMode::Spf}) {
    for (std::size_t first : {0u, 3u, 5u}) {
      TuningConfig tc;
      tc.mode = mode;
      tc.first_layer = first;
      EXPECT_EQ(count_trainable_params(c, tc),
                count_trainable_params(Adapters::create(base, tc, 2)))
          << to_string(mode) << " " << first;
    }
  }
}

TEST(ParamCount, SpfGrowsWithDepthAndRatio) {
  const TransformerConfig c;
  TuningConfig tc;
  tc.mode = TuningMode::Spf;
  std::size_t prev = 0;
  for (std::size_t server_layers : {1u, 2u, 3u}) {
    tc.first_layer = c.n_layers - server_layers;
    const std::size_t n = count_trainable_params(c, tc);
    EXPECT_GT(n, prev);
    prev = n;
  }
  tc.first_layer = 3;
  prev = 0;
  for (double r : {0.125, 0.25, 0.5, 0.75, 1.0}) {
    tc.qkv_ratio = r;
    const std::size_t n = count_trainable_params(c, tc);
    EXPECT_GT(n, prev);
    prev = n;
  }
}

TEST(Adapters, LoadRejectsMismatch) {
  const BaseModel base = BaseModel::random(TransformerConfig{}, 1);
  Adapters a = Adapters::create(base, TuningConfig{}, 1);
  auto named = a.named_parameters();
  named.pop_back();
  EXPECT_THROW(a.load(named), ContractError);
  auto renamed = a.named_parameters();
  renamed[0].first = "bogus";
  EXPECT_THROW(a.load(renamed), ContractError);
}

TEST(Adapters, CloneIsDeep) {
  const BaseModel base = BaseModel::random(TransformerConfig{}, 1);
  const Adapters a = Adapters::create(base, TuningConfig{}, 1);
  Adapters b = a.clone();
  b.head_w.mutable_values()[0] += 1.0;
  EXPECT_NE(a.head_w.values()[0], b.head_w.values()[0]);
}

}  // namespace
}  // namespace slicefl
