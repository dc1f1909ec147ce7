// Copyright 2026 The slicefl Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "slicefl/errors.hpp"
#include "slicefl/ops.hpp"
#include "slicefl/otp.hpp"
#include "test_util.hpp"

namespace slicefl {
namespace {

using testing::random_tensor;
using testing::rel_err;

MaskDistribution uniform(double scale) {
  return {MaskDistribution::Kind::Uniform, scale, false};
}

TEST(MaskPad, UnmaskInvertsMask) {
  Rng rng(1, 0);
  const Tensor e = random_tensor({4, 6}, rng);
  MaskPad pad = gen_mask({4, 6}, rng, uniform(10.0), 7, "test");
  const MaskedTensor m = mask(e, pad);
  EXPECT_EQ(m.pad_id, 7u);
  EXPECT_TRUE(pad.consumed());
  EXPECT_LT(rel_err(unmask(m, pad), e), 1e-14);
  EXPECT_GT(rel_err(m.payload, e), 1.0);
}

TEST(MaskPad, SecondUseIsRejectedAndLedgered) {
  Rng rng(2, 0);
  PadLedger ledger;
  MaskPad pad = gen_mask({2, 2}, rng, uniform(1.0), 1);
  ledger.record_issue(pad);
  mask(Tensor({2, 2}), pad, &ledger);
  EXPECT_THROW(mask(Tensor({2, 2}), pad, &ledger), MaskReuseError);
  EXPECT_EQ(ledger.issued(), 1u);
  EXPECT_EQ(ledger.used(), 1u);
  EXPECT_EQ(ledger.reuse_count(), 0u);
  EXPECT_EQ(ledger.rejected_reuse_attempts(), 1u);
}

TEST(MaskPad, ShapeMismatchLeavesPadUnconsumed) {
  Rng rng(3, 0);
  MaskPad pad = gen_mask({2, 3}, rng, uniform(1.0));
  EXPECT_THROW(mask(Tensor({3, 2}), pad), DimensionError);
  EXPECT_FALSE(pad.consumed());
}

TEST(PadLedger, CountsDirectReuse) {
  PadLedger ledger;
  ledger.record_use(5);
  ledger.record_use(5);
  ledger.record_use(6);
  EXPECT_EQ(ledger.used(), 2u);
  EXPECT_EQ(ledger.reuse_count(), 1u);
}

TEST(GenMask, DistributionMoments) {
  Rng rng(4, 0);
  const MaskPad u = gen_mask({200, 100}, rng, uniform(2.0));
  double s = 0, s2 = 0, mx = 0;
  for (double v : u.values().values()) {
    s += v;
    s2 += v * v;
    mx = std::max(mx, std::abs(v));
  }
  EXPECT_LE(mx, 2.0);
  EXPECT_NEAR(s / 20000, 0.0, 0.05);
  EXPECT_NEAR(s2 / 20000, 4.0 / 3.0, 0.05);

  const MaskPad g = gen_mask({200, 100}, rng, {MaskDistribution::Kind::Gaussian, 3.0, false});
  s2 = 0;
  for (double v : g.values().values()) s2 += v * v;
  EXPECT_NEAR(std::sqrt(s2 / 20000), 3.0, 0.1);
}

TEST(MaskDistribution, RelativeScaleFollowsMagnitude) {
  const MaskDistribution d{MaskDistribution::Kind::Uniform, 2.0, true};
  EXPECT_DOUBLE_EQ(d.scaled_for(5.0).scale, 10.0);
  EXPECT_FALSE(d.scaled_for(5.0).relative);
  EXPECT_DOUBLE_EQ(uniform(2.0).scaled_for(5.0).scale, 2.0);
}

// Linear h(x) = x W^T + b evaluated on the masked input, corrected by h(r).
TEST(UnmaskAffine, RecoversLinearOutput) {
  Rng rng(5, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_tensor({3, 8}, rng), w = random_tensor({5, 8}, rng);
    const Tensor b = random_tensor({5}, rng);
    MaskPad pad = gen_mask({3, 8}, rng, uniform(50.0));
    const MaskedTensor m = mask(x, pad);
    const Tensor got = unmask_affine(linear(m.payload, w, b), matmul_nt(pad.values(), w));
    EXPECT_LT(rel_err(got, linear(x, w, b)), 1e-12);
  }
}

TEST(UnmaskProduct, ExpandedIdentityMatchesDirectProduct) {
  Rng rng(6, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.below(6), d = 1 + rng.below(6), n = 1 + rng.below(6);
    const Tensor q = random_tensor({m, d}, rng), k = random_tensor({d, n}, rng);
    MaskPad rq = gen_mask({m, d}, rng, uniform(20.0));
    MaskPad rk = gen_mask({d, n}, rng, uniform(20.0));
    const MaskedTensor qe = mask(q, rq), ke = mask(k, rk);
    // Independent expansion: (Q+Rq)(K+Rk) - Q Rk - Rq K - Rq Rk.
    const Tensor prod = matmul(qe.payload, ke.payload);
    const Tensor oracle = sub(sub(sub(prod, matmul(q, rk.values())), matmul(rq.values(), k)),
                              matmul(rq.values(), rk.values()));
    const Tensor got = unmask_matmul(prod, qe, ke, rq, rk);
    EXPECT_LT(rel_err(got, matmul(q, k)), 1e-11);
    EXPECT_LT(rel_err(oracle, matmul(q, k)), 1e-11);
  }
}

TEST(UnmaskProduct, RejectsMismatchedShapes) {
  EXPECT_THROW(unmask_product(Tensor({2, 2}), Tensor({2, 3}), Tensor({3, 2}), Tensor({2, 2}),
                              Tensor({3, 2})),
               DimensionError);
}

}  // namespace
}  // namespace slicefl
