// SPDX-License-Identifier: Apache-2.0
#include "clorf/metrics.hpp"
#include "clorf/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

using namespace clorf;

HsiCube random_cube(int h, int w, int l, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    HsiCube c(h, w, l);
    SplitMix64 rng(seed);
    for (double& v : c.data) v = rng.uniform(lo, hi);
    return c;
}

TEST(Mpsnr, IdentityHitsCap) {
    const HsiCube c = random_cube(4, 4, 3, 1);
    EXPECT_EQ(mpsnr(c, c), 100.0);
}

TEST(Mpsnr, TwoPixelDirectFormula) {
    // ref band [0, 1], pred [0, 0.9]: MSE = 0.005, peak = 1 -> 23.0103 dB.
    HsiCube ref(1, 2, 1), pred(1, 2, 1);
    ref.data = {0.0, 1.0};
    pred.data = {0.0, 0.9};
    EXPECT_NEAR(mpsnr(pred, ref), 10.0 * std::log10(1.0 / 0.005), 1e-12);
    EXPECT_NEAR(mpsnr(pred, ref), 23.010299957, 1e-8);
}

TEST(Mpsnr, ScaleInvariantWithReferencePeak) {
    const HsiCube ref = random_cube(5, 5, 4, 2);
    HsiCube pred = random_cube(5, 5, 4, 3);
    HsiCube ref2 = ref, pred2 = pred;
    for (double& v : ref2.data) v *= 2.0;
    for (double& v : pred2.data) v *= 2.0;
    EXPECT_NEAR(mpsnr(pred, ref), mpsnr(pred2, ref2), 1e-12);
}

TEST(Mpsnr, UnitPeakFlag) {
    HsiCube ref(1, 2, 1), pred(1, 2, 1);
    ref.data = {0.0, 0.5};
    pred.data = {0.0, 0.4};
    // MSE = 0.005; unit peak -> 10*log10(1/0.005); ref peak 0.5 -> 10*log10(0.25/0.005).
    EXPECT_NEAR(mpsnr(pred, ref, PsnrPeak::Unit), 10.0 * std::log10(1.0 / 0.005), 1e-12);
    EXPECT_NEAR(mpsnr(pred, ref, PsnrPeak::ReferenceMax), 10.0 * std::log10(0.25 / 0.005), 1e-12);
}

TEST(Mpsnr, DimMismatchRejected) {
    EXPECT_THROW(mpsnr(random_cube(2, 2, 2, 4), random_cube(2, 2, 3, 5)), std::invalid_argument);
}

TEST(Mssim, IdentityIsOne) {
    const HsiCube c = random_cube(12, 13, 2, 6);
    EXPECT_DOUBLE_EQ(mssim(c, c), 1.0);
}

TEST(Mssim, ConstantShiftClosedForm) {
    // Constant band v vs v + 0.1: variances vanish, SSIM reduces to the
    // luminance term (2*mx*my + C1) / (mx^2 + my^2 + C1).
    const double v = 0.5, shift = 0.1;
    HsiCube ref(11, 11, 1), pred(11, 11, 1);
    for (double& x : ref.data) x = v;
    for (double& x : pred.data) x = v + shift;
    const double c1 = (0.01 * v) * (0.01 * v);
    const double mx = v + shift, my = v;
    const double want = (2 * mx * my + c1) / (mx * mx + my * my + c1);
    EXPECT_NEAR(mssim(pred, ref), want, 1e-12);
    EXPECT_LT(mssim(pred, ref), 1.0);
}

TEST(Mssim, NearSymmetricForEqualVarianceInputs) {
    // Swapping pred/ref only swaps which band supplies the peak; with both
    // cubes sharing the same max the value is identical.
    HsiCube a = random_cube(16, 16, 2, 7);
    HsiCube b = random_cube(16, 16, 2, 8);
    a.data[0] = 1.0;
    b.data[0] = 1.0; // pin the per-band peaks to the same value
    a.data[16 * 16] = 1.0;
    b.data[16 * 16] = 1.0;
    EXPECT_NEAR(mssim(a, b), mssim(b, a), 1e-12);
}

TEST(Mssim, TooSmallRejected) {
    const HsiCube c = random_cube(8, 12, 1, 9);
    EXPECT_THROW(mssim(c, c), std::invalid_argument);
}

TEST(Sam, IdentityIsZero) {
    const HsiCube c = random_cube(4, 4, 5, 10, 0.1, 1.0);
    EXPECT_NEAR(sam(c, c), 0.0, 1e-6);
}

TEST(Sam, ScaleInvariance) {
    const HsiCube ref = random_cube(4, 4, 5, 11, 0.1, 1.0);
    HsiCube pred = ref;
    for (double& v : pred.data) v *= 3.0;
    EXPECT_NEAR(sam(pred, ref), 0.0, 1e-6);
}

TEST(Sam, OrthogonalSpectraAreNinetyDegrees) {
    HsiCube ref(2, 2, 2), pred(2, 2, 2);
    for (std::size_t p = 0; p < 4; ++p) {
        ref.data[p] = 1.0;      // band 0
        ref.data[4 + p] = 0.0;  // band 1
        pred.data[p] = 0.0;
        pred.data[4 + p] = 1.0;
    }
    EXPECT_NEAR(sam(pred, ref), 90.0, 1e-12);
}

TEST(Sam, SymmetricInArguments) {
    const HsiCube a = random_cube(5, 5, 4, 12, 0.1, 1.0);
    const HsiCube b = random_cube(5, 5, 4, 13, 0.1, 1.0);
    EXPECT_DOUBLE_EQ(sam(a, b), sam(b, a));
}

TEST(Sam, DegeneratePixelsSkipped) {
    HsiCube ref(1, 2, 2), pred(1, 2, 2);
    // Pixel 0 carries signal, pixel 1 is zero in the reference.
    ref.data = {1.0, 0.0, 0.0, 0.0};
    pred.data = {1.0, 1.0, 0.0, 1.0};
    EXPECT_NEAR(sam(pred, ref), 0.0, 1e-12); // only pixel 0 counted, identical direction
}

TEST(Ergas, IdentityIsZero) {
    const HsiCube c = random_cube(4, 4, 3, 14, 0.2, 1.0);
    EXPECT_EQ(ergas(c, c, 4.0), 0.0);
}

TEST(Ergas, SingleBandDirectFormula) {
    // mu = 0.5, RMSE = 0.05, d = 4 -> 100/4 * 0.1 = 2.5.
    HsiCube ref(1, 2, 1), pred(1, 2, 1);
    ref.data = {0.5, 0.5};
    pred.data = {0.55, 0.45};
    EXPECT_NEAR(ergas(pred, ref, 4.0), 2.5, 1e-12);
}

TEST(Ergas, InverseRatioScaling) {
    const HsiCube ref = random_cube(4, 4, 3, 15, 0.2, 1.0);
    const HsiCube pred = random_cube(4, 4, 3, 16, 0.2, 1.0);
    EXPECT_NEAR(ergas(pred, ref, 2.0), 2.0 * ergas(pred, ref, 4.0), 1e-12);
}

TEST(Ergas, ZeroMeanBandRejected) {
    HsiCube ref(2, 2, 1), pred(2, 2, 1);
    pred.data = {1, 1, 1, 1};
    EXPECT_THROW(ergas(pred, ref, 4.0), std::invalid_argument);
}

TEST(Metrics, SpatialPermutationEquivariance) {
    const HsiCube a = random_cube(3, 3, 4, 17, 0.1, 1.0);
    const HsiCube b = random_cube(3, 3, 4, 18, 0.1, 1.0);
    // One fixed spatial permutation applied to both cubes.
    const int perm[9] = {4, 2, 7, 0, 8, 1, 3, 6, 5};
    HsiCube ap(3, 3, 4), bp(3, 3, 4);
    for (int band = 0; band < 4; ++band)
        for (int p = 0; p < 9; ++p) {
            ap.data[band * 9 + p] = a.data[band * 9 + perm[p]];
            bp.data[band * 9 + p] = b.data[band * 9 + perm[p]];
        }
    EXPECT_DOUBLE_EQ(mpsnr(a, b), mpsnr(ap, bp));
    EXPECT_DOUBLE_EQ(ergas(a, b, 4.0), ergas(ap, bp, 4.0));
    EXPECT_NEAR(sam(a, b), sam(ap, bp), 1e-12);
}

TEST(Bicubic, IdentityAtSourceDims) {
    const HsiCube c = random_cube(5, 6, 4, 19);
    const HsiCube out = bicubic_resample(c, 5, 6, 4);
    EXPECT_EQ(out.data, c.data);
}

TEST(Bicubic, ConstantStaysConstant) {
    HsiCube c(4, 4, 2);
    for (double& v : c.data) v = 0.37;
    const HsiCube out = bicubic_resample(c, 9, 11, 5);
    for (double v : out.data) EXPECT_NEAR(v, 0.37, 1e-12);
}

TEST(Bicubic, LinearRampExactAwayFromEdges) {
    // Catmull-Rom reproduces linear functions wherever all four taps are
    // genuine samples; edge replication bends the outermost intervals.
    HsiCube c(1, 8, 1);
    for (int i = 0; i < 8; ++i) c.data[i] = double(i);
    const HsiCube out = bicubic_resample(c, 1, 15, 1);
    for (int k = 0; k < 15; ++k) {
        const double pos = k * 7.0 / 14.0; // source coordinate
        if (pos >= 1.0 && pos <= 6.0)      // all taps in range
            EXPECT_NEAR(out.data[k], pos, 1e-12) << "k=" << k;
    }
}

TEST(Bicubic, WeightsFormPartitionOfUnity) {
    for (double frac : {0.0, 0.1, 0.25, 0.5, 0.75, 0.99}) {
        const double sum = detail::cubic_weight(1.0 + frac) + detail::cubic_weight(frac) +
                           detail::cubic_weight(1.0 - frac) + detail::cubic_weight(2.0 - frac);
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Bicubic, SingleAxisBroadcasts) {
    HsiCube c(1, 1, 3);
    c.data = {0.1, 0.5, 0.9};
    const HsiCube out = bicubic_resample(c, 4, 4, 3);
    for (int b = 0; b < 3; ++b)
        for (int r = 0; r < 4; ++r)
            for (int col = 0; col < 4; ++col) EXPECT_EQ(out.at(r, col, b), c.data[b]);
}

TEST(MetricsCsv, IdentityLine) {
    const HsiCube c = random_cube(12, 12, 3, 20, 0.1, 1.0);
    const MetricsReport rep = evaluate(c, c, 4.0);
    EXPECT_EQ(to_csv(rep), "100.0,1.0,0.0,0.0,4");
}

} // namespace
