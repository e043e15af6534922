// SPDX-License-Identifier: Apache-2.0
#include "clorf/cube.hpp"
#include "clorf/rng.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

namespace {

using namespace clorf;

std::filesystem::path temp_path(const char* name) {
    return std::filesystem::temp_directory_path() / (std::string("clorf_cube_") + name);
}

HsiCube random_cube(int h, int w, int l, std::uint64_t seed) {
    HsiCube c(h, w, l);
    SplitMix64 rng(seed);
    for (double& v : c.data) v = rng.uniform(-1.0, 2.0);
    return c;
}

TEST(Cube, UnfoldSingleElement) {
    HsiCube c(1, 1, 1);
    c.data[0] = 3.5;
    const Eigen::MatrixXd m = unfold_spectral(c);
    ASSERT_EQ(m.rows(), 1);
    ASSERT_EQ(m.cols(), 1);
    EXPECT_EQ(m(0, 0), 3.5);
}

TEST(Cube, UnfoldTwoBandLayout) {
    HsiCube c(2, 2, 2);
    c.data = {1, 2, 3, 4, 5, 6, 7, 8};
    const Eigen::MatrixXd m = unfold_spectral(c);
    ASSERT_EQ(m.rows(), 2);
    ASSERT_EQ(m.cols(), 4);
    const Eigen::RowVector4d band0{1, 2, 3, 4}, band1{5, 6, 7, 8};
    EXPECT_MAT_EQ(m.row(0), band0);
    EXPECT_MAT_EQ(m.row(1), band1);
}

TEST(Cube, FoldUnfoldRoundTripRandomShapes) {
    SplitMix64 rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        const int h = 1 + int(rng.next_below(8));
        const int w = 1 + int(rng.next_below(8));
        const int l = 1 + int(rng.next_below(8));
        const HsiCube c = random_cube(h, w, l, rng.next_u64());
        const HsiCube back = fold_spectral(unfold_spectral(c), h, w);
        ASSERT_EQ(back.data, c.data) << "shape " << h << "x" << w << "x" << l;
    }
}

TEST(Grid, SpectralEndpoints) {
    const CoordinateGrid g = make_grid(1, 1, 2);
    ASSERT_EQ(g.spectral.size(), 2);
    EXPECT_EQ(g.spectral(0), -1.0);
    EXPECT_EQ(g.spectral(1), 1.0);
}

TEST(Grid, DegenerateAxisIsZero) {
    const CoordinateGrid g = make_grid(1, 3, 1);
    ASSERT_EQ(g.spectral.size(), 1);
    EXPECT_EQ(g.spectral(0), 0.0);
    EXPECT_EQ(g.spatial(0, 0), 0.0); // height axis of size 1
}

TEST(Grid, ThreeByThreeLattice) {
    const CoordinateGrid g = make_grid(3, 3, 1);
    ASSERT_EQ(g.spatial.rows(), 9);
    EXPECT_EQ(g.spatial(4, 0), 0.0);
    EXPECT_EQ(g.spatial(4, 1), 0.0);
    EXPECT_EQ(g.spatial(0, 0), -1.0);
    EXPECT_EQ(g.spatial(0, 1), -1.0);
    EXPECT_EQ(g.spatial(8, 0), 1.0);
    EXPECT_EQ(g.spatial(8, 1), 1.0);
}

TEST(Grid, MonotoneAndSymmetric) {
    SplitMix64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + int(rng.next_below(30));
        const CoordinateGrid g = make_grid(1, 1, n);
        for (int i = 0; i + 1 < n; ++i) EXPECT_LT(g.spectral(i), g.spectral(i + 1));
        for (int i = 0; i < n; ++i) {
            EXPECT_NEAR(g.spectral(i), -g.spectral(n - 1 - i), 1e-15);
            EXPECT_LE(std::abs(g.spectral(i)), 1.0);
        }
    }
}

TEST(Grid, ZeroDimensionRejected) {
    EXPECT_THROW(make_grid(0, 1, 1), std::invalid_argument);
    EXPECT_THROW(make_grid(1, 1, 0), std::invalid_argument);
}

TEST(CubeIo, RoundTripRandom) {
    const auto path = temp_path("roundtrip.f32c");
    HsiCube c(4, 5, 6);
    SplitMix64 rng(11);
    for (double& v : c.data) v = double(float(rng.uniform(-2.0, 2.0))); // exactly representable in f32
    write_cube(c, path);
    const HsiCube back = read_cube(path);
    EXPECT_EQ(back.height, 4);
    EXPECT_EQ(back.width, 5);
    EXPECT_EQ(back.bands, 6);
    EXPECT_EQ(back.data, c.data);

    // A second write produces identical bytes.
    const auto path2 = temp_path("roundtrip2.f32c");
    write_cube(back, path2);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    EXPECT_EQ(sa, sb);
}

TEST(CubeIo, RoundTripSpecialF32Values) {
    const auto path = temp_path("special.f32c");
    HsiCube c(2, 2, 2);
    const std::uint32_t patterns[8] = {
        0x00000000u, // +0
        0x80000000u, // -0
        0x00000001u, // smallest subnormal
        0x80000001u, // negative subnormal
        0x007FFFFFu, // largest subnormal
        0x00800000u, // smallest normal
        0x3F800000u, // 1.0
        0xBF7FFFFFu, // just below -1
    };
    for (int i = 0; i < 8; ++i) {
        float f;
        std::memcpy(&f, &patterns[i], 4);
        c.data[i] = double(f);
    }
    write_cube(c, path);
    const HsiCube back = read_cube(path);
    for (int i = 0; i < 8; ++i) {
        const float orig = float(c.data[i]);
        const float got = float(back.data[i]);
        std::uint32_t borig, bgot;
        std::memcpy(&borig, &orig, 4);
        std::memcpy(&bgot, &got, 4);
        EXPECT_EQ(borig, bgot) << "pattern " << i;
    }
}

TEST(CubeIo, BadMagic) {
    const auto path = temp_path("badmagic.f32c");
    detail::write_file(path, "XXXXrest-of-file");
    try {
        read_cube(path);
        FAIL() << "expected format_error";
    } catch (const format_error& e) {
        EXPECT_NE(std::string(e.what()).find("bad magic"), std::string::npos);
    }
}

TEST(CubeIo, TruncatedPayload) {
    const auto path = temp_path("trunc.f32c");
    std::string bytes = "F32C";
    detail::put_u32le(bytes, 1);
    detail::put_u32le(bytes, 2);
    detail::put_u32le(bytes, 2);
    detail::put_u32le(bytes, 2);
    for (int i = 0; i < 7; ++i) detail::put_f32le(bytes, 1.0f); // header says 8
    detail::write_file(path, bytes);
    try {
        read_cube(path);
        FAIL() << "expected format_error";
    } catch (const format_error& e) {
        EXPECT_NE(std::string(e.what()).find("truncated payload"), std::string::npos);
    }
}

TEST(CubeIo, DimensionOverflow) {
    const auto path = temp_path("overflow.f32c");
    std::string bytes = "F32C";
    detail::put_u32le(bytes, 1);
    detail::put_u32le(bytes, 0xFFFFFFFFu);
    detail::put_u32le(bytes, 2);
    detail::put_u32le(bytes, 2);
    detail::write_file(path, bytes);
    try {
        read_cube(path);
        FAIL() << "expected format_error";
    } catch (const format_error& e) {
        EXPECT_NE(std::string(e.what()).find("dimension overflow"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("H"), std::string::npos);
    }
}

TEST(CubeIo, ZeroDimensionRejected) {
    const auto path = temp_path("zerodim.f32c");
    std::string bytes = "F32C";
    detail::put_u32le(bytes, 1);
    detail::put_u32le(bytes, 2);
    detail::put_u32le(bytes, 0);
    detail::put_u32le(bytes, 2);
    detail::write_file(path, bytes);
    EXPECT_THROW(read_cube(path), format_error);
}

} // namespace
