// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "clorf/cube.hpp"
#include "clorf/degrade.hpp"
#include "clorf/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <stdexcept>

namespace clorf {

namespace detail {

// Box PSF no wider than the reflect-padding limit allows.
inline PsfKernel box_psf_for(int H, int W, int preferred = 5) {
    int size = std::min(preferred, 2 * std::min(H, W) - 1);
    if (size % 2 == 0) --size;
    PsfKernel k;
    k.size = size;
    k.taps.assign(std::size_t(size) * size, 1.0 / (size * size));
    return k;
}

} // namespace detail

// Exactly rank-K ground-truth unfolding: spectral factor columns are
// Gaussian bumps over the band axis, coefficient rows are uniform noise
// fields smoothed by a 5x5 box filter applied twice. Not normalized.
inline Eigen::MatrixXd gt_product_matrix(int height, int width, int bands, int rank, std::uint64_t seed) {
    if (height < 1 || width < 1 || bands < 1) throw std::invalid_argument("make_gt: dims must be >= 1");
    if (rank < 1 || Eigen::Index(rank) > std::min<Eigen::Index>(bands, Eigen::Index(height) * width))
        throw std::invalid_argument("make_gt: rank must be in [1, min(bands, H*W)]");

    const Eigen::MatrixXd e_gt = gaussian_srf(rank, bands).weights.transpose(); // L x K bumps

    const Eigen::Index n = Eigen::Index(height) * width;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> a_gt(rank, n);
    SplitMix64 rng(seed);
    const PsfKernel box = detail::box_psf_for(height, width);
    std::vector<double> tmp(static_cast<std::size_t>(n));
    for (int k = 0; k < rank; ++k) {
        for (Eigen::Index j = 0; j < n; ++j) a_gt(k, j) = rng.next_double();
        detail::blur_plane(a_gt.row(k).data(), tmp.data(), height, width, box);
        detail::blur_plane(tmp.data(), a_gt.row(k).data(), height, width, box);
    }
    return e_gt * a_gt;
}

// Synthetic ground truth: the rank-K product min-max normalized to [0, 1].
inline HsiCube make_gt(int height, int width, int bands, int rank, std::uint64_t seed) {
    Eigen::MatrixXd m = gt_product_matrix(height, width, bands, rank, seed);
    const double lo = m.minCoeff(), hi = m.maxCoeff();
    if (hi > lo)
        m = (m.array() - lo) / (hi - lo);
    else
        m.setZero();
    return fold_spectral(m, height, width);
}

} // namespace clorf
