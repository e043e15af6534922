// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "clorf/cube.hpp"
#include "clorf/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace clorf {

// Spatial blur kernel B. Taps are nonnegative and sum to 1.
struct PsfKernel {
    int size = 1;                 // odd width
    std::vector<double> taps;     // size*size, row-major

    double tap(int i, int j) const { return taps[std::size_t(i) * size + j]; }
};

inline void validate(const PsfKernel& k) {
    if (k.size < 1 || k.size % 2 == 0) throw std::invalid_argument("PsfKernel: size must be odd and >= 1");
    if (k.taps.size() != std::size_t(k.size) * k.size) throw std::invalid_argument("PsfKernel: tap count mismatch");
    double sum = 0.0;
    for (double t : k.taps) {
        if (t < 0.0) throw std::invalid_argument("PsfKernel: negative tap");
        sum += t;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("PsfKernel: taps must sum to 1");
}

// Decimation operator S: keeps rows/cols offset, offset+ratio, ...
struct DownsampleSpec {
    int ratio = 1;
    int offset = 0;
};

inline int downsampled_extent(int n, const DownsampleSpec& s) {
    return (n - s.offset - 1) / s.ratio + 1;
}

// Spectral response H: rows output bands, cols input bands, row-stochastic.
struct SpectralResponse {
    Eigen::MatrixXd weights; // l x L

    int out_bands() const { return int(weights.rows()); }
    int in_bands() const { return int(weights.cols()); }
};

inline void validate(const SpectralResponse& srf) {
    if (srf.weights.rows() < 1 || srf.weights.cols() < 1) throw std::invalid_argument("SpectralResponse: empty");
    if (srf.weights.rows() > srf.weights.cols()) throw std::invalid_argument("SpectralResponse: l must be <= L");
    if ((srf.weights.array() < 0.0).any()) throw std::invalid_argument("SpectralResponse: negative weight");
    for (Eigen::Index r = 0; r < srf.weights.rows(); ++r)
        if (std::abs(srf.weights.row(r).sum() - 1.0) > 1e-12)
            throw std::invalid_argument("SpectralResponse: row sums must be 1");
}

// Additive Gaussian noise at a target SNR. snr_db = +infinity disables noise.
struct NoiseSpec {
    double snr_db = std::numeric_limits<double>::infinity();
    std::uint64_t seed = 0;
};

// Full degradation model relating the latent HR cube to both observations.
struct DegradationSpec {
    PsfKernel psf;
    DownsampleSpec down;
    SpectralResponse srf;
    NoiseSpec noise_hsi;
    NoiseSpec noise_msi;
};

inline PsfKernel gaussian_psf(int size, double sigma) {
    if (size < 1 || size % 2 == 0) throw std::invalid_argument("gaussian_psf: size must be odd and >= 1");
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_psf: sigma must be positive");
    PsfKernel k;
    k.size = size;
    k.taps.resize(std::size_t(size) * size);
    const double c = (size - 1) / 2.0;
    double sum = 0.0;
    for (int i = 0; i < size; ++i)
        for (int j = 0; j < size; ++j) {
            const double d2 = (i - c) * (i - c) + (j - c) * (j - c);
            const double t = std::exp(-d2 / (2.0 * sigma * sigma));
            k.taps[std::size_t(i) * size + j] = t;
            sum += t;
        }
    for (double& t : k.taps) t /= sum;
    return k;
}

namespace detail {

// Mirror-without-repeat index: -1 -> 1, H -> H-2. Valid for |excursion| <= n-1.
inline int reflect_index(int p, int n) {
    if (p < 0) return -p;
    if (p >= n) return 2 * (n - 1) - p;
    return p;
}

// out(r,c) = sum_{dr,dc} tap(dr,dc) * in(reflect(r+dr-rad), reflect(c+dc-rad))
inline void blur_plane(const double* in, double* out, int H, int W, const PsfKernel& psf) {
    const int rad = (psf.size - 1) / 2;
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            double acc = 0.0;
            for (int dr = 0; dr < psf.size; ++dr) {
                const int rr = reflect_index(r + dr - rad, H);
                for (int dc = 0; dc < psf.size; ++dc) {
                    const int cc = reflect_index(c + dc - rad, W);
                    acc += psf.tap(dr, dc) * in[std::size_t(rr) * W + cc];
                }
            }
            out[std::size_t(r) * W + c] = acc;
        }
}

// Exact transpose of blur_plane: scatters each output cotangent back through
// the same (tap, mirrored index) pairs. Accumulates into g_in.
inline void blur_plane_adjoint(const double* g_out, double* g_in, int H, int W, const PsfKernel& psf) {
    const int rad = (psf.size - 1) / 2;
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            const double g = g_out[std::size_t(r) * W + c];
            for (int dr = 0; dr < psf.size; ++dr) {
                const int rr = reflect_index(r + dr - rad, H);
                for (int dc = 0; dc < psf.size; ++dc) {
                    const int cc = reflect_index(c + dc - rad, W);
                    g_in[std::size_t(rr) * W + cc] += psf.tap(dr, dc) * g;
                }
            }
        }
}

inline void decimate_plane(const double* in, double* out, int H, int W, const DownsampleSpec& s) {
    const int h = downsampled_extent(H, s), w = downsampled_extent(W, s);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            out[std::size_t(r) * w + c] = in[std::size_t(s.offset + r * s.ratio) * W + (s.offset + c * s.ratio)];
}

inline void decimate_plane_adjoint(const double* g_out, double* g_in, int H, int W, const DownsampleSpec& s) {
    const int h = downsampled_extent(H, s), w = downsampled_extent(W, s);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            g_in[std::size_t(s.offset + r * s.ratio) * W + (s.offset + c * s.ratio)] += g_out[std::size_t(r) * w + c];
}

} // namespace detail

inline HsiCube blur(const HsiCube& cube, const PsfKernel& psf) {
    validate(psf);
    const int m = std::min(cube.height, cube.width);
    if (psf.size > 2 * m - 1) throw std::invalid_argument("blur: kernel larger than 2*min(H,W)-1");
    HsiCube out(cube.height, cube.width, cube.bands);
    for (int b = 0; b < cube.bands; ++b)
        detail::blur_plane(cube.plane(b), out.plane(b), cube.height, cube.width, psf);
    return out;
}

inline HsiCube downsample(const HsiCube& cube, const DownsampleSpec& spec) {
    if (spec.ratio < 1) throw std::invalid_argument("downsample: ratio must be >= 1");
    if (spec.offset < 0 || spec.offset >= spec.ratio) throw std::invalid_argument("downsample: offset must be in [0, ratio)");
    const int h = downsampled_extent(cube.height, spec);
    const int w = downsampled_extent(cube.width, spec);
    if (h < 1 || w < 1) throw std::invalid_argument("downsample: output dims must be >= 1");
    HsiCube out(h, w, cube.bands);
    for (int b = 0; b < cube.bands; ++b)
        detail::decimate_plane(cube.plane(b), out.plane(b), cube.height, cube.width, spec);
    return out;
}

inline HsiCube apply_srf(const HsiCube& cube, const SpectralResponse& srf) {
    validate(srf);
    if (srf.in_bands() != cube.bands) throw std::invalid_argument("apply_srf: srf columns must match cube bands");
    HsiCube out(cube.height, cube.width, srf.out_bands());
    const std::size_t N = cube.pixels();
    for (int j = 0; j < srf.out_bands(); ++j) {
        double* dst = out.plane(j);
        for (int l = 0; l < cube.bands; ++l) {
            const double w = srf.weights(j, l);
            const double* src = cube.plane(l);
            for (std::size_t p = 0; p < N; ++p) dst[p] += w * src[p];
        }
    }
    return out;
}

// Synthetic row-stochastic SRF: row j is a Gaussian bump over the input band
// axis centered at (j+0.5)*L/l - 0.5 with std L/(2l).
inline SpectralResponse gaussian_srf(int out_bands, int in_bands) {
    if (out_bands < 1 || in_bands < 1) throw std::invalid_argument("gaussian_srf: band counts must be >= 1");
    if (out_bands > in_bands) throw std::invalid_argument("gaussian_srf: l must be <= L");
    SpectralResponse srf;
    srf.weights.resize(out_bands, in_bands);
    const double sigma = double(in_bands) / (2.0 * out_bands);
    for (int j = 0; j < out_bands; ++j) {
        const double center = (j + 0.5) * double(in_bands) / out_bands - 0.5;
        for (int l = 0; l < in_bands; ++l) {
            const double d = (l - center) / sigma;
            srf.weights(j, l) = std::max(0.0, std::exp(-0.5 * d * d));
        }
        srf.weights.row(j) /= srf.weights.row(j).sum();
    }
    return srf;
}

// sigma solving mean(x^2)/sigma^2 = 10^(snr/10), over the whole cube.
inline double noise_sigma(const HsiCube& cube, double snr_db) {
    double mean_sq = 0.0;
    for (double v : cube.data) mean_sq += v * v;
    mean_sq /= double(cube.size());
    if (mean_sq == 0.0) throw std::invalid_argument("add_noise: all-zero cube, SNR undefined");
    return std::sqrt(mean_sq * std::pow(10.0, -snr_db / 10.0));
}

inline HsiCube add_noise(const HsiCube& cube, const NoiseSpec& noise) {
    if (cube.size() == 0) throw std::invalid_argument("add_noise: empty cube");
    if (std::isinf(noise.snr_db) && noise.snr_db > 0) return cube;
    if (!std::isfinite(noise.snr_db)) throw std::invalid_argument("add_noise: snr_db must be finite or +inf");
    const double sigma = noise_sigma(cube, noise.snr_db);
    HsiCube out = cube;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] += sigma * counter_normal(noise.seed, i);
    return out;
}

// SRF exchange format: one CSV row per output band, comma-separated weights.
inline void write_srf_csv(const SpectralResponse& srf, const std::filesystem::path& path) {
    validate(srf);
    std::ostringstream os;
    os.precision(17);
    for (Eigen::Index r = 0; r < srf.weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < srf.weights.cols(); ++c) {
            if (c) os << ',';
            os << srf.weights(r, c);
        }
        os << '\n';
    }
    detail::write_file(path, os.str());
}

inline SpectralResponse read_srf_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw format_error("cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            try {
                row.push_back(std::stod(field));
            } catch (const std::exception&) {
                throw format_error(path.string() + ": bad SRF value '" + field + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw format_error(path.string() + ": ragged SRF rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw format_error(path.string() + ": empty SRF file");
    SpectralResponse srf;
    srf.weights.resize(Eigen::Index(rows.size()), Eigen::Index(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) srf.weights(Eigen::Index(r), Eigen::Index(c)) = rows[r][c];
    validate(srf);
    return srf;
}

// Eq-style forward simulation: LR-HSI = noise(decimate(blur(gt))),
// HR-MSI = noise(srf(gt)). The SRF sees the un-blurred ground truth.
inline std::pair<HsiCube, HsiCube> simulate(const HsiCube& gt, const PsfKernel& psf, const DownsampleSpec& down,
                                            const SpectralResponse& srf, const NoiseSpec& noise_hsi,
                                            const NoiseSpec& noise_msi) {
    HsiCube lr_hsi = add_noise(downsample(blur(gt, psf), down), noise_hsi);
    HsiCube hr_msi = add_noise(apply_srf(gt, srf), noise_msi);
    return {std::move(lr_hsi), std::move(hr_msi)};
}

} // namespace clorf
