// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "clorf/cube.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace clorf {

inline constexpr double kPsnrCapDb = 100.0;

enum class PsnrPeak {
    ReferenceMax, // peak = max of the reference band
    Unit,         // peak = 1.0
};

struct MetricsReport {
    double mpsnr = 0.0;   // dB
    double mssim = 0.0;
    double sam = 0.0;     // degrees
    double ergas = 0.0;
    double ratio_used = 0.0;
};

namespace detail {

inline void require_same_dims(const HsiCube& a, const HsiCube& b, const char* what) {
    if (a.height != b.height || a.width != b.width || a.bands != b.bands)
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

} // namespace detail

// Mean over bands of 10*log10(peak^2/MSE); exact bands contribute the
// 100 dB cap, all-zero reference bands are skipped with a warning.
inline double mpsnr(const HsiCube& pred, const HsiCube& ref, PsnrPeak peak_mode = PsnrPeak::ReferenceMax) {
    detail::require_same_dims(pred, ref, "mpsnr");
    const std::size_t n = ref.pixels();
    double sum = 0.0;
    int counted = 0;
    for (int b = 0; b < ref.bands; ++b) {
        const double* p = pred.plane(b);
        const double* r = ref.plane(b);
        double peak = 1.0;
        if (peak_mode == PsnrPeak::ReferenceMax) {
            peak = 0.0;
            for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, std::abs(r[i]));
            if (peak == 0.0) {
                std::cerr << "mpsnr: skipping all-zero reference band " << b << "\n";
                continue;
            }
        }
        double mse = 0.0;
        for (std::size_t i = 0; i < n; ++i) mse += (p[i] - r[i]) * (p[i] - r[i]);
        mse /= double(n);
        const double psnr = mse == 0.0 ? kPsnrCapDb : std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
        sum += psnr;
        ++counted;
    }
    if (counted == 0) throw std::invalid_argument("mpsnr: every reference band is all-zero");
    return sum / counted;
}

namespace detail {

inline std::vector<double> ssim_window() {
    constexpr int k = 11;
    constexpr double sigma = 1.5;
    std::vector<double> w(k * k);
    double sum = 0.0;
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            const double d2 = (i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0);
            w[std::size_t(i) * k + j] = std::exp(-d2 / (2.0 * sigma * sigma));
            sum += w[std::size_t(i) * k + j];
        }
    for (double& v : w) v /= sum;
    return w;
}

} // namespace detail

// Per-band SSIM with an 11x11 Gaussian window (sigma 1.5), averaged over
// valid window centers, then over bands. Stability constants use the
// per-band reference max as the dynamic range.
inline double mssim(const HsiCube& pred, const HsiCube& ref) {
    detail::require_same_dims(pred, ref, "mssim");
    constexpr int k = 11, rad = 5;
    if (ref.height < k || ref.width < k) throw std::invalid_argument("mssim: image smaller than 11x11 window");
    static const std::vector<double> window = detail::ssim_window();
    const int H = ref.height, W = ref.width;
    double band_sum = 0.0;
    for (int b = 0; b < ref.bands; ++b) {
        const double* p = pred.plane(b);
        const double* r = ref.plane(b);
        double peak = 0.0;
        for (std::size_t i = 0; i < ref.pixels(); ++i) peak = std::max(peak, std::abs(r[i]));
        const double c1 = (0.01 * peak) * (0.01 * peak);
        const double c2 = (0.03 * peak) * (0.03 * peak);
        double acc = 0.0;
        std::int64_t count = 0;
        for (int cy = rad; cy < H - rad; ++cy)
            for (int cx = rad; cx < W - rad; ++cx) {
                double mx = 0, my = 0;
                for (int i = 0; i < k; ++i)
                    for (int j = 0; j < k; ++j) {
                        const std::size_t idx = std::size_t(cy - rad + i) * W + (cx - rad + j);
                        const double w = window[std::size_t(i) * k + j];
                        mx += w * p[idx];
                        my += w * r[idx];
                    }
                double vx = 0, vy = 0, cov = 0;
                for (int i = 0; i < k; ++i)
                    for (int j = 0; j < k; ++j) {
                        const std::size_t idx = std::size_t(cy - rad + i) * W + (cx - rad + j);
                        const double w = window[std::size_t(i) * k + j];
                        vx += w * (p[idx] - mx) * (p[idx] - mx);
                        vy += w * (r[idx] - my) * (r[idx] - my);
                        cov += w * (p[idx] - mx) * (r[idx] - my);
                    }
                acc += ((2 * mx * my + c1) * (2 * cov + c2)) /
                       ((mx * mx + my * my + c1) * (vx + vy + c2));
                ++count;
            }
        band_sum += acc / double(count);
    }
    return band_sum / ref.bands;
}

// Mean per-pixel spectral angle in degrees; pixels where either spectrum has
// near-zero norm are skipped. Uses the half-angle form
// 2*atan2(|p*|r| - r*|p||, |p*|r| + r*|p||), which is exact for identical
// spectra and stable near 0 and pi, where acos(clamped cosine) loses digits.
inline double sam(const HsiCube& pred, const HsiCube& ref) {
    detail::require_same_dims(pred, ref, "sam");
    if (ref.bands < 2) throw std::invalid_argument("sam: needs at least 2 bands");
    const std::size_t n = ref.pixels();
    double acc = 0.0;
    std::int64_t counted = 0;
    for (std::size_t px = 0; px < n; ++px) {
        double np = 0, nr = 0;
        for (int b = 0; b < ref.bands; ++b) {
            const double pv = pred.data[std::size_t(b) * n + px];
            const double rv = ref.data[std::size_t(b) * n + px];
            np += pv * pv;
            nr += rv * rv;
        }
        np = std::sqrt(np);
        nr = std::sqrt(nr);
        if (np < 1e-12 || nr < 1e-12) continue;
        double diff2 = 0, sum2 = 0;
        for (int b = 0; b < ref.bands; ++b) {
            const double pv = pred.data[std::size_t(b) * n + px] * nr;
            const double rv = ref.data[std::size_t(b) * n + px] * np;
            diff2 += (pv - rv) * (pv - rv);
            sum2 += (pv + rv) * (pv + rv);
        }
        acc += 2.0 * std::atan2(std::sqrt(diff2), std::sqrt(sum2));
        ++counted;
    }
    if (counted == 0) throw std::invalid_argument("sam: all pixels degenerate");
    return acc / double(counted) * 180.0 / M_PI;
}

// 100/d * sqrt(mean over bands of (RMSE_l / mean_l)^2).
inline double ergas(const HsiCube& pred, const HsiCube& ref, double ratio) {
    detail::require_same_dims(pred, ref, "ergas");
    if (!(ratio > 0.0)) throw std::invalid_argument("ergas: ratio must be positive");
    const std::size_t n = ref.pixels();
    double acc = 0.0;
    for (int b = 0; b < ref.bands; ++b) {
        const double* p = pred.plane(b);
        const double* r = ref.plane(b);
        double mean = 0.0, mse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mean += r[i];
            mse += (p[i] - r[i]) * (p[i] - r[i]);
        }
        mean /= double(n);
        mse /= double(n);
        if (mean == 0.0) throw std::invalid_argument("ergas: reference band " + std::to_string(b) + " has zero mean");
        acc += mse / (mean * mean);
    }
    return 100.0 / ratio * std::sqrt(acc / ref.bands);
}

inline MetricsReport evaluate(const HsiCube& pred, const HsiCube& ref, double ratio,
                              PsnrPeak peak_mode = PsnrPeak::ReferenceMax) {
    MetricsReport rep;
    rep.mpsnr = mpsnr(pred, ref, peak_mode);
    rep.mssim = mssim(pred, ref);
    rep.sam = sam(pred, ref);
    rep.ergas = ergas(pred, ref, ratio);
    rep.ratio_used = ratio;
    return rep;
}

namespace detail {

// Catmull-Rom kernel, a = -0.5.
inline double cubic_weight(double x) {
    constexpr double a = -0.5;
    x = std::abs(x);
    if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
}

// Sample position mapping with endpoints aligned: target index k of n_t
// lands on source coordinate k*(n_s-1)/(n_t-1); a single-sample axis is the
// center. Out-of-range taps replicate the edge samples.
inline double axis_source_pos(int k, int n_target, int n_source) {
    if (n_target == 1) return (n_source - 1) / 2.0;
    return double(k) * double(n_source - 1) / double(n_target - 1);
}

struct CubicTaps {
    int idx[4];
    double w[4];
};

inline CubicTaps cubic_taps(double pos, int n) {
    CubicTaps t;
    const double base = std::floor(pos);
    const int i = int(base);
    const double frac = pos - base;
    const double offs[4] = {-1.0, 0.0, 1.0, 2.0};
    for (int k = 0; k < 4; ++k) {
        t.idx[k] = std::clamp(i + int(offs[k]), 0, n - 1);
        t.w[k] = cubic_weight(frac - offs[k]);
    }
    return t;
}

} // namespace detail

// Separable Catmull-Rom resampling along width, then height, then the band
// axis. Knot-aligned: resampling to the source dims reproduces it exactly.
inline HsiCube bicubic_resample(const HsiCube& cube, int height, int width, int bands) {
    if (height < 1 || width < 1 || bands < 1) throw std::invalid_argument("bicubic_resample: dims must be >= 1");
    const int H = cube.height, W = cube.width, L = cube.bands;

    // width pass: H x W x L -> H x width x L
    HsiCube pass1(H, width, L);
    for (int b = 0; b < L; ++b)
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < width; ++c) {
                const auto t = detail::cubic_taps(detail::axis_source_pos(c, width, W), W);
                double acc = 0.0;
                for (int k = 0; k < 4; ++k) acc += t.w[k] * cube.at(r, t.idx[k], b);
                pass1.at(r, c, b) = acc;
            }

    // height pass
    HsiCube pass2(height, width, L);
    for (int b = 0; b < L; ++b)
        for (int r = 0; r < height; ++r) {
            const auto t = detail::cubic_taps(detail::axis_source_pos(r, height, H), H);
            for (int c = 0; c < width; ++c) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k) acc += t.w[k] * pass1.at(t.idx[k], c, b);
                pass2.at(r, c, b) = acc;
            }
        }

    // band pass
    if (bands == L) return pass2;
    HsiCube out(height, width, bands);
    for (int b = 0; b < bands; ++b) {
        const auto t = detail::cubic_taps(detail::axis_source_pos(b, bands, L), L);
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < width; ++c) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k) acc += t.w[k] * pass2.at(r, c, t.idx[k]);
                out.at(r, c, b) = acc;
            }
    }
    return out;
}

// CSV value formatting: decimal values as-is, integral values with a
// trailing ".0" so the metric columns always carry a decimal point.
inline std::string format_metric(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    std::string s = os.str();
    if (s.find_first_of(".einf") == std::string::npos) s += ".0";
    return s;
}

// One-line CSV: mpsnr,mssim,sam_deg,ergas,ratio
inline std::string to_csv(const MetricsReport& rep) {
    std::ostringstream os;
    os << format_metric(rep.mpsnr) << ',' << format_metric(rep.mssim) << ',' << format_metric(rep.sam) << ','
       << format_metric(rep.ergas) << ',';
    os.precision(10);
    os << rep.ratio_used;
    return os.str();
}

} // namespace clorf
