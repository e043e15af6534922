// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace clorf {

// Thrown on malformed cube/checkpoint files; the message names the bad field.
class format_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Dense hyperspectral cube, band-sequential: band plane after band plane,
// each plane row-major. Value at (row, col, band) = data[band*H*W + row*W + col].
struct HsiCube {
    int height = 0;
    int width = 0;
    int bands = 0;
    std::vector<double> data;
    std::array<double, 2> value_range{0.0, 1.0}; // declared nominal range

    HsiCube() = default;
    HsiCube(int h, int w, int l) : height(h), width(w), bands(l) {
        if (h < 1 || w < 1 || l < 1) throw std::invalid_argument("HsiCube: dimensions must be >= 1");
        data.assign(std::size_t(h) * w * l, 0.0);
    }

    std::size_t pixels() const { return std::size_t(height) * width; }
    std::size_t size() const { return pixels() * bands; }

    double& at(int r, int c, int b) { return data[std::size_t(b) * pixels() + std::size_t(r) * width + c]; }
    double at(int r, int c, int b) const { return data[std::size_t(b) * pixels() + std::size_t(r) * width + c]; }

    double* plane(int b) { return data.data() + std::size_t(b) * pixels(); }
    const double* plane(int b) const { return data.data() + std::size_t(b) * pixels(); }
};

inline void validate(const HsiCube& c) {
    if (c.height < 1 || c.width < 1 || c.bands < 1) throw std::invalid_argument("HsiCube: dimensions must be >= 1");
    if (c.data.size() != c.size()) throw std::invalid_argument("HsiCube: data length != H*W*L");
    for (double v : c.data)
        if (!std::isfinite(v)) throw std::invalid_argument("HsiCube: non-finite value");
}

// Normalized coordinates feeding the coordinate networks. Spatial rows
// enumerate the H x W lattice row-major, matching cube plane order.
struct CoordinateGrid {
    Eigen::Matrix<double, Eigen::Dynamic, 2> spatial; // N x 2, coords in [-1,1]
    Eigen::VectorXd spectral;                         // L, coords in [-1,1]
    std::array<int, 3> source_dims{0, 0, 0};          // (H, W, L)
};

// Uniform per-axis coordinate: -1 + 2k/(n-1) for n >= 2, exactly 0 for n == 1.
inline double axis_coord(int k, int n) {
    return n == 1 ? 0.0 : -1.0 + 2.0 * double(k) / double(n - 1);
}

inline CoordinateGrid make_grid(int H, int W, int L) {
    if (H < 1 || W < 1 || L < 1) throw std::invalid_argument("make_grid: dimensions must be >= 1");
    CoordinateGrid g;
    g.source_dims = {H, W, L};
    g.spatial.resize(std::int64_t(H) * W, 2);
    for (int r = 0; r < H; ++r) {
        const double rc = axis_coord(r, H);
        for (int c = 0; c < W; ++c) {
            const std::int64_t j = std::int64_t(r) * W + c;
            g.spatial(j, 0) = rc;
            g.spatial(j, 1) = axis_coord(c, W);
        }
    }
    g.spectral.resize(L);
    for (int b = 0; b < L; ++b) g.spectral(b) = axis_coord(b, L);
    return g;
}

// L x N matrix, row l = band plane l flattened row-major (N = H*W).
inline Eigen::MatrixXd unfold_spectral(const HsiCube& cube) {
    const Eigen::Index L = cube.bands, N = Eigen::Index(cube.pixels());
    Eigen::MatrixXd m(L, N);
    for (Eigen::Index b = 0; b < L; ++b)
        m.row(b) = Eigen::Map<const Eigen::RowVectorXd>(cube.plane(int(b)), N);
    return m;
}

inline HsiCube fold_spectral(const Eigen::MatrixXd& m, int H, int W) {
    if (m.cols() != Eigen::Index(H) * W) throw std::invalid_argument("fold_spectral: cols != H*W");
    HsiCube cube(H, W, int(m.rows()));
    for (Eigen::Index b = 0; b < m.rows(); ++b)
        Eigen::Map<Eigen::RowVectorXd>(cube.plane(int(b)), m.cols()) = m.row(b);
    return cube;
}

namespace detail {

inline void put_u32le(std::string& out, std::uint32_t v) {
    out.push_back(char(v & 0xFF));
    out.push_back(char((v >> 8) & 0xFF));
    out.push_back(char((v >> 16) & 0xFF));
    out.push_back(char((v >> 24) & 0xFF));
}

inline void put_f32le(std::string& out, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32le(out, v);
}

inline void put_u64le(std::string& out, std::uint64_t v) {
    put_u32le(out, std::uint32_t(v & 0xFFFFFFFFULL));
    put_u32le(out, std::uint32_t(v >> 32));
}

inline void put_f64le(std::string& out, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64le(out, v);
}

// Cursor over a fully-read file image; throws format_error on underrun.
class ByteReader {
public:
    ByteReader(const std::string& bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

    void need(std::size_t n, const char* field) {
        if (pos_ + n > bytes_.size())
            throw format_error(what_ + ": truncated payload reading " + field);
    }

    std::uint32_t u32(const char* field) {
        need(4, field);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | std::uint8_t(bytes_[pos_ + i]);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64(const char* field) {
        const std::uint64_t lo = u32(field);
        const std::uint64_t hi = u32(field);
        return lo | (hi << 32);
    }

    std::uint8_t u8(const char* field) {
        need(1, field);
        return std::uint8_t(bytes_[pos_++]);
    }

    float f32(const char* field) {
        const std::uint32_t v = u32(field);
        float f;
        std::memcpy(&f, &v, 4);
        return f;
    }

    double f64(const char* field) {
        const std::uint64_t v = u64(field);
        double d;
        std::memcpy(&d, &v, 8);
        return d;
    }

    void expect_magic(const char* magic) {
        need(4, "magic");
        if (std::memcmp(bytes_.data() + pos_, magic, 4) != 0)
            throw format_error(what_ + ": bad magic");
        pos_ += 4;
    }

    bool at_end() const { return pos_ == bytes_.size(); }

private:
    const std::string& bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

// Atomic write: stage to <path>.tmp, rename on success.
inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw format_error("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), std::streamsize(bytes.size()));
        if (!out) throw format_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

} // namespace detail

// F32C cube file (little-endian): magic "F32C", version u32 = 1, H u32,
// W u32, L u32, then H*W*L IEEE-754 binary32 values in band-sequential
// row-major-per-plane order. No padding, no checksum.
inline constexpr std::uint32_t kCubeFormatVersion = 1;

inline void write_cube(const HsiCube& cube, const std::filesystem::path& path) {
    validate(cube);
    std::string out;
    out.reserve(20 + cube.size() * 4);
    out += "F32C";
    detail::put_u32le(out, kCubeFormatVersion);
    detail::put_u32le(out, std::uint32_t(cube.height));
    detail::put_u32le(out, std::uint32_t(cube.width));
    detail::put_u32le(out, std::uint32_t(cube.bands));
    for (double v : cube.data) detail::put_f32le(out, float(v));
    detail::write_file(path, out);
}

inline HsiCube read_cube(const std::filesystem::path& path) {
    const std::string bytes = detail::read_file(path);
    detail::ByteReader r(bytes, path.string());
    r.expect_magic("F32C");
    const std::uint32_t version = r.u32("version");
    if (version != kCubeFormatVersion)
        throw format_error(path.string() + ": unsupported version " + std::to_string(version));
    const std::uint64_t H = r.u32("H"), W = r.u32("W"), L = r.u32("L");
    if (H == 0) throw format_error(path.string() + ": dimension H is zero");
    if (W == 0) throw format_error(path.string() + ": dimension W is zero");
    if (L == 0) throw format_error(path.string() + ": dimension L is zero");
    constexpr std::uint64_t kMaxDim = 1u << 24;
    if (H > kMaxDim) throw format_error(path.string() + ": dimension overflow in H");
    if (W > kMaxDim) throw format_error(path.string() + ": dimension overflow in W");
    if (L > kMaxDim) throw format_error(path.string() + ": dimension overflow in L");
    const std::uint64_t count = H * W * L;
    if (count > std::numeric_limits<std::size_t>::max() / 8)
        throw format_error(path.string() + ": dimension overflow in H*W*L");
    HsiCube cube{int(H), int(W), int(L)};
    r.need(count * 4, "payload");
    for (std::uint64_t i = 0; i < count; ++i) cube.data[i] = double(r.f32("payload"));
    if (!r.at_end()) throw format_error(path.string() + ": trailing bytes after payload");
    return cube;
}

} // namespace clorf
