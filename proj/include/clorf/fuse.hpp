// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "clorf/cube.hpp"
#include "clorf/degrade.hpp"
#include "clorf/siren.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace clorf {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// The trained artifact: one coordinate net per factor of the rank-K
// reconstruction E * A, plus the grid the pair was trained on.
struct ClorfModel {
    SirenNet spatial_net;  // 2 -> K, columns of A
    SirenNet spectral_net; // 1 -> K, rows of E
    int rank = 0;
    CoordinateGrid train_grid;
};

inline void validate(const ClorfModel& m) {
    if (m.rank < 1) throw std::invalid_argument("ClorfModel: rank must be >= 1");
    if (m.spatial_net.config.out_dim != m.rank || m.spectral_net.config.out_dim != m.rank)
        throw std::invalid_argument("ClorfModel: both nets must share out_dim = rank");
    if (m.spatial_net.config.in_dim != 2 || m.spectral_net.config.in_dim != 1)
        throw std::invalid_argument("ClorfModel: spatial net is 2-D, spectral net is 1-D");
}

struct TrainConfig {
    double lambda = 1.25;          // weight on the MSI-observation misfit
    double eta = 0.0025;           // TV weight
    double lr = 3e-5;
    std::int64_t max_iters = 30000;
    int patience = 10;             // early-stop window, in logged checks
    double min_rel_improve = 1e-4; // relative best-loss improvement threshold
    std::uint64_t seed = 0;
    std::int64_t log_every = 200;
};

enum class StopReason { MaxIters, EarlyStop, User };

struct TrainRecord {
    std::int64_t iter = 0;
    double loss_hsi_obs = 0.0;
    double loss_msi_obs = 0.0;
    double loss_tv = 0.0;
    double total = 0.0;
};

struct TrainReport {
    std::vector<TrainRecord> records;
    StopReason stop_reason = StopReason::MaxIters;
    std::int64_t best_iter = 0;
    double best_total = std::numeric_limits<double>::infinity();
};

// E row i = spectral_net(b_i), A column j = spatial_net(o_j); the
// reconstruction at the grid is E * A.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> assemble(const ClorfModel& model, const CoordinateGrid& grid) {
    Eigen::MatrixXd e_hat = forward(model.spectral_net, grid.spectral);
    Eigen::MatrixXd a_hat = forward(model.spatial_net, grid.spatial).transpose();
    return {std::move(e_hat), std::move(a_hat)};
}

// Anisotropic TV of each row of a_hat reshaped to H x W: sum of absolute
// forward differences along rows and columns, no wraparound. Accumulation
// order is fixed (per row k: all height diffs, then all width diffs).
inline double loss_tv(const Eigen::MatrixXd& a_hat, int H, int W) {
    if (a_hat.cols() != Eigen::Index(H) * W) throw std::invalid_argument("loss_tv: N != H*W");
    double acc = 0.0;
    for (Eigen::Index k = 0; k < a_hat.rows(); ++k) {
        const auto idx = [&](int i, int j) { return Eigen::Index(i) * W + j; };
        for (int i = 0; i + 1 < H; ++i)
            for (int j = 0; j < W; ++j) acc += std::abs(a_hat(k, idx(i + 1, j)) - a_hat(k, idx(i, j)));
        for (int i = 0; i < H; ++i)
            for (int j = 0; j + 1 < W; ++j) acc += std::abs(a_hat(k, idx(i, j + 1)) - a_hat(k, idx(i, j)));
    }
    return acc;
}

namespace detail {

inline double sign_of(double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); }

// Subgradient of loss_tv w.r.t. a_hat, with sign(0) = 0.
inline Eigen::MatrixXd tv_subgradient(const Eigen::MatrixXd& a_hat, int H, int W) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(a_hat.rows(), a_hat.cols());
    for (Eigen::Index k = 0; k < a_hat.rows(); ++k) {
        const auto idx = [&](int i, int j) { return Eigen::Index(i) * W + j; };
        for (int i = 0; i + 1 < H; ++i)
            for (int j = 0; j < W; ++j) {
                const double s = sign_of(a_hat(k, idx(i + 1, j)) - a_hat(k, idx(i, j)));
                g(k, idx(i + 1, j)) += s;
                g(k, idx(i, j)) -= s;
            }
        for (int i = 0; i < H; ++i)
            for (int j = 0; j + 1 < W; ++j) {
                const double s = sign_of(a_hat(k, idx(i, j + 1)) - a_hat(k, idx(i, j)));
                g(k, idx(i, j + 1)) += s;
                g(k, idx(i, j)) -= s;
            }
    }
    return g;
}

// Blur + decimate every row of the L x N reconstruction as an H x W plane.
inline Eigen::MatrixXd degrade_spatial(const RowMajorMatrix& recon, int H, int W, const PsfKernel& psf,
                                       const DownsampleSpec& down) {
    const int h = downsampled_extent(H, down), w = downsampled_extent(W, down);
    RowMajorMatrix out(recon.rows(), Eigen::Index(h) * w);
    std::vector<double> blurred(std::size_t(H) * W);
    for (Eigen::Index l = 0; l < recon.rows(); ++l) {
        blur_plane(recon.row(l).data(), blurred.data(), H, W, psf);
        decimate_plane(blurred.data(), out.row(l).data(), H, W, down);
    }
    return out;
}

// Adjoint of degrade_spatial, row by row.
inline RowMajorMatrix degrade_spatial_adjoint(const Eigen::MatrixXd& g_lr, int H, int W, const PsfKernel& psf,
                                              const DownsampleSpec& down) {
    RowMajorMatrix g(g_lr.rows(), Eigen::Index(H) * W);
    g.setZero();
    std::vector<double> g_blurred(std::size_t(H) * W);
    RowMajorMatrix g_lr_rm = g_lr;
    for (Eigen::Index l = 0; l < g_lr.rows(); ++l) {
        std::fill(g_blurred.begin(), g_blurred.end(), 0.0);
        decimate_plane_adjoint(g_lr_rm.row(l).data(), g_blurred.data(), H, W, down);
        blur_plane_adjoint(g_blurred.data(), g.row(l).data(), H, W, psf);
    }
    return g;
}

struct Observations {
    Eigen::MatrixXd x_lr_hsi; // L x n, unfolded LR-HSI
    Eigen::MatrixXd y_hr_msi; // l x N, unfolded HR-MSI
    int hr_height = 0;
    int hr_width = 0;
};

inline void check_grid_matches(const ClorfModel& model, const HsiCube& lr_hsi, const HsiCube& hr_msi) {
    const std::array<int, 3> want{hr_msi.height, hr_msi.width, lr_hsi.bands};
    if (model.train_grid.source_dims != want)
        throw std::invalid_argument("fuse: model grid does not match observation dims");
}

inline Observations unfold_observations(const HsiCube& lr_hsi, const HsiCube& hr_msi, const DegradationSpec& degr) {
    validate(degr.psf);
    validate(degr.srf);
    if (degr.psf.size > 2 * std::min(hr_msi.height, hr_msi.width) - 1)
        throw std::invalid_argument("fuse: PSF kernel larger than 2*min(H,W)-1");
    if (degr.srf.in_bands() != lr_hsi.bands)
        throw std::invalid_argument("fuse: srf columns must match LR-HSI bands");
    if (degr.srf.out_bands() != hr_msi.bands)
        throw std::invalid_argument("fuse: srf rows must match HR-MSI bands");
    const int h = downsampled_extent(hr_msi.height, degr.down);
    const int w = downsampled_extent(hr_msi.width, degr.down);
    if (h != lr_hsi.height || w != lr_hsi.width)
        throw std::invalid_argument("fuse: LR-HSI dims inconsistent with HR dims and downsampling spec");
    Observations obs;
    obs.x_lr_hsi = unfold_spectral(lr_hsi);
    obs.y_hr_msi = unfold_spectral(hr_msi);
    obs.hr_height = hr_msi.height;
    obs.hr_width = hr_msi.width;
    return obs;
}

} // namespace detail

// Squared Frobenius misfits of the degraded reconstruction against each
// observation. Named by the observation compared against: the first term
// degrades spatially and compares with the LR-HSI, the second projects
// through the SRF and compares with the HR-MSI.
struct DataLoss {
    double term_hsi_obs = 0.0;
    double term_msi_obs = 0.0;
};

inline DataLoss loss_data(const ClorfModel& model, const HsiCube& lr_hsi, const HsiCube& hr_msi,
                          const DegradationSpec& degr) {
    validate(model);
    detail::check_grid_matches(model, lr_hsi, hr_msi);
    const detail::Observations obs = detail::unfold_observations(lr_hsi, hr_msi, degr);
    auto [e_hat, a_hat] = assemble(model, model.train_grid);
    const RowMajorMatrix recon = e_hat * a_hat;
    if (recon.rows() != obs.x_lr_hsi.rows() || recon.cols() != obs.y_hr_msi.cols())
        throw std::invalid_argument("loss_data: model grid inconsistent with observations");
    DataLoss out;
    out.term_hsi_obs =
        (detail::degrade_spatial(recon, obs.hr_height, obs.hr_width, degr.psf, degr.down) - obs.x_lr_hsi)
            .squaredNorm();
    out.term_msi_obs = (degr.srf.weights * recon - obs.y_hr_msi).squaredNorm();
    return out;
}

struct LossAndGrads {
    double total = 0.0;
    double term_hsi_obs = 0.0;
    double term_msi_obs = 0.0;
    double term_tv = 0.0;
    SirenGrads spatial;
    SirenGrads spectral;
};

namespace detail {

// Objective and parameter gradients in one pass; caches are reused so the
// forward work is done once per iteration.
inline LossAndGrads loss_total_and_grad_unfolded(const ClorfModel& model, const Observations& obs,
                                                 const DegradationSpec& degr, double lambda, double eta) {
    const int H = obs.hr_height, W = obs.hr_width;

    ForwardCache spec_cache, spat_cache;
    const Eigen::MatrixXd e_hat = forward_impl(model.spectral_net, model.train_grid.spectral, &spec_cache);
    const Eigen::MatrixXd spat_out = forward_impl(model.spatial_net, model.train_grid.spatial, &spat_cache);
    const Eigen::MatrixXd a_hat = spat_out.transpose();
    const RowMajorMatrix recon = e_hat * a_hat;

    LossAndGrads out;

    const Eigen::MatrixXd res_hsi = degrade_spatial(recon, H, W, degr.psf, degr.down) - obs.x_lr_hsi;
    out.term_hsi_obs = res_hsi.squaredNorm();
    RowMajorMatrix g_recon = 2.0 * degrade_spatial_adjoint(res_hsi, H, W, degr.psf, degr.down);

    const Eigen::MatrixXd res_msi = degr.srf.weights * recon - obs.y_hr_msi;
    out.term_msi_obs = res_msi.squaredNorm();
    g_recon.noalias() += 2.0 * lambda * (degr.srf.weights.transpose() * res_msi);

    out.term_tv = loss_tv(a_hat, H, W);
    out.total = out.term_hsi_obs + lambda * out.term_msi_obs + eta * out.term_tv;

    Eigen::MatrixXd g_e = g_recon * a_hat.transpose();
    Eigen::MatrixXd g_a = e_hat.transpose() * g_recon;
    if (eta != 0.0) g_a.noalias() += eta * tv_subgradient(a_hat, H, W);

    out.spectral = backward_impl(model.spectral_net, spec_cache, g_e);
    out.spatial = backward_impl(model.spatial_net, spat_cache, g_a.transpose());
    return out;
}

} // namespace detail

// total = term_hsi_obs + lambda * term_msi_obs + eta * TV, with exact
// reverse-mode gradients for every parameter of both nets.
inline LossAndGrads loss_total_and_grad(const ClorfModel& model, const HsiCube& lr_hsi, const HsiCube& hr_msi,
                                        const DegradationSpec& degr, double lambda, double eta) {
    validate(model);
    detail::check_grid_matches(model, lr_hsi, hr_msi);
    const detail::Observations obs = detail::unfold_observations(lr_hsi, hr_msi, degr);
    LossAndGrads out = detail::loss_total_and_grad_unfolded(model, obs, degr, lambda, eta);
    if (!std::isfinite(out.total))
        throw std::runtime_error("loss_total_and_grad: non-finite total loss");
    return out;
}

// Net shapes for one fusion run; out_dim of both nets is the rank K.
struct NetConfigs {
    std::vector<int> spatial_hidden{512, 512, 512, 512, 512};
    std::vector<int> spectral_hidden{128, 128};
    double omega0 = 30.0;
    Activation activation = Activation::Sine;
};

// Full-batch Adam on the fusion objective with best-loss tracking and
// plateau early stopping. Returns the best-loss parameters, not the last.
// on_record, when set, is invoked for every logged record.
inline std::pair<ClorfModel, TrainReport> train(const HsiCube& lr_hsi, const HsiCube& hr_msi,
                                                const DegradationSpec& degr, int rank, const NetConfigs& nets,
                                                const TrainConfig& config,
                                                const std::function<void(const TrainRecord&)>& on_record = {}) {
    if (rank < 1) throw std::invalid_argument("train: rank must be >= 1");
    if (config.lambda < 0 || config.eta < 0) throw std::invalid_argument("train: lambda and eta must be >= 0");
    if (!(config.lr > 0)) throw std::invalid_argument("train: lr must be positive");
    if (config.patience < 1) throw std::invalid_argument("train: patience must be >= 1");
    if (nets.spatial_hidden.empty() || nets.spectral_hidden.empty())
        throw std::invalid_argument("train: hidden layer lists must be nonempty");

    ClorfModel model;
    model.rank = rank;
    model.train_grid = make_grid(hr_msi.height, hr_msi.width, lr_hsi.bands);

    SirenConfig spatial_cfg;
    spatial_cfg.in_dim = 2;
    spatial_cfg.out_dim = rank;
    spatial_cfg.hidden_sizes = nets.spatial_hidden;
    spatial_cfg.omega0 = nets.omega0;
    spatial_cfg.activation = nets.activation;
    spatial_cfg.seed = derive_seed(config.seed, 0);
    SirenConfig spectral_cfg = spatial_cfg;
    spectral_cfg.in_dim = 1;
    spectral_cfg.hidden_sizes = nets.spectral_hidden;
    spectral_cfg.seed = derive_seed(config.seed, 1);

    model.spatial_net = siren_init(spatial_cfg);
    model.spectral_net = siren_init(spectral_cfg);
    validate(model);

    const Eigen::Index n_hr = model.train_grid.spatial.rows();
    if (rank > std::min<Eigen::Index>(lr_hsi.bands, n_hr))
        throw std::invalid_argument("train: rank must be <= min(L, N)");

    const detail::Observations obs = detail::unfold_observations(lr_hsi, hr_msi, degr);

    TrainReport report;
    if (config.max_iters == 0) return {std::move(model), std::move(report)};

    AdamState adam_spatial = adam_init(model.spatial_net, config.lr);
    AdamState adam_spectral = adam_init(model.spectral_net, config.lr);

    ClorfModel best = model;
    double last_checked_best = std::numeric_limits<double>::infinity();
    int stall_checks = 0;
    report.stop_reason = StopReason::MaxIters;

    const auto record_at = [&](std::int64_t it, const LossAndGrads& l) {
        report.records.push_back({it, l.term_hsi_obs, l.term_msi_obs, l.term_tv, l.total});
        if (on_record) on_record(report.records.back());
    };

    for (std::int64_t it = 0; it < config.max_iters; ++it) {
        const LossAndGrads l =
            detail::loss_total_and_grad_unfolded(model, obs, degr, config.lambda, config.eta);
        if (!std::isfinite(l.total))
            throw std::runtime_error("train: non-finite loss at iteration " + std::to_string(it) +
                                     "; last finite best " + std::to_string(report.best_total) + " at iteration " +
                                     std::to_string(report.best_iter));
        if (l.total < report.best_total) {
            report.best_total = l.total;
            report.best_iter = it;
            best = model;
        }
        if (it % config.log_every == 0) {
            record_at(it, l);
            if (it > 0) {
                const double rel =
                    (last_checked_best - report.best_total) / std::max(last_checked_best, 1e-300);
                stall_checks = rel < config.min_rel_improve ? stall_checks + 1 : 0;
                if (stall_checks >= config.patience) {
                    report.stop_reason = StopReason::EarlyStop;
                    break;
                }
            }
            last_checked_best = report.best_total;
        }
        adam_step(adam_spatial, model.spatial_net, l.spatial);
        adam_step(adam_spectral, model.spectral_net, l.spectral);
    }

    if (report.stop_reason != StopReason::EarlyStop) {
        // Score the parameters left by the last step as well.
        const LossAndGrads l = detail::loss_total_and_grad_unfolded(model, obs, degr, config.lambda, config.eta);
        if (std::isfinite(l.total) && l.total < report.best_total) {
            report.best_total = l.total;
            report.best_iter = config.max_iters;
            best = model;
        }
        record_at(config.max_iters, l);
    }
    return {std::move(best), std::move(report)};
}

// Arbitrary-resolution inference: evaluate both nets on a fresh grid for the
// target dims and fold the product. Inference at the training dims shares
// this code path with training-time reconstruction.
inline HsiCube infer(const ClorfModel& model, int height, int width, int bands) {
    validate(model);
    const CoordinateGrid grid = make_grid(height, width, bands);
    auto [e_hat, a_hat] = assemble(model, grid);
    return fold_spectral(e_hat * a_hat, height, width);
}

inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {

inline void put_net(std::string& out, const SirenNet& net) {
    out.push_back(char(std::uint8_t(net.config.activation)));
    put_f64le(out, net.config.omega0);
    put_u32le(out, std::uint32_t(net.depth()));
    for (int i = 0; i < net.depth(); ++i) {
        const Eigen::MatrixXd& w = net.weights[i];
        put_u32le(out, std::uint32_t(w.rows()));
        put_u32le(out, std::uint32_t(w.cols()));
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) put_f64le(out, w(r, c));
        for (Eigen::Index r = 0; r < net.biases[i].size(); ++r) put_f64le(out, net.biases[i](r));
    }
}

inline SirenNet get_net(ByteReader& r, int expected_in_dim, int expected_out_dim) {
    SirenNet net;
    const std::uint8_t tag = r.u8("activation tag");
    if (tag > 2) throw format_error("checkpoint: unknown activation tag " + std::to_string(tag));
    net.config.activation = Activation(tag);
    net.config.omega0 = r.f64("omega0");
    if (!(net.config.omega0 > 0.0)) throw format_error("checkpoint: invalid omega0");
    const std::uint32_t depth = r.u32("layer count");
    if (depth == 0 || depth > 1024) throw format_error("checkpoint: invalid layer count");
    for (std::uint32_t i = 0; i < depth; ++i) {
        const std::uint32_t rows = r.u32("layer rows"), cols = r.u32("layer cols");
        if (rows == 0 || cols == 0 || std::uint64_t(rows) * cols > (1u << 28))
            throw format_error("checkpoint: invalid layer dims");
        Eigen::MatrixXd w(rows, cols);
        for (std::uint32_t rr = 0; rr < rows; ++rr)
            for (std::uint32_t cc = 0; cc < cols; ++cc) w(rr, cc) = r.f64("weights");
        Eigen::VectorXd b(rows);
        for (std::uint32_t rr = 0; rr < rows; ++rr) b(rr) = r.f64("biases");
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    const int enc = net.config.activation == Activation::ReluPE ? 2 * kPosEncFrequencies : 1;
    if (net.weights.front().cols() % enc != 0) throw format_error("checkpoint: first layer cols inconsistent with encoding");
    net.config.in_dim = int(net.weights.front().cols()) / enc;
    net.config.out_dim = int(net.weights.back().rows());
    for (std::size_t i = 0; i + 1 < net.weights.size(); ++i) {
        if (net.weights[i + 1].cols() != net.weights[i].rows())
            throw format_error("checkpoint: layer shapes do not chain");
        net.config.hidden_sizes.push_back(int(net.weights[i].rows()));
    }
    if (net.config.in_dim != expected_in_dim) throw format_error("checkpoint: unexpected net input dim");
    if (net.config.out_dim != expected_out_dim) throw format_error("checkpoint: net out_dim does not match K");
    return net;
}

} // namespace detail

// Checkpoint (little-endian): magic "CLRF", version u32 = 1, K u32, train
// dims H,W,L u32 x3, then the spatial net followed by the spectral net, each
// as: activation tag u8, omega0 f64, layer count u32, per layer (rows u32,
// cols u32, weights f64 row-major, biases f64).
inline void save_model(const ClorfModel& model, const std::filesystem::path& path) {
    validate(model);
    std::string out;
    out += "CLRF";
    detail::put_u32le(out, kModelFormatVersion);
    detail::put_u32le(out, std::uint32_t(model.rank));
    detail::put_u32le(out, std::uint32_t(model.train_grid.source_dims[0]));
    detail::put_u32le(out, std::uint32_t(model.train_grid.source_dims[1]));
    detail::put_u32le(out, std::uint32_t(model.train_grid.source_dims[2]));
    detail::put_net(out, model.spatial_net);
    detail::put_net(out, model.spectral_net);
    detail::write_file(path, out);
}

inline ClorfModel load_model(const std::filesystem::path& path) {
    const std::string bytes = detail::read_file(path);
    detail::ByteReader r(bytes, path.string());
    r.expect_magic("CLRF");
    const std::uint32_t version = r.u32("version");
    if (version != kModelFormatVersion)
        throw format_error(path.string() + ": unsupported version " + std::to_string(version));
    ClorfModel model;
    model.rank = int(r.u32("K"));
    if (model.rank < 1) throw format_error(path.string() + ": invalid K");
    const int H = int(r.u32("train H")), W = int(r.u32("train W")), L = int(r.u32("train L"));
    if (H < 1 || W < 1 || L < 1) throw format_error(path.string() + ": invalid train dims");
    model.spatial_net = detail::get_net(r, 2, model.rank);
    model.spectral_net = detail::get_net(r, 1, model.rank);
    if (!r.at_end()) throw format_error(path.string() + ": trailing bytes after payload");
    model.train_grid = make_grid(H, W, L);
    validate(model);
    return model;
}

// CSV export: header then one row per logged record.
inline void write_report_csv(const TrainReport& report, const std::filesystem::path& path) {
    std::string out = "iter,loss_hsi_obs,loss_msi_obs,loss_tv,total\n";
    for (const TrainRecord& rec : report.records) {
        std::ostringstream line;
        line.precision(17);
        line << rec.iter << ',' << rec.loss_hsi_obs << ',' << rec.loss_msi_obs << ',' << rec.loss_tv << ','
             << rec.total << '\n';
        out += line.str();
    }
    detail::write_file(path, out);
}

} // namespace clorf
