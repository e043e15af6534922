// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "clorf/analysis.hpp"
#include "clorf/degrade.hpp"
#include "clorf/fuse.hpp"
#include "clorf/synth.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

namespace clorf {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

struct GradcheckProblem {
    ClorfModel model;
    HsiCube lr_hsi;
    HsiCube hr_msi;
    DegradationSpec degr;
    double lambda = 0.7;
    double eta = 0.01;
};

inline GradcheckProblem gradcheck_problem(std::uint64_t seed) {
    GradcheckProblem p;
    const HsiCube gt = make_gt(4, 4, 3, 2, derive_seed(seed, 11));
    p.degr.psf = gaussian_psf(3, 0.8);
    p.degr.down = {2, 1};
    p.degr.srf = gaussian_srf(2, 3);
    p.degr.noise_hsi = {25.0, derive_seed(seed, 12)};
    p.degr.noise_msi = {25.0, derive_seed(seed, 13)};
    auto [lr, msi] = simulate(gt, p.degr.psf, p.degr.down, p.degr.srf, p.degr.noise_hsi, p.degr.noise_msi);
    p.lr_hsi = std::move(lr);
    p.hr_msi = std::move(msi);

    p.model.rank = 2;
    p.model.train_grid = make_grid(4, 4, 3);
    SirenConfig spatial_cfg{2, 2, {12}, 30.0, Activation::Sine, derive_seed(seed, 14)};
    SirenConfig spectral_cfg{1, 2, {10}, 30.0, Activation::Sine, derive_seed(seed, 15)};
    p.model.spatial_net = siren_init(spatial_cfg);
    p.model.spectral_net = siren_init(spectral_cfg);
    return p;
}

// Smallest |forward difference| in the coefficient planes; the l1 TV
// subgradient is only trustworthy away from its kinks.
inline double min_tv_gap(const ClorfModel& model, int H, int W) {
    auto [e_hat, a_hat] = assemble(model, model.train_grid);
    (void)e_hat;
    double gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < a_hat.rows(); ++k)
        for (int i = 0; i < H; ++i)
            for (int j = 0; j < W; ++j) {
                if (i + 1 < H)
                    gap = std::min(gap, std::abs(a_hat(k, Eigen::Index(i + 1) * W + j) - a_hat(k, Eigen::Index(i) * W + j)));
                if (j + 1 < W)
                    gap = std::min(gap, std::abs(a_hat(k, Eigen::Index(i) * W + j + 1) - a_hat(k, Eigen::Index(i) * W + j)));
            }
    return gap;
}

inline double* param_ref(SirenNet& net, int layer, bool is_bias, Eigen::Index flat) {
    if (is_bias) return net.biases[layer].data() + flat;
    return net.weights[layer].data() + flat;
}

} // namespace detail

inline std::vector<CheckResult> verify_gradcheck(std::uint64_t seed) {
    std::vector<CheckResult> out;

    detail::GradcheckProblem p = detail::gradcheck_problem(seed);
    // Re-seed until the coefficient planes sit away from TV kinks.
    for (std::uint64_t attempt = 0; detail::min_tv_gap(p.model, 4, 4) < 1e-8 && attempt < 32; ++attempt)
        p = detail::gradcheck_problem(seed + attempt + 1);

    const auto total_loss = [&](const ClorfModel& m) {
        const DataLoss d = loss_data(m, p.lr_hsi, p.hr_msi, p.degr);
        auto [e_hat, a_hat] = assemble(m, m.train_grid);
        (void)e_hat;
        return d.term_hsi_obs + p.lambda * d.term_msi_obs + p.eta * loss_tv(a_hat, 4, 4);
    };

    const LossAndGrads analytic = loss_total_and_grad(p.model, p.lr_hsi, p.hr_msi, p.degr, p.lambda, p.eta);

    struct ParamSlot {
        bool spatial;
        int layer;
        bool is_bias;
        Eigen::Index flat;
    };
    std::vector<ParamSlot> slots;
    const auto collect = [&](const SirenNet& net, bool spatial) {
        for (int i = 0; i < net.depth(); ++i) {
            for (Eigen::Index f = 0; f < net.weights[i].size(); ++f) slots.push_back({spatial, i, false, f});
            for (Eigen::Index f = 0; f < net.biases[i].size(); ++f) slots.push_back({spatial, i, true, f});
        }
    };
    collect(p.model.spatial_net, true);
    collect(p.model.spectral_net, false);

    SplitMix64 rng(derive_seed(seed, 21));
    for (std::size_t i = slots.size(); i > 1; --i) std::swap(slots[i - 1], slots[rng.next_below(i)]);
    const std::size_t n_check = std::min<std::size_t>(100, slots.size());

    // Step balances FD roundoff (eps*loss/h) against truncation at the
    // O(10) loss scale of this problem.
    constexpr double h = 1e-5;
    double max_rel = 0.0;
    int failures = 0;
    for (std::size_t i = 0; i < n_check; ++i) {
        const ParamSlot s = slots[i];
        ClorfModel m = p.model;
        SirenNet& net = s.spatial ? m.spatial_net : m.spectral_net;
        double* ref = detail::param_ref(net, s.layer, s.is_bias, s.flat);
        const double saved = *ref;
        *ref = saved + h;
        const double lp = total_loss(m);
        *ref = saved - h;
        const double lm = total_loss(m);
        *ref = saved;
        const double fd = (lp - lm) / (2.0 * h);
        const SirenGrads& g = s.spatial ? analytic.spatial : analytic.spectral;
        const double ga = s.is_bias ? g.biases[s.layer](s.flat) : g.weights[s.layer].data()[s.flat];
        const double rel = std::abs(ga - fd) / std::max({std::abs(ga), std::abs(fd), 1e-8});
        max_rel = std::max(max_rel, rel);
        if (rel >= 1e-5) ++failures;
    }

    std::ostringstream det;
    det << n_check << " parameters, max relative error " << max_rel;
    out.push_back({"gradcheck: analytic vs central differences (1e-5 relative)", failures == 0, det.str()});
    return out;
}

inline std::vector<CheckResult> verify_lipschitz(std::uint64_t seed) {
    std::vector<CheckResult> out;
    constexpr int kPairs = 10;
    constexpr std::int64_t kSamples = 10000;
    std::int64_t total_violations = 0;
    double worst_ratio = 0.0;
    for (int i = 0; i < kPairs; ++i) {
        SirenConfig spatial_cfg{2, 5, {16, 16}, 30.0, Activation::Sine, derive_seed(seed, 100 + i)};
        SirenConfig spectral_cfg{1, 5, {16, 16}, 30.0, Activation::Sine, derive_seed(seed, 200 + i)};
        const SirenNet spatial = siren_init(spatial_cfg);   // biases zero at init
        const SirenNet spectral = siren_init(spectral_cfg);
        const LipschitzCheckResult res =
            empirical_lipschitz_check(spatial, spectral, 1.0, kSamples, derive_seed(seed, 300 + i));
        total_violations += res.violations;
        worst_ratio = std::max(worst_ratio, res.max_ratio);
    }
    std::ostringstream det;
    det << kPairs << " net pairs x " << kSamples << " coordinate pairs, " << total_violations
        << " violations, max |df|/bound " << worst_ratio;
    out.push_back({"lipschitz: |df| <= delta*(|ds|_1 + |db|) with delta = eta^(2d+1) kappa^(2d-2) zeta",
                   total_violations == 0, det.str()});
    return out;
}

inline std::vector<CheckResult> verify_mfrank(std::uint64_t seed) {
    std::vector<CheckResult> out;
    SplitMix64 rng(seed);
    int mismatches = 0;
    std::ostringstream det;
    for (int t = 0; t < 20; ++t) {
        const int rank = 1 + t % 5;
        const int l1 = 2 + int(rng.next_below(3));
        const int l2 = 2 + int(rng.next_below(3));
        const Eigen::Index n1 = Eigen::Index(l1) * l2;
        const Eigen::Index n2 = rank + Eigen::Index(rng.next_below(8));
        Eigen::MatrixXd left(n1, rank), right(rank, n2);
        for (Eigen::Index i = 0; i < left.size(); ++i) left.data()[i] = rng.uniform(-1.0, 1.0);
        for (Eigen::Index i = 0; i < right.size(); ++i) right.data()[i] = rng.uniform(-1.0, 1.0);
        DiscreteMatrixFunction f{left * right, l1, l2};
        const MfRankWitness w = mf_rank_witness(f, 100, derive_seed(seed, 400 + t));
        if (w.max_sampled_rank != rank) {
            ++mismatches;
            det << " [case " << t << ": got " << w.max_sampled_rank << ", want " << rank << "]";
        }
    }
    out.push_back({"mfrank: max sampled rank equals constructed rank (20 cases, 100 draws + full sample)",
                   mismatches == 0, mismatches == 0 ? "all ranks matched" : det.str()});
    return out;
}

inline std::vector<CheckResult> verify_tv(std::uint64_t seed) {
    std::vector<CheckResult> out;
    SplitMix64 rng(seed);
    int mismatches = 0;
    for (int t = 0; t < 50; ++t) {
        const int K = 1 + int(rng.next_below(4));
        const int H = 1 + int(rng.next_below(6));
        const int W = 1 + int(rng.next_below(6));
        Eigen::MatrixXd a(K, Eigen::Index(H) * W);
        for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(-2.0, 2.0);

        // Independent reference: same accumulation order over the raw rows.
        double ref = 0.0;
        for (int k = 0; k < K; ++k) {
            for (int i = 0; i + 1 < H; ++i)
                for (int j = 0; j < W; ++j) ref += std::abs(a(k, (i + 1) * W + j) - a(k, i * W + j));
            for (int i = 0; i < H; ++i)
                for (int j = 0; j + 1 < W; ++j) ref += std::abs(a(k, i * W + j + 1) - a(k, i * W + j));
        }
        if (loss_tv(a, H, W) != ref) ++mismatches;
    }
    out.push_back({"tv: loss_tv equals double-loop reference exactly (50 random inputs)", mismatches == 0,
                   std::to_string(50 - mismatches) + "/50 exact"});
    return out;
}

inline std::vector<CheckResult> verify_noise(std::uint64_t seed) {
    std::vector<CheckResult> out;
    HsiCube cube(100, 100, 100);
    SplitMix64 rng(derive_seed(seed, 500));
    for (double& v : cube.data) v = rng.uniform(0.5, 1.5);

    const NoiseSpec spec{30.0, derive_seed(seed, 501)};
    const HsiCube noisy = add_noise(cube, spec);
    double sig = 0.0, noise = 0.0;
    for (std::size_t i = 0; i < cube.data.size(); ++i) {
        sig += cube.data[i] * cube.data[i];
        const double d = noisy.data[i] - cube.data[i];
        noise += d * d;
    }
    const double snr = 10.0 * std::log10(sig / noise);
    std::ostringstream det;
    det << "empirical SNR " << snr << " dB at 1e6 samples, target 30 +- 0.2";
    out.push_back({"noise: empirical SNR within 0.2 dB of target", std::abs(snr - 30.0) <= 0.2, det.str()});

    const HsiCube again = add_noise(cube, spec);
    out.push_back({"noise: same seed reproduces bit-identical output", again.data == noisy.data, ""});

    const HsiCube untouched = add_noise(cube, NoiseSpec{});
    out.push_back({"noise: +inf SNR sentinel disables noise", untouched.data == cube.data, ""});
    return out;
}

inline std::vector<CheckResult> run_verify_suite(const std::string& suite, std::uint64_t seed) {
    if (suite == "gradcheck") return verify_gradcheck(seed);
    if (suite == "lipschitz") return verify_lipschitz(seed);
    if (suite == "mfrank") return verify_mfrank(seed);
    if (suite == "tv") return verify_tv(seed);
    if (suite == "noise") return verify_noise(seed);
    throw std::invalid_argument("unknown verify suite: " + suite);
}

} // namespace clorf
