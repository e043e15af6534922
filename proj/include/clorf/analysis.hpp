// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "clorf/rng.hpp"
#include "clorf/siren.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace clorf {

inline constexpr double kRankRelTol = 1e-10;

// Count of singular values above tol * sigma_max.
inline int numerical_rank(const Eigen::MatrixXd& m, double rel_tol = kRankRelTol) {
    if (m.size() == 0) return 0;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
    const Eigen::VectorXd& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0) return 0;
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > rel_tol * s(0)) ++rank;
    return rank;
}

inline Eigen::VectorXd singular_values(const Eigen::MatrixXd& m) {
    return Eigen::BDCSVD<Eigen::MatrixXd>(m).singularValues();
}

// A matrix viewed as a function over discrete spatial x spectral coordinate
// sets: spatial index pairs (i, j) in [0,l1) x [0,l2) address row i*l2 + j,
// the spectral index addresses the column.
struct DiscreteMatrixFunction {
    Eigen::MatrixXd backing; // n1 x n2
    int l1 = 1;
    int l2 = 1;

    double eval(int si, int sj, int b) const { return backing(Eigen::Index(si) * l2 + sj, b); }
};

inline void validate(const DiscreteMatrixFunction& f) {
    if (f.l1 < 1 || f.l2 < 1 || Eigen::Index(f.l1) * f.l2 != f.backing.rows())
        throw std::invalid_argument("DiscreteMatrixFunction: l1*l2 must equal row count");
}

struct MfRankWitness {
    int max_sampled_rank = 0;
    Eigen::Index witness_rows = 0;
    Eigen::Index witness_cols = 0;
};

// Draws `trials` random matrices from the sampled-matrix set (coordinate
// choices with repetition) plus the full-sample matrix, and reports the
// maximum numerical rank seen. Always equals rank(backing): sampling cannot
// exceed it and the full-sample matrix attains it.
inline MfRankWitness mf_rank_witness(const DiscreteMatrixFunction& f, int trials, std::uint64_t seed) {
    validate(f);
    if (trials < 1) throw std::invalid_argument("mf_rank_witness: trials must be >= 1");
    const Eigen::Index n1 = f.backing.rows(), n2 = f.backing.cols();
    MfRankWitness out;

    const auto consider = [&](const Eigen::MatrixXd& m) {
        const int r = numerical_rank(m);
        if (r > out.max_sampled_rank) {
            out.max_sampled_rank = r;
            out.witness_rows = m.rows();
            out.witness_cols = m.cols();
        }
    };

    SplitMix64 rng(seed);
    for (int t = 0; t < trials; ++t) {
        const Eigen::Index rows = 1 + Eigen::Index(rng.next_below(std::uint64_t(n1) + 2));
        const Eigen::Index cols = 1 + Eigen::Index(rng.next_below(std::uint64_t(n2) + 2));
        Eigen::MatrixXd m(rows, cols);
        std::vector<Eigen::Index> row_pick(rows), col_pick(cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const int si = int(rng.next_below(std::uint64_t(f.l1)));
            const int sj = int(rng.next_below(std::uint64_t(f.l2)));
            row_pick[i] = Eigen::Index(si) * f.l2 + sj;
        }
        for (Eigen::Index j = 0; j < cols; ++j) col_pick[j] = Eigen::Index(rng.next_below(std::uint64_t(n2)));
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = f.backing(row_pick[i], col_pick[j]);
        consider(m);
    }
    consider(f.backing); // every coordinate exactly once
    return out;
}

// Rank factorization via truncated SVD: M ~= U V^T with K = numerical rank
// at rel_tol, U = U_K Sigma_K, V = V_K.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> rank_factorize(const Eigen::MatrixXd& m, double rel_tol) {
    if (!m.allFinite()) throw std::invalid_argument("rank_factorize: matrix must be finite");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    int k = 0;
    if (s.size() > 0 && s(0) > 0.0)
        for (Eigen::Index i = 0; i < s.size(); ++i)
            if (s(i) > rel_tol * s(0)) ++k;
    Eigen::MatrixXd u = svd.matrixU().leftCols(k) * s.head(k).asDiagonal();
    Eigen::MatrixXd v = svd.matrixV().leftCols(k);
    return {std::move(u), std::move(v)};
}

// Smoothness certificate for the factored coordinate function
// f(s, b) = spatial(s) . spectral(b): delta = eta^(2d+1) * kappa^(2d-2) * zeta.
struct LipschitzCertificate {
    double delta = 0.0;
    double kappa = 0.0; // activation Lipschitz constant (omega0 for sine)
    double eta = 0.0;   // max operator 1-norm over all weight matrices
    double zeta = 0.0;  // coordinate-domain bound
    int depth = 0;      // weight matrices per net
};

namespace detail {

inline double op_one_norm(const Eigen::MatrixXd& w) {
    return w.cwiseAbs().colwise().sum().maxCoeff();
}

inline void require_certifiable(const SirenNet& spatial, const SirenNet& spectral) {
    if (spatial.depth() != spectral.depth())
        throw std::invalid_argument("lipschitz_certificate: nets must share the same depth");
    if (spatial.config.activation != Activation::Sine || spectral.config.activation != Activation::Sine)
        throw std::invalid_argument("lipschitz_certificate: sine activation required");
    if (spatial.config.omega0 != spectral.config.omega0)
        throw std::invalid_argument("lipschitz_certificate: nets must share omega0");
    for (const SirenNet* net : {&spatial, &spectral})
        for (const Eigen::VectorXd& c : net->biases)
            if (c.cwiseAbs().maxCoeff() != 0.0)
                throw std::invalid_argument("lipschitz_certificate: biases must be zero");
}

} // namespace detail

inline LipschitzCertificate lipschitz_certificate(const SirenNet& spatial, const SirenNet& spectral, double zeta) {
    detail::require_certifiable(spatial, spectral);
    if (!(zeta > 0.0)) throw std::invalid_argument("lipschitz_certificate: zeta must be positive");
    LipschitzCertificate cert;
    cert.depth = spatial.depth();
    cert.kappa = spatial.config.omega0;
    cert.zeta = zeta;
    cert.eta = 0.0;
    for (const SirenNet* net : {&spatial, &spectral})
        for (const Eigen::MatrixXd& w : net->weights) cert.eta = std::max(cert.eta, detail::op_one_norm(w));
    cert.delta = std::pow(cert.eta, 2 * cert.depth + 1) * std::pow(cert.kappa, 2 * cert.depth - 2) * cert.zeta;
    return cert;
}

struct LipschitzCheckResult {
    std::int64_t violations = 0;
    double max_ratio = 0.0; // max |df| / (delta * (|ds|_1 + |db|))
    LipschitzCertificate certificate;
};

// Samples coordinate pairs with ||s||_1 <= zeta, |b| <= zeta and verifies
// |f(s1,b1) - f(s2,b2)| <= delta * (||s1-s2||_1 + |b1-b2|). Identical
// coordinate pairs are skipped.
inline LipschitzCheckResult empirical_lipschitz_check(const SirenNet& spatial, const SirenNet& spectral, double zeta,
                                                      std::int64_t samples, std::uint64_t seed) {
    LipschitzCheckResult res;
    res.certificate = lipschitz_certificate(spatial, spectral, zeta);

    SplitMix64 rng(seed);
    const auto draw_spatial = [&]() {
        while (true) {
            const double x = rng.uniform(-zeta, zeta);
            const double y = rng.uniform(-zeta, zeta);
            if (std::abs(x) + std::abs(y) <= zeta) return std::pair<double, double>{x, y};
        }
    };

    Eigen::MatrixXd s_in(2, 2), b_in(2, 1);
    for (std::int64_t i = 0; i < samples; ++i) {
        auto [x1, y1] = draw_spatial();
        auto [x2, y2] = draw_spatial();
        const double b1 = rng.uniform(-zeta, zeta);
        const double b2 = rng.uniform(-zeta, zeta);
        s_in << x1, y1, x2, y2;
        b_in << b1, b2;
        const Eigen::MatrixXd phi = forward(spatial, s_in);
        const Eigen::MatrixXd psi = forward(spectral, b_in);
        const double f1 = phi.row(0).dot(psi.row(0));
        const double f2 = phi.row(1).dot(psi.row(1));
        const double dist = std::abs(x1 - x2) + std::abs(y1 - y2) + std::abs(b1 - b2);
        if (dist == 0.0) continue;
        const double bound = res.certificate.delta * dist;
        const double gap = std::abs(f1 - f2);
        if (gap > bound) ++res.violations;
        if (bound > 0.0) res.max_ratio = std::max(res.max_ratio, gap / bound);
    }
    return res;
}

} // namespace clorf
