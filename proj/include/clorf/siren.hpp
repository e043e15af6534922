// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "clorf/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace clorf {

enum class Activation : std::uint8_t {
    Sine = 0,   // sin(omega0 * (W x + c))
    Relu = 1,   // max(0, W x + c)
    ReluPE = 2, // ReLU MLP on a sin/cos positional encoding of the input
};

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Sine: return "sine";
        case Activation::Relu: return "relu";
        case Activation::ReluPE: return "relu_pe";
    }
    return "?";
}

// Frequencies 2^k * pi for k = 0..5, sin and cos per input component.
inline constexpr int kPosEncFrequencies = 6;

struct SirenConfig {
    int in_dim = 1;
    int out_dim = 1;
    std::vector<int> hidden_sizes;
    double omega0 = 30.0;
    Activation activation = Activation::Sine;
    std::uint64_t seed = 0;
};

// Input width of the first weight matrix, after positional encoding if any.
inline int encoded_in_dim(const SirenConfig& cfg) {
    return cfg.activation == Activation::ReluPE ? cfg.in_dim * 2 * kPosEncFrequencies : cfg.in_dim;
}

// Coordinate MLP. weights[i] is (fan_out x fan_in); hidden layers apply the
// activation, the final layer is affine with no activation.
struct SirenNet {
    SirenConfig config;
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    int depth() const { return int(weights.size()); } // number of weight matrices
};

// Per-layer parameter gradients, shapes mirroring SirenNet.
struct SirenGrads {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

inline void validate(const SirenConfig& cfg) {
    if (cfg.in_dim != 1 && cfg.in_dim != 2) throw std::invalid_argument("SirenConfig: in_dim must be 1 or 2");
    if (cfg.out_dim < 1) throw std::invalid_argument("SirenConfig: out_dim must be >= 1");
    if (!(cfg.omega0 > 0.0)) throw std::invalid_argument("SirenConfig: omega0 must be positive");
}

// SIREN-standard initialization: first layer uniform in [-1/in, 1/in], deeper
// layers uniform in [-sqrt(6/fan_in)/omega0, +sqrt(6/fan_in)/omega0], zero
// biases. Deterministic given config.seed.
inline SirenNet siren_init(const SirenConfig& cfg) {
    validate(cfg);
    SirenNet net;
    net.config = cfg;
    std::vector<int> dims;
    dims.push_back(encoded_in_dim(cfg));
    for (int h : cfg.hidden_sizes) {
        if (h < 1) throw std::invalid_argument("SirenConfig: hidden size must be >= 1");
        dims.push_back(h);
    }
    dims.push_back(cfg.out_dim);

    SplitMix64 rng(cfg.seed);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const int fan_in = dims[i], fan_out = dims[i + 1];
        const double bound = i == 0 ? 1.0 / fan_in : std::sqrt(6.0 / fan_in) / cfg.omega0;
        Eigen::MatrixXd w(fan_out, fan_in);
        for (int r = 0; r < fan_out; ++r)
            for (int c = 0; c < fan_in; ++c) w(r, c) = rng.uniform(-bound, bound);
        net.weights.push_back(std::move(w));
        net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return net;
}

namespace detail {

// [sin(2^k pi x), cos(2^k pi x)] for k = 0..5, per input component.
// Scalar libm calls keep each row's encoding independent of batch position.
inline Eigen::MatrixXd positional_encode(const Eigen::MatrixXd& x) {
    Eigen::MatrixXd out(x.rows(), x.cols() * 2 * kPosEncFrequencies);
    for (Eigen::Index c = 0; c < x.cols(); ++c)
        for (int k = 0; k < kPosEncFrequencies; ++k) {
            const double freq = std::ldexp(M_PI, k); // 2^k * pi
            const Eigen::Index base = c * 2 * kPosEncFrequencies + 2 * k;
            out.col(base) = x.col(c).unaryExpr([freq](double v) { return std::sin(freq * v); });
            out.col(base + 1) = x.col(c).unaryExpr([freq](double v) { return std::cos(freq * v); });
        }
    return out;
}

struct ForwardCache {
    Eigen::MatrixXd input;                // post-encoding input, B x d0
    std::vector<Eigen::MatrixXd> pre;     // per hidden layer: W z + c
    std::vector<Eigen::MatrixXd> post;    // per hidden layer: activation output
};

inline Eigen::MatrixXd apply_activation(const SirenNet& net, const Eigen::MatrixXd& pre) {
    if (net.config.activation == Activation::Sine) {
        const double w = net.config.omega0;
        // Scalar evaluation: vectorized sin kernels round tail elements
        // differently from packed ones, which would make a sample's output
        // depend on its position in the batch.
        return pre.unaryExpr([w](double v) { return std::sin(w * v); });
    }
    return pre.array().max(0.0);
}

// Affine layer evaluated one sample at a time. Each output row is a fixed
// function of (weights, bias, that row) alone, so permuting the batch
// permutes the outputs bit-identically.
inline Eigen::MatrixXd affine_per_sample(const Eigen::MatrixXd& w, const Eigen::VectorXd& c,
                                         const Eigen::MatrixXd& z) {
    Eigen::MatrixXd out(z.rows(), w.rows());
    Eigen::VectorXd x(z.cols()), y(w.rows());
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        x = z.row(r).transpose();
        y.noalias() = w * x;
        out.row(r) = (y + c).transpose();
    }
    return out;
}

inline Eigen::MatrixXd forward_impl(const SirenNet& net, const Eigen::MatrixXd& inputs, ForwardCache* cache) {
    if (inputs.cols() != net.config.in_dim)
        throw std::invalid_argument("siren forward: input dim " + std::to_string(inputs.cols()) +
                                    " != configured " + std::to_string(net.config.in_dim));
    Eigen::MatrixXd z = net.config.activation == Activation::ReluPE ? positional_encode(inputs) : inputs;
    if (cache) cache->input = z;
    const int n_hidden = net.depth() - 1;
    for (int i = 0; i < n_hidden; ++i) {
        Eigen::MatrixXd pre = affine_per_sample(net.weights[i], net.biases[i], z);
        z = apply_activation(net, pre);
        if (cache) {
            cache->pre.push_back(std::move(pre));
            cache->post.push_back(z);
        }
    }
    return affine_per_sample(net.weights.back(), net.biases.back(), z);
}

inline SirenGrads backward_impl(const SirenNet& net, const ForwardCache& cache, const Eigen::MatrixXd& upstream) {
    const int d = net.depth();
    SirenGrads g;
    g.weights.resize(d);
    g.biases.resize(d);

    const Eigen::MatrixXd& last_in = d > 1 ? cache.post.back() : cache.input;
    g.weights[d - 1] = upstream.transpose() * last_in;
    g.biases[d - 1] = upstream.colwise().sum().transpose();

    Eigen::MatrixXd grad = upstream * net.weights[d - 1];
    for (int i = d - 2; i >= 0; --i) {
        Eigen::MatrixXd local; // d(post)/d(pre)
        if (net.config.activation == Activation::Sine)
            local = net.config.omega0 * (net.config.omega0 * cache.pre[i].array()).cos();
        else
            local = (cache.pre[i].array() > 0.0).cast<double>();
        const Eigen::MatrixXd gpre = grad.array() * local.array();
        const Eigen::MatrixXd& layer_in = i > 0 ? cache.post[i - 1] : cache.input;
        g.weights[i] = gpre.transpose() * layer_in;
        g.biases[i] = gpre.colwise().sum().transpose();
        if (i > 0) grad = gpre * net.weights[i];
    }
    return g;
}

} // namespace detail

// Batched evaluation, inputs (B x in_dim) -> outputs (B x out_dim).
inline Eigen::MatrixXd forward(const SirenNet& net, const Eigen::MatrixXd& inputs) {
    return detail::forward_impl(net, inputs, nullptr);
}

// Gradient of <upstream, forward(net, inputs)> w.r.t. every parameter,
// accumulated over the batch.
inline SirenGrads backward(const SirenNet& net, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& upstream) {
    if (upstream.cols() != net.config.out_dim || upstream.rows() != inputs.rows())
        throw std::invalid_argument("siren backward: upstream shape mismatch");
    detail::ForwardCache cache;
    detail::forward_impl(net, inputs, &cache);
    return detail::backward_impl(net, cache, upstream);
}

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t t = 0;
    std::vector<Eigen::MatrixXd> m_w, v_w;
    std::vector<Eigen::VectorXd> m_c, v_c;
};

inline AdamState adam_init(const SirenNet& net, double lr) {
    AdamState s;
    s.lr = lr;
    for (int i = 0; i < net.depth(); ++i) {
        s.m_w.push_back(Eigen::MatrixXd::Zero(net.weights[i].rows(), net.weights[i].cols()));
        s.v_w.push_back(Eigen::MatrixXd::Zero(net.weights[i].rows(), net.weights[i].cols()));
        s.m_c.push_back(Eigen::VectorXd::Zero(net.biases[i].size()));
        s.v_c.push_back(Eigen::VectorXd::Zero(net.biases[i].size()));
    }
    return s;
}

namespace detail {

// Elementwise Adam with bias correction; t must already be incremented.
template <typename Param, typename Grad, typename Moment>
void adam_update_array(Param& p, const Grad& g, Moment& m, Moment& v, const AdamState& s) {
    m = s.beta1 * m + (1.0 - s.beta1) * g;
    v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
    const double mc = 1.0 - std::pow(s.beta1, double(s.t));
    const double vc = 1.0 - std::pow(s.beta2, double(s.t));
    p.array() -= s.lr * (m.array() / mc) / ((v.array() / vc).sqrt() + s.eps);
}

inline void check_finite_grads(const SirenGrads& grads, std::int64_t step) {
    for (std::size_t i = 0; i < grads.weights.size(); ++i) {
        if (!grads.weights[i].allFinite() || !grads.biases[i].allFinite()) {
            Eigen::Index r = -1, c = -1;
            for (Eigen::Index rr = 0; rr < grads.weights[i].rows() && r < 0; ++rr)
                for (Eigen::Index cc = 0; cc < grads.weights[i].cols(); ++cc)
                    if (!std::isfinite(grads.weights[i](rr, cc))) { r = rr; c = cc; break; }
            throw std::runtime_error("adam_step: non-finite gradient at step " + std::to_string(step) +
                                     ", layer " + std::to_string(i) + ", entry (" + std::to_string(r) + "," +
                                     std::to_string(c) + ")");
        }
    }
}

} // namespace detail

// Standard Adam update over every parameter of the net; advances state.t.
inline void adam_step(AdamState& state, SirenNet& net, const SirenGrads& grads) {
    if (grads.weights.size() != net.weights.size()) throw std::invalid_argument("adam_step: gradient shape mismatch");
    state.t += 1;
    detail::check_finite_grads(grads, state.t);
    for (int i = 0; i < net.depth(); ++i) {
        detail::adam_update_array(net.weights[i], grads.weights[i], state.m_w[i], state.v_w[i], state);
        detail::adam_update_array(net.biases[i], grads.biases[i], state.m_c[i], state.v_c[i], state);
    }
}

} // namespace clorf
