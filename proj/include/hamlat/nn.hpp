// Small dense networks used by all learnable models. Two evaluation paths:
// a tape path for training (differentiable through parameters, twice) and a
// closed-form path for fast rollouts.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "hamlat/autodiff.hpp"

namespace hamlat {

/// splitmix64; used everywhere a derived deterministic stream is needed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic uniform generator independent of the standard library's
/// distribution implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next_u64() { return splitmix64(state_); }
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
    /// Child stream with an independent state.
    Rng fork(std::uint64_t salt) {
        std::uint64_t s = state_ ^ (0x517cc1b727220a95ULL * (salt + 1));
        return Rng(splitmix64(s));
    }

  private:
    std::uint64_t state_;
};

enum class Activation { Tanh, Silu, Gelu };

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Silu: return "silu";
        case Activation::Gelu: return "gelu";
    }
    return {};
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "silu") return Activation::Silu;
    if (s == "gelu") return Activation::Gelu;
    throw std::invalid_argument("unknown activation '" + s + "' (allowed: tanh, silu, gelu)");
}

struct MlpConfig {
    int depth = 1;  // hidden layers
    int width = 32;
    Activation act = Activation::Tanh;
    int in_dim = 1;
    int out_dim = 1;

    void validate() const {
        if (depth < 1 || width < 1 || in_dim < 1 || out_dim < 1)
            throw std::invalid_argument("MlpConfig: depth, width, dims must be >= 1");
    }
};

/// Named parameter array; the unit of optimizer state and checkpointing.
struct Tensor {
    std::string name;
    int rows = 0, cols = 0;
    Vec data;

    std::size_t size() const { return data.size(); }
};

struct Mlp {
    MlpConfig cfg;
    std::vector<Tensor> params;  // W0, b0, W1, b1, ...

    static Mlp init(const MlpConfig& cfg, Rng& rng, const std::string& prefix = "mlp") {
        cfg.validate();
        Mlp m;
        m.cfg = cfg;
        int in = cfg.in_dim;
        for (int l = 0; l <= cfg.depth; ++l) {
            const int out = (l == cfg.depth) ? cfg.out_dim : cfg.width;
            const double bound = 1.0 / std::sqrt(static_cast<double>(in));
            Tensor w{prefix + ".w" + std::to_string(l), out, in, Vec(static_cast<std::size_t>(out) * in)};
            for (double& x : w.data) x = rng.uniform(-bound, bound);
            Tensor b{prefix + ".b" + std::to_string(l), out, 1, Vec(static_cast<std::size_t>(out), 0.0)};
            m.params.push_back(std::move(w));
            m.params.push_back(std::move(b));
            in = out;
        }
        return m;
    }
};

namespace detail {
inline double sigmoid_fn_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double act_fwd(Activation a, double x) {
    switch (a) {
        case Activation::Tanh: return std::tanh(x);
        case Activation::Silu: return x * sigmoid_fn_scalar(x);
        case Activation::Gelu: return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
    }
    return 0.0;
}
inline double act_deriv(Activation a, double x) {
    switch (a) {
        case Activation::Tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case Activation::Silu: {
            const double s = sigmoid_fn_scalar(x);
            return s * (1.0 + x * (1.0 - s));
        }
        case Activation::Gelu: {
            const double phi = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
            const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
            return phi + x * pdf;
        }
    }
    return 0.0;
}
}  // namespace detail

/// Lift parameters onto a tape as leaves, in declaration order.
inline std::vector<ad::Value> lift_params(ad::Tape& t, const std::vector<Tensor>& params) {
    std::vector<ad::Value> out;
    out.reserve(params.size());
    for (const Tensor& p : params) out.push_back(t.leaf(p.rows, p.cols, p.data));
    return out;
}

inline ad::Value apply_activation(Activation a, const ad::Value& x) {
    switch (a) {
        case Activation::Tanh: return ad::tanh(x);
        case Activation::Silu: return ad::silu(x);
        case Activation::Gelu: return ad::gelu(x);
    }
    throw std::logic_error("apply_activation");
}

/// Batched forward pass: X is (in_dim x batch), result (out_dim x batch).
/// `params` must be the lifted tensors of the Mlp, in order.
inline ad::Value mlp_apply(const MlpConfig& cfg, std::span<const ad::Value> params,
                           const ad::Value& x) {
    if (x.rows() != cfg.in_dim) throw std::invalid_argument("mlp_apply: input dimension mismatch");
    if (params.size() != static_cast<std::size_t>(2 * (cfg.depth + 1)))
        throw std::invalid_argument("mlp_apply: parameter count mismatch");
    ad::Value h = x;
    for (int l = 0; l <= cfg.depth; ++l) {
        h = ad::add_col(ad::matmul(params[2 * l], h), params[2 * l + 1]);
        if (l < cfg.depth) h = apply_activation(cfg.act, h);
    }
    return h;
}

/// Plain forward pass, no tape. `out` must have out_dim entries.
inline void mlp_eval(const Mlp& m, std::span<const double> in, std::span<double> out) {
    const MlpConfig& cfg = m.cfg;
    Vec h(in.begin(), in.end());
    Vec next;
    for (int l = 0; l <= cfg.depth; ++l) {
        const Tensor& w = m.params[2 * l];
        const Tensor& b = m.params[2 * l + 1];
        next.assign(static_cast<std::size_t>(w.rows), 0.0);
        for (int i = 0; i < w.rows; ++i) {
            double s = b.data[i];
            for (int j = 0; j < w.cols; ++j) s += w.data[static_cast<std::size_t>(i) * w.cols + j] * h[j];
            next[i] = s;
        }
        if (l < cfg.depth)
            for (double& x : next) x = detail::act_fwd(cfg.act, x);
        h.swap(next);
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = h[i];
}

/// Forward value and input-gradient of a scalar-output network, closed form.
/// Returns f(in) and writes df/din into grad_in.
inline double mlp_eval_grad(const Mlp& m, std::span<const double> in, std::span<double> grad_in) {
    const MlpConfig& cfg = m.cfg;
    if (cfg.out_dim != 1) throw std::invalid_argument("mlp_eval_grad: scalar output required");
    // forward, saving pre-activations
    std::vector<Vec> pre(cfg.depth + 1);
    Vec h(in.begin(), in.end());
    for (int l = 0; l <= cfg.depth; ++l) {
        const Tensor& w = m.params[2 * l];
        const Tensor& b = m.params[2 * l + 1];
        Vec z(static_cast<std::size_t>(w.rows));
        for (int i = 0; i < w.rows; ++i) {
            double s = b.data[i];
            for (int j = 0; j < w.cols; ++j) s += w.data[static_cast<std::size_t>(i) * w.cols + j] * h[j];
            z[i] = s;
        }
        pre[l] = z;
        if (l < cfg.depth)
            for (double& x : z) x = detail::act_fwd(cfg.act, x);
        h.swap(z);
    }
    const double value = h[0];
    // backward to the input
    Vec g{1.0};
    for (int l = cfg.depth; l >= 0; --l) {
        const Tensor& w = m.params[2 * l];
        Vec gin(static_cast<std::size_t>(w.cols), 0.0);
        for (int i = 0; i < w.rows; ++i)
            for (int j = 0; j < w.cols; ++j)
                gin[j] += w.data[static_cast<std::size_t>(i) * w.cols + j] * g[i];
        if (l > 0)
            for (int j = 0; j < w.cols; ++j) gin[j] *= detail::act_deriv(cfg.act, pre[l - 1][j]);
        g.swap(gin);
    }
    for (std::size_t i = 0; i < grad_in.size(); ++i) grad_in[i] = g[i];
    return value;
}

}  // namespace hamlat
