// The three learnable dynamics models: MLP vector field, Hamiltonian neural
// network, and the separable graph Hamiltonian network with trainable alpha.
#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "hamlat/core.hpp"
#include "hamlat/nn.hpp"

namespace hamlat {

enum class ModelKind { Mlp, Hnn, Sghn };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Mlp: return "mlp";
        case ModelKind::Hnn: return "hnn";
        case ModelKind::Sghn: return "sghn";
    }
    return {};
}

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "mlp") return ModelKind::Mlp;
    if (s == "hnn") return ModelKind::Hnn;
    if (s == "sghn") return ModelKind::Sghn;
    throw std::invalid_argument("unknown model kind: " + s);
}

/// Baseline: maps (q, p) directly to (dq, dp).
struct MlpModel {
    int dim = 0;
    Mlp net;  // 2D -> 2D

    static MlpModel init(int dim, int depth, int width, Activation act, std::uint64_t seed) {
        MlpModel m;
        m.dim = dim;
        Rng rng(seed);
        m.net = Mlp::init({depth, width, act, 2 * dim, 2 * dim}, rng, "net");
        return m;
    }
    std::vector<Tensor*> parameters() {
        std::vector<Tensor*> out;
        for (Tensor& t : net.params) out.push_back(&t);
        return out;
    }
};

/// Learns a scalar H(q, p); the field is the symplectic gradient.
struct HnnModel {
    int dim = 0;
    Mlp net;  // 2D -> 1

    static HnnModel init(int dim, int depth, int width, Activation act, std::uint64_t seed) {
        HnnModel m;
        m.dim = dim;
        Rng rng(seed);
        m.net = Mlp::init({depth, width, act, 2 * dim, 1}, rng, "net");
        return m;
    }
    std::vector<Tensor*> parameters() {
        std::vector<Tensor*> out;
        for (Tensor& t : net.params) out.push_back(&t);
        return out;
    }
};

/// Trainable pairwise interaction weights, diagonal pinned at zero.
struct AlphaMatrix {
    int dim = 0;
    Vec a;  // row-major dim x dim

    AlphaMatrix() = default;
    explicit AlphaMatrix(int d) : dim(d), a(static_cast<std::size_t>(d) * d, 0.0) {}

    double at(int i, int j) const { return a[static_cast<std::size_t>(i) * dim + j]; }
    double max_abs_offdiag() const {
        double m = 0.0;
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                if (i != j) m = std::max(m, std::abs(at(i, j)));
        return m;
    }
};

struct SghnConfig {
    int depth = 1;
    int width = 32;
    Activation act = Activation::Tanh;
};

/// Separable graph Hamiltonian model:
///   H = sum_i t(p_i) + sum_i u(q_i) + sum_{(i,j) in mask, i != j} alpha_ij * v(q_i, q_j)
/// with shared node nets t, u and a shared ordered-pair edge net v.
struct SghnModel {
    int dim = 0;
    SghnConfig cfg;
    Mlp t_net;  // 1 -> 1, kinetic
    Mlp u_net;  // 1 -> 1, on-site
    Mlp v_net;  // 2 -> 1, interaction on ordered pairs
    Tensor alpha;                    // dim x dim, diag fixed 0
    std::vector<std::uint8_t> edge_mask;  // dim x dim, diag 0

    static SghnModel init(int dim, const SghnConfig& cfg, std::uint64_t seed) {
        if (dim < 2) throw std::invalid_argument("SghnModel: dim >= 2 required");
        SghnModel m;
        m.dim = dim;
        m.cfg = cfg;
        Rng rng(seed);
        Rng rt = rng.fork(1), ru = rng.fork(2), rv = rng.fork(3), ra = rng.fork(4);
        m.t_net = Mlp::init({cfg.depth, cfg.width, cfg.act, 1, 1}, rt, "t");
        m.u_net = Mlp::init({cfg.depth, cfg.width, cfg.act, 1, 1}, ru, "u");
        m.v_net = Mlp::init({cfg.depth, cfg.width, cfg.act, 2, 1}, rv, "v");
        m.alpha = Tensor{"alpha", dim, dim, Vec(static_cast<std::size_t>(dim) * dim, 0.0)};
        m.edge_mask.assign(static_cast<std::size_t>(dim) * dim, 0);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                if (i != j) {
                    m.alpha.data[static_cast<std::size_t>(i) * dim + j] = ra.uniform(-0.1, 0.1);
                    m.edge_mask[static_cast<std::size_t>(i) * dim + j] = 1;
                }
        return m;
    }

    /// Ordered masked pairs, row-major order.
    std::vector<std::pair<int, int>> edges() const {
        std::vector<std::pair<int, int>> out;
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                if (i != j && edge_mask[static_cast<std::size_t>(i) * dim + j]) out.emplace_back(i, j);
        return out;
    }

    /// Zero alpha outside the mask (and on the diagonal).
    void apply_mask() {
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j)
                if (i == j || !edge_mask[static_cast<std::size_t>(i) * dim + j])
                    alpha.data[static_cast<std::size_t>(i) * dim + j] = 0.0;
    }

    std::vector<Tensor*> parameters() {
        std::vector<Tensor*> out;
        for (Tensor& t : t_net.params) out.push_back(&t);
        for (Tensor& t : u_net.params) out.push_back(&t);
        for (Tensor& t : v_net.params) out.push_back(&t);
        out.push_back(&alpha);
        return out;
    }
};

inline std::pair<Vec, Vec> mlp_field(const MlpModel& m, const PhaseState& s) {
    const std::size_t d = s.dim();
    if (static_cast<int>(d) != m.dim) throw std::invalid_argument("mlp_field: dimension mismatch");
    Vec in(2 * d);
    std::copy(s.q.begin(), s.q.end(), in.begin());
    std::copy(s.p.begin(), s.p.end(), in.begin() + static_cast<std::ptrdiff_t>(d));
    Vec out(2 * d);
    mlp_eval(m.net, in, out);
    return {Vec(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(d)),
            Vec(out.begin() + static_cast<std::ptrdiff_t>(d), out.end())};
}

/// dq = dH/dp, dp = -dH/dq of the learned scalar.
inline std::pair<Vec, Vec> hnn_field(const HnnModel& m, const PhaseState& s) {
    const std::size_t d = s.dim();
    if (static_cast<int>(d) != m.dim) throw std::invalid_argument("hnn_field: dimension mismatch");
    Vec in(2 * d);
    std::copy(s.q.begin(), s.q.end(), in.begin());
    std::copy(s.p.begin(), s.p.end(), in.begin() + static_cast<std::ptrdiff_t>(d));
    Vec g(2 * d);
    mlp_eval_grad(m.net, in, g);
    Vec dq(g.begin() + static_cast<std::ptrdiff_t>(d), g.end());
    Vec dp(d);
    for (std::size_t i = 0; i < d; ++i) dp[i] = -g[i];
    return {dq, dp};
}

inline double hnn_energy(const HnnModel& m, const PhaseState& s) {
    const std::size_t d = s.dim();
    Vec in(2 * d);
    std::copy(s.q.begin(), s.q.end(), in.begin());
    std::copy(s.p.begin(), s.p.end(), in.begin() + static_cast<std::ptrdiff_t>(d));
    double out;
    mlp_eval(m.net, in, std::span<double>(&out, 1));
    return out;
}

inline double sghn_energy(const SghnModel& m, const PhaseState& s) {
    if (static_cast<int>(s.dim()) != m.dim) throw std::invalid_argument("sghn_energy: dimension mismatch");
    double h = 0.0, y = 0.0;
    for (int i = 0; i < m.dim; ++i) {
        mlp_eval(m.t_net, std::span<const double>(&s.p[i], 1), std::span<double>(&y, 1));
        h += y;
        mlp_eval(m.u_net, std::span<const double>(&s.q[i], 1), std::span<double>(&y, 1));
        h += y;
    }
    double in[2];
    for (const auto& [i, j] : m.edges()) {
        in[0] = s.q[i];
        in[1] = s.q[j];
        mlp_eval(m.v_net, in, std::span<double>(&y, 1));
        h += m.alpha.data[static_cast<std::size_t>(i) * m.dim + j] * y;
    }
    return h;
}

/// -dV/dq of the learned separable energy; independent of p by construction.
inline Vec sghn_force(const SghnModel& m, const Vec& q) {
    if (static_cast<int>(q.size()) != m.dim) throw std::invalid_argument("sghn_force: dimension mismatch");
    Vec dp(q.size(), 0.0);
    double g1;
    for (int i = 0; i < m.dim; ++i) {
        mlp_eval_grad(m.u_net, std::span<const double>(&q[i], 1), std::span<double>(&g1, 1));
        dp[i] -= g1;
    }
    double in[2], g2[2];
    for (const auto& [i, j] : m.edges()) {
        in[0] = q[i];
        in[1] = q[j];
        mlp_eval_grad(m.v_net, in, g2);
        const double a = m.alpha.data[static_cast<std::size_t>(i) * m.dim + j];
        dp[i] -= a * g2[0];
        dp[j] -= a * g2[1];
    }
    return dp;
}

inline std::pair<Vec, Vec> sghn_field(const SghnModel& m, const PhaseState& s) {
    if (static_cast<int>(s.dim()) != m.dim) throw std::invalid_argument("sghn_field: dimension mismatch");
    Vec dq(s.dim());
    double g1;
    for (int i = 0; i < m.dim; ++i) {
        mlp_eval_grad(m.t_net, std::span<const double>(&s.p[i], 1), std::span<double>(&g1, 1));
        dq[i] = g1;
    }
    return {std::move(dq), sghn_force(m, s.q)};
}

/// Read-only copy of the current alpha, diagonal zero.
inline AlphaMatrix extract_alpha(const SghnModel& m) {
    AlphaMatrix a;
    a.dim = m.dim;
    a.a = m.alpha.data;
    for (int i = 0; i < m.dim; ++i) a.a[static_cast<std::size_t>(i) * m.dim + i] = 0.0;
    return a;
}

}  // namespace hamlat
