// Rollout prediction, error metrics, conserved-quantity tracking, and
// link-graph extraction from the learned alpha matrix.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <utility>
#include <vector>

#include "hamlat/core.hpp"
#include "hamlat/integrate.hpp"
#include "hamlat/models.hpp"

namespace hamlat {

enum class EdgeDirection { Forward, Backward, Tie };  // for edge {i, j} with i < j

struct LinkGraph {
    std::vector<std::pair<int, int>> edges;  // undirected, i < j, sorted
    std::map<std::pair<int, int>, EdgeDirection> directions;
    double tau = 0.0;

    bool has_edge(int i, int j) const {
        if (i > j) std::swap(i, j);
        return std::binary_search(edges.begin(), edges.end(), std::make_pair(i, j));
    }
};

/// Undirected pair {i,j} is a link iff max(|a_ij|, |a_ji|) >= tau * max_offdiag|a|.
/// Scale-free by construction: rescaling alpha by any c > 0 changes nothing.
inline LinkGraph extract_links(const AlphaMatrix& alpha, double tau) {
    if (!(tau > 0.0) || tau > 1.0) throw std::invalid_argument("extract_links: tau in (0, 1] required");
    const double scale = alpha.max_abs_offdiag();
    if (scale == 0.0) throw std::invalid_argument("extract_links: alpha has no off-diagonal scale");
    LinkGraph g;
    g.tau = tau;
    for (int i = 0; i < alpha.dim; ++i)
        for (int j = i + 1; j < alpha.dim; ++j) {
            const double w = std::max(std::abs(alpha.at(i, j)), std::abs(alpha.at(j, i)));
            if (w >= tau * scale) g.edges.emplace_back(i, j);
        }
    return g;
}

/// Orient each link toward the larger |alpha|; exact ties are flagged.
inline LinkGraph direct_links(const AlphaMatrix& alpha, const LinkGraph& links) {
    LinkGraph g = links;
    for (const auto& e : g.edges) {
        const double fw = std::abs(alpha.at(e.first, e.second));
        const double bw = std::abs(alpha.at(e.second, e.first));
        g.directions[e] = fw > bw   ? EdgeDirection::Forward
                          : fw < bw ? EdgeDirection::Backward
                                    : EdgeDirection::Tie;
    }
    return g;
}

/// Edge-list text format: "i j", "i j ->", "i j <-" per line.
inline std::string edge_list_text(const LinkGraph& g) {
    std::ostringstream os;
    for (const auto& e : g.edges) {
        os << e.first << ' ' << e.second;
        auto it = g.directions.find(e);
        if (it != g.directions.end()) {
            if (it->second == EdgeDirection::Forward) os << " ->";
            if (it->second == EdgeDirection::Backward) os << " <-";
        }
        os << '\n';
    }
    return os.str();
}

struct TrajectoryMse {
    Vec per_time;  // sum over particles of (q - q^)^2 + (p - p^)^2
    double mean = 0.0;
};

inline TrajectoryMse trajectory_mse(const Trajectory& pred, const Trajectory& truth) {
    if (pred.states.size() != truth.states.size())
        throw std::invalid_argument("trajectory_mse: misaligned lengths");
    TrajectoryMse out;
    out.per_time.reserve(pred.states.size());
    for (std::size_t k = 0; k < pred.states.size(); ++k) {
        const PhaseState& a = pred.states[k];
        const PhaseState& b = truth.states[k];
        if (a.dim() != b.dim()) throw std::invalid_argument("trajectory_mse: dimension mismatch");
        double s = 0.0;
        for (std::size_t i = 0; i < a.dim(); ++i) {
            const double eq = a.q[i] - b.q[i];
            const double ep = a.p[i] - b.p[i];
            s += eq * eq + ep * ep;
        }
        out.per_time.push_back(s);
        out.mean += s;
    }
    out.mean /= static_cast<double>(out.per_time.size());
    return out;
}

/// Mean over time of (Q(state_t) - Q(reference))^2, reference evaluated at
/// the true initial condition.
inline double conserved_mse(const LatticeSpec& spec, const Trajectory& pred,
                            const ConservedDescriptor& d, const PhaseState& reference) {
    const double ref = conserved_value(spec, d, reference);
    double s = 0.0;
    for (const PhaseState& st : pred.states) {
        const double e = conserved_value(spec, d, st) - ref;
        s += e * e;
    }
    return s / static_cast<double>(pred.states.size());
}

struct MapeResult {
    double value = 0.0;
    std::size_t excluded = 0;  // entries with |truth| < 1e-12, skipped
};

/// Eq-style MAPE over a time-major series: series[t] is the per-particle
/// vector at time t (length 1 for scalar quantities).
inline MapeResult mape(const std::vector<Vec>& pred, const std::vector<Vec>& truth) {
    if (pred.size() != truth.size()) throw std::invalid_argument("mape: shape mismatch");
    MapeResult r;
    double acc_t = 0.0;
    std::size_t used_t = 0;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        if (pred[t].size() != truth[t].size()) throw std::invalid_argument("mape: shape mismatch");
        double acc_i = 0.0;
        std::size_t used_i = 0;
        for (std::size_t i = 0; i < pred[t].size(); ++i) {
            if (std::abs(truth[t][i]) < 1e-12) {
                ++r.excluded;
                continue;
            }
            acc_i += std::abs((pred[t][i] - truth[t][i]) / truth[t][i]);
            ++used_i;
        }
        if (used_i > 0) {
            acc_t += acc_i / static_cast<double>(used_i);
            ++used_t;
        }
    }
    r.value = used_t > 0 ? acc_t / static_cast<double>(used_t) : 0.0;
    return r;
}

/// A learned (or oracle) dynamics model ready for integration.
struct PredictiveModel {
    ModelKind kind = ModelKind::Mlp;
    MlpModel mlp;
    HnnModel hnn;
    SghnModel sghn;
    // injected dynamics (oracle / synthetic fields); bypasses the learned nets
    std::shared_ptr<const Dynamics> injected;
    Scheme injected_scheme = Scheme::Srkn5;

    Dynamics dynamics() const {
        if (injected) return *injected;
        switch (kind) {
            case ModelKind::Mlp:
                return Dynamics::general([m = mlp](const PhaseState& s) { return mlp_field(m, s); });
            case ModelKind::Hnn:
                return Dynamics::general([m = hnn](const PhaseState& s) { return hnn_field(m, s); });
            case ModelKind::Sghn: {
                Dynamics d;
                d.force = [m = sghn](const Vec& q) { return sghn_force(m, q); };
                d.field = [m = sghn](const PhaseState& s) { return sghn_field(m, s); };
                return d;
            }
        }
        throw std::logic_error("PredictiveModel::dynamics");
    }
    /// SGHN fields are separable and take the symplectic integrator; the
    /// baselines are not and fall back to RK4 at the same step size.
    Scheme scheme() const {
        if (injected) return injected_scheme;
        return kind == ModelKind::Sghn ? Scheme::Srkn5 : Scheme::Rk4;
    }

    static PredictiveModel of(MlpModel m) {
        PredictiveModel pm;
        pm.kind = ModelKind::Mlp;
        pm.mlp = std::move(m);
        return pm;
    }
    static PredictiveModel of(HnnModel m) {
        PredictiveModel pm;
        pm.kind = ModelKind::Hnn;
        pm.hnn = std::move(m);
        return pm;
    }
    static PredictiveModel of(SghnModel m) {
        PredictiveModel pm;
        pm.kind = ModelKind::Sghn;
        pm.sghn = std::move(m);
        return pm;
    }
    /// True-field oracle for a spec.
    static PredictiveModel oracle(const LatticeSpec& spec) {
        PredictiveModel pm;
        pm.injected = std::make_shared<Dynamics>(Dynamics::of(spec));
        pm.injected_scheme = Scheme::Srkn5;
        return pm;
    }
    /// Arbitrary injected dynamics (e.g. zero field).
    static PredictiveModel custom(Dynamics d, Scheme s) {
        PredictiveModel pm;
        pm.injected = std::make_shared<Dynamics>(std::move(d));
        pm.injected_scheme = s;
        return pm;
    }
};

/// Integrate the learned field densely at step h and subsample at `stride`
/// for metric alignment.
inline Trajectory rollout(const PredictiveModel& model, const PhaseState& s0, double t_end,
                          double h = 0.0025, int stride = 20) {
    const IntegratorConfig cfg{h, model.scheme()};
    return subsample(integrate(model.dynamics(), s0, t_end, cfg), stride);
}

}  // namespace hamlat
