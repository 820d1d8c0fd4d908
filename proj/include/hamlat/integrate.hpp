// Explicit symplectic Runge-Kutta-Nystrom integration for separable fields,
// classical RK4 for everything else, and trajectory subsampling.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>

#include "hamlat/core.hpp"

namespace hamlat {

enum class Scheme { Srkn5, Rk4 };

struct IntegratorConfig {
    double h = 0.0025;
    Scheme scheme = Scheme::Srkn5;
};

struct Trajectory {
    double t0 = 0.0;
    double dt_sample = 0.0;
    std::vector<PhaseState> states;

    std::size_t size() const { return states.size(); }
    double time_at(std::size_t k) const { return t0 + static_cast<double>(k) * dt_sample; }
};

struct IntegrationError : std::runtime_error {
    std::size_t step = 0;
    IntegrationError(std::size_t step_, const std::string& what_)
        : std::runtime_error(what_ + " at step " + std::to_string(step_)), step(step_) {}
};

using ForceFn = std::function<Vec(const Vec&)>;
using FieldFn = std::function<std::pair<Vec, Vec>(const PhaseState&)>;

namespace detail {
// McLachlan 5-stage, order-4 explicit symplectic RKN coefficient pair
// for q' = p, p' = f(q). One step is five (drift, kick) sub-steps; the
// last kick weight is zero but the stage count (and force evaluation
// count) stays at five.
struct Srkn5Coeffs {
    double a[5];
    double b[5];
    Srkn5Coeffs() {
        const double z = std::sqrt(7.0 / 8.0) / 3.0;
        a[0] = 0.5 - z;
        a[1] = -1.0 / 3.0 + z;
        a[2] = 2.0 / 3.0;
        a[3] = a[1];
        a[4] = a[0];
        b[0] = 1.0;
        b[1] = -0.5;
        b[2] = -0.5;
        b[3] = 1.0;
        b[4] = 0.0;
    }
};
}  // namespace detail

/// One SRKN step of size h; exactly five force evaluations.
template <typename Force>
PhaseState srkn5_step(Force&& force, const PhaseState& s, double h) {
    static const detail::Srkn5Coeffs c;
    PhaseState out = s;
    const std::size_t d = out.dim();
    for (int l = 0; l < 5; ++l) {
        for (std::size_t i = 0; i < d; ++i) out.q[i] += h * c.a[l] * out.p[i];
        const Vec f = force(out.q);
        if (f.size() != d) throw std::invalid_argument("srkn5_step: force dimension mismatch");
        for (std::size_t i = 0; i < d; ++i) out.p[i] += h * c.b[l] * f[i];
    }
    return out;
}

/// One classical RK4 step on a general field (dq, dp) = field(state).
template <typename Field>
PhaseState rk4_step(Field&& field, const PhaseState& s, double h) {
    const std::size_t d = s.dim();
    auto axpy_state = [&](const PhaseState& base, double c, const std::pair<Vec, Vec>& k) {
        PhaseState r = base;
        for (std::size_t i = 0; i < d; ++i) {
            r.q[i] += c * k.first[i];
            r.p[i] += c * k.second[i];
        }
        return r;
    };
    const auto k1 = field(s);
    const auto k2 = field(axpy_state(s, 0.5 * h, k1));
    const auto k3 = field(axpy_state(s, 0.5 * h, k2));
    const auto k4 = field(axpy_state(s, h, k3));
    PhaseState out = s;
    for (std::size_t i = 0; i < d; ++i) {
        out.q[i] += h / 6.0 * (k1.first[i] + 2.0 * k2.first[i] + 2.0 * k3.first[i] + k4.first[i]);
        out.p[i] += h / 6.0 * (k1.second[i] + 2.0 * k2.second[i] + 2.0 * k3.second[i] + k4.second[i]);
    }
    return out;
}

/// Separable or general dynamics, depending on which callback is set.
struct Dynamics {
    ForceFn force;  // used by Srkn5
    FieldFn field;  // used by Rk4

    static Dynamics separable(ForceFn f) { return {std::move(f), nullptr}; }
    static Dynamics general(FieldFn f) { return {nullptr, std::move(f)}; }
    static Dynamics of(const LatticeSpec& spec) {
        return {[spec](const Vec& q) { return hamlat::force(spec, q); },
                [spec](const PhaseState& s) { return vector_field(spec, s); }};
    }
};

/// Dense trajectory at spacing cfg.h, initial state included.
inline Trajectory integrate(const Dynamics& dyn, const PhaseState& s0, double t_end,
                            const IntegratorConfig& cfg = {}) {
    if (!(t_end > 0.0) || !(cfg.h > 0.0)) throw std::invalid_argument("integrate: t_end, h must be > 0");
    const double steps_real = t_end / cfg.h;
    const auto steps = static_cast<std::int64_t>(std::llround(steps_real));
    if (std::abs(steps_real - static_cast<double>(steps)) > 1e-9 * steps_real + 1e-12)
        throw std::invalid_argument("integrate: t_end is not an integer multiple of h");

    Trajectory traj;
    traj.t0 = 0.0;
    traj.dt_sample = cfg.h;
    traj.states.reserve(static_cast<std::size_t>(steps) + 1);
    traj.states.push_back(s0);
    PhaseState s = s0;
    for (std::int64_t k = 0; k < steps; ++k) {
        if (cfg.scheme == Scheme::Srkn5) {
            if (!dyn.force) throw std::invalid_argument("integrate: Srkn5 needs separable dynamics");
            s = srkn5_step(dyn.force, s, cfg.h);
        } else {
            if (!dyn.field) throw std::invalid_argument("integrate: Rk4 needs a field");
            s = rk4_step(dyn.field, s, cfg.h);
        }
        if (!s.finite()) throw IntegrationError(static_cast<std::size_t>(k + 1), "non-finite state");
        traj.states.push_back(s);
    }
    return traj;
}

/// Every stride-th state; retained states are untouched.
inline Trajectory subsample(const Trajectory& traj, int stride) {
    if (stride < 1) throw std::invalid_argument("subsample: stride >= 1 required");
    Trajectory out;
    out.t0 = traj.t0;
    out.dt_sample = traj.dt_sample * stride;
    for (std::size_t k = 0; k < traj.states.size(); k += static_cast<std::size_t>(stride))
        out.states.push_back(traj.states[k]);
    return out;
}

}  // namespace hamlat
