// Lattice Hamiltonians, analytic forces, and conserved quantities.
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hamlat {

using Vec = std::vector<double>;

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

/// Canonical phase-space point (q, p), m = 1 throughout.
struct PhaseState {
    Vec q;
    Vec p;

    PhaseState() = default;
    PhaseState(Vec q_, Vec p_) : q(std::move(q_)), p(std::move(p_)) {
        if (q.size() != p.size())
            throw std::invalid_argument("PhaseState: len(q) != len(p)");
    }
    static PhaseState zeros(std::size_t d) { return PhaseState(Vec(d, 0.0), Vec(d, 0.0)); }

    std::size_t dim() const { return q.size(); }
    bool finite() const { return all_finite(q) && all_finite(p); }
};

/// The canonical symplectic block matrix J = [[0, I], [-I, 0]] for D particles.
struct CanonicalStructure {
    int dof;  // particle count D; J is 2D x 2D

    explicit CanonicalStructure(int d) : dof(d) {
        if (d < 1) throw std::invalid_argument("CanonicalStructure: dof < 1");
    }

    double entry(int r, int c) const {
        if (r < dof && c >= dof) return (c - dof == r) ? 1.0 : 0.0;
        if (r >= dof && c < dof) return (r - dof == c) ? -1.0 : 0.0;
        return 0.0;
    }

    // z -> J z
    Vec apply(const Vec& z) const {
        const std::size_t d = static_cast<std::size_t>(dof);
        if (z.size() != 2 * d) throw std::invalid_argument("CanonicalStructure: bad vector length");
        Vec out(2 * d);
        for (std::size_t i = 0; i < d; ++i) {
            out[i] = z[d + i];
            out[d + i] = -z[i];
        }
        return out;
    }
};

enum class LatticeKind { FK, Rotator, Toda, FkToda, FputToda, KgLri, Fk2d };

inline std::string to_string(LatticeKind k) {
    switch (k) {
        case LatticeKind::FK: return "fk";
        case LatticeKind::Rotator: return "rotator";
        case LatticeKind::Toda: return "toda";
        case LatticeKind::FkToda: return "fk_toda";
        case LatticeKind::FputToda: return "fput_toda";
        case LatticeKind::KgLri: return "kg_lri";
        case LatticeKind::Fk2d: return "fk2d";
    }
    throw std::logic_error("unknown LatticeKind");
}

inline LatticeKind lattice_kind_from_string(const std::string& s) {
    if (s == "fk") return LatticeKind::FK;
    if (s == "rotator") return LatticeKind::Rotator;
    if (s == "toda") return LatticeKind::Toda;
    if (s == "fk_toda") return LatticeKind::FkToda;
    if (s == "fput_toda") return LatticeKind::FputToda;
    if (s == "kg_lri") return LatticeKind::KgLri;
    if (s == "fk2d") return LatticeKind::Fk2d;
    throw std::invalid_argument("unknown lattice kind: " + s);
}

/// Which lattice system, its size and physical parameters. Boundary
/// conditions are periodic in every case; 2D states are flattened
/// row-major (index = i*cols + j).
struct LatticeSpec {
    LatticeKind kind = LatticeKind::FK;
    int n = 0;         // particle count (1D); ignored for Fk2d
    int rows = 0;      // Fk2d only
    int cols = 0;      // Fk2d only
    double mu = 0.0;   // hybrid mixing weight
    double a = 1.0;    // coupling (KgLri, Fk2d)
    double b = 1.0;    // coupling (KgLri, Fk2d)
    double rho = 1.0;  // rest length (Fk2d)

    static LatticeSpec fk(int n) { return make(LatticeKind::FK, n); }
    static LatticeSpec rotator(int n) { return make(LatticeKind::Rotator, n); }
    static LatticeSpec toda(int n) { return make(LatticeKind::Toda, n); }
    static LatticeSpec fk_toda(int n, double mu) {
        LatticeSpec s = make(LatticeKind::FkToda, n);
        s.mu = mu;
        s.validate();
        return s;
    }
    static LatticeSpec fput_toda(int n, double mu) {
        LatticeSpec s = make(LatticeKind::FputToda, n);
        s.mu = mu;
        s.validate();
        return s;
    }
    static LatticeSpec kg_lri(int n, double a = 1.0, double b = 1.0) {
        LatticeSpec s = make(LatticeKind::KgLri, n);
        s.a = a;
        s.b = b;
        s.validate();
        return s;
    }
    static LatticeSpec fk2d(int rows, int cols, double a = 1.0, double b = 1.0, double rho = 1.0) {
        LatticeSpec s;
        s.kind = LatticeKind::Fk2d;
        s.rows = rows;
        s.cols = cols;
        s.a = a;
        s.b = b;
        s.rho = rho;
        s.validate();
        return s;
    }

    int dof() const { return kind == LatticeKind::Fk2d ? rows * cols : n; }

    void validate() const {
        if (kind == LatticeKind::Fk2d) {
            if (rows < 3 || cols < 3) throw std::invalid_argument("LatticeSpec: 2D grid needs rows,cols >= 3");
            if (a <= 0.0 || b <= 0.0) throw std::invalid_argument("LatticeSpec: fk2d needs a > 0, b > 0");
        } else {
            if (n < 3) throw std::invalid_argument("LatticeSpec: n >= 3 required");
        }
        if (kind == LatticeKind::KgLri && (a <= 0.0 || b < 0.0))
            throw std::invalid_argument("LatticeSpec: kg_lri needs a > 0, b >= 0");
        if (kind == LatticeKind::FkToda || kind == LatticeKind::FputToda) {
            if (mu < 0.0 || mu > 1.0) throw std::invalid_argument("LatticeSpec: mu must lie in [0,1]");
        }
    }

  private:
    static LatticeSpec make(LatticeKind k, int n) {
        LatticeSpec s;
        s.kind = k;
        s.n = n;
        s.validate();
        return s;
    }
};

namespace detail {
inline int pidx(int i, int n) { return ((i % n) + n) % n; }

inline void check_state(const LatticeSpec& spec, const PhaseState& s) {
    if (static_cast<int>(s.dim()) != spec.dof())
        throw std::invalid_argument("state dimension does not match spec");
    if (!s.finite()) throw std::invalid_argument("non-finite state");
}

inline double potential_1d(const LatticeSpec& spec, const Vec& q) {
    const int n = spec.n;
    double v = 0.0;
    switch (spec.kind) {
        case LatticeKind::FK:
            for (int i = 0; i < n; ++i) {
                const double dq = q[pidx(i + 1, n)] - q[i];
                v += 0.5 * dq * dq + 1.0 - std::cos(q[i]);
            }
            break;
        case LatticeKind::Rotator:
            for (int i = 0; i < n; ++i) {
                const double dq = q[pidx(i + 1, n)] - q[i];
                v += 0.5 * dq * dq + 1.0 - std::cos(dq);
            }
            break;
        case LatticeKind::Toda:
            for (int i = 0; i < n; ++i) v += std::exp(q[i] - q[pidx(i + 1, n)]);
            break;
        case LatticeKind::FkToda:
            for (int i = 0; i < n; ++i) {
                const double dq = q[pidx(i + 1, n)] - q[i];
                v += spec.mu * std::exp(-dq) +
                     (1.0 - spec.mu) * (0.5 * dq * dq + 1.0 - std::cos(q[i]));
            }
            break;
        case LatticeKind::FputToda:
            for (int i = 0; i < n; ++i) {
                const double dq = q[pidx(i + 1, n)] - q[i];
                v += spec.mu * std::exp(-dq) +
                     (1.0 - spec.mu) * (0.5 * dq * dq + dq * dq * dq / 6.0);
            }
            break;
        case LatticeKind::KgLri:
            for (int i = 0; i < n; ++i) {
                const double d1 = q[pidx(i + 1, n)] - q[i];
                const double d2 = q[pidx(i + 2, n)] - q[i];
                v += 0.5 * spec.a * d1 * d1 + 0.5 * spec.b * d2 * d2 +
                     0.5 * q[i] * q[i] + 0.25 * q[i] * q[i] * q[i] * q[i];
            }
            break;
        default:
            throw std::logic_error("potential_1d: not a 1D kind");
    }
    return v;
}

inline double potential_2d(const LatticeSpec& spec, const Vec& q) {
    const int m = spec.rows, n = spec.cols;
    auto at = [&](int i, int j) { return q[pidx(i, m) * n + pidx(j, n)]; };
    double v = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            const double dr = at(i + 1, j) - at(i, j) - spec.rho;
            const double dc = at(i, j + 1) - at(i, j);
            v += 0.5 * spec.a * dr * dr + 0.5 * spec.b * dc * dc - std::cos(at(i, j));
        }
    return v;
}

inline void force_1d(const LatticeSpec& spec, const Vec& q, Vec& f) {
    const int n = spec.n;
    switch (spec.kind) {
        case LatticeKind::FK:
            for (int i = 0; i < n; ++i)
                f[i] = q[pidx(i + 1, n)] - 2.0 * q[i] + q[pidx(i - 1, n)] - std::sin(q[i]);
            break;
        case LatticeKind::Rotator:
            for (int i = 0; i < n; ++i) {
                const double dp = q[pidx(i + 1, n)] - q[i];
                const double dm = q[i] - q[pidx(i - 1, n)];
                f[i] = (dp - dm) + std::sin(dp) - std::sin(dm);
            }
            break;
        case LatticeKind::Toda:
            for (int i = 0; i < n; ++i)
                f[i] = -std::exp(q[i] - q[pidx(i + 1, n)]) + std::exp(q[pidx(i - 1, n)] - q[i]);
            break;
        case LatticeKind::FkToda:
            for (int i = 0; i < n; ++i) {
                const double toda = -std::exp(q[i] - q[pidx(i + 1, n)]) +
                                    std::exp(q[pidx(i - 1, n)] - q[i]);
                const double fk = q[pidx(i + 1, n)] - 2.0 * q[i] + q[pidx(i - 1, n)] - std::sin(q[i]);
                f[i] = spec.mu * toda + (1.0 - spec.mu) * fk;
            }
            break;
        case LatticeKind::FputToda:
            for (int i = 0; i < n; ++i) {
                const double dp = q[pidx(i + 1, n)] - q[i];
                const double dm = q[i] - q[pidx(i - 1, n)];
                const double toda = -std::exp(-dp) + std::exp(-dm);
                const double fput = (dp - dm) + 0.5 * (dp * dp - dm * dm);
                f[i] = spec.mu * toda + (1.0 - spec.mu) * fput;
            }
            break;
        case LatticeKind::KgLri:
            for (int i = 0; i < n; ++i) {
                const double lap1 = q[pidx(i + 1, n)] - 2.0 * q[i] + q[pidx(i - 1, n)];
                const double lap2 = q[pidx(i + 2, n)] - 2.0 * q[i] + q[pidx(i - 2, n)];
                f[i] = spec.a * lap1 + spec.b * lap2 - q[i] - q[i] * q[i] * q[i];
            }
            break;
        default:
            throw std::logic_error("force_1d: not a 1D kind");
    }
}

inline void force_2d(const LatticeSpec& spec, const Vec& q, Vec& f) {
    const int m = spec.rows, n = spec.cols;
    auto at = [&](int i, int j) { return q[pidx(i, m) * n + pidx(j, n)]; };
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            const double lr = at(i + 1, j) - 2.0 * at(i, j) + at(i - 1, j);
            const double lc = at(i, j + 1) - 2.0 * at(i, j) + at(i, j - 1);
            f[i * n + j] = spec.a * lr + spec.b * lc - std::sin(at(i, j));
        }
}
}  // namespace detail

/// Total energy H = T(p) + V(q) with the closed-form potential of the spec.
inline double hamiltonian(const LatticeSpec& spec, const PhaseState& s) {
    detail::check_state(spec, s);
    double t = 0.0;
    for (double pi : s.p) t += 0.5 * pi * pi;
    const double v = spec.kind == LatticeKind::Fk2d ? detail::potential_2d(spec, s.q)
                                                    : detail::potential_1d(spec, s.q);
    return t + v;
}

/// -dV/dq, closed form, periodic indexing.
inline Vec force(const LatticeSpec& spec, const Vec& q) {
    if (static_cast<int>(q.size()) != spec.dof())
        throw std::invalid_argument("force: dimension mismatch");
    Vec f(q.size());
    if (spec.kind == LatticeKind::Fk2d)
        detail::force_2d(spec, q, f);
    else
        detail::force_1d(spec, q, f);
    return f;
}

/// Canonical equations: dq = p (m = 1), dp = -dV/dq.
inline std::pair<Vec, Vec> vector_field(const LatticeSpec& spec, const PhaseState& s) {
    detail::check_state(spec, s);
    return {s.p, force(spec, s.q)};
}

inline double momentum(const PhaseState& s) {
    if (!s.finite()) throw std::invalid_argument("momentum: non-finite state");
    double sum = 0.0;
    for (double pi : s.p) sum += pi;
    return sum;
}

/// Symmetric periodic tridiagonal matrix with diagonal p_i and
/// off-diagonal / corner entries v_i = -exp((q_i - q_{i+1}) / 2).
struct LaxMatrix {
    int dim = 0;
    Vec m;  // row-major dim x dim

    double at(int r, int c) const { return m[r * dim + c]; }
};

inline LaxMatrix toda_lax(const PhaseState& s) {
    const int d = static_cast<int>(s.dim());
    if (d < 3) throw std::invalid_argument("toda_lax: D >= 3 required");
    LaxMatrix L;
    L.dim = d;
    L.m.assign(static_cast<std::size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i) L.m[i * d + i] = s.p[i];
    for (int i = 0; i < d; ++i) {
        const int j = detail::pidx(i + 1, d);
        const double v = -std::exp(0.5 * (s.q[i] - s.q[j]));
        L.m[i * d + j] = v;
        L.m[j * d + i] = v;
    }
    return L;
}

/// C_n = Tr L^n, the n-th Toda constant of motion.
inline double toda_invariant(const PhaseState& s, int n) {
    const int d = static_cast<int>(s.dim());
    if (n < 1 || n > d) throw std::invalid_argument("toda_invariant: n out of range [1, D]");
    const LaxMatrix L = toda_lax(s);
    // power by repeated multiplication; D is small
    Vec pw = L.m;
    Vec tmp(pw.size());
    for (int k = 1; k < n; ++k) {
        std::fill(tmp.begin(), tmp.end(), 0.0);
        for (int i = 0; i < d; ++i)
            for (int l = 0; l < d; ++l) {
                const double x = pw[i * d + l];
                if (x == 0.0) continue;
                for (int j = 0; j < d; ++j) tmp[i * d + j] += x * L.m[l * d + j];
            }
        pw.swap(tmp);
    }
    double tr = 0.0;
    for (int i = 0; i < d; ++i) tr += pw[i * d + i];
    return tr;
}

struct ConservedDescriptor {
    enum class Kind { Energy, Momentum, TodaC };
    Kind kind = Kind::Energy;
    int order = 0;  // TodaC only, n in [3, D]

    static ConservedDescriptor energy() { return {Kind::Energy, 0}; }
    static ConservedDescriptor momentum() { return {Kind::Momentum, 0}; }
    static ConservedDescriptor toda_c(int n) { return {Kind::TodaC, n}; }

    std::string name() const {
        switch (kind) {
            case Kind::Energy: return "energy";
            case Kind::Momentum: return "momentum";
            case Kind::TodaC: return "C" + std::to_string(order);
        }
        return {};
    }
    bool operator==(const ConservedDescriptor&) const = default;
};

/// Evaluate a conserved quantity on a state.
inline double conserved_value(const LatticeSpec& spec, const ConservedDescriptor& d,
                              const PhaseState& s) {
    switch (d.kind) {
        case ConservedDescriptor::Kind::Energy: return hamiltonian(spec, s);
        case ConservedDescriptor::Kind::Momentum: return momentum(s);
        case ConservedDescriptor::Kind::TodaC: return toda_invariant(s, d.order);
    }
    throw std::logic_error("conserved_value: bad descriptor");
}

/// True invariants of the spec. Hybrid systems off the integrable limit
/// keep only what translation invariance still grants; the Toda tower
/// applies only at mu = 1.
inline std::vector<ConservedDescriptor> conserved_set(const LatticeSpec& spec) {
    spec.validate();
    std::vector<ConservedDescriptor> out{ConservedDescriptor::energy()};
    const bool toda_limit =
        spec.kind == LatticeKind::Toda ||
        ((spec.kind == LatticeKind::FkToda || spec.kind == LatticeKind::FputToda) && spec.mu == 1.0);
    const bool translation_invariant =
        spec.kind == LatticeKind::Rotator || spec.kind == LatticeKind::FputToda || toda_limit;
    if (translation_invariant) out.push_back(ConservedDescriptor::momentum());
    if (toda_limit)
        for (int n = 3; n <= spec.dof(); ++n) out.push_back(ConservedDescriptor::toda_c(n));
    return out;
}

}  // namespace hamlat
