#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hamlat/core.hpp"
#include "hamlat/nn.hpp"

using namespace hamlat;

namespace {

PhaseState random_state(const LatticeSpec& spec, Rng& rng, double lo = -1.0, double hi = 1.0) {
    const int d = spec.dof();
    PhaseState s = PhaseState::zeros(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) s.q[i] = rng.uniform(lo, hi);
    for (int i = 0; i < d; ++i) s.p[i] = rng.uniform(lo, hi);
    return s;
}

// independent oracle: force_i = -dV/dq_i by central differences of the
// potential part of the Hamiltonian (kinetic part does not depend on q)
Vec fd_force(const LatticeSpec& spec, const Vec& q, double eps = 1e-6) {
    Vec f(q.size());
    PhaseState s(q, Vec(q.size(), 0.0));
    for (std::size_t i = 0; i < q.size(); ++i) {
        PhaseState sp = s, sm = s;
        sp.q[i] += eps;
        sm.q[i] -= eps;
        f[i] = -(hamiltonian(spec, sp) - hamiltonian(spec, sm)) / (2.0 * eps);
    }
    return f;
}

void check_force_matches_fd(const LatticeSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    for (int rep = 0; rep < 10; ++rep) {
        const PhaseState s = random_state(spec, rng);
        const Vec f = force(spec, s.q);
        const Vec fd = fd_force(spec, s.q);
        for (std::size_t i = 0; i < f.size(); ++i) {
            const double scale = std::max(1.0, std::abs(fd[i]));
            REQUIRE(std::abs(f[i] - fd[i]) / scale < 1e-6);
        }
    }
}

}  // namespace

TEST_CASE("phase state basics") {
    REQUIRE_THROWS_AS(PhaseState(Vec{1.0}, Vec{1.0, 2.0}), std::invalid_argument);
    const PhaseState z = PhaseState::zeros(4);
    REQUIRE(z.dim() == 4);
    REQUIRE(z.finite());
    PhaseState bad = z;
    bad.p[2] = std::numeric_limits<double>::infinity();
    REQUIRE_FALSE(bad.finite());
}

TEST_CASE("canonical structure J") {
    CanonicalStructure j(3);
    // J = [[0, I], [-I, 0]]
    REQUIRE(j.entry(0, 3) == 1.0);
    REQUIRE(j.entry(1, 4) == 1.0);
    REQUIRE(j.entry(3, 0) == -1.0);
    REQUIRE(j.entry(0, 0) == 0.0);
    REQUIRE(j.entry(0, 4) == 0.0);
    const Vec z{1, 2, 3, 4, 5, 6};
    const Vec jz = j.apply(z);
    REQUIRE(jz == Vec{4, 5, 6, -1, -2, -3});
    // J^2 = -I
    const Vec jjz = j.apply(jz);
    for (std::size_t i = 0; i < z.size(); ++i) REQUIRE(jjz[i] == -z[i]);
    REQUIRE_THROWS_AS(j.apply(Vec{1.0}), std::invalid_argument);
}

TEST_CASE("spec validation") {
    REQUIRE_THROWS_AS(LatticeSpec::fk(2), std::invalid_argument);
    REQUIRE_THROWS_AS(LatticeSpec::fk_toda(8, 1.5), std::invalid_argument);
    REQUIRE_THROWS_AS(LatticeSpec::fk_toda(8, -0.1), std::invalid_argument);
    REQUIRE_THROWS_AS(LatticeSpec::fk2d(2, 5), std::invalid_argument);
    REQUIRE_NOTHROW(LatticeSpec::fk_toda(8, 0.0));
    REQUIRE_NOTHROW(LatticeSpec::fk_toda(8, 1.0));
    REQUIRE(LatticeSpec::fk2d(3, 4).dof() == 12);
    REQUIRE(LatticeSpec::toda(5).dof() == 5);
    for (const char* name : {"fk", "rotator", "toda", "fk_toda", "fput_toda", "kg_lri", "fk2d"})
        REQUIRE(to_string(lattice_kind_from_string(name)) == name);
    REQUIRE_THROWS_AS(lattice_kind_from_string("nope"), std::invalid_argument);
}

TEST_CASE("fk hamiltonian closed form") {
    const LatticeSpec spec = LatticeSpec::fk(3);
    // zero state: T = 0, coupling = 0, substrate = sum(1 - cos 0) = 0
    REQUIRE(hamiltonian(spec, PhaseState::zeros(3)) == 0.0);
    // hand value: q = (a, 0, 0), p = (0, b, 0)
    const double a = 0.3, b = 0.7;
    const PhaseState s(Vec{a, 0, 0}, Vec{0, b, 0});
    const double expected = 0.5 * b * b            // kinetic
                            + 0.5 * a * a + 0.5 * a * a  // two bonds touch q0 (periodic)
                            + (1.0 - std::cos(a));       // substrate
    REQUIRE_THAT(hamiltonian(spec, s), Catch::Matchers::WithinAbs(expected, 1e-14));
}

TEST_CASE("toda hamiltonian closed form") {
    const LatticeSpec spec = LatticeSpec::toda(3);
    // zero state: V = 3 * exp(0) = 3
    REQUIRE_THAT(hamiltonian(spec, PhaseState::zeros(3)), Catch::Matchers::WithinAbs(3.0, 1e-14));
}

TEST_CASE("forces match finite differences of the potential") {
    check_force_matches_fd(LatticeSpec::fk(8), 1);
    check_force_matches_fd(LatticeSpec::rotator(8), 2);
    check_force_matches_fd(LatticeSpec::toda(5), 3);
    check_force_matches_fd(LatticeSpec::fk_toda(8, 0.3), 4);
    check_force_matches_fd(LatticeSpec::fput_toda(8, 0.7), 5);
    check_force_matches_fd(LatticeSpec::kg_lri(12, 1.0, 0.5), 6);
    check_force_matches_fd(LatticeSpec::fk2d(3, 4, 1.0, 0.8, 1.0), 7);
}

TEST_CASE("hybrid limits reduce to the pure systems") {
    Rng rng(11);
    const PhaseState s = random_state(LatticeSpec::fk(8), rng);
    REQUIRE_THAT(hamiltonian(LatticeSpec::fk_toda(8, 0.0), s),
                 Catch::Matchers::WithinAbs(hamiltonian(LatticeSpec::fk(8), s), 1e-13));
    // mu = 1 hybrids are the Toda potential (FK-Toda and FPUT-Toda agree there)
    REQUIRE_THAT(hamiltonian(LatticeSpec::fk_toda(8, 1.0), s),
                 Catch::Matchers::WithinAbs(hamiltonian(LatticeSpec::toda(8), s), 1e-13));
    REQUIRE_THAT(hamiltonian(LatticeSpec::fput_toda(8, 1.0), s),
                 Catch::Matchers::WithinAbs(hamiltonian(LatticeSpec::toda(8), s), 1e-13));
    const Vec f0 = force(LatticeSpec::fk_toda(8, 0.0), s.q);
    const Vec ffk = force(LatticeSpec::fk(8), s.q);
    for (std::size_t i = 0; i < f0.size(); ++i)
        REQUIRE_THAT(f0[i], Catch::Matchers::WithinAbs(ffk[i], 1e-13));
}

TEST_CASE("fk2d rest length cancels in the force") {
    Rng rng(13);
    const LatticeSpec a = LatticeSpec::fk2d(3, 3, 1.0, 1.0, 0.0);
    const LatticeSpec b = LatticeSpec::fk2d(3, 3, 1.0, 1.0, 2.5);
    const PhaseState s = random_state(a, rng);
    const Vec fa = force(a, s.q), fb = force(b, s.q);
    for (std::size_t i = 0; i < fa.size(); ++i) REQUIRE(fa[i] == fb[i]);
}

TEST_CASE("vector field is the canonical pair") {
    Rng rng(17);
    const LatticeSpec spec = LatticeSpec::rotator(6);
    const PhaseState s = random_state(spec, rng);
    const auto [dq, dp] = vector_field(spec, s);
    REQUIRE(dq == s.p);
    REQUIRE(dp == force(spec, s.q));
}

TEST_CASE("momentum") {
    REQUIRE(momentum(PhaseState(Vec{0, 0, 0}, Vec{1.0, 2.0, -0.5})) == 2.5);
}

TEST_CASE("toda lax matrix structure") {
    Rng rng(19);
    const PhaseState s = random_state(LatticeSpec::toda(5), rng);
    const LaxMatrix l = toda_lax(s);
    for (int i = 0; i < 5; ++i) {
        REQUIRE(l.at(i, i) == s.p[i]);
        const int j = (i + 1) % 5;
        REQUIRE_THAT(l.at(i, j), Catch::Matchers::WithinAbs(-std::exp(0.5 * (s.q[i] - s.q[j])), 1e-15));
        REQUIRE(l.at(i, j) == l.at(j, i));
    }
    // nothing outside diagonal + cyclic off-diagonals
    REQUIRE(l.at(0, 2) == 0.0);
    REQUIRE(l.at(1, 3) == 0.0);
}

TEST_CASE("toda algebraic identities C1 = P and C2 = 2H") {
    Rng rng(23);
    for (int d : {3, 4, 5}) {
        const LatticeSpec spec = LatticeSpec::toda(d);
        for (int rep = 0; rep < 1000 / 3 + 1; ++rep) {
            const PhaseState s = random_state(spec, rng);
            REQUIRE(std::abs(toda_invariant(s, 1) - momentum(s)) < 1e-12);
            REQUIRE(std::abs(toda_invariant(s, 2) - 2.0 * hamiltonian(spec, s)) < 1e-12);
        }
    }
}

TEST_CASE("toda C3 at the zero state, frozen eigenvalue oracle") {
    // D = 3 zero state: L has p = 0 diagonal and all off-diagonal entries -1
    // (the corner and the neighbor coincide). Eigenvalues of that matrix are
    // {-2, 1, 1}, so C3 = (-2)^3 + 1 + 1 = -6.
    REQUIRE_THAT(toda_invariant(PhaseState::zeros(3), 3), Catch::Matchers::WithinAbs(-6.0, 1e-12));
    REQUIRE_THROWS_AS(toda_invariant(PhaseState::zeros(3), 4), std::invalid_argument);
    REQUIRE_THROWS_AS(toda_invariant(PhaseState::zeros(3), 0), std::invalid_argument);
}

TEST_CASE("conserved descriptors and sets") {
    REQUIRE(ConservedDescriptor::energy().name() == "energy");
    REQUIRE(ConservedDescriptor::momentum().name() == "momentum");
    REQUIRE(ConservedDescriptor::toda_c(3).name() == "C3");

    auto names = [](const LatticeSpec& s) {
        std::vector<std::string> out;
        for (const auto& d : conserved_set(s)) out.push_back(d.name());
        return out;
    };
    REQUIRE(names(LatticeSpec::fk(8)) == std::vector<std::string>{"energy"});
    REQUIRE(names(LatticeSpec::rotator(8)) == std::vector<std::string>{"energy", "momentum"});
    REQUIRE(names(LatticeSpec::toda(5)) ==
            std::vector<std::string>{"energy", "momentum", "C3", "C4", "C5"});
    REQUIRE(names(LatticeSpec::fk_toda(8, 0.5)) == std::vector<std::string>{"energy"});
    REQUIRE(names(LatticeSpec::fk_toda(4, 1.0)) ==
            std::vector<std::string>{"energy", "momentum", "C3", "C4"});
    REQUIRE(names(LatticeSpec::fput_toda(8, 0.5)) ==
            std::vector<std::string>{"energy", "momentum"});
    REQUIRE(names(LatticeSpec::kg_lri(12)) == std::vector<std::string>{"energy"});
    REQUIRE(names(LatticeSpec::fk2d(3, 3)) == std::vector<std::string>{"energy"});
}

TEST_CASE("conserved_value dispatches") {
    Rng rng(29);
    const LatticeSpec spec = LatticeSpec::toda(4);
    const PhaseState s = random_state(spec, rng);
    REQUIRE(conserved_value(spec, ConservedDescriptor::energy(), s) == hamiltonian(spec, s));
    REQUIRE(conserved_value(spec, ConservedDescriptor::momentum(), s) == momentum(s));
    REQUIRE(conserved_value(spec, ConservedDescriptor::toda_c(3), s) == toda_invariant(s, 3));
}
