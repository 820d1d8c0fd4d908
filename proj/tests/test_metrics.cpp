#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hamlat/metrics.hpp"
#include "hamlat/nn.hpp"

using namespace hamlat;

namespace {

Trajectory make_traj(const std::vector<PhaseState>& states, double dt = 0.05) {
    Trajectory t;
    t.dt_sample = dt;
    t.states = states;
    return t;
}

PhaseState random_state(int d, Rng& rng) {
    PhaseState s = PhaseState::zeros(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) s.q[i] = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < d; ++i) s.p[i] = rng.uniform(-1.0, 1.0);
    return s;
}

}  // namespace

TEST_CASE("trajectory mse against a brute-force loop") {
    Rng rng(3);
    std::vector<PhaseState> a, b;
    for (int k = 0; k < 7; ++k) {
        a.push_back(random_state(4, rng));
        b.push_back(random_state(4, rng));
    }
    const TrajectoryMse m = trajectory_mse(make_traj(a), make_traj(b));
    double acc = 0.0;
    for (int k = 0; k < 7; ++k) {
        double row = 0.0;
        for (int i = 0; i < 4; ++i) {
            const double eq = a[k].q[i] - b[k].q[i];
            const double ep = a[k].p[i] - b[k].p[i];
            row += eq * eq + ep * ep;
        }
        REQUIRE_THAT(m.per_time[static_cast<std::size_t>(k)],
                     Catch::Matchers::WithinAbs(row, 1e-12));
        acc += row;
    }
    REQUIRE_THAT(m.mean, Catch::Matchers::WithinAbs(acc / 7.0, 1e-12));
}

TEST_CASE("trajectory mse of a uniform shift has a closed form") {
    std::vector<PhaseState> a, c;
    Rng rng(5);
    for (int k = 0; k < 3; ++k) {
        a.push_back(random_state(2, rng));
        PhaseState s = a.back();
        for (double& x : s.q) x += 0.1;
        for (double& x : s.p) x += 0.1;
        c.push_back(s);
    }
    // every entry differs by exactly 0.1: each time slice sums 2 * d * 0.01
    REQUIRE_THAT(trajectory_mse(make_traj(a), make_traj(c)).mean,
                 Catch::Matchers::WithinAbs(2 * 2 * 0.01, 1e-15));
    // mismatched lengths are rejected
    c.pop_back();
    REQUIRE_THROWS_AS(trajectory_mse(make_traj(a), make_traj(c)), std::invalid_argument);
}

TEST_CASE("conserved mse uses the true initial condition as reference") {
    const LatticeSpec spec = LatticeSpec::toda(4);
    Rng rng(7);
    const PhaseState s0 = random_state(4, rng);
    // predicted trajectory = constant perturbed copy: every sample carries the
    // same conserved value, so the mse is exactly (C(pred) - C(s0))^2
    PhaseState sp = s0;
    sp.q[0] += 0.05;
    const Trajectory pred = make_traj({sp, sp, sp});
    for (const ConservedDescriptor& d : conserved_set(spec)) {
        const double delta = conserved_value(spec, d, sp) - conserved_value(spec, d, s0);
        REQUIRE_THAT(conserved_mse(spec, pred, d, s0),
                     Catch::Matchers::WithinAbs(delta * delta, 1e-12));
    }
}

TEST_CASE("conserved mse against a brute-force loop over C3") {
    const LatticeSpec spec = LatticeSpec::toda(5);
    Rng rng(11);
    const PhaseState s0 = random_state(5, rng);
    std::vector<PhaseState> states;
    for (int k = 0; k < 4; ++k) states.push_back(random_state(5, rng));
    const Trajectory pred = make_traj(states);
    const ConservedDescriptor c3 = ConservedDescriptor::toda_c(3);
    const double ref = conserved_value(spec, c3, s0);
    double acc = 0.0;
    for (const PhaseState& s : states) {
        const double e = conserved_value(spec, c3, s) - ref;
        acc += e * e;
    }
    REQUIRE_THAT(conserved_mse(spec, pred, c3, s0),
                 Catch::Matchers::WithinAbs(acc / 4.0, 1e-12));
}

TEST_CASE("mape basic values and exclusion") {
    // pred twice the truth at every entry: 100% error
    const MapeResult r = mape({Vec{2.0, 4.0}}, {Vec{1.0, 2.0}});
    REQUIRE_THAT(r.value, Catch::Matchers::WithinAbs(1.0, 1e-15));
    REQUIRE(r.excluded == 0);

    // near-zero truth entries are excluded from the mean, not divided by
    const MapeResult e = mape({Vec{5.0, 1.5}}, {Vec{1e-15, 1.0}});
    REQUIRE(e.excluded == 1);
    REQUIRE_THAT(e.value, Catch::Matchers::WithinAbs(0.5, 1e-15));

    // all entries excluded
    const MapeResult z = mape({Vec{1.0, 1.0}}, {Vec{0.0, 0.0}});
    REQUIRE(z.excluded == 2);
    REQUIRE(z.value == 0.0);

    REQUIRE_THROWS_AS(mape({Vec{1.0}}, {Vec{1.0, 2.0}}), std::invalid_argument);
    REQUIRE_THROWS_AS(mape({Vec{1.0}, Vec{1.0}}, {Vec{1.0}}), std::invalid_argument);
}

TEST_CASE("mape against a brute-force loop") {
    Rng rng(13);
    std::vector<Vec> truth, pred;
    for (int t = 0; t < 10; ++t) {
        Vec tt(5), pp(5);
        for (int i = 0; i < 5; ++i) {
            tt[i] = rng.uniform(-2.0, 2.0);
            pp[i] = rng.uniform(-2.0, 2.0);
        }
        truth.push_back(tt);
        pred.push_back(pp);
    }
    truth[3][2] = 0.0;  // force one exclusion
    double acc_t = 0.0;
    int used_t = 0;
    std::size_t excluded = 0;
    for (int t = 0; t < 10; ++t) {
        double acc_i = 0.0;
        int used_i = 0;
        for (int i = 0; i < 5; ++i) {
            if (std::abs(truth[t][i]) < 1e-12) {
                ++excluded;
                continue;
            }
            acc_i += std::abs(pred[t][i] - truth[t][i]) / std::abs(truth[t][i]);
            ++used_i;
        }
        if (used_i > 0) {
            acc_t += acc_i / used_i;
            ++used_t;
        }
    }
    const MapeResult r = mape(pred, truth);
    REQUIRE(r.excluded == excluded);
    REQUIRE_THAT(r.value, Catch::Matchers::WithinAbs(acc_t / used_t, 1e-12));
}

TEST_CASE("extract_links recovers a constructed ring") {
    const int d = 6;
    AlphaMatrix a(d);
    Rng rng(17);
    // strong ring entries, weak noise elsewhere
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            if (i != j) a.a[static_cast<std::size_t>(i) * d + j] = rng.uniform(-0.02, 0.02);
    for (int i = 0; i < d; ++i) {
        const int j = (i + 1) % d;
        a.a[static_cast<std::size_t>(i) * d + j] = (i % 2 ? -1.0 : 1.0) * rng.uniform(0.5, 1.0);
    }
    const LinkGraph g = extract_links(a, 0.1);
    REQUIRE(g.edges.size() == 6);
    for (int i = 0; i < d; ++i) {
        const int j = (i + 1) % d;
        REQUIRE(g.has_edge(std::min(i, j), std::max(i, j)));
    }
    // edges are canonical (i < j) and sorted
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
        REQUIRE(g.edges[k].first < g.edges[k].second);
        if (k > 0) REQUIRE(g.edges[k - 1] < g.edges[k]);
    }
}

TEST_CASE("extract_links threshold semantics") {
    AlphaMatrix a(3);
    a.a[0 * 3 + 1] = 1.0;
    a.a[1 * 3 + 2] = 0.3;
    // tau is relative to the max |alpha|: 0.3 survives tau=0.3, dies at tau=0.31
    REQUIRE(extract_links(a, 0.3).edges.size() == 2);
    REQUIRE(extract_links(a, 0.31).edges.size() == 1);
    // tau = 1 keeps only the maximal entries
    REQUIRE(extract_links(a, 1.0).edges.size() == 1);
    REQUIRE(extract_links(a, 1.0).edges[0] == std::make_pair(0, 1));
    REQUIRE_THROWS_AS(extract_links(a, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(extract_links(a, 1.5), std::invalid_argument);
    // scaling alpha by a positive constant does not change the graph
    AlphaMatrix b = a;
    for (double& x : b.a) x *= 17.0;
    REQUIRE(extract_links(b, 0.3).edges == extract_links(a, 0.3).edges);
    // an all-zero matrix has no scale to threshold against
    REQUIRE_THROWS_AS(extract_links(AlphaMatrix(3), 0.5), std::invalid_argument);
}

TEST_CASE("direct_links direction rules") {
    AlphaMatrix a(3);
    a.a[0 * 3 + 1] = 1.0;  // only i->j present: forward
    a.a[2 * 3 + 1] = 0.4;
    a.a[1 * 3 + 2] = 0.6;  // both present, j->i weaker: forward dominates
    LinkGraph g = direct_links(a, extract_links(a, 0.1));
    REQUIRE(g.directions.at({0, 1}) == EdgeDirection::Forward);
    REQUIRE(g.directions.at({1, 2}) == EdgeDirection::Forward);  // |a(1,2)| > |a(2,1)|

    AlphaMatrix b(2);
    b.a[1 * 2 + 0] = 1.0;  // only the reverse entry
    REQUIRE(direct_links(b, extract_links(b, 0.5)).directions.at({0, 1}) ==
            EdgeDirection::Backward);

    AlphaMatrix c(2);
    c.a[0 * 2 + 1] = 0.7;
    c.a[1 * 2 + 0] = 0.7;  // exact tie is flagged, not silently oriented
    REQUIRE(direct_links(c, extract_links(c, 0.5)).directions.at({0, 1}) == EdgeDirection::Tie);
}

TEST_CASE("edge list text format") {
    AlphaMatrix a(3);
    a.a[0 * 3 + 1] = 1.0;
    a.a[2 * 3 + 1] = 0.8;
    const LinkGraph undirected = extract_links(a, 0.1);
    REQUIRE(edge_list_text(undirected) == "0 1\n1 2\n");
    const std::string text = edge_list_text(direct_links(a, undirected));
    REQUIRE(text.find("0 1 ->") != std::string::npos);
    REQUIRE(text.find("1 2 <-") != std::string::npos);
}

TEST_CASE("rollout with an injected oracle matches the ground truth") {
    const LatticeSpec spec = LatticeSpec::fk(6);
    Rng rng(19);
    const PhaseState s0 = random_state(6, rng);
    const PredictiveModel oracle = PredictiveModel::oracle(spec);
    const Trajectory pred = rollout(oracle, s0, 5.0);
    const Trajectory truth =
        subsample(integrate(Dynamics::of(spec), s0, 5.0, {0.0025, Scheme::Srkn5}), 20);
    REQUIRE(pred.states.size() == truth.states.size());
    REQUIRE(trajectory_mse(pred, truth).mean < 1e-16);
}

TEST_CASE("rollout with a zero field stays at the initial condition") {
    Dynamics zero = Dynamics::general(
        [](const PhaseState& s) { return std::make_pair(Vec(s.q.size(), 0.0), Vec(s.p.size(), 0.0)); });
    const PredictiveModel frozen = PredictiveModel::custom(zero, Scheme::Rk4);
    Rng rng(23);
    const PhaseState s0 = random_state(4, rng);
    const Trajectory pred = rollout(frozen, s0, 2.0);
    for (const PhaseState& s : pred.states) {
        REQUIRE(s.q == s0.q);
        REQUIRE(s.p == s0.p);
    }
}
