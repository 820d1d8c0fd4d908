// The hybrid-lattice mu sweep: train each model kind at every mu on the
// grid and record trajectory / energy MAPE means over a held-out test set.
#pragma once

#include <string>
#include <vector>

#include "hamlat/dataset.hpp"
#include "hamlat/metrics.hpp"
#include "hamlat/train.hpp"

namespace hamlat {

struct SweepCell {
    double mu = 0.0;
    ModelKind kind = ModelKind::Mlp;
    bool failed = false;
    std::string error;
    double traj_mape = 0.0;
    double energy_mape = 0.0;
    std::size_t excluded_entries = 0;
};

struct SweepPlan {
    LatticeKind base = LatticeKind::FkToda;  // FkToda or FputToda
    int n = 8;
    std::vector<double> mu_grid{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<ModelKind> kinds{ModelKind::Sghn};
    DataProtocol data;          // per-cell training data protocol
    TrainConfig train;          // per-cell budget
    int n_test = 20;
    double t_end_test = 15.0;
    std::uint64_t seed = 0;

    LatticeSpec spec_at(double mu) const {
        if (base == LatticeKind::FkToda) return LatticeSpec::fk_toda(n, mu);
        if (base == LatticeKind::FputToda) return LatticeSpec::fput_toda(n, mu);
        throw std::invalid_argument("mu_sweep: base must be a hybrid lattice");
    }
};

namespace detail {

/// Per-time particle vector (q then p) for trajectory MAPE.
inline std::vector<Vec> phase_series(const Trajectory& t) {
    std::vector<Vec> out;
    out.reserve(t.states.size());
    for (const PhaseState& s : t.states) {
        Vec row(s.q);
        row.insert(row.end(), s.p.begin(), s.p.end());
        out.push_back(std::move(row));
    }
    return out;
}

/// Scalar series of the true Hamiltonian evaluated along a trajectory.
inline std::vector<Vec> energy_series(const LatticeSpec& spec, const Trajectory& t) {
    std::vector<Vec> out;
    out.reserve(t.states.size());
    for (const PhaseState& s : t.states) out.push_back(Vec{hamiltonian(spec, s)});
    return out;
}

}  // namespace detail

/// Train one model for one cell and score it on fresh test trajectories.
/// Failures (integration blow-up, empty link graph, non-finite loss) are
/// captured in the cell rather than thrown.
inline SweepCell run_sweep_cell(const SweepPlan& plan, double mu, ModelKind kind,
                                std::uint64_t cell_seed) {
    SweepCell cell;
    cell.mu = mu;
    cell.kind = kind;
    try {
        const LatticeSpec spec = plan.spec_at(mu);
        DataProtocol proto = plan.data;
        proto.seed = Rng(cell_seed).fork(1).next_u64();
        const Dataset ds = generate_dataset(spec, proto);
        if (ds.size() == 0) throw std::runtime_error("all training trajectories failed");

        TrainConfig tcfg = plan.train;
        tcfg.seed = Rng(cell_seed).fork(2).next_u64();
        PredictiveModel model;
        switch (kind) {
            case ModelKind::Mlp: {
                model = PredictiveModel::of(MlpModel::init(ds.dim(), 1, 32, Activation::Tanh,
                                                           Rng(tcfg.seed).fork(3).next_u64()));
                Trainable t = make_trainable(model.mlp);
                train(t, ds, tcfg);
                break;
            }
            case ModelKind::Hnn: {
                model = PredictiveModel::of(HnnModel::init(ds.dim(), 1, 32, Activation::Tanh,
                                                           Rng(tcfg.seed).fork(3).next_u64()));
                Trainable t = make_trainable(model.hnn);
                train(t, ds, tcfg);
                break;
            }
            case ModelKind::Sghn:
                model = PredictiveModel::of(train_sghn_two_phase(ds, tcfg, SghnConfig{}).model);
                break;
        }

        Rng test_rng = Rng(cell_seed).fork(4);
        const Dynamics truth_dyn = Dynamics::of(spec);
        const IntegratorConfig icfg{plan.data.h, Scheme::Srkn5};
        double traj_acc = 0.0, energy_acc = 0.0;
        int used = 0;
        for (int k = 0; k < plan.n_test; ++k) {
            Rng r = test_rng.fork(static_cast<std::uint64_t>(k));
            const PhaseState s0 = sample_ic(plan.data.sampler, spec, r);
            const Trajectory truth =
                subsample(integrate(truth_dyn, s0, plan.t_end_test, icfg), plan.data.stride);
            const Trajectory pred = rollout(model, s0, plan.t_end_test, plan.data.h, plan.data.stride);
            const MapeResult tm = mape(detail::phase_series(pred), detail::phase_series(truth));
            const MapeResult em =
                mape(detail::energy_series(spec, pred), detail::energy_series(spec, truth));
            traj_acc += tm.value;
            energy_acc += em.value;
            cell.excluded_entries += tm.excluded + em.excluded;
            ++used;
        }
        cell.traj_mape = traj_acc / used;
        cell.energy_mape = energy_acc / used;
        if (!std::isfinite(cell.traj_mape) || !std::isfinite(cell.energy_mape))
            throw std::runtime_error("non-finite MAPE (diverged rollout)");
    } catch (const std::exception& e) {
        cell.failed = true;
        cell.error = e.what();
    }
    return cell;
}

/// Full grid, one row per (mu, model). Cells are seeded independently from
/// the plan seed, so the table is order-independent.
inline std::vector<SweepCell> mu_sweep(const SweepPlan& plan) {
    if (plan.mu_grid.empty() || plan.kinds.empty())
        throw std::invalid_argument("mu_sweep: empty grid or model list");
    for (double mu : plan.mu_grid)
        if (mu < 0.0 || mu > 1.0) throw std::invalid_argument("mu_sweep: mu outside [0, 1]");
    std::vector<SweepCell> cells;
    for (std::size_t gi = 0; gi < plan.mu_grid.size(); ++gi)
        for (std::size_t ki = 0; ki < plan.kinds.size(); ++ki) {
            const std::uint64_t cell_seed =
                Rng(plan.seed).fork(gi * 131 + ki + 1).next_u64();
            cells.push_back(run_sweep_cell(plan, plan.mu_grid[gi], plan.kinds[ki], cell_seed));
        }
    return cells;
}

inline std::string sweep_csv(const std::vector<SweepCell>& cells) {
    std::ostringstream os;
    os << "mu,model,status,traj_mape,energy_mape,excluded_entries,error\n";
    os.setf(std::ios::scientific);
    os.precision(6);
    for (const SweepCell& c : cells) {
        os << c.mu << ',' << to_string(c.kind) << ',' << (c.failed ? "failed" : "ok") << ',';
        if (c.failed)
            os << ",," << c.excluded_entries << ",\"" << c.error << "\"\n";
        else
            os << c.traj_mape << ',' << c.energy_mape << ',' << c.excluded_entries << ",\n";
    }
    return os.str();
}

}  // namespace hamlat
