// Dataset generation following the trajectory protocol: SRKN integration at
// h = 0.0025, subsampling at stride 20, derivative targets per state.
#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "hamlat/core.hpp"
#include "hamlat/integrate.hpp"
#include "hamlat/io.hpp"
#include "hamlat/nn.hpp"  // Rng

namespace hamlat {

struct IcSampler {
    enum class Kind { Uniform01, SineDisplacement };
    Kind kind = Kind::Uniform01;

    static std::string to_string(Kind k) {
        return k == Kind::Uniform01 ? "uniform01" : "sine_displacement";
    }
    static Kind kind_from_string(const std::string& s) {
        if (s == "uniform01") return Kind::Uniform01;
        if (s == "sine_displacement") return Kind::SineDisplacement;
        throw std::invalid_argument("unknown sampler: " + s);
    }
};

inline PhaseState sample_ic(const IcSampler& sampler, const LatticeSpec& spec, Rng& rng) {
    const int d = spec.dof();
    PhaseState s = PhaseState::zeros(static_cast<std::size_t>(d));
    if (sampler.kind == IcSampler::Kind::Uniform01) {
        for (int i = 0; i < d; ++i) s.q[i] = rng.uniform01();
        for (int i = 0; i < d; ++i) s.p[i] = rng.uniform01();
    } else {
        // q_i = lambda_i * sin(i * pi / (D - 1)), p = 0
        for (int i = 0; i < d; ++i)
            s.q[i] = rng.uniform01() * std::sin(static_cast<double>(i) * std::numbers::pi /
                                                static_cast<double>(d - 1));
    }
    return s;
}

enum class TargetMode { Oracle, FiniteDiff };

inline std::string to_string(TargetMode m) {
    return m == TargetMode::Oracle ? "oracle" : "finite_diff";
}
inline TargetMode target_mode_from_string(const std::string& s) {
    if (s == "oracle") return TargetMode::Oracle;
    if (s == "finite_diff") return TargetMode::FiniteDiff;
    throw std::invalid_argument("unknown target mode: " + s);
}

struct DataProtocol {
    int n_traj = 50;
    double t_end = 5.0;
    double h = 0.0025;
    int stride = 20;
    IcSampler sampler;
    TargetMode mode = TargetMode::Oracle;
    std::uint64_t seed = 0;
};

struct Dataset {
    LatticeSpec spec;
    DataProtocol protocol;
    std::vector<PhaseState> inputs;
    std::vector<std::pair<Vec, Vec>> targets;  // (dq, dp)
    std::vector<int> failed_trajectories;

    std::size_t size() const { return inputs.size(); }
    int dim() const { return spec.dof(); }
};

struct TargetedSamples {
    std::vector<PhaseState> inputs;
    std::vector<std::pair<Vec, Vec>> targets;
};

/// Oracle: true vector field at every sample. FiniteDiff: central differences
/// of the sampled states; the two endpoint samples are dropped.
inline TargetedSamples derivative_targets(const LatticeSpec& spec, const Trajectory& traj,
                                          TargetMode mode) {
    TargetedSamples out;
    if (mode == TargetMode::Oracle) {
        for (const PhaseState& s : traj.states) {
            auto [dq, dp] = vector_field(spec, s);
            out.inputs.push_back(s);
            out.targets.emplace_back(std::move(dq), std::move(dp));
        }
        return out;
    }
    if (traj.states.size() < 3)
        throw std::invalid_argument("derivative_targets: FiniteDiff needs >= 3 states");
    const double inv2dt = 1.0 / (2.0 * traj.dt_sample);
    const std::size_t d = traj.states.front().dim();
    for (std::size_t k = 1; k + 1 < traj.states.size(); ++k) {
        const PhaseState& prev = traj.states[k - 1];
        const PhaseState& next = traj.states[k + 1];
        Vec dq(d), dp(d);
        for (std::size_t i = 0; i < d; ++i) {
            dq[i] = (next.q[i] - prev.q[i]) * inv2dt;
            dp[i] = (next.p[i] - prev.p[i]) * inv2dt;
        }
        out.inputs.push_back(traj.states[k]);
        out.targets.emplace_back(std::move(dq), std::move(dp));
    }
    return out;
}

/// Integrate n_traj sampled initial conditions with SRKN5, subsample, and
/// flatten into (state, derivative) pairs. A trajectory that blows up is
/// skipped and reported in `failed_trajectories`.
inline Dataset generate_dataset(const LatticeSpec& spec, const DataProtocol& proto) {
    spec.validate();
    Dataset ds;
    ds.spec = spec;
    ds.protocol = proto;
    const IntegratorConfig cfg{proto.h, Scheme::Srkn5};
    Rng base(proto.seed);
    const Dynamics dyn = Dynamics::of(spec);
    for (int k = 0; k < proto.n_traj; ++k) {
        Rng traj_rng = base.fork(static_cast<std::uint64_t>(k));
        const PhaseState s0 = sample_ic(proto.sampler, spec, traj_rng);
        Trajectory traj;
        try {
            traj = integrate(dyn, s0, proto.t_end, cfg);
        } catch (const IntegrationError&) {
            ds.failed_trajectories.push_back(k);
            continue;
        }
        const Trajectory sampled = subsample(traj, proto.stride);
        TargetedSamples ts = derivative_targets(spec, sampled, proto.mode);
        for (std::size_t i = 0; i < ts.inputs.size(); ++i) {
            ds.inputs.push_back(std::move(ts.inputs[i]));
            ds.targets.push_back(std::move(ts.targets[i]));
        }
    }
    return ds;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
    const std::size_t d = static_cast<std::size_t>(ds.dim());
    io::json manifest;
    manifest["type"] = "dataset";
    manifest["version"] = 1;
    manifest["spec"] = io::spec_to_json(ds.spec);
    manifest["n_traj"] = ds.protocol.n_traj;
    manifest["t_end"] = ds.protocol.t_end;
    manifest["h"] = ds.protocol.h;
    manifest["stride"] = ds.protocol.stride;
    manifest["sampler"] = IcSampler::to_string(ds.protocol.sampler.kind);
    manifest["mode"] = to_string(ds.protocol.mode);
    manifest["seed"] = ds.protocol.seed;
    manifest["count"] = ds.size();
    manifest["dim"] = d;
    manifest["failed_trajectories"] = ds.failed_trajectories;
    manifest["blocks"] = {"inputs", "targets"};  // each sample: q block then p block

    Vec payload;
    payload.reserve(4 * d * ds.size());
    for (const PhaseState& s : ds.inputs) {
        payload.insert(payload.end(), s.q.begin(), s.q.end());
        payload.insert(payload.end(), s.p.begin(), s.p.end());
    }
    for (const auto& [dq, dp] : ds.targets) {
        payload.insert(payload.end(), dq.begin(), dq.end());
        payload.insert(payload.end(), dp.begin(), dp.end());
    }
    io::write_container(path, manifest, payload);
}

inline Dataset load_dataset(const std::filesystem::path& path) {
    const io::Container c = io::read_container(path);
    const io::json& m = c.manifest;
    if (m.value("type", "") != "dataset") throw io::CorruptFileError("not a dataset file");
    Dataset ds;
    ds.spec = io::spec_from_json(m.at("spec"));
    ds.protocol.n_traj = m.at("n_traj").get<int>();
    ds.protocol.t_end = m.at("t_end").get<double>();
    ds.protocol.h = m.at("h").get<double>();
    ds.protocol.stride = m.at("stride").get<int>();
    ds.protocol.sampler.kind = IcSampler::kind_from_string(m.at("sampler").get<std::string>());
    ds.protocol.mode = target_mode_from_string(m.at("mode").get<std::string>());
    ds.protocol.seed = m.at("seed").get<std::uint64_t>();
    ds.failed_trajectories = m.value("failed_trajectories", std::vector<int>{});
    const std::size_t count = m.at("count").get<std::size_t>();
    const std::size_t d = m.at("dim").get<std::size_t>();
    if (c.payload.size() != 4 * d * count) throw io::CorruptFileError("dataset payload size mismatch");
    std::size_t off = 0;
    for (std::size_t k = 0; k < count; ++k) {
        PhaseState s(Vec(c.payload.begin() + off, c.payload.begin() + off + d),
                     Vec(c.payload.begin() + off + d, c.payload.begin() + off + 2 * d));
        ds.inputs.push_back(std::move(s));
        off += 2 * d;
    }
    for (std::size_t k = 0; k < count; ++k) {
        ds.targets.emplace_back(Vec(c.payload.begin() + off, c.payload.begin() + off + d),
                                Vec(c.payload.begin() + off + d, c.payload.begin() + off + 2 * d));
        off += 2 * d;
    }
    return ds;
}

}  // namespace hamlat
