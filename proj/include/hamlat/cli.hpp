// Subcommand implementations behind the hamlat binary: generate / train /
// eval / links / sweep / report over one JSON experiment config.
#pragma once

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "hamlat/config.hpp"
#include "hamlat/dataset.hpp"
#include "hamlat/metrics.hpp"
#include "hamlat/sweep.hpp"
#include "hamlat/train.hpp"

namespace hamlat::cli {

namespace fs = std::filesystem;

struct Options {
    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> budget;
};

/// Config with the command-line overrides folded in. A --seed reseeds every
/// block through independent forks; --budget caps the epoch count.
inline ExperimentConfig resolve(const Options& opt) {
    ExperimentConfig cfg = load_config(opt.config_path);
    if (opt.out_dir) cfg.out_dir = *opt.out_dir;
    if (opt.seed) {
        Rng r(*opt.seed);
        cfg.data.seed = r.fork(1).next_u64();
        cfg.model.seed = r.fork(2).next_u64();
        cfg.train.seed = r.fork(3).next_u64();
        cfg.eval.seed = r.fork(4).next_u64();
        cfg.sweep.seed = r.fork(5).next_u64();
    }
    if (opt.budget) {
        if (*opt.budget < 1) throw ConfigError("--budget must be >= 1");
        cfg.train.epochs = *opt.budget;
        if (cfg.train.phase1_epochs > cfg.train.epochs) cfg.train.phase1_epochs = -1;
    }
    return cfg;
}

namespace detail {

inline fs::path train_dataset_path(const ExperimentConfig& c) {
    return fs::path(c.out_dir) / "dataset_train.bin";
}
inline fs::path checkpoint_path(const ExperimentConfig& c) {
    return fs::path(c.out_dir) / "checkpoint.bin";
}

inline std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2E", v);
    return buf;
}

inline std::string alpha_csv(const AlphaMatrix& a) {
    std::ostringstream os;
    os << "i,j,alpha,abs_alpha\n";
    os.setf(std::ios::scientific);
    os.precision(9);
    for (int i = 0; i < a.dim; ++i)
        for (int j = 0; j < a.dim; ++j)
            os << i << ',' << j << ',' << a.at(i, j) << ',' << std::abs(a.at(i, j)) << '\n';
    return os.str();
}

inline SghnConfig sghn_config(const ExperimentConfig& c) {
    return {c.model.depth, c.model.width, c.model.act};
}

}  // namespace detail

inline int cmd_generate(const ExperimentConfig& cfg) {
    const Dataset ds = generate_dataset(cfg.system, cfg.data);
    save_dataset(ds, detail::train_dataset_path(cfg));
    std::cout << "generated " << ds.size() << " training pairs ("
              << cfg.data.n_traj - static_cast<int>(ds.failed_trajectories.size()) << "/"
              << cfg.data.n_traj << " trajectories)\n";
    for (int k : ds.failed_trajectories) std::cout << "warning: trajectory " << k << " diverged\n";
    return 0;
}

inline int cmd_train(const ExperimentConfig& cfg) {
    const fs::path ds_path = detail::train_dataset_path(cfg);
    if (!fs::exists(ds_path))
        throw std::runtime_error("dataset not found: " + ds_path.string() + " (run generate first)");
    const Dataset ds = load_dataset(ds_path);
    if (io::spec_to_json(ds.spec) != io::spec_to_json(cfg.system))
        throw std::runtime_error("dataset was generated for a different system spec");

    const fs::path ck_path = detail::checkpoint_path(cfg);
    PredictiveModel model;
    int start_epoch = 0;
    std::vector<double> history;
    LinkGraph links;
    bool have_links = false;

    if (fs::exists(ck_path)) {
        model = load_checkpoint(ck_path, &start_epoch);
        if (model.kind != cfg.model.kind)
            throw std::runtime_error("existing checkpoint has a different model kind");
        if (start_epoch >= cfg.train.epochs) {
            std::cout << "checkpoint already trained for " << start_epoch << " epochs; nothing to do\n";
            return 0;
        }
        std::cout << "resuming from epoch " << start_epoch << "\n";
        switch (model.kind) {
            case ModelKind::Mlp: {
                Trainable t = make_trainable(model.mlp);
                history = train(t, ds, cfg.train, 0.0, start_epoch);
                break;
            }
            case ModelKind::Hnn: {
                Trainable t = make_trainable(model.hnn);
                history = train(t, ds, cfg.train, 0.0, start_epoch);
                break;
            }
            case ModelKind::Sghn: {
                // the stored edge mask already reflects phase 1; continue the fine-tune
                Trainable t = make_trainable(model.sghn);
                history = train(t, ds, cfg.train, 0.0, start_epoch);
                break;
            }
        }
    } else {
        switch (cfg.model.kind) {
            case ModelKind::Mlp: {
                model = PredictiveModel::of(
                    MlpModel::init(ds.dim(), cfg.model.depth, cfg.model.width, cfg.model.act,
                                   cfg.model.seed));
                Trainable t = make_trainable(model.mlp);
                history = train(t, ds, cfg.train);
                break;
            }
            case ModelKind::Hnn: {
                model = PredictiveModel::of(
                    HnnModel::init(ds.dim(), cfg.model.depth, cfg.model.width, cfg.model.act,
                                   cfg.model.seed));
                Trainable t = make_trainable(model.hnn);
                history = train(t, ds, cfg.train);
                break;
            }
            case ModelKind::Sghn: {
                TwoPhaseResult r =
                    train_sghn_two_phase(ds, cfg.train, detail::sghn_config(cfg), cfg.model.seed);
                model = PredictiveModel::of(std::move(r.model));
                history = std::move(r.loss_history);
                links = std::move(r.links);
                have_links = true;
                break;
            }
        }
    }

    save_checkpoint(model, ck_path, cfg.train.epochs);

    std::ostringstream loss_csv;
    const fs::path loss_path = fs::path(cfg.out_dir) / "loss.csv";
    if (start_epoch > 0 && fs::exists(loss_path)) {
        std::ifstream f(loss_path);
        loss_csv << f.rdbuf();
    } else {
        loss_csv << "epoch,loss\n";
    }
    loss_csv.setf(std::ios::scientific);
    loss_csv.precision(9);
    for (std::size_t i = 0; i < history.size(); ++i)
        loss_csv << start_epoch + static_cast<int>(i) << ',' << history[i] << '\n';
    io::write_text(loss_path, loss_csv.str());

    if (model.kind == ModelKind::Sghn) {
        io::write_text(fs::path(cfg.out_dir) / "alpha.csv", detail::alpha_csv(extract_alpha(model.sghn)));
        if (have_links)
            io::write_text(fs::path(cfg.out_dir) / "links.txt", edge_list_text(links));
    }
    std::cout << "trained " << to_string(model.kind) << " to epoch " << cfg.train.epochs
              << ", final loss " << detail::sci(history.empty() ? 0.0 : history.back()) << "\n";
    return 0;
}

struct SampleMetrics {
    int sample = 0;
    bool failed = false;
    std::string error;
    double test_loss = 0.0;
    double traj_mse = 0.0;
    double traj_mape = 0.0;
    double energy_mape = 0.0;
    std::vector<std::pair<std::string, double>> conserved;  // name -> mse
};

inline SampleMetrics eval_sample(const ExperimentConfig& cfg, const PredictiveModel& model, int k) {
    SampleMetrics sm;
    sm.sample = k;
    try {
        Rng r = Rng(cfg.eval.seed).fork(static_cast<std::uint64_t>(k));
        const PhaseState s0 = sample_ic(cfg.data.sampler, cfg.system, r);
        const IntegratorConfig icfg{cfg.data.h, Scheme::Srkn5};
        const Trajectory truth = subsample(
            integrate(Dynamics::of(cfg.system), s0, cfg.eval.t_end_test, icfg), cfg.data.stride);
        const Trajectory pred =
            rollout(model, s0, cfg.eval.t_end_test, cfg.data.h, cfg.data.stride);

        Dataset test_ds;
        test_ds.spec = cfg.system;
        TargetedSamples ts = derivative_targets(cfg.system, truth, TargetMode::Oracle);
        test_ds.inputs = std::move(ts.inputs);
        test_ds.targets = std::move(ts.targets);
        sm.test_loss = dataset_loss(model, test_ds);

        sm.traj_mse = trajectory_mse(pred, truth).mean;
        sm.traj_mape =
            mape(hamlat::detail::phase_series(pred), hamlat::detail::phase_series(truth)).value;
        sm.energy_mape = mape(hamlat::detail::energy_series(cfg.system, pred),
                              hamlat::detail::energy_series(cfg.system, truth))
                             .value;
        for (const ConservedDescriptor& d : conserved_set(cfg.system))
            sm.conserved.emplace_back(d.name(), conserved_mse(cfg.system, pred, d, s0));
    } catch (const IntegrationError& e) {
        sm.failed = true;
        sm.error = std::string("rollout diverged: ") + e.what();
    } catch (const std::exception& e) {
        sm.failed = true;
        sm.error = e.what();
    }
    return sm;
}

inline int cmd_eval(const ExperimentConfig& cfg) {
    const fs::path ck_path = detail::checkpoint_path(cfg);
    if (!fs::exists(ck_path))
        throw std::runtime_error("checkpoint not found: " + ck_path.string() + " (run train first)");
    const PredictiveModel model = load_checkpoint(ck_path);

    std::vector<SampleMetrics> rows;
    for (int k = 0; k < cfg.eval.n_test; ++k) rows.push_back(eval_sample(cfg, model, k));

    std::vector<std::string> cnames;
    for (const ConservedDescriptor& d : conserved_set(cfg.system)) cnames.push_back(d.name());

    std::ostringstream csv;
    csv << "sample,status,test_loss,traj_mse,traj_mape,energy_mape";
    for (const std::string& n : cnames) csv << ",mse_" << n;
    csv << ",error\n";
    csv.setf(std::ios::scientific);
    csv.precision(9);

    auto stats = [](const std::vector<double>& xs) {
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        return std::make_pair(mean, std::sqrt(var / static_cast<double>(xs.size())));
    };

    io::json summary;
    summary["n_test"] = cfg.eval.n_test;
    io::json jsamples = io::json::array();
    std::vector<double> v_loss, v_mse, v_tmape, v_emape;
    std::map<std::string, std::vector<double>> v_cons;
    int ok = 0;
    for (const SampleMetrics& sm : rows) {
        csv << sm.sample << ',' << (sm.failed ? "failed" : "ok") << ',';
        io::json js{{"sample", sm.sample}, {"status", sm.failed ? "failed" : "ok"}};
        if (sm.failed) {
            csv << ",,,";
            for (std::size_t i = 0; i < cnames.size(); ++i) csv << ',';
            csv << ",\"" << sm.error << "\"\n";
            js["error"] = sm.error;
        } else {
            csv << sm.test_loss << ',' << sm.traj_mse << ',' << sm.traj_mape << ',' << sm.energy_mape;
            for (const auto& [n, v] : sm.conserved) csv << ',' << v;
            csv << ",\n";
            js["test_loss"] = sm.test_loss;
            js["traj_mse"] = sm.traj_mse;
            js["traj_mape"] = sm.traj_mape;
            js["energy_mape"] = sm.energy_mape;
            for (const auto& [n, v] : sm.conserved) {
                js["mse_" + n] = v;
                v_cons[n].push_back(v);
            }
            v_loss.push_back(sm.test_loss);
            v_mse.push_back(sm.traj_mse);
            v_tmape.push_back(sm.traj_mape);
            v_emape.push_back(sm.energy_mape);
            ++ok;
        }
        jsamples.push_back(std::move(js));
    }
    summary["samples"] = std::move(jsamples);
    summary["ok"] = ok;
    if (ok > 0) {
        io::json agg;
        auto put = [&](const std::string& name, const std::vector<double>& xs) {
            const auto [m, s] = stats(xs);
            agg[name] = {{"mean", m}, {"std", s}};
            csv << "aggregate_mean_" << name << ",ok," << m << ",,,";
            for (std::size_t i = 0; i < cnames.size(); ++i) csv << ',';
            csv << ",\n";
        };
        put("test_loss", v_loss);
        put("traj_mse", v_mse);
        put("traj_mape", v_tmape);
        put("energy_mape", v_emape);
        for (const auto& [n, xs] : v_cons) put("mse_" + n, xs);
        summary["aggregate"] = std::move(agg);
    }

    io::write_text(fs::path(cfg.out_dir) / "metrics.csv", csv.str());
    io::write_text(fs::path(cfg.out_dir) / "metrics.json", summary.dump(2) + "\n");
    std::cout << "evaluated " << ok << "/" << cfg.eval.n_test << " test samples\n";
    for (const SampleMetrics& sm : rows)
        if (sm.failed) std::cout << "warning: sample " << sm.sample << ": " << sm.error << "\n";
    return 0;
}

inline int cmd_links(const ExperimentConfig& cfg) {
    const fs::path ck_path = detail::checkpoint_path(cfg);
    if (!fs::exists(ck_path))
        throw std::runtime_error("checkpoint not found: " + ck_path.string() + " (run train first)");
    const PredictiveModel model = load_checkpoint(ck_path);
    if (model.kind != ModelKind::Sghn)
        throw std::runtime_error("links requires an sghn checkpoint, got " + to_string(model.kind));
    const AlphaMatrix alpha = extract_alpha(model.sghn);
    const LinkGraph g = direct_links(alpha, extract_links(alpha, cfg.eval.tau));
    io::write_text(fs::path(cfg.out_dir) / "links.txt", edge_list_text(g));
    io::write_text(fs::path(cfg.out_dir) / "alpha.csv", detail::alpha_csv(alpha));
    std::cout << "extracted " << g.edges.size() << " links at tau " << cfg.eval.tau << "\n";
    return 0;
}

inline int cmd_sweep(const ExperimentConfig& cfg) {
    SweepPlan plan;
    plan.base = cfg.sweep.base;
    plan.n = cfg.sweep.n;
    plan.mu_grid = cfg.sweep.mu_grid;
    plan.kinds = cfg.sweep.kinds;
    plan.data = cfg.data;
    plan.train = cfg.train;
    plan.n_test = cfg.eval.n_test;
    plan.t_end_test = cfg.eval.t_end_test;
    plan.seed = cfg.sweep.seed;
    const std::vector<SweepCell> cells = mu_sweep(plan);
    io::write_text(fs::path(cfg.out_dir) / "sweep.csv", sweep_csv(cells));
    int failed = 0;
    for (const SweepCell& c : cells) failed += c.failed ? 1 : 0;
    std::cout << "sweep: " << cells.size() - failed << "/" << cells.size() << " cells ok\n";
    return 0;
}

inline int cmd_report(const ExperimentConfig& cfg) {
    const fs::path mpath = fs::path(cfg.out_dir) / "metrics.json";
    std::ostringstream md;
    md << "# Experiment report\n\n";
    md << "System: `" << io::spec_to_json(cfg.system).dump() << "`  \n";
    md << "Model: " << to_string(cfg.model.kind) << " (depth " << cfg.model.depth << ", width "
       << cfg.model.width << ", " << to_string(cfg.model.act) << ")\n\n";

    bool any = false;
    if (fs::exists(mpath)) {
        any = true;
        std::ifstream f(mpath);
        const io::json m = io::json::parse(f);
        md << "## Prediction metrics (" << m.value("ok", 0) << "/" << m.value("n_test", 0)
           << " test samples, mean ± std)\n\n";
        md << "| metric | value |\n|---|---|\n";
        if (m.contains("aggregate"))
            for (const auto& [name, v] : m.at("aggregate").items())
                md << "| " << name << " | " << detail::sci(v.at("mean").get<double>()) << " ± "
                   << detail::sci(v.at("std").get<double>()) << " |\n";
        md << "\n";
    }
    if (const fs::path lpath = fs::path(cfg.out_dir) / "links.txt"; fs::exists(lpath)) {
        any = true;
        std::ifstream f(lpath);
        std::stringstream ss;
        ss << f.rdbuf();
        md << "## Extracted links (tau = " << cfg.eval.tau << ")\n\n```\n" << ss.str() << "```\n\n";
    }
    if (const fs::path spath = fs::path(cfg.out_dir) / "sweep.csv"; fs::exists(spath)) {
        any = true;
        std::ifstream f(spath);
        std::string line;
        md << "## mu sweep\n\n";
        bool header = true;
        while (std::getline(f, line)) {
            std::string row = "| ";
            for (char ch : line) row += (ch == ',') ? std::string(" | ") : std::string(1, ch);
            md << row << " |\n";
            if (header) {
                md << "|---|---|---|---|---|---|---|\n";
                header = false;
            }
        }
        md << "\n";
    }
    if (!any)
        throw std::runtime_error("report: no artifacts found in " + cfg.out_dir +
                                 " (run eval/links/sweep first)");
    io::write_text(fs::path(cfg.out_dir) / "report.md", md.str());
    std::cout << "wrote " << (fs::path(cfg.out_dir) / "report.md").string() << "\n";
    return 0;
}

}  // namespace hamlat::cli
