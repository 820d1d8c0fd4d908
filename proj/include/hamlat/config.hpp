// Declarative experiment configuration: one JSON document drives every
// subcommand. All seeds are explicit; nothing reads the wall clock.
#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hamlat/dataset.hpp"
#include "hamlat/io.hpp"
#include "hamlat/models.hpp"
#include "hamlat/sweep.hpp"
#include "hamlat/train.hpp"

namespace hamlat {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ModelConfig {
    ModelKind kind = ModelKind::Sghn;
    int depth = 1;
    int width = 32;
    Activation act = Activation::Tanh;
    std::uint64_t seed = 0;
};

struct EvalConfig {
    double t_end_test = 15.0;
    int n_test = 20;
    double tau = 0.1;
    std::uint64_t seed = 1;
};

struct SweepConfigBlock {
    LatticeKind base = LatticeKind::FkToda;
    int n = 8;
    std::vector<double> mu_grid{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<ModelKind> kinds{ModelKind::Sghn};
    std::uint64_t seed = 2;
};

struct ExperimentConfig {
    LatticeSpec system;
    DataProtocol data;
    ModelConfig model;
    TrainConfig train;
    EvalConfig eval;
    SweepConfigBlock sweep;
    std::string out_dir = "out";
};

namespace detail {

template <typename F>
auto config_field(const io::json& j, const char* key, F&& get) {
    try {
        return get(j.at(key));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

}  // namespace detail

inline ExperimentConfig config_from_json(const io::json& j) {
    ExperimentConfig c;
    try {
        if (!j.contains("system")) throw ConfigError("config: missing 'system' block");
        c.system = io::spec_from_json(j.at("system"));

        if (j.contains("data")) {
            const io::json& d = j.at("data");
            c.data.n_traj = d.value("n_traj", c.data.n_traj);
            c.data.t_end = d.value("t_end", c.data.t_end);
            c.data.h = d.value("h", c.data.h);
            c.data.stride = d.value("stride", c.data.stride);
            if (d.contains("sampler"))
                c.data.sampler.kind = IcSampler::kind_from_string(d.at("sampler").get<std::string>());
            if (d.contains("mode"))
                c.data.mode = target_mode_from_string(d.at("mode").get<std::string>());
            c.data.seed = d.value("seed", c.data.seed);
        }
        if (j.contains("model")) {
            const io::json& m = j.at("model");
            if (m.contains("kind")) c.model.kind = model_kind_from_string(m.at("kind").get<std::string>());
            c.model.depth = m.value("depth", c.model.depth);
            c.model.width = m.value("width", c.model.width);
            if (m.contains("act")) c.model.act = activation_from_string(m.at("act").get<std::string>());
            c.model.seed = m.value("seed", c.model.seed);
        }
        if (j.contains("train")) {
            const io::json& t = j.at("train");
            c.train.epochs = t.value("epochs", c.train.epochs);
            c.train.batch_size = t.value("batch_size", c.train.batch_size);
            if (t.contains("rates")) {
                const auto r = t.at("rates").get<std::vector<double>>();
                if (r.size() != 3) throw ConfigError("config: train.rates needs 3 entries");
                c.train.rates = {r[0], r[1], r[2]};
            }
            if (t.contains("boundaries")) {
                const auto b = t.at("boundaries").get<std::vector<int>>();
                if (b.size() != 2) throw ConfigError("config: train.boundaries needs 2 entries");
                c.train.boundaries = {b[0], b[1]};
            }
            c.train.seed = t.value("seed", c.train.seed);
            c.train.lambda_l1 = t.value("lambda_l1", c.train.lambda_l1);
            c.train.tau = t.value("tau", c.train.tau);
            c.train.phase1_epochs = t.value("phase1_epochs", c.train.phase1_epochs);
        }
        if (j.contains("eval")) {
            const io::json& e = j.at("eval");
            c.eval.t_end_test = e.value("t_end_test", c.eval.t_end_test);
            c.eval.n_test = e.value("n_test", c.eval.n_test);
            c.eval.tau = e.value("tau", c.eval.tau);
            c.eval.seed = e.value("seed", c.eval.seed);
        }
        if (j.contains("sweep")) {
            const io::json& s = j.at("sweep");
            if (s.contains("base"))
                c.sweep.base = lattice_kind_from_string(s.at("base").get<std::string>());
            c.sweep.n = s.value("n", c.sweep.n);
            if (s.contains("mu_grid")) c.sweep.mu_grid = s.at("mu_grid").get<std::vector<double>>();
            if (s.contains("models")) {
                c.sweep.kinds.clear();
                for (const auto& k : s.at("models"))
                    c.sweep.kinds.push_back(model_kind_from_string(k.get<std::string>()));
            }
            c.sweep.seed = s.value("seed", c.sweep.seed);
        }
        c.out_dir = j.value("out_dir", c.out_dir);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    try {
        c.system.validate();
        c.train.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (c.data.n_traj < 1 || !(c.data.t_end > 0.0) || !(c.data.h > 0.0) || c.data.stride < 1)
        throw ConfigError("config: data block needs n_traj >= 1, t_end > 0, h > 0, stride >= 1");
    if (c.model.depth < 1 || c.model.width < 1) throw ConfigError("config: model depth/width >= 1");
    if (c.eval.n_test < 1 || !(c.eval.t_end_test > 0.0))
        throw ConfigError("config: eval needs n_test >= 1, t_end_test > 0");
    if (!(c.eval.tau > 0.0) || c.eval.tau > 1.0) throw ConfigError("config: eval.tau in (0, 1]");
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config: " + path.string());
    io::json j;
    try {
        j = io::json::parse(f);
    } catch (const io::json::parse_error& e) {
        throw ConfigError("config parse error: " + std::string(e.what()));
    }
    return config_from_json(j);
}

inline io::json config_to_json(const ExperimentConfig& c) {
    io::json j;
    j["system"] = io::spec_to_json(c.system);
    j["data"] = {{"n_traj", c.data.n_traj},
                 {"t_end", c.data.t_end},
                 {"h", c.data.h},
                 {"stride", c.data.stride},
                 {"sampler", IcSampler::to_string(c.data.sampler.kind)},
                 {"mode", to_string(c.data.mode)},
                 {"seed", c.data.seed}};
    j["model"] = {{"kind", to_string(c.model.kind)},
                  {"depth", c.model.depth},
                  {"width", c.model.width},
                  {"act", to_string(c.model.act)},
                  {"seed", c.model.seed}};
    j["train"] = {{"epochs", c.train.epochs},
                  {"batch_size", c.train.batch_size},
                  {"rates", c.train.rates},
                  {"boundaries", c.train.boundaries},
                  {"seed", c.train.seed},
                  {"lambda_l1", c.train.lambda_l1},
                  {"tau", c.train.tau},
                  {"phase1_epochs", c.train.phase1_epochs}};
    j["eval"] = {{"t_end_test", c.eval.t_end_test},
                 {"n_test", c.eval.n_test},
                 {"tau", c.eval.tau},
                 {"seed", c.eval.seed}};
    {
        std::vector<std::string> models;
        for (ModelKind k : c.sweep.kinds) models.push_back(to_string(k));
        j["sweep"] = {{"base", to_string(c.sweep.base)},
                      {"n", c.sweep.n},
                      {"mu_grid", c.sweep.mu_grid},
                      {"models", models},
                      {"seed", c.sweep.seed}};
    }
    j["out_dir"] = c.out_dir;
    return j;
}

}  // namespace hamlat
