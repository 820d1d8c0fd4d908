#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "hamlat/io.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr interleaved
};

RunResult run(const std::string& args) {
    const std::string cmd = std::string(HAMLAT_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    std::array<char, 4096> buf;
    while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

fs::path scratch() {
    static const fs::path root = [] {
        const fs::path p = fs::temp_directory_path() / "hamlat_cli_tests";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return root;
}

fs::path write_config(const std::string& name, const std::string& body) {
    const fs::path p = scratch() / name;
    std::ofstream f(p);
    f << body;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return std::string((std::istreambuf_iterator<char>(f)), {});
}

// toda(3) desk config: tiny but exercises the full pipeline
const char* kTinyConfig = R"({
  "system": {"kind": "toda", "n": 3},
  "data": {"n_traj": 2, "t_end": 1.0, "seed": 11},
  "model": {"kind": "sghn", "depth": 1, "width": 8, "act": "tanh", "seed": 3},
  "train": {"epochs": 6, "phase1_epochs": 4, "seed": 5},
  "eval": {"n_test": 2, "t_end_test": 1.0, "seed": 7}
})";

}  // namespace

TEST_CASE("missing and malformed arguments exit with code 1") {
    REQUIRE(run("").exit_code == 1);
    REQUIRE(run("generate").exit_code == 1);  // --config is required
    REQUIRE(run("frobnicate --config x.json").exit_code == 1);
    const RunResult r = run("generate --config /nonexistent/cfg.json");
    REQUIRE(r.exit_code == 1);
    REQUIRE(r.output.find("cannot open config") != std::string::npos);
}

TEST_CASE("invalid activation is a config error listing the allowed values") {
    const fs::path cfg = write_config("bad_act.json", R"({
      "system": {"kind": "fk", "n": 4},
      "model": {"act": "relu"}
    })");
    const RunResult r = run("generate --config " + cfg.string());
    REQUIRE(r.exit_code == 1);
    REQUIRE(r.output.find("tanh") != std::string::npos);
    REQUIRE(r.output.find("silu") != std::string::npos);
    REQUIRE(r.output.find("gelu") != std::string::npos);
}

TEST_CASE("train before generate fails with exit code 2") {
    const fs::path cfg = write_config("tiny.json", kTinyConfig);
    const fs::path out = scratch() / "no_dataset";
    const RunResult r = run("train --config " + cfg.string() + " --out " + out.string());
    REQUIRE(r.exit_code == 2);
    REQUIRE(r.output.find("dataset not found") != std::string::npos);
}

TEST_CASE("generate writes the dataset and is deterministic across reruns") {
    const fs::path cfg = write_config("tiny.json", kTinyConfig);
    const fs::path out_a = scratch() / "gen_a";
    const fs::path out_b = scratch() / "gen_b";
    const RunResult ra = run("generate --config " + cfg.string() + " --out " + out_a.string());
    REQUIRE(ra.exit_code == 0);
    // 2 trajectories x 21 samples (t_end 1.0, h 0.0025, stride 20)
    REQUIRE(ra.output.find("generated 42 training pairs (2/2 trajectories)") != std::string::npos);
    REQUIRE(fs::exists(out_a / "dataset_train.bin"));
    REQUIRE(run("generate --config " + cfg.string() + " --out " + out_b.string()).exit_code == 0);
    REQUIRE(slurp(out_a / "dataset_train.bin") == slurp(out_b / "dataset_train.bin"));
}

TEST_CASE("full pipeline: train, eval, links, report") {
    const fs::path cfg = write_config("tiny.json", kTinyConfig);
    const fs::path out = scratch() / "pipeline";
    REQUIRE(run("generate --config " + cfg.string() + " --out " + out.string()).exit_code == 0);

    const RunResult tr = run("train --config " + cfg.string() + " --out " + out.string());
    INFO(tr.output);
    REQUIRE(tr.exit_code == 0);
    REQUIRE(fs::exists(out / "checkpoint.bin"));
    REQUIRE(fs::exists(out / "loss.csv"));
    REQUIRE(fs::exists(out / "alpha.csv"));
    REQUIRE(fs::exists(out / "links.txt"));
    const std::string loss = slurp(out / "loss.csv");
    REQUIRE(loss.rfind("epoch,loss\n", 0) == 0);
    REQUIRE(loss.find("\n5,") != std::string::npos);   // last epoch present
    REQUIRE(loss.find("\n6,") == std::string::npos);   // and no further
    REQUIRE(slurp(out / "alpha.csv").rfind("i,j,alpha,abs_alpha\n", 0) == 0);

    // rerun is a no-op on an already-complete checkpoint
    const RunResult tr2 = run("train --config " + cfg.string() + " --out " + out.string());
    REQUIRE(tr2.exit_code == 0);
    REQUIRE(tr2.output.find("nothing to do") != std::string::npos);

    const RunResult ev = run("eval --config " + cfg.string() + " --out " + out.string());
    INFO(ev.output);
    REQUIRE(ev.exit_code == 0);
    const std::string csv = slurp(out / "metrics.csv");
    REQUIRE(csv.rfind("sample,status,test_loss,traj_mse,traj_mape,energy_mape", 0) == 0);
    REQUIRE(csv.find("aggregate_mean_test_loss") != std::string::npos);
    const std::string js = slurp(out / "metrics.json");
    const auto parsed = hamlat::io::json::parse(js);
    REQUIRE(parsed.at("n_test").get<int>() == 2);
    REQUIRE(parsed.contains("aggregate"));
    // toda conserves energy, momentum, C3
    REQUIRE(parsed.at("aggregate").contains("mse_energy"));
    REQUIRE(parsed.at("aggregate").contains("mse_momentum"));
    REQUIRE(parsed.at("aggregate").contains("mse_C3"));

    const RunResult lk = run("links --config " + cfg.string() + " --out " + out.string());
    REQUIRE(lk.exit_code == 0);
    REQUIRE(fs::exists(out / "links.txt"));

    const RunResult rp = run("report --config " + cfg.string() + " --out " + out.string());
    REQUIRE(rp.exit_code == 0);
    const std::string md = slurp(out / "report.md");
    REQUIRE(md.find("±") != std::string::npos);
    REQUIRE(md.find("Extracted links") != std::string::npos);
}

TEST_CASE("report with no artifacts exits with code 2") {
    const fs::path cfg = write_config("tiny.json", kTinyConfig);
    const fs::path out = scratch() / "empty_report";
    const RunResult r = run("report --config " + cfg.string() + " --out " + out.string());
    REQUIRE(r.exit_code == 2);
    REQUIRE(r.output.find("no artifacts") != std::string::npos);
}

TEST_CASE("budget caps the epochs and resume continues the numbering") {
    const fs::path cfg = write_config("tiny.json", kTinyConfig);
    const fs::path out = scratch() / "resume";
    REQUIRE(run("generate --config " + cfg.string() + " --out " + out.string()).exit_code == 0);
    // phase1_epochs(4) > budget(2) resets the phase split to its default
    REQUIRE(run("train --config " + cfg.string() + " --out " + out.string() + " --budget 2")
                .exit_code == 0);
    const RunResult r =
        run("train --config " + cfg.string() + " --out " + out.string() + " --budget 4");
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    REQUIRE(r.output.find("resuming from epoch 2") != std::string::npos);
    const std::string loss = slurp(out / "loss.csv");
    for (const char* row : {"\n0,", "\n1,", "\n2,", "\n3,"})
        REQUIRE(loss.find(row) != std::string::npos);
    REQUIRE(loss.find("\n4,") == std::string::npos);
}

TEST_CASE("seed override changes the generated data") {
    const fs::path cfg = write_config("tiny.json", kTinyConfig);
    const fs::path out_a = scratch() / "seed_a";
    const fs::path out_b = scratch() / "seed_b";
    REQUIRE(run("generate --config " + cfg.string() + " --out " + out_a.string() + " --seed 100")
                .exit_code == 0);
    REQUIRE(run("generate --config " + cfg.string() + " --out " + out_b.string() + " --seed 200")
                .exit_code == 0);
    REQUIRE(slurp(out_a / "dataset_train.bin") != slurp(out_b / "dataset_train.bin"));
}

TEST_CASE("links on a non-sghn checkpoint fails with exit code 2") {
    std::string body = kTinyConfig;
    const auto pos = body.find("\"sghn\"");
    REQUIRE(pos != std::string::npos);
    body.replace(pos, 6, "\"mlp\"");
    const fs::path cfg = write_config("tiny_mlp.json", body);
    const fs::path out = scratch() / "mlp_links";
    REQUIRE(run("generate --config " + cfg.string() + " --out " + out.string()).exit_code == 0);
    REQUIRE(run("train --config " + cfg.string() + " --out " + out.string()).exit_code == 0);
    const RunResult r = run("links --config " + cfg.string() + " --out " + out.string());
    REQUIRE(r.exit_code == 2);
    REQUIRE(r.output.find("sghn") != std::string::npos);
}

TEST_CASE("sweep writes a csv over the mu grid") {
    const fs::path cfg = write_config("sweep.json", R"({
      "system": {"kind": "fk_toda", "n": 4, "mu": 0.5},
      "data": {"n_traj": 2, "t_end": 1.0, "seed": 11},
      "model": {"kind": "mlp", "depth": 1, "width": 8, "act": "tanh", "seed": 3},
      "train": {"epochs": 4, "seed": 5},
      "eval": {"n_test": 2, "t_end_test": 1.0, "seed": 7},
      "sweep": {"base": "fk_toda", "n": 4, "mu_grid": [0.0, 1.0], "models": ["mlp"], "seed": 9}
    })");
    const fs::path out = scratch() / "sweep";
    const RunResult r = run("sweep --config " + cfg.string() + " --out " + out.string());
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    const std::string csv = slurp(out / "sweep.csv");
    REQUIRE(csv.rfind("mu,model,status", 0) == 0);
    // header + 2 grid points x 1 model
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 3);
    REQUIRE(csv.find("0.000000e+00,mlp") != std::string::npos);
    REQUIRE(csv.find("1.000000e+00,mlp") != std::string::npos);
}

TEST_CASE("default protocol on fk 32 yields 5050 training pairs") {
    const fs::path cfg = write_config("fk32.json", R"({
      "system": {"kind": "fk", "n": 32},
      "data": {"seed": 1}
    })");
    const fs::path out = scratch() / "fk32";
    const RunResult r = run("generate --config " + cfg.string() + " --out " + out.string());
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    REQUIRE(r.output.find("generated 5050 training pairs (50/50 trajectories)") !=
            std::string::npos);
}
