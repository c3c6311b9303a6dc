#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sys/wait.h>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "resgcnn/dataset.hpp"
#include "resgcnn/trainer.hpp"
#include "synthetic_data.hpp"

namespace fs = std::filesystem;
using namespace resgcnn;

namespace {

std::string g_binary;  // path to the resgcnn executable, from argv[1]

struct RunResult {
    int exit_code = -1;
    std::string out;  // stdout + stderr
};

RunResult run(const std::string& args, const std::string& env = "") {
    const std::string log = (fs::temp_directory_path() /
                             ("resgcnn_cli_out_" + std::to_string(::getpid()) + ".log"))
                                .string();
    const std::string cmd = env + (env.empty() ? "" : " ") + "'" + g_binary + "' " + args +
                            " > '" + log + "' 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult res;
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::ostringstream ss;
    ss << in.rdbuf();
    res.out = ss.str();
    fs::remove(log);
    return res;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// One shared synthetic workspace: dataset, config, and a trained checkpoint.
struct Workspace {
    fs::path root;
    std::string config;      // default run config (holds out "beta")
    std::string out_dir;
    std::string checkpoint;  // produced by the train smoke test

    Workspace() {
        root = fs::temp_directory_path() / ("resgcnn_cli_" + std::to_string(::getpid()));
        fs::create_directories(root);
        const std::string data_dir = (root / "data").string();
        resgcnn::testing::write_synthetic_dataset(data_dir, {"alpha", "beta"}, 77, 8, 60);
        out_dir = (root / "out").string();
        config = (root / "run.cfg").string();
        std::ofstream cfg(config);
        cfg << "dataset_dir = " << data_dir << "\n"
            << "manifest = " << data_dir << "/manifest.txt\n"
            << "held_out_scene = beta\n"
            << "output_dir = " << out_dir << "\n"
            << "train.epochs = 2\n"
            << "train.batch_size = 16\n"
            << "train.lr_switch_epoch = 1\n"
            << "train.seed = 3\n"
            << "eval.mode = mean\n";
        checkpoint = (fs::path(out_dir) / "checkpoint.bin").string();
    }
};

Workspace& ws() {
    static Workspace w;
    return w;
}

}  // namespace

TEST_CASE("train: writes a checkpoint and loss log, reproducibly") {
    auto& w = ws();
    auto res = run("train --config '" + w.config + "'");
    CHECK_MESSAGE(res.exit_code == 0, res.out);
    REQUIRE(fs::is_regular_file(w.checkpoint));
    REQUIRE(fs::is_regular_file(fs::path(w.out_dir) / "loss_log.txt"));

    // One "epoch<TAB>loss" line per epoch.
    std::ifstream log((fs::path(w.out_dir) / "loss_log.txt").string());
    std::string line;
    int lines = 0;
    while (std::getline(log, line)) {
        CHECK(line.find('\t') != std::string::npos);
        ++lines;
    }
    CHECK(lines == 2);

    // A second run with the same seed produces a byte-identical checkpoint.
    const std::string bytes = read_file(w.checkpoint);
    auto res2 = run("train --config '" + w.config + "'");
    CHECK(res2.exit_code == 0);
    CHECK(read_file(w.checkpoint) == bytes);

    // The checkpoint loads and matches the configured model.
    Checkpoint ckpt = load_checkpoint(w.checkpoint);
    CHECK(ckpt.epoch == 2);
    CHECK(ckpt.parameters.size() > 0);
}

TEST_CASE("eval: reports ADE/FDE for the model and the linear baseline") {
    auto& w = ws();
    REQUIRE(fs::is_regular_file(w.checkpoint));

    auto res = run("eval --config '" + w.config + "' --checkpoint '" + w.checkpoint + "'");
    CHECK_MESSAGE(res.exit_code == 0, res.out);
    CHECK(res.out.find("ADE:") != std::string::npos);
    CHECK(res.out.find("FDE:") != std::string::npos);
    CHECK(res.out.find("beta\tmean\t") != std::string::npos);
    CHECK(fs::is_regular_file(fs::path(w.out_dir) / "metrics_beta.txt"));

    auto base = run("eval --config '" + w.config + "' --baseline linear");
    CHECK_MESSAGE(base.exit_code == 0, base.out);
    CHECK(base.out.find("beta\tlinear\t") != std::string::npos);

    auto bogus = run("eval --config '" + w.config + "' --baseline kalman");
    CHECK(bogus.exit_code == 2);

    auto none = run("eval --config '" + w.config + "'");
    CHECK(none.exit_code == 2);  // neither checkpoint nor baseline
}

TEST_CASE("predict: CSV rows and SVG output") {
    auto& w = ws();
    REQUIRE(fs::is_regular_file(w.checkpoint));
    const std::string svg_path = (fs::path(w.out_dir) / "seq0.svg").string();

    auto res = run("predict --config '" + w.config + "' --checkpoint '" + w.checkpoint +
                   "' --sequence 0 --svg '" + svg_path + "'");
    CHECK_MESSAGE(res.exit_code == 0, res.out);

    // Recreate the test split with the library to know the expected sequence.
    Checkpoint ckpt = load_checkpoint(w.checkpoint);
    const auto scenes = load_scenes((w.root / "data").string(),
                                    (w.root / "data" / "manifest.txt").string(), 8, 12);
    const auto split = loso_split(scenes, "beta");
    REQUIRE(!split.test.empty());
    const auto& seq = split.test[0];
    const int n = seq.n_pedestrians();

    std::ifstream csv((fs::path(w.out_dir) / "prediction_0.csv").string());
    REQUIRE(csv.good());
    std::string line;
    std::getline(csv, line);
    CHECK(line == "ped_id,frame_kind,t,x,y");
    int rows = 0, obs_rows = 0;
    while (std::getline(csv, line)) {
        std::istringstream ls(line);
        std::string pid, kind, t, x, y;
        std::getline(ls, pid, ',');
        std::getline(ls, kind, ',');
        std::getline(ls, t, ',');
        std::getline(ls, x, ',');
        std::getline(ls, y, ',');
        if (kind == "OBS") {
            // Written at precision 17, so the doubles round-trip exactly.
            const int i = obs_rows / 8, k = obs_rows % 8;
            CHECK(std::stoll(pid) == seq.ped_ids[static_cast<std::size_t>(i)]);
            CHECK(std::stod(x) == seq.obs.at3(i, k, 0));
            CHECK(std::stod(y) == seq.obs.at3(i, k, 1));
            ++obs_rows;
        }
        ++rows;
    }
    CHECK(rows == n * (8 + 12 + 12));
    CHECK(obs_rows == n * 8);

    const std::string svg = read_file(svg_path);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    int stars = 0;
    for (std::size_t p = svg.find("<polygon"); p != std::string::npos;
         p = svg.find("<polygon", p + 1))
        ++stars;
    CHECK(stars == n * 12);

    auto oob = run("predict --config '" + w.config + "' --checkpoint '" + w.checkpoint +
                   "' --sequence 100000");
    CHECK(oob.exit_code == 2);
}

TEST_CASE("bench: parameter count and timing lines") {
    auto& w = ws();
    auto res = run("bench --config '" + w.config + "' --checkpoint '" + w.checkpoint +
                   "' --repeats 10 --scene-size 5");
    CHECK_MESSAGE(res.exit_code == 0, res.out);
    CHECK(res.out.find("params=1907") != std::string::npos);
    CHECK(res.out.find("scene_size=5") != std::string::npos);
    CHECK(res.out.find("mean_forward_s=") != std::string::npos);
    CHECK(res.out.find("mean_graph_s=") != std::string::npos);
}

TEST_CASE("exit codes: usage and configuration errors are 2, runtime failures 1") {
    auto& w = ws();
    CHECK(run("").exit_code == 2);             // missing subcommand
    CHECK(run("explode").exit_code == 2);      // unknown subcommand
    CHECK(run("train").exit_code == 2);        // missing --config
    CHECK(run("--help").exit_code == 0);

    CHECK(run("train --config /nonexistent.cfg").exit_code == 2);

    // Unknown config key.
    const std::string bad = (w.root / "bad.cfg").string();
    std::ofstream(bad) << "dataset_dir = /tmp\nwat = 1\n";
    CHECK(run("train --config '" + bad + "'").exit_code == 2);

    // Missing or corrupt checkpoint.
    CHECK(run("eval --config '" + w.config + "' --checkpoint /nonexistent.bin").exit_code == 2);
    const std::string junk = (w.root / "junk.bin").string();
    std::ofstream(junk, std::ios::binary) << "not a checkpoint";
    CHECK(run("eval --config '" + w.config + "' --checkpoint '" + junk + "'").exit_code == 2);

    // Invalid thread cap.
    CHECK(run("bench --config '" + w.config + "' --checkpoint '" + w.checkpoint + "'",
              "RESGCNN_THREADS=abc").exit_code == 2);
    CHECK(run("bench --config '" + w.config + "' --checkpoint '" + w.checkpoint +
              "' --repeats 10 --scene-size 4", "RESGCNN_THREADS=2").exit_code == 0);

    // Config whose horizon disagrees with the checkpoint: a runtime failure.
    const std::string mism = (w.root / "mismatch.cfg").string();
    {
        std::ifstream in(w.config);
        std::ofstream out(mism);
        out << in.rdbuf() << "model.t_pred = 10\n";
    }
    CHECK(run("eval --config '" + mism + "' --checkpoint '" + w.checkpoint + "'").exit_code == 1);
}

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: test_cli <path-to-resgcnn-binary> [doctest args]\n");
        return 2;
    }
    g_binary = argv[1];
    doctest::Context ctx;
    ctx.applyCommandLine(argc - 1, argv + 1);
    const int rc = ctx.run();
    fs::remove_all(ws().root);
    return rc;
}
