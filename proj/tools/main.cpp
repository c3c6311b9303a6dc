#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "resgcnn/config.hpp"
#include "resgcnn/dataset.hpp"
#include "resgcnn/evaluator.hpp"
#include "resgcnn/model.hpp"
#include "resgcnn/social_graph.hpp"
#include "resgcnn/trainer.hpp"

namespace fs = std::filesystem;
using namespace resgcnn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct RunConfig {
    std::string dataset_dir;
    std::string manifest;
    std::string held_out_scene;
    std::string output_dir;
    ModelConfig model;
    KernelConfig kernel;
    TrainConfig train;
    EvalConfig eval;
};

void apply_train_key(TrainConfig& cfg, const std::string& key, const std::string& value) {
    auto as_int = [&](const char* k) {
        try {
            return std::stoi(value);
        } catch (const std::exception&) {
            throw ConfigError(std::string("config key 'train.") + k + "': not an integer: '" + value + "'");
        }
    };
    auto as_double = [&](const char* k) {
        try {
            return std::stod(value);
        } catch (const std::exception&) {
            throw ConfigError(std::string("config key 'train.") + k + "': not a number: '" + value + "'");
        }
    };
    if (key == "batch_size") cfg.batch_size = as_int("batch_size");
    else if (key == "epochs") cfg.epochs = as_int("epochs");
    else if (key == "lr_initial") cfg.lr_initial = as_double("lr_initial");
    else if (key == "lr_late") cfg.lr_late = as_double("lr_late");
    else if (key == "lr_switch_epoch") cfg.lr_switch_epoch = as_int("lr_switch_epoch");
    else if (key == "clip_grad_norm") cfg.clip_grad_norm = as_double("clip_grad_norm");
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
    else throw ConfigError("unknown train config key: '" + key + "'");
}

void apply_eval_key(EvalConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "mode") {
        if (value == "mean") cfg.mode = EvalConfig::Mode::Mean;
        else if (value == "best_of_k") cfg.mode = EvalConfig::Mode::BestOfK;
        else throw ConfigError("eval.mode must be 'mean' or 'best_of_k', got '" + value + "'");
    } else if (key == "k") {
        cfg.k = std::stoi(value);
    } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
    } else {
        throw ConfigError("unknown eval config key: '" + key + "'");
    }
}

RunConfig load_run_config(const std::string& path) {
    RunConfig rc;
    for (const auto& [key, value] : parse_kv_file(path)) {
        const auto dot = key.find('.');
        if (dot == std::string::npos) {
            if (key == "dataset_dir") rc.dataset_dir = value;
            else if (key == "manifest") rc.manifest = value;
            else if (key == "held_out_scene") rc.held_out_scene = value;
            else if (key == "output_dir") rc.output_dir = value;
            else throw ConfigError("unknown config key: '" + key + "'");
            continue;
        }
        const std::string prefix = key.substr(0, dot);
        const std::string sub = key.substr(dot + 1);
        if (prefix == "model") apply_model_key(rc.model, sub, value);
        else if (prefix == "kernel") apply_kernel_key(rc.kernel, sub, value);
        else if (prefix == "train") apply_train_key(rc.train, sub, value);
        else if (prefix == "eval") apply_eval_key(rc.eval, sub, value);
        else throw ConfigError("unknown config section: '" + prefix + "'");
    }
    if (rc.dataset_dir.empty()) throw ConfigError("config is missing 'dataset_dir'");
    if (rc.manifest.empty()) throw ConfigError("config is missing 'manifest'");
    if (rc.held_out_scene.empty()) throw ConfigError("config is missing 'held_out_scene'");
    if (rc.output_dir.empty()) throw ConfigError("config is missing 'output_dir'");
    if (!fs::is_directory(rc.dataset_dir))
        throw ConfigError("dataset_dir does not exist: " + rc.dataset_dir);
    if (!fs::is_regular_file(rc.manifest))
        throw ConfigError("manifest does not exist: " + rc.manifest);
    rc.model.validate();
    rc.kernel.validate();
    rc.train.validate();
    rc.eval.validate();
    return rc;
}

void atomic_write_text(const std::string& path, const std::string& data) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write: " + tmp);
        out << data;
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    fs::rename(tmp, path);
}

int read_thread_cap() {
    const char* env = std::getenv("RESGCNN_THREADS");
    if (!env) return 1;
    try {
        const int v = std::stoi(env);
        if (v < 1) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(std::string("RESGCNN_THREADS must be a positive integer, got '") + env + "'");
    }
}

int cmd_train(const std::string& config_path) {
    const RunConfig rc = load_run_config(config_path);
    fs::create_directories(rc.output_dir);

    const auto scenes = load_scenes(rc.dataset_dir, rc.manifest, rc.model.t_obs, rc.model.t_pred);
    const auto split = loso_split(scenes, rc.held_out_scene);

    std::ostringstream loss_log;
    const TrainResult result = train(split, rc.model, rc.kernel, rc.train, &loss_log);

    const auto ckpt_path = (fs::path(rc.output_dir) / "checkpoint.bin").string();
    save_checkpoint(result.checkpoint, ckpt_path);
    atomic_write_text((fs::path(rc.output_dir) / "loss_log.txt").string(), loss_log.str());

    std::cout << "trained " << rc.train.epochs << " epochs on " << split.train.size()
              << " sequences (held out: " << rc.held_out_scene << ")\n"
              << "final mean loss: " << result.epoch_losses.back() << "\n"
              << "checkpoint: " << ckpt_path << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt_path,
             const std::string& baseline) {
    const RunConfig rc = load_run_config(config_path);
    fs::create_directories(rc.output_dir);

    const auto scenes = load_scenes(rc.dataset_dir, rc.manifest, rc.model.t_obs, rc.model.t_pred);
    const auto split = loso_split(scenes, rc.held_out_scene);

    Metrics m;
    std::string mode_name;
    if (baseline == "linear") {
        m = evaluate_baseline(split.test, rc.model.t_pred);
        mode_name = "linear";
    } else if (!baseline.empty()) {
        throw ConfigError("unknown baseline: '" + baseline + "' (supported: linear)");
    } else {
        if (ckpt_path.empty()) throw ConfigError("eval requires --checkpoint (or --baseline linear)");
        const Checkpoint ckpt = load_checkpoint(ckpt_path);
        m = evaluate_split(ckpt, split.test, rc.eval);
        mode_name = rc.eval.mode == EvalConfig::Mode::Mean
                        ? "mean"
                        : "best_of_" + std::to_string(rc.eval.k);
    }

    std::ostringstream report;
    report << "scene: " << rc.held_out_scene << "\n"
           << "mode: " << mode_name << "\n"
           << "sequences: " << m.n_sequences << "\n"
           << "pedestrians: " << m.n_pedestrians << "\n";
    report.precision(6);
    report << std::fixed << "ADE: " << m.ade << " m\nFDE: " << m.fde << " m\n";
    std::cout << report.str();
    // Machine-readable line: scene<TAB>mode<TAB>ade<TAB>fde
    std::cout << rc.held_out_scene << "\t" << mode_name << "\t" << m.ade << "\t" << m.fde << "\n";
    atomic_write_text((fs::path(rc.output_dir) / ("metrics_" + rc.held_out_scene + ".txt")).string(),
                      report.str());
    return kExitOk;
}

std::string svg_scatter(const SequenceSample& seq, const Tensor& pred) {
    const int n = seq.n_pedestrians();
    const int t_obs = seq.obs.dim(1), t_pred = pred.dim(1);
    double min_x = 1e30, max_x = -1e30, min_y = 1e30, max_y = -1e30;
    auto span = [&](const Tensor& t) {
        for (int i = 0; i < t.dim(0); ++i)
            for (int k = 0; k < t.dim(1); ++k) {
                min_x = std::min(min_x, t.at3(i, k, 0));
                max_x = std::max(max_x, t.at3(i, k, 0));
                min_y = std::min(min_y, t.at3(i, k, 1));
                max_y = std::max(max_y, t.at3(i, k, 1));
            }
    };
    span(seq.obs);
    span(seq.future);
    span(pred);
    const double w = 600.0, h = 600.0, margin = 40.0;
    const double sx = (w - 2 * margin) / std::max(1e-9, max_x - min_x);
    const double sy = (h - 2 * margin) / std::max(1e-9, max_y - min_y);
    const double s = std::min(sx, sy);
    auto px = [&](double x) { return margin + (x - min_x) * s; };
    auto py = [&](double y) { return h - margin - (y - min_y) * s; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\">\n";
    const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
    for (int i = 0; i < n; ++i) {
        const char* color = colors[i % 6];
        for (int k = 0; k < t_obs; ++k) {
            svg << "<circle cx=\"" << px(seq.obs.at3(i, k, 0)) << "\" cy=\""
                << py(seq.obs.at3(i, k, 1)) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        for (int k = 0; k < t_pred; ++k) {
            svg << "<rect x=\"" << px(seq.future.at3(i, k, 0)) - 3 << "\" y=\""
                << py(seq.future.at3(i, k, 1)) - 3 << "\" width=\"6\" height=\"6\" fill=\"none\""
                << " stroke=\"" << color << "\"/>\n";
        }
        for (int k = 0; k < t_pred; ++k) {
            const double cx = px(pred.at3(i, k, 0)), cy = py(pred.at3(i, k, 1));
            // Five-point star for predicted points.
            svg << "<polygon fill=\"" << color << "\" points=\"";
            for (int v = 0; v < 10; ++v) {
                const double r = v % 2 == 0 ? 5.0 : 2.0;
                const double a = -M_PI / 2 + v * M_PI / 5;
                svg << cx + r * std::cos(a) << "," << cy + r * std::sin(a)
                    << (v + 1 < 10 ? " " : "");
            }
            svg << "\"/>\n";
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

int cmd_predict(const std::string& config_path, const std::string& ckpt_path, int sequence_idx,
                const std::string& svg_path) {
    const RunConfig rc = load_run_config(config_path);
    fs::create_directories(rc.output_dir);

    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const auto scenes = load_scenes(rc.dataset_dir, rc.manifest, rc.model.t_obs, rc.model.t_pred);
    const auto split = loso_split(scenes, rc.held_out_scene);
    if (sequence_idx < 0 || sequence_idx >= static_cast<int>(split.test.size())) {
        throw ConfigError("sequence index " + std::to_string(sequence_idx) +
                          " out of range [0, " + std::to_string(split.test.size()) + ")");
    }
    const auto& seq = split.test[static_cast<std::size_t>(sequence_idx)];

    const ResGcnnModel model = ckpt.to_model();
    const Tensor adj = normalize_adjacency(
        build_adjacency(seq.obs, ckpt.kernel_config, model.config().t_pred),
        ckpt.kernel_config.single_self_loop);
    const GaussianPrediction pred = model.forward(seq.obs, adj);
    const Tensor traj = model.mean_positions(pred, seq.obs);

    std::ostringstream csv;
    csv.precision(17);
    csv << "ped_id,frame_kind,t,x,y\n";
    for (int i = 0; i < seq.n_pedestrians(); ++i) {
        const auto pid = seq.ped_ids[static_cast<std::size_t>(i)];
        for (int k = 0; k < seq.obs.dim(1); ++k)
            csv << pid << ",OBS," << k << "," << seq.obs.at3(i, k, 0) << ","
                << seq.obs.at3(i, k, 1) << "\n";
        for (int k = 0; k < seq.future.dim(1); ++k)
            csv << pid << ",TRUTH," << k << "," << seq.future.at3(i, k, 0) << ","
                << seq.future.at3(i, k, 1) << "\n";
        for (int k = 0; k < traj.dim(1); ++k)
            csv << pid << ",PRED," << k << "," << traj.at3(i, k, 0) << ","
                << traj.at3(i, k, 1) << "\n";
    }
    const auto csv_path =
        (fs::path(rc.output_dir) / ("prediction_" + std::to_string(sequence_idx) + ".csv")).string();
    atomic_write_text(csv_path, csv.str());
    std::cout << "wrote " << csv_path << "\n";

    if (!svg_path.empty()) {
        atomic_write_text(svg_path, svg_scatter(seq, traj));
        std::cout << "wrote " << svg_path << "\n";
    }
    return kExitOk;
}

int cmd_bench(const std::string& config_path, const std::string& ckpt_path, int repeats,
              int scene_size) {
    const RunConfig rc = load_run_config(config_path);
    (void)rc;
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const BenchResult res = benchmark_inference(ckpt, scene_size, repeats);
    std::cout << "params=" << res.param_count << "\n"
              << "scene_size=" << res.scene_size << "\n"
              << "repeats=" << res.repeats << "\n"
              << "mean_forward_s=" << res.mean_forward_s << "\n"
              << "std_forward_s=" << res.std_forward_s << "\n"
              << "mean_graph_s=" << res.mean_graph_s << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Res-GCNN pedestrian trajectory forecaster"};
    app.require_subcommand(1);

    std::string config_path, ckpt_path, baseline, svg_path;
    int sequence_idx = 0, repeats = 100, scene_size = 10;

    auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
    train_cmd->add_option("--config", config_path, "run configuration file")->required();

    auto* eval_cmd = app.add_subcommand("eval", "evaluate ADE/FDE on the held-out scene");
    eval_cmd->add_option("--config", config_path)->required();
    eval_cmd->add_option("--checkpoint", ckpt_path);
    eval_cmd->add_option("--baseline", baseline, "evaluate a baseline instead (linear)");

    auto* predict_cmd = app.add_subcommand("predict", "emit one sequence's trajectories");
    predict_cmd->add_option("--config", config_path)->required();
    predict_cmd->add_option("--checkpoint", ckpt_path)->required();
    predict_cmd->add_option("--sequence", sequence_idx, "test sequence index")->required();
    predict_cmd->add_option("--svg", svg_path, "also write an SVG scatter");

    auto* bench_cmd = app.add_subcommand("bench", "parameter count and forward timing");
    bench_cmd->add_option("--config", config_path)->required();
    bench_cmd->add_option("--checkpoint", ckpt_path)->required();
    bench_cmd->add_option("--repeats", repeats);
    bench_cmd->add_option("--scene-size", scene_size);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        (void)read_thread_cap();  // validated; all computation currently runs single-threaded
        if (train_cmd->parsed()) return cmd_train(config_path);
        if (eval_cmd->parsed()) return cmd_eval(config_path, ckpt_path, baseline);
        if (predict_cmd->parsed()) return cmd_predict(config_path, ckpt_path, sequence_idx, svg_path);
        if (bench_cmd->parsed()) return cmd_bench(config_path, ckpt_path, repeats, scene_size);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
