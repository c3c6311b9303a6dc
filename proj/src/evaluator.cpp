#include "resgcnn/evaluator.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

#include "resgcnn/social_graph.hpp"

namespace resgcnn {

void EvalConfig::validate() const {
    if (k < 1) throw std::invalid_argument("eval.k must be >= 1");
}

namespace {

void require_traj_pair(const Tensor& pred, const Tensor& truth, const char* what) {
    if (pred.rank() != 3 || pred.dim(2) != 2) {
        throw ShapeError(std::string(what) + " prediction must be [N, T, 2], got " +
                         shape_str(pred.shape));
    }
    if (!pred.same_shape(truth)) {
        throw ShapeError(std::string(what) + " shape mismatch: " + shape_str(pred.shape) +
                         " vs " + shape_str(truth.shape));
    }
}

}  // namespace

double ade(const Tensor& pred, const Tensor& truth) {
    require_traj_pair(pred, truth, "ade");
    const int n = pred.dim(0), t = pred.dim(1);
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < t; ++k)
            acc += std::hypot(pred.at3(i, k, 0) - truth.at3(i, k, 0),
                              pred.at3(i, k, 1) - truth.at3(i, k, 1));
    return acc / (static_cast<double>(n) * t);
}

double fde(const Tensor& pred, const Tensor& truth) {
    require_traj_pair(pred, truth, "fde");
    const int n = pred.dim(0), last = pred.dim(1) - 1;
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
        acc += std::hypot(pred.at3(i, last, 0) - truth.at3(i, last, 0),
                          pred.at3(i, last, 1) - truth.at3(i, last, 1));
    return acc / static_cast<double>(n);
}

std::vector<Tensor> sample_trajectories(const GaussianPrediction& pred, int k,
                                        std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("sample_trajectories: k must be >= 1");
    const int n = pred.n_pedestrians(), t = pred.t_pred();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Tensor> samples;
    samples.reserve(static_cast<std::size_t>(k));
    for (int s = 0; s < k; ++s) {
        Tensor traj({n, t, 2});
        for (int i = 0; i < n; ++i) {
            for (int f = 0; f < t; ++f) {
                const double z1 = gauss(rng);
                const double z2 = gauss(rng);
                const double rho = pred.rho(f, i);
                traj.at3(i, f, 0) = pred.mu_x(f, i) + pred.sigma_x(f, i) * z1;
                traj.at3(i, f, 1) = pred.mu_y(f, i) +
                    pred.sigma_y(f, i) * (rho * z1 + std::sqrt(1.0 - rho * rho) * z2);
            }
        }
        samples.push_back(std::move(traj));
    }
    return samples;
}

Tensor linear_baseline(const Tensor& obs, int t_pred) {
    if (obs.rank() != 3 || obs.dim(1) < 2 || obs.dim(2) != 2) {
        throw ShapeError("linear_baseline expects [N, T>=2, 2], got " + shape_str(obs.shape));
    }
    const int n = obs.dim(0), t_obs = obs.dim(1);
    Tensor out({n, t_pred, 2});
    for (int i = 0; i < n; ++i) {
        const double vx = obs.at3(i, t_obs - 1, 0) - obs.at3(i, t_obs - 2, 0);
        const double vy = obs.at3(i, t_obs - 1, 1) - obs.at3(i, t_obs - 2, 1);
        for (int k = 0; k < t_pred; ++k) {
            out.at3(i, k, 0) = obs.at3(i, t_obs - 1, 0) + (k + 1) * vx;
            out.at3(i, k, 1) = obs.at3(i, t_obs - 1, 1) + (k + 1) * vy;
        }
    }
    return out;
}

Metrics evaluate_split(const Checkpoint& ckpt, const std::vector<SequenceSample>& test,
                       const EvalConfig& cfg) {
    cfg.validate();
    if (test.empty()) throw std::invalid_argument("test set is empty");

    const ResGcnnModel model = ckpt.to_model();
    Metrics m;
    double ade_acc = 0.0, fde_acc = 0.0;
    for (std::size_t s = 0; s < test.size(); ++s) {
        const auto& seq = test[s];
        const Tensor adj = normalize_adjacency(
            build_adjacency(seq.obs, ckpt.kernel_config, model.config().t_pred),
            ckpt.kernel_config.single_self_loop);
        const GaussianPrediction pred = model.forward(seq.obs, adj);

        double seq_ade = 0.0, seq_fde = 0.0;
        if (cfg.mode == EvalConfig::Mode::Mean) {
            const Tensor traj = model.mean_positions(pred, seq.obs);
            seq_ade = ade(traj, seq.future);
            seq_fde = fde(traj, seq.future);
        } else {
            const auto samples = sample_trajectories(pred, cfg.k, cfg.seed + s);
            bool first = true;
            for (const auto& raw_traj : samples) {
                const Tensor traj = model.to_absolute(raw_traj, seq.obs);
                const double a = ade(traj, seq.future);
                if (first || a < seq_ade) {
                    seq_ade = a;
                    seq_fde = fde(traj, seq.future);
                    first = false;
                }
            }
        }
        const double w = seq.n_pedestrians();
        ade_acc += seq_ade * w;
        fde_acc += seq_fde * w;
        m.n_pedestrians += seq.n_pedestrians();
        ++m.n_sequences;
    }
    m.ade = ade_acc / static_cast<double>(m.n_pedestrians);
    m.fde = fde_acc / static_cast<double>(m.n_pedestrians);
    return m;
}

Metrics evaluate_baseline(const std::vector<SequenceSample>& test, int t_pred) {
    if (test.empty()) throw std::invalid_argument("test set is empty");
    Metrics m;
    double ade_acc = 0.0, fde_acc = 0.0;
    for (const auto& seq : test) {
        const Tensor traj = linear_baseline(seq.obs, t_pred);
        const double w = seq.n_pedestrians();
        ade_acc += ade(traj, seq.future) * w;
        fde_acc += fde(traj, seq.future) * w;
        m.n_pedestrians += seq.n_pedestrians();
        ++m.n_sequences;
    }
    m.ade = ade_acc / static_cast<double>(m.n_pedestrians);
    m.fde = fde_acc / static_cast<double>(m.n_pedestrians);
    return m;
}

BenchResult benchmark_inference(const Checkpoint& ckpt, int scene_size, int repeats) {
    if (repeats < 10) throw std::invalid_argument("benchmark repeats must be >= 10");
    const ResGcnnModel model = ckpt.to_model();
    const ModelConfig& mcfg = model.config();

    // Synthetic random-walk scene of the requested size.
    std::mt19937_64 rng(42);
    std::normal_distribution<double> step(0.0, 0.4);
    std::uniform_real_distribution<double> start(-5.0, 5.0);
    Tensor obs({scene_size, mcfg.t_obs, 2});
    for (int i = 0; i < scene_size; ++i) {
        double x = start(rng), y = start(rng);
        for (int k = 0; k < mcfg.t_obs; ++k) {
            obs.at3(i, k, 0) = x;
            obs.at3(i, k, 1) = y;
            x += step(rng);
            y += step(rng);
        }
    }

    using clock = std::chrono::steady_clock;
    auto time_once = [](auto&& fn) {
        const auto t0 = clock::now();
        fn();
        return std::chrono::duration<double>(clock::now() - t0).count();
    };

    Tensor adj;
    double graph_acc = 0.0;
    for (int r = 0; r < repeats; ++r) {
        graph_acc += time_once([&] {
            adj = normalize_adjacency(build_adjacency(obs, ckpt.kernel_config, mcfg.t_pred),
                                      ckpt.kernel_config.single_self_loop);
        });
    }

    for (int w = 0; w < 5; ++w) (void)model.forward(obs, adj);  // warm-up
    std::vector<double> times(static_cast<std::size_t>(repeats));
    for (int r = 0; r < repeats; ++r) {
        times[static_cast<std::size_t>(r)] = time_once([&] { (void)model.forward(obs, adj); });
    }

    double mean = 0.0;
    for (double t : times) mean += t;
    mean /= repeats;
    double var = 0.0;
    for (double t : times) var += (t - mean) * (t - mean);

    BenchResult res;
    res.param_count = ResGcnnModel::param_count(mcfg);
    res.scene_size = scene_size;
    res.repeats = repeats;
    res.mean_forward_s = mean;
    res.std_forward_s = std::sqrt(var / repeats);
    res.mean_graph_s = graph_acc / repeats;
    return res;
}

}  // namespace resgcnn
