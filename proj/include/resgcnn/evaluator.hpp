#pragma once

#include <cstdint>
#include <vector>

#include "resgcnn/dataset.hpp"
#include "resgcnn/model.hpp"
#include "resgcnn/trainer.hpp"

namespace resgcnn {

struct EvalConfig {
    enum class Mode { Mean, BestOfK };
    Mode mode = Mode::Mean;
    int k = 20;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Metrics {
    double ade = 0.0;  // meters
    double fde = 0.0;  // meters
    long n_sequences = 0;
    long n_pedestrians = 0;
};

/// Mean Euclidean displacement over all N * T_pred points.
double ade(const Tensor& pred /*[N, T, 2]*/, const Tensor& truth);

/// Mean Euclidean displacement at the final predicted frame.
double fde(const Tensor& pred, const Tensor& truth);

/// k independent draws from the per-point bivariate Gaussians via the
/// correlated-pair transform, in the prediction's own coordinate frame.
/// Samples for k are a prefix of samples for k+1 under the same seed.
std::vector<Tensor> sample_trajectories(const GaussianPrediction& pred, int k,
                                        std::uint64_t seed);

/// Constant-velocity extrapolation from the last observed displacement.
Tensor linear_baseline(const Tensor& obs /*[N, t_obs, 2]*/, int t_pred = 12);

/// Score the checkpointed model on a test set. Mean mode scores the Gaussian
/// means; best-of-k scores, per sequence, the sample minimizing ADE (its FDE
/// is reported too). Aggregation weights sequences by pedestrian count.
Metrics evaluate_split(const Checkpoint& ckpt, const std::vector<SequenceSample>& test,
                       const EvalConfig& cfg);

/// Same protocol with the linear baseline in place of the model.
Metrics evaluate_baseline(const std::vector<SequenceSample>& test, int t_pred = 12);

struct BenchResult {
    long param_count = 0;
    int scene_size = 0;
    int repeats = 0;
    double mean_forward_s = 0.0;
    double std_forward_s = 0.0;
    double mean_graph_s = 0.0;  // adjacency construction, reported separately
};

BenchResult benchmark_inference(const Checkpoint& ckpt, int scene_size, int repeats);

}  // namespace resgcnn
