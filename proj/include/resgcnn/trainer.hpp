#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "resgcnn/dataset.hpp"
#include "resgcnn/model.hpp"
#include "resgcnn/social_graph.hpp"
#include "resgcnn/tensor.hpp"

namespace resgcnn {

struct TrainConfig {
    int batch_size = 128;       // sequences per accumulated gradient step
    int epochs = 200;
    double lr_initial = 0.01;
    double lr_late = 0.002;
    int lr_switch_epoch = 150;
    double clip_grad_norm = 10.0;  // global-norm cap on the averaged batch gradient; 0 disables
    std::uint64_t seed = 1;

    void validate() const;
};

/// Mean over all (pedestrian, frame) points of the bivariate-Gaussian
/// negative log-likelihood of target given raw [5, T, N] (mu, log sigma,
/// arctanh rho channels). Differentiable back into raw.
NodePtr gaussian_nll(const NodePtr& raw, const Tensor& target /*[N, T, 2]*/);

/// Step schedule: lr_initial before lr_switch_epoch, lr_late afterwards.
double lr_at_epoch(int epoch, const TrainConfig& cfg);

struct CheckpointError : std::runtime_error {
    explicit CheckpointError(const std::string& m) : std::runtime_error(m) {}
};
struct CheckpointMagicError : CheckpointError {
    explicit CheckpointMagicError(const std::string& m) : CheckpointError(m) {}
};
struct CheckpointVersionError : CheckpointError {
    explicit CheckpointVersionError(const std::string& m) : CheckpointError(m) {}
};
struct CheckpointTruncatedError : CheckpointError {
    explicit CheckpointTruncatedError(const std::string& m) : CheckpointError(m) {}
};

/// Serialized model state. Parameter payloads are 32-bit floats on the wire,
/// so a checkpoint holds them at that precision; save/load round-trips are
/// exact on the stored values.
struct Checkpoint {
    static constexpr std::uint32_t kCurrentVersion = 1;

    std::uint32_t format_version = kCurrentVersion;
    ModelConfig model_config;
    KernelConfig kernel_config;
    struct ParamRecord {
        std::string name;
        Shape shape;
        std::vector<float> values;
    };
    std::vector<ParamRecord> parameters;
    std::uint32_t epoch = 0;
    std::string rng_state;

    static Checkpoint from_model(const ResGcnnModel& model, const KernelConfig& kcfg,
                                 std::uint32_t epoch, const std::string& rng_state);
    /// Instantiate a model carrying exactly the stored (f32) parameter values.
    ResGcnnModel to_model() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<double> epoch_losses;  // mean per-sequence loss per epoch
};

/// Seeded, single-threaded training: per epoch, shuffle, accumulate per-
/// sequence gradients, divide by the accumulated count and step every
/// batch_size sequences and at epoch end. Adjacencies are precomputed once.
TrainResult train(const DatasetSplit& split, const ModelConfig& model_cfg,
                  const KernelConfig& kernel_cfg, const TrainConfig& train_cfg,
                  std::ostream* loss_log = nullptr);

}  // namespace resgcnn
