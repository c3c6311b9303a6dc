#pragma once

#include <cstdint>

#include "resgcnn/tensor.hpp"

namespace resgcnn {

struct ModelConfig {
    int n_fecnn = 2;
    int n_tpcnn = 4;           // first TPCNN layer is the time expansion
    int feature_channels = 5;  // Gaussian head width
    int temporal_kernel = 3;   // odd
    int t_obs = 8;
    int t_pred = 12;
    double prelu_init_slope = 0.25;
    bool relative_mode = false;  // feed displacements, integrate predictions

    void validate() const;
};

/// 5-channel raw output [5, t_pred, N]: (mu_x, mu_y, log sigma_x, log sigma_y,
/// arctanh rho). exp/tanh keep sigma > 0 and |rho| < 1 for any finite raw value.
struct GaussianPrediction {
    Tensor raw;

    int t_pred() const { return raw.dim(1); }
    int n_pedestrians() const { return raw.dim(2); }

    double mu_x(int t, int i) const { return raw.at3(0, t, i); }
    double mu_y(int t, int i) const { return raw.at3(1, t, i); }
    double sigma_x(int t, int i) const;
    double sigma_y(int t, int i) const;
    double rho(int t, int i) const;
};

/// The 2-FECNN + 4-TPCNN residual stack.
class ResGcnnModel {
public:
    ResGcnnModel(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    std::vector<Parameter>& parameters() { return params_; }
    const std::vector<Parameter>& parameters() const { return params_; }

    /// Vertices [2, t_obs, N] from observations [N, t_obs, 2]; in relative
    /// mode the vertices are per-frame displacements (first frame zero).
    Tensor vertices_from_obs(const Tensor& obs) const;

    /// Future [N, t_pred, 2] expressed in the model's output frame: absolute
    /// positions, or per-frame displacements continuing from the last
    /// observation when relative_mode is on.
    Tensor targets_from_future(const Tensor& obs, const Tensor& future) const;

    /// Full differentiable forward: embed, FECNN stack, time expansion,
    /// remaining TPCNN layers. Returns the raw [5, t_pred, N] node.
    NodePtr forward_node(const Tensor& vertices, const Tensor& adjacency) const;

    GaussianPrediction forward(const Tensor& obs, const Tensor& adjacency) const;

    /// Convert predicted means to absolute positions [N, t_pred, 2].
    Tensor mean_positions(const GaussianPrediction& pred, const Tensor& obs) const;

    /// Integrate one sampled/raw trajectory [N, t_pred, 2] from the model's
    /// output frame to absolute positions (identity unless relative_mode).
    Tensor to_absolute(const Tensor& traj, const Tensor& obs) const;

    static long param_count(const ModelConfig& cfg);

private:
    ModelConfig cfg_;
    std::vector<Parameter> params_;

    // Layer exports, indexed into params_ at construction.
    struct ConvRef { std::size_t weight, bias; };
    ConvRef embed_;
    std::vector<ConvRef> fecnn_spatial_;
    std::vector<std::size_t> fecnn_spatial_slopes_;
    std::vector<ConvRef> fecnn_temporal_;
    std::vector<std::size_t> fecnn_temporal_slopes_;
    std::vector<ConvRef> tpcnn_;  // [0] is the time expansion
    std::vector<std::size_t> tpcnn_slopes_;

    NodePtr fecnn_spatial(const NodePtr& v, const NodePtr& adjacency, int layer) const;
    NodePtr fecnn_temporal(const NodePtr& v, int layer) const;
    NodePtr time_expand(const NodePtr& v) const;
    NodePtr tpcnn_layer(const NodePtr& v, int layer) const;

    friend struct ModelTestAccess;
};

/// Test hook exposing the individual layers of the stack.
struct ModelTestAccess {
    static NodePtr fecnn_spatial(const ResGcnnModel& m, const NodePtr& v,
                                 const NodePtr& adjacency, int layer) {
        return m.fecnn_spatial(v, adjacency, layer);
    }
    static NodePtr fecnn_temporal(const ResGcnnModel& m, const NodePtr& v, int layer) {
        return m.fecnn_temporal(v, layer);
    }
    static NodePtr time_expand(const ResGcnnModel& m, const NodePtr& v) {
        return m.time_expand(v);
    }
    static NodePtr tpcnn_layer(const ResGcnnModel& m, const NodePtr& v, int layer) {
        return m.tpcnn_layer(v, layer);
    }
};

}  // namespace resgcnn
