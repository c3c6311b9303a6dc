#include "resgcnn/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace resgcnn {

void ModelConfig::validate() const {
    if (n_fecnn < 1) throw std::invalid_argument("model.n_fecnn must be >= 1");
    if (n_tpcnn < 1) throw std::invalid_argument("model.n_tpcnn must be >= 1");
    if (feature_channels != 5)
        throw std::invalid_argument("model.feature_channels must be 5 for the Gaussian head");
    if (temporal_kernel < 1 || temporal_kernel % 2 == 0)
        throw std::invalid_argument("model.temporal_kernel must be odd and positive");
    if (t_obs < 2) throw std::invalid_argument("model.t_obs must be >= 2");
    if (t_pred < 1) throw std::invalid_argument("model.t_pred must be >= 1");
}

double GaussianPrediction::sigma_x(int t, int i) const { return std::exp(raw.at3(2, t, i)); }
double GaussianPrediction::sigma_y(int t, int i) const { return std::exp(raw.at3(3, t, i)); }
double GaussianPrediction::rho(int t, int i) const { return std::tanh(raw.at3(4, t, i)); }

namespace {

enum class InitKind { ConvWeight, ConvBias, PreluSlope };

struct LayerSpec {
    std::string name;
    Shape shape;
    InitKind kind;
    int fan_in;  // for ConvWeight/ConvBias
};

std::vector<LayerSpec> layer_specs(const ModelConfig& cfg) {
    cfg.validate();
    const int c = cfg.feature_channels;
    const int k = cfg.temporal_kernel;
    std::vector<LayerSpec> specs;
    auto conv = [&](const std::string& name, int c_out, int c_in, int kt, int kn) {
        const int fan_in = c_in * kt * kn;
        specs.push_back({name + ".weight", {c_out, c_in, kt, kn}, InitKind::ConvWeight, fan_in});
        specs.push_back({name + ".bias", {c_out}, InitKind::ConvBias, fan_in});
    };
    auto slopes = [&](const std::string& name, int n) {
        specs.push_back({name + ".slopes", {n}, InitKind::PreluSlope, 0});
    };

    conv("embed", c, 2, 1, 1);
    for (int l = 0; l < cfg.n_fecnn; ++l) {
        const std::string base = "fecnn" + std::to_string(l);
        conv(base + ".spatial", c, c, 1, 1);
        slopes(base + ".spatial", c);
        conv(base + ".temporal", c, c, k, 1);
        slopes(base + ".temporal", c);
    }
    // First TPCNN layer expands time-as-channels t_obs -> t_pred over the
    // (feature, pedestrian) grid; the remaining layers keep t_pred.
    conv("tpcnn0", cfg.t_pred, cfg.t_obs, k, 1);
    slopes("tpcnn0", c);
    for (int l = 1; l < cfg.n_tpcnn; ++l) {
        const std::string base = "tpcnn" + std::to_string(l);
        conv(base, cfg.t_pred, cfg.t_pred, k, 1);
        slopes(base, c);
    }
    return specs;
}

}  // namespace

ResGcnnModel::ResGcnnModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    const auto specs = layer_specs(cfg_);
    std::mt19937_64 rng(seed);
    params_.reserve(specs.size());
    for (const auto& spec : specs) {
        Tensor t(spec.shape);
        if (spec.kind == InitKind::PreluSlope) {
            std::fill(t.values.begin(), t.values.end(), cfg_.prelu_init_slope);
        } else {
            const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (auto& v : t.values) v = dist(rng);
        }
        params_.push_back(Parameter{spec.name, variable(std::move(t))});
    }

    // Wire the name -> index map into structured layer references.
    std::size_t idx = 0;
    auto take_conv = [&]() { ConvRef r{idx, idx + 1}; idx += 2; return r; };
    auto take_slopes = [&]() { return idx++; };
    embed_ = take_conv();
    for (int l = 0; l < cfg_.n_fecnn; ++l) {
        fecnn_spatial_.push_back(take_conv());
        fecnn_spatial_slopes_.push_back(take_slopes());
        fecnn_temporal_.push_back(take_conv());
        fecnn_temporal_slopes_.push_back(take_slopes());
    }
    for (int l = 0; l < cfg_.n_tpcnn; ++l) {
        tpcnn_.push_back(take_conv());
        tpcnn_slopes_.push_back(take_slopes());
    }
}

long ResGcnnModel::param_count(const ModelConfig& cfg) {
    long count = 0;
    for (const auto& spec : layer_specs(cfg))
        count += static_cast<long>(shape_numel(spec.shape));
    return count;
}

Tensor ResGcnnModel::vertices_from_obs(const Tensor& obs) const {
    if (obs.rank() != 3 || obs.dim(1) != cfg_.t_obs || obs.dim(2) != 2) {
        throw ShapeError("observations must be [N, " + std::to_string(cfg_.t_obs) +
                         ", 2], got " + shape_str(obs.shape));
    }
    const int n = obs.dim(0), t = cfg_.t_obs;
    Tensor v({2, t, n});
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < t; ++k) {
            if (cfg_.relative_mode) {
                v.at3(0, k, i) = k == 0 ? 0.0 : obs.at3(i, k, 0) - obs.at3(i, k - 1, 0);
                v.at3(1, k, i) = k == 0 ? 0.0 : obs.at3(i, k, 1) - obs.at3(i, k - 1, 1);
            } else {
                v.at3(0, k, i) = obs.at3(i, k, 0);
                v.at3(1, k, i) = obs.at3(i, k, 1);
            }
        }
    }
    return v;
}

Tensor ResGcnnModel::targets_from_future(const Tensor& obs, const Tensor& future) const {
    if (!cfg_.relative_mode) return future;
    const int n = future.dim(0), t = future.dim(1);
    Tensor out({n, t, 2});
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < t; ++k) {
            const double px = k == 0 ? obs.at3(i, cfg_.t_obs - 1, 0) : future.at3(i, k - 1, 0);
            const double py = k == 0 ? obs.at3(i, cfg_.t_obs - 1, 1) : future.at3(i, k - 1, 1);
            out.at3(i, k, 0) = future.at3(i, k, 0) - px;
            out.at3(i, k, 1) = future.at3(i, k, 1) - py;
        }
    }
    return out;
}

NodePtr ResGcnnModel::fecnn_spatial(const NodePtr& v, const NodePtr& adjacency, int layer) const {
    const auto& conv = fecnn_spatial_[static_cast<std::size_t>(layer)];
    const auto& slopes = params_[fecnn_spatial_slopes_[static_cast<std::size_t>(layer)]].node;
    // The pointwise conv feeds both the aggregation branch and the shortcut.
    auto h = ops::conv_grid(v, params_[conv.weight].node, params_[conv.bias].node, 0, 0);
    return ops::add(ops::prelu(ops::frame_aggregate(h, adjacency), slopes), h);
}

NodePtr ResGcnnModel::fecnn_temporal(const NodePtr& v, int layer) const {
    const auto& conv = fecnn_temporal_[static_cast<std::size_t>(layer)];
    const auto& slopes = params_[fecnn_temporal_slopes_[static_cast<std::size_t>(layer)]].node;
    const int pad = cfg_.temporal_kernel / 2;
    auto h = ops::conv_grid(v, params_[conv.weight].node, params_[conv.bias].node, pad, 0);
    return ops::add(ops::prelu(h, slopes), v);
}

NodePtr ResGcnnModel::time_expand(const NodePtr& v) const {
    if (v->value.dim(1) != cfg_.t_obs) {
        throw ShapeError("time_expand input time extent " + std::to_string(v->value.dim(1)) +
                         " != t_obs " + std::to_string(cfg_.t_obs));
    }
    const auto& conv = tpcnn_[0];
    const auto& slopes = params_[tpcnn_slopes_[0]].node;
    const int pad = cfg_.temporal_kernel / 2;
    // Time becomes the channel axis; the conv runs over the (feature, N) grid.
    auto swapped = ops::transpose01(v);  // [t_obs, C, N]
    auto h = ops::conv_grid(swapped, params_[conv.weight].node, params_[conv.bias].node, pad, 0);
    return ops::prelu(ops::transpose01(h), slopes);  // no shortcut: shapes differ
}

NodePtr ResGcnnModel::tpcnn_layer(const NodePtr& v, int layer) const {
    if (v->value.dim(1) != cfg_.t_pred) {
        throw ShapeError("tpcnn input time extent " + std::to_string(v->value.dim(1)) +
                         " != t_pred " + std::to_string(cfg_.t_pred));
    }
    const auto& conv = tpcnn_[static_cast<std::size_t>(layer)];
    const auto& slopes = params_[tpcnn_slopes_[static_cast<std::size_t>(layer)]].node;
    const int pad = cfg_.temporal_kernel / 2;
    auto swapped = ops::transpose01(v);  // [t_pred, C, N]
    auto h = ops::conv_grid(swapped, params_[conv.weight].node, params_[conv.bias].node, pad, 0);
    return ops::add(ops::prelu(ops::transpose01(h), slopes), v);
}

NodePtr ResGcnnModel::forward_node(const Tensor& vertices, const Tensor& adjacency) const {
    if (vertices.rank() != 3 || vertices.dim(0) != 2 || vertices.dim(1) != cfg_.t_obs) {
        throw ShapeError("vertices must be [2, " + std::to_string(cfg_.t_obs) + ", N], got " +
                         shape_str(vertices.shape));
    }
    auto adj = constant(adjacency);
    auto x = ops::conv_grid(constant(vertices), params_[embed_.weight].node,
                            params_[embed_.bias].node, 0, 0);
    for (int l = 0; l < cfg_.n_fecnn; ++l) {
        x = fecnn_spatial(x, adj, l);
        x = fecnn_temporal(x, l);
    }
    x = time_expand(x);
    for (int l = 1; l < cfg_.n_tpcnn; ++l) x = tpcnn_layer(x, l);
    return x;
}

GaussianPrediction ResGcnnModel::forward(const Tensor& obs, const Tensor& adjacency) const {
    auto out = forward_node(vertices_from_obs(obs), adjacency);
    return GaussianPrediction{out->value};
}

Tensor ResGcnnModel::mean_positions(const GaussianPrediction& pred, const Tensor& obs) const {
    const int n = pred.n_pedestrians(), t = pred.t_pred();
    Tensor traj({n, t, 2});
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < t; ++k) {
            traj.at3(i, k, 0) = pred.mu_x(k, i);
            traj.at3(i, k, 1) = pred.mu_y(k, i);
        }
    return to_absolute(traj, obs);
}

Tensor ResGcnnModel::to_absolute(const Tensor& traj, const Tensor& obs) const {
    if (!cfg_.relative_mode) return traj;
    const int n = traj.dim(0), t = traj.dim(1);
    Tensor out({n, t, 2});
    for (int i = 0; i < n; ++i) {
        double px = obs.at3(i, cfg_.t_obs - 1, 0);
        double py = obs.at3(i, cfg_.t_obs - 1, 1);
        for (int k = 0; k < t; ++k) {
            px += traj.at3(i, k, 0);
            py += traj.at3(i, k, 1);
            out.at3(i, k, 0) = px;
            out.at3(i, k, 1) = py;
        }
    }
    return out;
}

}  // namespace resgcnn
