#pragma once

#include <optional>

#include "resgcnn/tensor.hpp"

namespace resgcnn {

/// Constants of the interaction kernel. The boost magnitudes and thresholds
/// are configuration choices; only "larger than one" is fixed by the method.
struct KernelConfig {
    double spd_thres = 0.5;             // m/s boundary between slow and fast
    double omega_spd = 2.0;             // overtaking boost, > 1
    double omega_dir = 2.0;             // opposition boost, > 1
    double dis_floor = 2.0;             // m, minimum distance scope
    double eps_dist = 0.1;              // m, singularity guard for near-coincident pairs
    double front_cone_half_angle = 45.0;  // degrees
    bool single_self_loop = false;      // skip the extra +I during normalization

    void validate() const;
};

struct FrameGraph {
    Tensor vertices;   // [N, 2] meters
    Tensor adjacency;  // [N, N] normalized, symmetric, nonnegative
};

inline constexpr double kFrameIntervalS = 0.4;
inline constexpr double kZeroSpeedEps = 1e-6;  // m/s; below this the heading is undefined

/// Backward finite differences; v[i,0] copies v[i,1]. T < 2 yields zeros.
Tensor estimate_velocities(const Tensor& obs /*[N, T, 2]*/, double dt = kFrameIntervalS);

/// Heading sector 0..7, 45 degrees each, sector 0 centered on +x,
/// counterclockwise. Near-zero speed has no sector.
std::optional<int> direction_sector(double vx, double vy);

/// Off-diagonal interaction weight between two pedestrians at one frame.
double kernel_weight(double xi, double yi, double xj, double yj,
                     double vxi, double vyi, double vxj, double vyj,
                     const KernelConfig& cfg, int t_pred = 12, double dt = kFrameIntervalS);

/// Raw per-frame adjacency [T, N, N]: unit diagonal, kernel weights elsewhere.
Tensor build_adjacency(const Tensor& obs /*[N, T, 2]*/, const KernelConfig& cfg,
                       int t_pred = 12, double dt = kFrameIntervalS);

/// Per frame: D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of (A + I).
/// With single_self_loop the extra identity is skipped (A already has unit diagonal).
Tensor normalize_adjacency(const Tensor& raw /*[T, N, N]*/, bool single_self_loop = false);

}  // namespace resgcnn
