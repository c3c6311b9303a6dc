#include "resgcnn/social_graph.hpp"

#include <cmath>
#include <stdexcept>

namespace resgcnn {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

void KernelConfig::validate() const {
    if (omega_spd <= 1.0) throw std::invalid_argument("kernel.omega_spd must be > 1");
    if (omega_dir <= 1.0) throw std::invalid_argument("kernel.omega_dir must be > 1");
    if (spd_thres <= 0.0) throw std::invalid_argument("kernel.spd_thres must be > 0");
    if (dis_floor <= 0.0) throw std::invalid_argument("kernel.dis_floor must be > 0");
    if (eps_dist <= 0.0) throw std::invalid_argument("kernel.eps_dist must be > 0");
    if (front_cone_half_angle <= 0.0 || front_cone_half_angle > 180.0)
        throw std::invalid_argument("kernel.front_cone_half_angle must be in (0, 180]");
}

Tensor estimate_velocities(const Tensor& obs, double dt) {
    if (obs.rank() != 3 || obs.dim(2) != 2) {
        throw ShapeError("estimate_velocities expects [N, T, 2], got " + shape_str(obs.shape));
    }
    const int n = obs.dim(0), t = obs.dim(1);
    Tensor vel({n, t, 2}, 0.0);
    if (t < 2) return vel;
    for (int i = 0; i < n; ++i) {
        for (int k = 1; k < t; ++k) {
            vel.at3(i, k, 0) = (obs.at3(i, k, 0) - obs.at3(i, k - 1, 0)) / dt;
            vel.at3(i, k, 1) = (obs.at3(i, k, 1) - obs.at3(i, k - 1, 1)) / dt;
        }
        vel.at3(i, 0, 0) = vel.at3(i, 1, 0);
        vel.at3(i, 0, 1) = vel.at3(i, 1, 1);
    }
    return vel;
}

std::optional<int> direction_sector(double vx, double vy) {
    if (std::hypot(vx, vy) < kZeroSpeedEps) return std::nullopt;
    double deg = std::atan2(vy, vx) * 180.0 / kPi;  // (-180, 180]
    int k = static_cast<int>(std::floor((deg + 22.5) / 45.0));
    return ((k % 8) + 8) % 8;
}

namespace {

bool in_front_cone(double fast_x, double fast_y, double fast_vx, double fast_vy,
                   double slow_x, double slow_y, double half_angle_deg) {
    const double rx = slow_x - fast_x;
    const double ry = slow_y - fast_y;
    const double rn = std::hypot(rx, ry);
    const double vn = std::hypot(fast_vx, fast_vy);
    if (rn == 0.0 || vn == 0.0) return false;
    const double cosang = (rx * fast_vx + ry * fast_vy) / (rn * vn);
    return cosang >= std::cos(half_angle_deg * kPi / 180.0);
}

}  // namespace

double kernel_weight(double xi, double yi, double xj, double yj,
                     double vxi, double vyi, double vxj, double vyj,
                     const KernelConfig& cfg, int t_pred, double dt) {
    const double dist = std::hypot(xi - xj, yi - yj);
    const double speed_i = std::hypot(vxi, vyi);
    const double speed_j = std::hypot(vxj, vyj);

    // Range gate: reachable scope within t_pred frames, symmetrized via max.
    const double dis_thres = std::max(cfg.dis_floor, std::max(speed_i, speed_j) * t_pred * dt);
    if (dist > dis_thres) return 0.0;

    const auto sec_i = direction_sector(vxi, vyi);
    const auto sec_j = direction_sector(vxj, vyj);

    double w_spd = 1.0;
    if (sec_i && sec_j) {
        const bool fast_i = speed_i >= cfg.spd_thres;
        const bool fast_j = speed_j >= cfg.spd_thres;
        const bool overtake_ij = fast_i && !fast_j &&
            in_front_cone(xi, yi, vxi, vyi, xj, yj, cfg.front_cone_half_angle);
        const bool overtake_ji = fast_j && !fast_i &&
            in_front_cone(xj, yj, vxj, vyj, xi, yi, cfg.front_cone_half_angle);
        if (overtake_ij || overtake_ji) w_spd = cfg.omega_spd;
    }

    double w_dir = 1.0;
    if (sec_i && sec_j && (((*sec_i - *sec_j) % 8 + 8) % 8 == 4)) w_dir = cfg.omega_dir;

    return w_spd * w_dir / std::max(dist, cfg.eps_dist);
}

Tensor build_adjacency(const Tensor& obs, const KernelConfig& cfg, int t_pred, double dt) {
    if (obs.rank() != 3 || obs.dim(2) != 2) {
        throw ShapeError("build_adjacency expects [N, T, 2], got " + shape_str(obs.shape));
    }
    const int n = obs.dim(0), t = obs.dim(1);
    const Tensor vel = estimate_velocities(obs, dt);
    Tensor adj({t, n, n}, 0.0);
    for (int k = 0; k < t; ++k) {
        for (int i = 0; i < n; ++i) {
            adj.at3(k, i, i) = 1.0;
            for (int j = i + 1; j < n; ++j) {
                const double w = kernel_weight(obs.at3(i, k, 0), obs.at3(i, k, 1),
                                               obs.at3(j, k, 0), obs.at3(j, k, 1),
                                               vel.at3(i, k, 0), vel.at3(i, k, 1),
                                               vel.at3(j, k, 0), vel.at3(j, k, 1),
                                               cfg, t_pred, dt);
                adj.at3(k, i, j) = w;
                adj.at3(k, j, i) = w;
            }
        }
    }
    return adj;
}

Tensor normalize_adjacency(const Tensor& raw, bool single_self_loop) {
    if (raw.rank() != 3 || raw.dim(1) != raw.dim(2)) {
        throw ShapeError("normalize_adjacency expects [T, N, N], got " + shape_str(raw.shape));
    }
    const int t = raw.dim(0), n = raw.dim(1);
    Tensor out({t, n, n}, 0.0);
    std::vector<double> inv_sqrt_deg(static_cast<std::size_t>(n));
    for (int k = 0; k < t; ++k) {
        for (int i = 0; i < n; ++i) {
            double deg = single_self_loop ? 0.0 : 1.0;
            for (int j = 0; j < n; ++j) deg += raw.at3(k, i, j);
            inv_sqrt_deg[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(deg);
        }
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                double s = raw.at3(k, i, j);
                if (i == j && !single_self_loop) s += 1.0;
                out.at3(k, i, j) = inv_sqrt_deg[static_cast<std::size_t>(i)] * s *
                                   inv_sqrt_deg[static_cast<std::size_t>(j)];
            }
        }
    }
    return out;
}

}  // namespace resgcnn
