#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "resgcnn/tensor.hpp"

namespace resgcnn::testing {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng,
                            double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t(shape);
    for (auto& v : t.values) v = dist(rng);
    return t;
}

struct GradCheckResult {
    bool ok = true;
    double worst_rel = 0.0;
    std::string where;
};

/// Central finite differences against the analytic gradients of every
/// parameter feeding `build_loss`. The closure must rebuild the graph from
/// the parameters' current values on each call.
inline GradCheckResult grad_check(std::vector<Parameter>& params,
                                  const std::function<NodePtr()>& build_loss,
                                  double eps = 1e-5, double tol = 1e-4) {
    for (auto& p : params) p.node->zero_grad();
    backward(build_loss());

    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) analytic.push_back(p.grad());

    GradCheckResult res;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& vals = params[pi].tensor().values;
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double orig = vals[i];
            vals[i] = orig + eps;
            const double up = build_loss()->value.values[0];
            vals[i] = orig - eps;
            const double down = build_loss()->value.values[0];
            vals[i] = orig;
            const double fd = (up - down) / (2.0 * eps);
            const double an = analytic[pi].values[i];
            const double rel = std::abs(an - fd) / std::max({1e-6, std::abs(an), std::abs(fd)});
            if (rel > res.worst_rel) {
                res.worst_rel = rel;
                res.where = params[pi].name + "[" + std::to_string(i) + "]";
            }
            if (rel > tol) res.ok = false;
        }
    }
    for (auto& p : params) p.node->zero_grad();
    return res;
}

}  // namespace resgcnn::testing
