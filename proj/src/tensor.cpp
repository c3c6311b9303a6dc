#include "resgcnn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace resgcnn {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << ", ";
        os << s[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)) {
    for (int d : shape) {
        if (d <= 0) throw ShapeError("tensor extent must be positive, got " + shape_str(shape));
    }
    values.assign(shape_numel(shape), fill);
}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (shape_numel(shape) != values.size()) {
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
    }
}

double& Tensor::at3(int i, int j, int k) {
    return values[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
}

double Tensor::at3(int i, int j, int k) const {
    return values[static_cast<std::size_t>((i * shape[1] + j) * shape[2] + k)];
}

bool Tensor::all_finite() const {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void Node::ensure_grad() {
    if (grad.values.size() != value.values.size()) {
        grad = Tensor(value.shape, 0.0);
    }
}

void Node::zero_grad() {
    std::fill(grad.values.begin(), grad.values.end(), 0.0);
}

NodePtr constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = false;
    return n;
}

NodePtr variable(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->ensure_grad();
    return n;
}

namespace {

NodePtr make_op(Tensor value, std::vector<NodePtr> inputs, std::function<void(Node&)> bw) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->inputs = std::move(inputs);
    for (const auto& in : n->inputs) {
        if (in->requires_grad) n->requires_grad = true;
    }
    if (n->requires_grad) {
        n->ensure_grad();
        n->backward_fn = std::move(bw);
    }
    return n;
}

void require_rank(const Tensor& t, int rank, const char* what) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(what) + " must have rank " + std::to_string(rank) +
                         ", got shape " + shape_str(t.shape));
    }
}

}  // namespace

namespace ops {

NodePtr conv_grid(const NodePtr& input, const NodePtr& kernel, const NodePtr& bias,
                  int pad_t, int pad_n) {
    const Tensor& in = input->value;
    const Tensor& k = kernel->value;
    const Tensor& b = bias->value;
    require_rank(in, 3, "conv_grid input");
    require_rank(k, 4, "conv_grid kernel");
    require_rank(b, 1, "conv_grid bias");
    const int c_in = in.dim(0), t_in = in.dim(1), n_in = in.dim(2);
    const int c_out = k.dim(0), kc = k.dim(1), kt = k.dim(2), kn = k.dim(3);
    if (kc != c_in) {
        throw ShapeError("conv_grid channel mismatch: input C_in=" + std::to_string(c_in) +
                         " vs kernel C_in=" + std::to_string(kc));
    }
    if (b.dim(0) != c_out) {
        throw ShapeError("conv_grid bias extent " + std::to_string(b.dim(0)) +
                         " does not match C_out=" + std::to_string(c_out));
    }
    const int t_out = t_in + 2 * pad_t - kt + 1;
    const int n_out = n_in + 2 * pad_n - kn + 1;
    if (t_out < 1) {
        throw ShapeError("conv_grid time kernel kT=" + std::to_string(kt) +
                         " exceeds padded extent " + std::to_string(t_in + 2 * pad_t));
    }
    if (n_out < 1) {
        throw ShapeError("conv_grid width kernel kN=" + std::to_string(kn) +
                         " exceeds padded extent " + std::to_string(n_in + 2 * pad_n));
    }

    Tensor out({c_out, t_out, n_out});
    for (int o = 0; o < c_out; ++o) {
        for (int t = 0; t < t_out; ++t) {
            for (int n = 0; n < n_out; ++n) {
                double acc = b.values[static_cast<std::size_t>(o)];
                for (int c = 0; c < c_in; ++c) {
                    for (int i = 0; i < kt; ++i) {
                        const int ti = t + i - pad_t;
                        if (ti < 0 || ti >= t_in) continue;
                        for (int j = 0; j < kn; ++j) {
                            const int ni = n + j - pad_n;
                            if (ni < 0 || ni >= n_in) continue;
                            acc += in.at3(c, ti, ni) *
                                   k.values[static_cast<std::size_t>(((o * c_in + c) * kt + i) * kn + j)];
                        }
                    }
                }
                out.at3(o, t, n) = acc;
            }
        }
    }

    return make_op(std::move(out), {input, kernel, bias},
                   [pad_t, pad_n, c_in, t_in, n_in, c_out, kt, kn, t_out, n_out](Node& self) {
        Node& nin = *self.inputs[0];
        Node& nker = *self.inputs[1];
        Node& nbias = *self.inputs[2];
        const Tensor& g = self.grad;
        if (nbias.requires_grad) {
            nbias.ensure_grad();
            for (int o = 0; o < c_out; ++o) {
                double acc = 0.0;
                for (int t = 0; t < t_out; ++t)
                    for (int n = 0; n < n_out; ++n) acc += g.at3(o, t, n);
                nbias.grad.values[static_cast<std::size_t>(o)] += acc;
            }
        }
        for (int o = 0; o < c_out; ++o) {
            for (int t = 0; t < t_out; ++t) {
                for (int n = 0; n < n_out; ++n) {
                    const double go = g.at3(o, t, n);
                    if (go == 0.0) continue;
                    for (int c = 0; c < c_in; ++c) {
                        for (int i = 0; i < kt; ++i) {
                            const int ti = t + i - pad_t;
                            if (ti < 0 || ti >= t_in) continue;
                            for (int j = 0; j < kn; ++j) {
                                const int ni = n + j - pad_n;
                                if (ni < 0 || ni >= n_in) continue;
                                const std::size_t kidx =
                                    static_cast<std::size_t>(((o * c_in + c) * kt + i) * kn + j);
                                if (nin.requires_grad) {
                                    nin.ensure_grad();
                                    nin.grad.at3(c, ti, ni) += go * nker.value.values[kidx];
                                }
                                if (nker.requires_grad) {
                                    nker.ensure_grad();
                                    nker.grad.values[kidx] += go * nin.value.at3(c, ti, ni);
                                }
                            }
                        }
                    }
                }
            }
        }
    });
}

NodePtr frame_aggregate(const NodePtr& features, const NodePtr& adjacency) {
    const Tensor& f = features->value;
    const Tensor& a = adjacency->value;
    require_rank(f, 3, "frame_aggregate features");
    require_rank(a, 3, "frame_aggregate adjacency");
    const int c = f.dim(0), t = f.dim(1), n = f.dim(2);
    if (a.dim(0) != t || a.dim(1) != n || a.dim(2) != n) {
        throw ShapeError("frame_aggregate adjacency shape " + shape_str(a.shape) +
                         " does not match features " + shape_str(f.shape) +
                         " (expected [" + std::to_string(t) + ", " + std::to_string(n) +
                         ", " + std::to_string(n) + "])");
    }

    Tensor out({c, t, n});
    for (int ci = 0; ci < c; ++ci) {
        for (int ti = 0; ti < t; ++ti) {
            for (int i = 0; i < n; ++i) {
                double acc = 0.0;
                for (int j = 0; j < n; ++j) acc += a.at3(ti, i, j) * f.at3(ci, ti, j);
                out.at3(ci, ti, i) = acc;
            }
        }
    }

    return make_op(std::move(out), {features, adjacency}, [c, t, n](Node& self) {
        Node& nf = *self.inputs[0];
        Node& na = *self.inputs[1];
        const Tensor& g = self.grad;
        if (nf.requires_grad) {
            nf.ensure_grad();
            for (int ci = 0; ci < c; ++ci)
                for (int ti = 0; ti < t; ++ti)
                    for (int j = 0; j < n; ++j) {
                        double acc = 0.0;
                        for (int i = 0; i < n; ++i) acc += na.value.at3(ti, i, j) * g.at3(ci, ti, i);
                        nf.grad.at3(ci, ti, j) += acc;
                    }
        }
        if (na.requires_grad) {
            na.ensure_grad();
            for (int ti = 0; ti < t; ++ti)
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) {
                        double acc = 0.0;
                        for (int ci = 0; ci < c; ++ci) acc += g.at3(ci, ti, i) * nf.value.at3(ci, ti, j);
                        na.grad.at3(ti, i, j) += acc;
                    }
        }
    });
}

NodePtr prelu(const NodePtr& input, const NodePtr& slopes) {
    const Tensor& x = input->value;
    const Tensor& s = slopes->value;
    require_rank(s, 1, "prelu slopes");
    if (x.rank() < 1 || s.dim(0) != x.dim(0)) {
        throw ShapeError("prelu slopes extent " + std::to_string(s.dim(0)) +
                         " does not match channel axis of input " + shape_str(x.shape));
    }
    const std::size_t channels = static_cast<std::size_t>(x.dim(0));
    const std::size_t per_channel = x.size() / channels;

    Tensor out(x.shape);
    for (std::size_t c = 0; c < channels; ++c) {
        const double slope = s.values[c];
        for (std::size_t e = 0; e < per_channel; ++e) {
            const std::size_t idx = c * per_channel + e;
            const double v = x.values[idx];
            out.values[idx] = v > 0.0 ? v : slope * v;
        }
    }

    return make_op(std::move(out), {input, slopes}, [channels, per_channel](Node& self) {
        Node& nx = *self.inputs[0];
        Node& ns = *self.inputs[1];
        for (std::size_t c = 0; c < channels; ++c) {
            const double slope = ns.value.values[c];
            double slope_acc = 0.0;
            for (std::size_t e = 0; e < per_channel; ++e) {
                const std::size_t idx = c * per_channel + e;
                const double v = nx.value.values[idx];
                const double go = self.grad.values[idx];
                if (nx.requires_grad) {
                    nx.ensure_grad();
                    nx.grad.values[idx] += go * (v > 0.0 ? 1.0 : slope);
                }
                if (v <= 0.0) slope_acc += go * v;
            }
            if (ns.requires_grad) {
                ns.ensure_grad();
                ns.grad.values[c] += slope_acc;
            }
        }
    });
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
    if (!a->value.same_shape(b->value)) {
        throw ShapeError("add shape mismatch: " + shape_str(a->value.shape) + " vs " +
                         shape_str(b->value.shape));
    }
    Tensor out(a->value.shape);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.values[i] = a->value.values[i] + b->value.values[i];
    return make_op(std::move(out), {a, b}, [](Node& self) {
        for (auto& in : self.inputs) {
            if (!in->requires_grad) continue;
            in->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                in->grad.values[i] += self.grad.values[i];
        }
    });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
    if (!a->value.same_shape(b->value)) {
        throw ShapeError("mul shape mismatch: " + shape_str(a->value.shape) + " vs " +
                         shape_str(b->value.shape));
    }
    Tensor out(a->value.shape);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.values[i] = a->value.values[i] * b->value.values[i];
    return make_op(std::move(out), {a, b}, [](Node& self) {
        Node& na = *self.inputs[0];
        Node& nb = *self.inputs[1];
        if (na.requires_grad) {
            na.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                na.grad.values[i] += self.grad.values[i] * nb.value.values[i];
        }
        if (nb.requires_grad) {
            nb.ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                nb.grad.values[i] += self.grad.values[i] * na.value.values[i];
        }
    });
}

NodePtr sum(const NodePtr& a) {
    double acc = 0.0;
    for (double v : a->value.values) acc += v;
    return make_op(Tensor({1}, {acc}), {a}, [](Node& self) {
        Node& na = *self.inputs[0];
        if (!na.requires_grad) return;
        na.ensure_grad();
        const double g = self.grad.values[0];
        for (std::size_t i = 0; i < na.grad.size(); ++i) na.grad.values[i] += g;
    });
}

NodePtr transpose01(const NodePtr& a) {
    const Tensor& x = a->value;
    require_rank(x, 3, "transpose01 input");
    const int d0 = x.dim(0), d1 = x.dim(1), d2 = x.dim(2);
    Tensor out({d1, d0, d2});
    for (int i = 0; i < d0; ++i)
        for (int j = 0; j < d1; ++j)
            for (int k = 0; k < d2; ++k) out.at3(j, i, k) = x.at3(i, j, k);
    return make_op(std::move(out), {a}, [d0, d1, d2](Node& self) {
        Node& na = *self.inputs[0];
        if (!na.requires_grad) return;
        na.ensure_grad();
        for (int i = 0; i < d0; ++i)
            for (int j = 0; j < d1; ++j)
                for (int k = 0; k < d2; ++k) na.grad.at3(i, j, k) += self.grad.at3(j, i, k);
    });
}

}  // namespace ops

void backward(const NodePtr& root) {
    if (root->value.size() != 1) {
        throw ShapeError("backward requires a scalar root, got shape " +
                         shape_str(root->value.shape));
    }
    if (!root->requires_grad) return;

    // Iterative post-order DFS; graphs can be deep for long training sequences.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) {
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Interior grads are per-pass scratch; only leaves (parameters, variables)
    // accumulate across repeated backward calls.
    for (Node* n : order) {
        if (n->backward_fn) {
            n->ensure_grad();
            n->zero_grad();
        }
    }
    root->ensure_grad();
    root->grad.values[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
}

void sgd_step(std::vector<Parameter>& params, double lr) {
    for (auto& p : params) {
        p.node->ensure_grad();
        if (!p.node->grad.all_finite()) {
            throw std::runtime_error("non-finite gradient in parameter '" + p.name + "'");
        }
    }
    for (auto& p : params) {
        auto& v = p.node->value.values;
        auto& g = p.node->grad.values;
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
        p.node->zero_grad();
    }
}

}  // namespace resgcnn
