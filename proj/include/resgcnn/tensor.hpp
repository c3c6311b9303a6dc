#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace resgcnn {

using Shape = std::vector<int>;

/// Dense row-major tensor of doubles. The substrate of all model math.
struct Tensor {
    Shape shape;
    std::vector<double> values;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0);
    Tensor(Shape s, std::vector<double> v);

    std::size_t size() const { return values.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    double& at3(int i, int j, int k);
    double at3(int i, int j, int k) const;

    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

class Node;
using NodePtr = std::shared_ptr<Node>;

/// One vertex of the recorded computation. Holds the forward value and,
/// when reachable from a parameter, an additive gradient accumulator.
class Node {
public:
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::vector<NodePtr> inputs;
    std::function<void(Node&)> backward_fn;

    void ensure_grad();
    void zero_grad();
};

NodePtr constant(Tensor value);
NodePtr variable(Tensor value);

/// Named learnable tensor. The node persists across forward passes so
/// gradients from successive backward calls accumulate until stepped.
struct Parameter {
    std::string name;
    NodePtr node;

    Tensor& tensor() { return node->value; }
    const Tensor& tensor() const { return node->value; }
    Tensor& grad() { return node->grad; }
};

namespace ops {

/// Cross-correlation of input [C_in, T, N] with kernel [C_out, C_in, kT, kN]
/// under zero padding (pad_t, pad_n). Output [C_out, T', N'].
NodePtr conv_grid(const NodePtr& input, const NodePtr& kernel, const NodePtr& bias,
                  int pad_t, int pad_n);

/// Per-frame matrix-vector product: out[c,t,:] = adjacency[t] * features[c,t,:].
NodePtr frame_aggregate(const NodePtr& features, const NodePtr& adjacency);

/// x if x > 0 else slope_c * x, slope indexed by the first (channel) axis.
NodePtr prelu(const NodePtr& input, const NodePtr& slopes);

NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);
NodePtr sum(const NodePtr& a);

/// Swap the first two axes of a rank-3 tensor.
NodePtr transpose01(const NodePtr& a);

}  // namespace ops

/// Reverse-mode sweep from a scalar root. Gradients accumulate additively
/// into every reachable node that requires grad.
void backward(const NodePtr& root);

/// Vanilla SGD: p -= lr * grad, then grads are zeroed.
/// Throws if any gradient is non-finite, naming the parameter.
void sgd_step(std::vector<Parameter>& params, double lr);

}  // namespace resgcnn
