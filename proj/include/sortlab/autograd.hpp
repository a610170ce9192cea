#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sortlab::autograd {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// The public primitive set. Internal helpers (transpose, reshape, affine, power,
// expand) are exposed as free functions below but have no tag.
enum class Primitive {
    add,
    sub,
    mul,
    matmul,
    relu,
    sigmoid,
    tanh,
    sum,
    mean,
    dot,
    hinge,
    bce_with_logits,
};

Primitive primitive_from_name(std::string_view name);
std::string_view primitive_name(Primitive p);

enum class Op : std::uint8_t {
    leaf,
    add,
    sub,
    mul,
    matmul,
    relu,
    sigmoid,
    tanh,
    sum,
    mean,
    dot,
    hinge,
    bce_with_logits,
    affine,
    power,
    transpose,
    reshape,
    expand,
    step_mask,
};

class Graph;

// Handle to a node of a Graph. Cheap to copy; only valid while its graph lives.
class Tensor {
public:
    Tensor() = default;
    Tensor(Graph* graph, std::uint32_t id) : graph_(graph), id_(id) {}

    bool valid() const { return graph_ != nullptr; }
    Graph& graph() const;
    std::uint32_t id() const { return id_; }

    const Shape& shape() const;
    const std::vector<double>& values() const;
    std::size_t numel() const;
    std::size_t rank() const { return shape().size(); }
    bool requires_grad() const;

    double item() const;
    double at(std::size_t i) const { return values()[i]; }

private:
    Graph* graph_ = nullptr;
    std::uint32_t id_ = 0;
};

class Graph {
public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Tensor tensor(Shape shape, std::vector<double> values, bool requires_grad = false);
    Tensor scalar(double value, bool requires_grad = false);
    Tensor constant(const Shape& shape, double fill);

    std::size_t size() const { return nodes_.size(); }

    // Reverse sweep from a scalar output. With build_higher_order the returned
    // tensors are differentiable nodes; otherwise they are constants.
    std::vector<Tensor> gradient(const Tensor& output, std::span<const Tensor> wrt,
                                 bool build_higher_order);

    // Recompute every non-leaf node from the current leaf values.
    void replay();

    // Overwrite a leaf's values in place (shape must match). Used with replay().
    void set_leaf(const Tensor& leaf, std::vector<double> values);

    Op op(std::uint32_t id) const { return nodes_.at(id).op; }
    bool recording() const { return recording_; }

    // Appends a node whose value is computed from its inputs. Shapes must
    // already be validated by the caller.
    Tensor record(Op op, std::span<const Tensor> inputs, Shape shape, double p0 = 0.0,
                  double p1 = 0.0);

private:
    friend class Tensor;

    struct Node {
        Op op = Op::leaf;
        std::uint8_t arity = 0;
        std::uint32_t inputs[2] = {0, 0};
        Shape shape;
        std::vector<double> value;
        bool requires_grad = false;
        double p0 = 0.0;
        double p1 = 0.0;
    };

    std::vector<double> compute(const Node& node) const;
    void backward_rule(std::uint32_t id, const Tensor& grad, Tensor out[2]);

    std::deque<Node> nodes_;
    bool recording_ = true;
};

Tensor build_tensor(Graph& graph, Shape shape, std::vector<double> values, bool requires_grad);

// Elementwise binary ops accept equal shapes, or one operand with a single
// element which is broadcast.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// [m,n]x[n,p] -> [m,p], [m,n]x[n] -> [m], [n]x[n,p] -> [p].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor hinge(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor dot(const Tensor& a, const Tensor& b);
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);

Tensor affine(const Tensor& x, double scale, double shift);
Tensor scale(const Tensor& x, double factor);
Tensor power(const Tensor& x, double exponent);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
Tensor expand(const Tensor& x, Shape shape);
// grad * (x > 0); x is not differentiated.
Tensor step_mask(const Tensor& grad, const Tensor& x);

Tensor apply_primitive(Primitive p, std::span<const Tensor> inputs);
Tensor apply_primitive(std::string_view tag, std::span<const Tensor> inputs);

struct Cosine {
    Tensor value;
    bool degenerate = false;
};

// a.b / (|a||b|). A zero-norm argument yields a constant 0 and degenerate = true.
Cosine cosine_similarity(const Tensor& a, const Tensor& b);

}  // namespace sortlab::autograd
