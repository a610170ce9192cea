#include <algorithm>
#include <cmath>
#include <sstream>

#include "sortlab/autograd.hpp"
#include "sortlab/error.hpp"

namespace sortlab::autograd {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

Graph& Tensor::graph() const {
    if (!graph_) throw Error(ErrorKind::usage, "tensor is not attached to a graph");
    return *graph_;
}

const Shape& Tensor::shape() const { return graph().nodes_.at(id_).shape; }
const std::vector<double>& Tensor::values() const { return graph().nodes_.at(id_).value; }
std::size_t Tensor::numel() const { return values().size(); }
bool Tensor::requires_grad() const { return graph().nodes_.at(id_).requires_grad; }

double Tensor::item() const {
    const auto& v = values();
    if (v.size() != 1) {
        throw Error(ErrorKind::usage, "item() on tensor of shape " + shape_string(shape()));
    }
    return v[0];
}

Tensor Graph::tensor(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape.empty()) throw Error(ErrorKind::construction, "tensor shape must have a dimension");
    for (std::size_t d : shape) {
        if (d == 0) {
            throw Error(ErrorKind::construction, "zero dimension in shape " + shape_string(shape));
        }
    }
    if (numel(shape) != values.size()) {
        throw Error(ErrorKind::construction, "shape " + shape_string(shape) + " needs " +
                                                 std::to_string(numel(shape)) + " values, got " +
                                                 std::to_string(values.size()));
    }
    Node node;
    node.op = Op::leaf;
    node.shape = std::move(shape);
    node.value = std::move(values);
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return Tensor(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Tensor Graph::scalar(double value, bool requires_grad) {
    return tensor({1}, {value}, requires_grad);
}

Tensor Graph::constant(const Shape& shape, double fill) {
    return tensor(shape, std::vector<double>(numel(shape), fill), false);
}

Tensor build_tensor(Graph& graph, Shape shape, std::vector<double> values, bool requires_grad) {
    return graph.tensor(std::move(shape), std::move(values), requires_grad);
}

Tensor Graph::record(Op op, std::span<const Tensor> inputs, Shape shape, double p0, double p1) {
    Node node;
    node.op = op;
    node.arity = static_cast<std::uint8_t>(inputs.size());
    bool rg = false;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (&inputs[i].graph() != this) {
            throw Error(ErrorKind::usage, "operands belong to different graphs");
        }
        node.inputs[i] = inputs[i].id();
        rg = rg || nodes_[inputs[i].id()].requires_grad;
    }
    node.requires_grad = rg && recording_;
    node.shape = std::move(shape);
    node.p0 = p0;
    node.p1 = p1;
    node.value = compute(node);
    nodes_.push_back(std::move(node));
    return Tensor(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

namespace {

double sigmoid_value(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

std::vector<double> Graph::compute(const Node& node) const {
    const std::size_t n = numel(node.shape);
    std::vector<double> out(n);
    const Node* a = node.arity > 0 ? &nodes_[node.inputs[0]] : nullptr;
    const Node* b = node.arity > 1 ? &nodes_[node.inputs[1]] : nullptr;

    switch (node.op) {
        case Op::leaf:
            return node.value;
        case Op::add:
        case Op::sub:
        case Op::mul: {
            const bool sa = a->value.size() == 1;
            const bool sb = b->value.size() == 1;
            for (std::size_t i = 0; i < n; ++i) {
                const double x = a->value[sa ? 0 : i];
                const double y = b->value[sb ? 0 : i];
                out[i] = node.op == Op::add ? x + y : node.op == Op::sub ? x - y : x * y;
            }
            return out;
        }
        case Op::matmul: {
            const Shape& sa = a->shape;
            const Shape& sb = b->shape;
            if (sa.size() == 2 && sb.size() == 2) {
                const std::size_t m = sa[0], k = sa[1], p = sb[1];
                for (std::size_t i = 0; i < m; ++i) {
                    double* row = out.data() + i * p;
                    for (std::size_t t = 0; t < k; ++t) {
                        const double av = a->value[i * k + t];
                        const double* brow = b->value.data() + t * p;
                        for (std::size_t j = 0; j < p; ++j) row[j] += av * brow[j];
                    }
                }
            } else if (sa.size() == 2) {
                const std::size_t m = sa[0], k = sa[1];
                for (std::size_t i = 0; i < m; ++i) {
                    double acc = 0.0;
                    for (std::size_t t = 0; t < k; ++t) acc += a->value[i * k + t] * b->value[t];
                    out[i] = acc;
                }
            } else {
                const std::size_t k = sb[0], p = sb[1];
                for (std::size_t t = 0; t < k; ++t) {
                    const double av = a->value[t];
                    for (std::size_t j = 0; j < p; ++j) out[j] += av * b->value[t * p + j];
                }
            }
            return out;
        }
        case Op::relu:
        case Op::hinge:
            for (std::size_t i = 0; i < n; ++i) out[i] = a->value[i] > 0.0 ? a->value[i] : 0.0;
            return out;
        case Op::sigmoid:
            for (std::size_t i = 0; i < n; ++i) out[i] = sigmoid_value(a->value[i]);
            return out;
        case Op::tanh:
            for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(a->value[i]);
            return out;
        case Op::sum:
        case Op::mean: {
            double acc = 0.0;
            for (double v : a->value) acc += v;
            out[0] = node.op == Op::sum ? acc : acc / static_cast<double>(a->value.size());
            return out;
        }
        case Op::dot: {
            double acc = 0.0;
            for (std::size_t i = 0; i < a->value.size(); ++i) acc += a->value[i] * b->value[i];
            out[0] = acc;
            return out;
        }
        case Op::bce_with_logits:
            for (std::size_t i = 0; i < n; ++i) {
                const double x = a->value[i];
                const double t = b->value[i];
                out[i] = std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
            }
            return out;
        case Op::affine:
            for (std::size_t i = 0; i < n; ++i) out[i] = node.p0 * a->value[i] + node.p1;
            return out;
        case Op::power:
            for (std::size_t i = 0; i < n; ++i) out[i] = std::pow(a->value[i], node.p0);
            return out;
        case Op::transpose: {
            const std::size_t m = a->shape[0], k = a->shape[1];
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < k; ++j) out[j * m + i] = a->value[i * k + j];
            return out;
        }
        case Op::reshape:
            return a->value;
        case Op::expand:
            std::fill(out.begin(), out.end(), a->value[0]);
            return out;
        case Op::step_mask:
            for (std::size_t i = 0; i < n; ++i) out[i] = b->value[i] > 0.0 ? a->value[i] : 0.0;
            return out;
    }
    throw Error(ErrorKind::usage, "unknown op");
}

void Graph::replay() {
    for (auto& node : nodes_) {
        if (node.op != Op::leaf) node.value = compute(node);
    }
}

void Graph::set_leaf(const Tensor& leaf, std::vector<double> values) {
    Node& node = nodes_.at(leaf.id());
    if (node.op != Op::leaf) throw Error(ErrorKind::usage, "set_leaf on a non-leaf node");
    if (values.size() != node.value.size()) {
        throw Error(ErrorKind::shape, "set_leaf value count does not match " +
                                          shape_string(node.shape));
    }
    node.value = std::move(values);
}

namespace {

// Sum a broadcast gradient back down to the operand's shape.
Tensor reduce_to(const Tensor& g, const Shape& shape) {
    if (g.shape() == shape) return g;
    Tensor s = sum(g);
    return s.shape() == shape ? s : reshape(s, shape);
}

}  // namespace

void Graph::backward_rule(std::uint32_t id, const Tensor& g, Tensor out[2]) {
    // Copy what is needed: the rules below append to nodes_.
    const Op op = nodes_[id].op;
    const Tensor y(this, id);
    const Tensor a(this, nodes_[id].inputs[0]);
    const Tensor b(this, nodes_[id].inputs[1]);
    const double p0 = nodes_[id].p0;

    switch (op) {
        case Op::leaf:
            return;
        case Op::add:
            out[0] = reduce_to(g, a.shape());
            out[1] = reduce_to(g, b.shape());
            return;
        case Op::sub:
            out[0] = reduce_to(g, a.shape());
            out[1] = reduce_to(scale(g, -1.0), b.shape());
            return;
        case Op::mul:
            if (a.requires_grad()) out[0] = reduce_to(mul(g, b), a.shape());
            if (b.requires_grad()) out[1] = reduce_to(mul(g, a), b.shape());
            return;
        case Op::matmul: {
            const Shape sa = a.shape();
            const Shape sb = b.shape();
            if (sa.size() == 2 && sb.size() == 2) {
                if (a.requires_grad()) out[0] = matmul(g, transpose(b));
                if (b.requires_grad()) out[1] = matmul(transpose(a), g);
            } else if (sa.size() == 2) {
                if (a.requires_grad()) out[0] = matmul(reshape(g, {sa[0], 1}), reshape(b, {1, sa[1]}));
                if (b.requires_grad()) out[1] = matmul(g, a);
            } else {
                if (a.requires_grad()) out[0] = matmul(b, g);
                if (b.requires_grad()) out[1] = matmul(reshape(a, {sb[0], 1}), reshape(g, {1, sb[1]}));
            }
            return;
        }
        case Op::relu:
        case Op::hinge:
            out[0] = step_mask(g, a);
            return;
        case Op::sigmoid:
            out[0] = mul(g, mul(y, affine(y, -1.0, 1.0)));
            return;
        case Op::tanh:
            out[0] = mul(g, affine(mul(y, y), -1.0, 1.0));
            return;
        case Op::sum:
            out[0] = expand(g, a.shape());
            return;
        case Op::mean:
            out[0] = expand(scale(g, 1.0 / static_cast<double>(a.numel())), a.shape());
            return;
        case Op::dot:
            if (a.requires_grad()) out[0] = mul(g, b);
            if (b.requires_grad()) out[1] = mul(g, a);
            return;
        case Op::bce_with_logits:
            if (a.requires_grad()) out[0] = mul(g, sub(sigmoid(a), b));
            if (b.requires_grad()) out[1] = mul(g, scale(a, -1.0));
            return;
        case Op::affine:
            out[0] = scale(g, p0);
            return;
        case Op::power:
            out[0] = mul(g, scale(power(a, p0 - 1.0), p0));
            return;
        case Op::transpose:
            out[0] = transpose(g);
            return;
        case Op::reshape:
            out[0] = reshape(g, a.shape());
            return;
        case Op::expand:
            out[0] = reduce_to(g, a.shape());
            return;
        case Op::step_mask:
            out[0] = step_mask(g, b);
            return;
    }
}

namespace {

struct RecordingScope {
    RecordingScope(bool& flag, bool value) : flag_(flag), saved_(flag) { flag_ = value; }
    ~RecordingScope() { flag_ = saved_; }
    bool& flag_;
    bool saved_;
};

}  // namespace

std::vector<Tensor> Graph::gradient(const Tensor& output, std::span<const Tensor> wrt,
                                    bool build_higher_order) {
    if (&output.graph() != this) throw Error(ErrorKind::usage, "output belongs to another graph");
    if (output.numel() != 1) {
        throw Error(ErrorKind::usage,
                    "gradient needs a scalar output, got shape " + shape_string(output.shape()));
    }
    std::vector<Tensor> result;
    if (wrt.empty()) return result;

    std::uint32_t lo = output.id();
    for (const Tensor& w : wrt) {
        if (&w.graph() != this) throw Error(ErrorKind::usage, "wrt tensor belongs to another graph");
        lo = std::min(lo, w.id());
    }
    const std::uint32_t hi = output.id();

    RecordingScope scope(recording_, build_higher_order && recording_);
    std::vector<Tensor> grads(hi - lo + 1);
    if (nodes_[hi].requires_grad) grads[hi - lo] = tensor(nodes_[hi].shape, {1.0});

    for (std::uint32_t id = hi + 1; id-- > lo;) {
        const Tensor g = grads[id - lo];
        if (!g.valid() || nodes_[id].op == Op::leaf) continue;
        Tensor contrib[2];
        backward_rule(id, g, contrib);
        const std::uint8_t arity = nodes_[id].arity;
        for (std::uint8_t k = 0; k < arity; ++k) {
            const std::uint32_t in = nodes_[id].inputs[k];
            if (!contrib[k].valid() || in < lo || !nodes_[in].requires_grad) continue;
            Tensor& slot = grads[in - lo];
            slot = slot.valid() ? add(slot, contrib[k]) : contrib[k];
        }
    }

    result.reserve(wrt.size());
    for (const Tensor& w : wrt) {
        const Tensor g = grads[w.id() - lo];
        result.push_back(g.valid() ? g : constant(w.shape(), 0.0));
    }
    return result;
}

}  // namespace sortlab::autograd
