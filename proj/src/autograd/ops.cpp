#include <cmath>
#include <initializer_list>

#include "sortlab/autograd.hpp"
#include "sortlab/error.hpp"

namespace sortlab::autograd {

namespace {

Tensor make(Op op, std::initializer_list<Tensor> inputs, Shape shape, double p0 = 0.0,
            double p1 = 0.0) {
    Graph& g = inputs.begin()->graph();
    return g.record(op, std::span<const Tensor>(inputs.begin(), inputs.size()), std::move(shape),
                    p0, p1);
}

[[noreturn]] void shape_error(const char* what, const Tensor& a, const Tensor& b) {
    throw Error(ErrorKind::shape, std::string(what) + ": incompatible shapes " +
                                      shape_string(a.shape()) + " and " + shape_string(b.shape()));
}

Shape broadcast_shape(const char* what, const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return a.shape();
    if (b.numel() == 1) return a.shape();
    if (a.numel() == 1) return b.shape();
    shape_error(what, a, b);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return make(Op::add, {a, b}, broadcast_shape("add", a, b));
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return make(Op::sub, {a, b}, broadcast_shape("sub", a, b));
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return make(Op::mul, {a, b}, broadcast_shape("mul", a, b));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() == 2 && sb.size() == 2 && sa[1] == sb[0]) {
        return make(Op::matmul, {a, b}, {sa[0], sb[1]});
    }
    if (sa.size() == 2 && sb.size() == 1 && sa[1] == sb[0]) {
        return make(Op::matmul, {a, b}, {sa[0]});
    }
    if (sa.size() == 1 && sb.size() == 2 && sa[0] == sb[0]) {
        return make(Op::matmul, {a, b}, {sb[1]});
    }
    shape_error("matmul", a, b);
}

Tensor relu(const Tensor& x) { return make(Op::relu, {x}, x.shape()); }
Tensor hinge(const Tensor& x) { return make(Op::hinge, {x}, x.shape()); }
Tensor sigmoid(const Tensor& x) { return make(Op::sigmoid, {x}, x.shape()); }
Tensor tanh(const Tensor& x) { return make(Op::tanh, {x}, x.shape()); }
Tensor sum(const Tensor& x) { return make(Op::sum, {x}, {1}); }
Tensor mean(const Tensor& x) { return make(Op::mean, {x}, {1}); }

Tensor dot(const Tensor& a, const Tensor& b) {
    if (a.rank() != 1 || a.shape() != b.shape()) shape_error("dot", a, b);
    return make(Op::dot, {a, b}, {1});
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
    if (logits.shape() != targets.shape()) shape_error("bce_with_logits", logits, targets);
    return make(Op::bce_with_logits, {logits, targets}, logits.shape());
}

Tensor affine(const Tensor& x, double scale, double shift) {
    return make(Op::affine, {x}, x.shape(), scale, shift);
}

Tensor scale(const Tensor& x, double factor) { return affine(x, factor, 0.0); }

Tensor power(const Tensor& x, double exponent) {
    return make(Op::power, {x}, x.shape(), exponent);
}

Tensor transpose(const Tensor& x) {
    if (x.rank() != 2) {
        throw Error(ErrorKind::shape, "transpose needs rank 2, got " + shape_string(x.shape()));
    }
    return make(Op::transpose, {x}, {x.shape()[1], x.shape()[0]});
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape.empty() || numel(shape) != x.numel()) {
        throw Error(ErrorKind::shape, "cannot reshape " + shape_string(x.shape()) + " to " +
                                          shape_string(shape));
    }
    return make(Op::reshape, {x}, std::move(shape));
}

Tensor expand(const Tensor& x, Shape shape) {
    if (x.numel() != 1 || shape.empty() || numel(shape) == 0) {
        throw Error(ErrorKind::shape, "expand needs a single-element tensor, got " +
                                          shape_string(x.shape()));
    }
    return make(Op::expand, {x}, std::move(shape));
}

Tensor step_mask(const Tensor& grad, const Tensor& x) {
    if (grad.shape() != x.shape()) shape_error("step_mask", grad, x);
    return make(Op::step_mask, {grad, x}, x.shape());
}

Primitive primitive_from_name(std::string_view name) {
    static constexpr Primitive all[] = {
        Primitive::add,  Primitive::sub,  Primitive::mul,   Primitive::matmul,
        Primitive::relu, Primitive::sigmoid, Primitive::tanh, Primitive::sum,
        Primitive::mean, Primitive::dot,  Primitive::hinge, Primitive::bce_with_logits,
    };
    for (Primitive p : all) {
        if (primitive_name(p) == name) return p;
    }
    throw Error(ErrorKind::usage, "unknown primitive tag '" + std::string(name) + "'");
}

std::string_view primitive_name(Primitive p) {
    switch (p) {
        case Primitive::add: return "add";
        case Primitive::sub: return "sub";
        case Primitive::mul: return "mul";
        case Primitive::matmul: return "matmul";
        case Primitive::relu: return "relu";
        case Primitive::sigmoid: return "sigmoid";
        case Primitive::tanh: return "tanh";
        case Primitive::sum: return "sum";
        case Primitive::mean: return "mean";
        case Primitive::dot: return "dot";
        case Primitive::hinge: return "hinge";
        case Primitive::bce_with_logits: return "bce-with-logits";
    }
    throw Error(ErrorKind::usage, "unknown primitive");
}

Tensor apply_primitive(Primitive p, std::span<const Tensor> inputs) {
    const bool binary = p == Primitive::add || p == Primitive::sub || p == Primitive::mul ||
                        p == Primitive::matmul || p == Primitive::dot ||
                        p == Primitive::bce_with_logits;
    const std::size_t arity = binary ? 2 : 1;
    if (inputs.size() != arity) {
        throw Error(ErrorKind::shape, std::string(primitive_name(p)) + " takes " +
                                          std::to_string(arity) + " inputs, got " +
                                          std::to_string(inputs.size()));
    }
    switch (p) {
        case Primitive::add: return add(inputs[0], inputs[1]);
        case Primitive::sub: return sub(inputs[0], inputs[1]);
        case Primitive::mul: return mul(inputs[0], inputs[1]);
        case Primitive::matmul: return matmul(inputs[0], inputs[1]);
        case Primitive::relu: return relu(inputs[0]);
        case Primitive::sigmoid: return sigmoid(inputs[0]);
        case Primitive::tanh: return tanh(inputs[0]);
        case Primitive::sum: return sum(inputs[0]);
        case Primitive::mean: return mean(inputs[0]);
        case Primitive::dot: return dot(inputs[0], inputs[1]);
        case Primitive::hinge: return hinge(inputs[0]);
        case Primitive::bce_with_logits: return bce_with_logits(inputs[0], inputs[1]);
    }
    throw Error(ErrorKind::usage, "unknown primitive");
}

Tensor apply_primitive(std::string_view tag, std::span<const Tensor> inputs) {
    return apply_primitive(primitive_from_name(tag), inputs);
}

Cosine cosine_similarity(const Tensor& a, const Tensor& b) {
    if (a.rank() != 1 || a.shape() != b.shape()) {
        throw Error(ErrorKind::shape, "cosine_similarity needs equal-length vectors, got " +
                                          shape_string(a.shape()) + " and " +
                                          shape_string(b.shape()));
    }
    double aa = 0.0, bb = 0.0;
    for (double v : a.values()) aa += v * v;
    for (double v : b.values()) bb += v * v;
    if (aa == 0.0 || bb == 0.0) return {a.graph().scalar(0.0), true};
    Tensor norms = mul(dot(a, a), dot(b, b));
    return {mul(dot(a, b), power(norms, -0.5)), false};
}

}  // namespace sortlab::autograd
