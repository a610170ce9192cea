#include <gtest/gtest.h>

#include <cmath>

#include "sortlab/autograd.hpp"
#include "sortlab/error.hpp"
#include "sortlab/gradcheck.hpp"
#include "sortlab/rng.hpp"

using namespace sortlab;
using namespace sortlab::autograd;

namespace {

std::vector<double> random_values(Rng& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

// Keeps relu/hinge inputs away from the kink so central differences are valid.
std::vector<double> away_from_zero(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) {
        x = rng.uniform(0.05, 2.0);
        if (rng.bernoulli(0.5)) x = -x;
    }
    return v;
}

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected an exception";
    return ErrorKind::usage;
}

}  // namespace

TEST(BuildTensor, IdentityMatrix) {
    Graph g;
    Tensor t = build_tensor(g, {2, 2}, {1, 0, 0, 1}, false);
    EXPECT_EQ(t.numel(), 4u);
    EXPECT_EQ(t.shape(), (Shape{2, 2}));
}

TEST(BuildTensor, LengthMismatch) {
    Graph g;
    EXPECT_EQ(kind_of([&] { build_tensor(g, {3}, {1, 2}, false); }), ErrorKind::construction);
}

TEST(BuildTensor, ScalarZero) {
    Graph g;
    Tensor t = build_tensor(g, {1}, {0}, true);
    EXPECT_EQ(t.item(), 0.0);
    EXPECT_TRUE(t.requires_grad());
}

TEST(Primitive, Relu) {
    Graph g;
    Tensor x = g.tensor({2}, {-2, 3});
    Tensor y = apply_primitive("relu", std::vector<Tensor>{x});
    EXPECT_EQ(y.values(), (std::vector<double>{0, 3}));
}

TEST(Primitive, SigmoidAndBce) {
    Graph g;
    Tensor zero = g.tensor({1}, {0});
    EXPECT_DOUBLE_EQ(sigmoid(zero).item(), 0.5);
    Tensor bce = bce_with_logits(zero, g.tensor({1}, {1}));
    EXPECT_NEAR(bce.item(), std::log(2.0), 1e-15);
    EXPECT_NEAR(bce.item(), 0.693147, 1e-6);
}

TEST(Primitive, MatmulIdentity) {
    Graph g;
    Tensor eye = g.tensor({2, 2}, {1, 0, 0, 1});
    Tensor m = g.tensor({2, 2}, {5, 6, 7, 8});
    Tensor out = apply_primitive(Primitive::matmul, std::vector<Tensor>{eye, m});
    EXPECT_EQ(out.shape(), (Shape{2, 2}));
    EXPECT_EQ(out.values(), (std::vector<double>{5, 6, 7, 8}));
}

TEST(Primitive, UnknownTagIsUsageError) {
    Graph g;
    Tensor x = g.tensor({1}, {1});
    EXPECT_EQ(kind_of([&] { apply_primitive("softmax", std::vector<Tensor>{x}); }),
              ErrorKind::usage);
}

TEST(Primitive, NonconformingShapes) {
    Graph g;
    Tensor a = g.tensor({2}, {1, 2});
    Tensor b = g.tensor({3}, {1, 2, 3});
    Tensor m = g.tensor({2, 3}, std::vector<double>(6, 1.0));
    EXPECT_EQ(kind_of([&] { add(a, b); }), ErrorKind::shape);
    EXPECT_EQ(kind_of([&] { matmul(m, a); }), ErrorKind::shape);
    EXPECT_EQ(kind_of([&] { dot(a, b); }), ErrorKind::shape);
    EXPECT_EQ(kind_of([&] { apply_primitive(Primitive::add, std::vector<Tensor>{a}); }),
              ErrorKind::shape);
}

TEST(Primitive, ScalarBroadcastOnly) {
    Graph g;
    Tensor v = g.tensor({3}, {1, 2, 3});
    Tensor s = g.tensor({1}, {10});
    EXPECT_EQ(add(v, s).values(), (std::vector<double>{11, 12, 13}));
    EXPECT_EQ(mul(s, v).values(), (std::vector<double>{10, 20, 30}));
    EXPECT_EQ(sub(s, v).values(), (std::vector<double>{9, 8, 7}));
    Tensor row = g.tensor({1, 3}, {1, 2, 3});
    Tensor mat = g.tensor({2, 3}, std::vector<double>(6, 1.0));
    EXPECT_EQ(kind_of([&] { add(mat, row); }), ErrorKind::shape);
}

TEST(Cosine, Examples) {
    Graph g;
    auto c1 = cosine_similarity(g.tensor({2}, {1, 0}), g.tensor({2}, {1, 0}));
    auto c2 = cosine_similarity(g.tensor({2}, {1, 0}), g.tensor({2}, {0, 1}));
    auto c3 = cosine_similarity(g.tensor({2}, {1, 2}), g.tensor({2}, {2, 4}));
    EXPECT_DOUBLE_EQ(c1.value.item(), 1.0);
    EXPECT_DOUBLE_EQ(c2.value.item(), 0.0);
    EXPECT_NEAR(c3.value.item(), 1.0, 1e-15);
    EXPECT_FALSE(c1.degenerate || c2.degenerate || c3.degenerate);
}

TEST(Cosine, ZeroNormIsFlagged) {
    Graph g;
    auto c = cosine_similarity(g.tensor({3}, {0, 0, 0}, true), g.tensor({3}, {1, 2, 3}, true));
    EXPECT_TRUE(c.degenerate);
    EXPECT_EQ(c.value.item(), 0.0);
    EXPECT_TRUE(std::isfinite(c.value.item()));
}

TEST(Cosine, GradientMatchesFiniteDifferences) {
    Rng rng(3);
    ScalarFunction f = [](Graph& g, const Tensor& x) {
        Tensor a = reshape(matmul(g.tensor({1, 4}, {1, 0, 0, 0}), x), {3});
        Tensor b = reshape(matmul(g.tensor({1, 4}, {0, 1, 0, 0}), x), {3});
        return cosine_similarity(a, b).value;
    };
    for (int trial = 0; trial < 20; ++trial) {
        Point p{{4, 3}, random_values(rng, 12)};
        EXPECT_LT(check_gradient(f, p, 1), 1e-4);
        EXPECT_LT(check_gradient(f, p, 2), 1e-3);
    }
}

TEST(Gradient, SquareFirstAndSecondOrder) {
    Graph g;
    Tensor x = g.tensor({1}, {3}, true);
    Tensor y = mul(x, x);
    auto d1 = g.gradient(y, std::vector<Tensor>{x}, true);
    EXPECT_DOUBLE_EQ(d1[0].item(), 6.0);
    auto d2 = g.gradient(d1[0], std::vector<Tensor>{x}, true);
    EXPECT_DOUBLE_EQ(d2[0].item(), 2.0);
}

TEST(Gradient, LinearForm) {
    Graph g;
    Tensor w = g.tensor({3}, {0.5, -1.5, 2.0});
    Tensor a = g.tensor({3}, {1, 2, 3}, true);
    auto grad = g.gradient(sum(mul(w, a)), std::vector<Tensor>{a}, false);
    EXPECT_EQ(grad[0].values(), w.values());
}

TEST(Gradient, NonScalarOutputIsUsageError) {
    Graph g;
    Tensor a = g.tensor({2}, {1, 2}, true);
    EXPECT_EQ(kind_of([&] { g.gradient(relu(a), std::vector<Tensor>{a}, false); }),
              ErrorKind::usage);
}

TEST(Gradient, UnreachableGivesZeros) {
    Graph g;
    Tensor a = g.tensor({2}, {1, 2}, true);
    Tensor b = g.tensor({2, 2}, {1, 2, 3, 4}, true);
    auto grads = g.gradient(sum(a), std::vector<Tensor>{a, b}, false);
    EXPECT_EQ(grads[1].shape(), (Shape{2, 2}));
    EXPECT_EQ(grads[1].values(), (std::vector<double>(4, 0.0)));
}

TEST(Gradient, NonHigherOrderResultIsConstant) {
    Graph g;
    Tensor x = g.tensor({1}, {3}, true);
    auto d1 = g.gradient(mul(x, x), std::vector<Tensor>{x}, false);
    EXPECT_FALSE(d1[0].requires_grad());
    auto d2 = g.gradient(d1[0], std::vector<Tensor>{x}, false);
    EXPECT_EQ(d2[0].item(), 0.0);
}

TEST(Gradient, TwoLayerNetworkMatchesFiniteDifferences) {
    Rng rng(11);
    MultiFunction net = [](Graph& g, std::span<const Tensor> p) {
        Tensor x = g.tensor({4}, {0.3, -0.7, 1.1, 0.2});
        Tensor h = tanh(add(matmul(p[0], x), p[1]));
        Tensor logits = add(matmul(p[2], h), p[3]);
        return mean(bce_with_logits(logits, g.tensor({2}, {1, 0})));
    };
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Point> params = {{{5, 4}, random_values(rng, 20, -1, 1)},
                                     {{5}, random_values(rng, 5, -1, 1)},
                                     {{2, 5}, random_values(rng, 10, -1, 1)},
                                     {{2}, random_values(rng, 2, -1, 1)}};
        EXPECT_LT(check_gradient(net, params, 1), 1e-4);
    }
}

TEST(CheckGradient, CubeSum) {
    Rng rng(5);
    ScalarFunction f = [](Graph&, const Tensor& x) { return sum(mul(mul(x, x), x)); };
    Point p{{6}, random_values(rng, 6)};
    EXPECT_LT(check_gradient(f, p, 1), 1e-4);
}

TEST(CheckGradient, DetectsPlantedFault) {
    Rng rng(5);
    MultiFunction f = [](Graph&, std::span<const Tensor> x) {
        return sum(mul(mul(x[0], x[0]), x[0]));
    };
    std::vector<Point> p = {{{6}, random_values(rng, 6)}};
    auto analytic = analytic_gradient(f, p);
    for (double& v : analytic) v += 0.1;
    EXPECT_GT(max_relative_error(analytic, numeric_gradient(f, p)), 1e-2);
}

TEST(CheckGradient, ConstantFunction) {
    ScalarFunction f = [](Graph& g, const Tensor&) { return g.scalar(4.0); };
    Point p{{3}, {1, 2, 3}};
    EXPECT_EQ(check_gradient(f, p, 1), 0.0);
    EXPECT_EQ(check_gradient(f, p, 2), 0.0);
}

TEST(CheckGradient, NonFiniteIsEvaluationError) {
    ScalarFunction f = [](Graph&, const Tensor& x) { return sum(power(x, -1.0)); };
    Point p{{2}, {0.0, 1.0}};
    EXPECT_EQ(kind_of([&] { check_gradient(f, p, 1); }), ErrorKind::evaluation);
}

TEST(CheckGradient, BadOrderIsUsageError) {
    ScalarFunction f = [](Graph&, const Tensor& x) { return sum(x); };
    Point p{{2}, {0.0, 1.0}};
    EXPECT_EQ(kind_of([&] { check_gradient(f, p, 3); }), ErrorKind::usage);
}

namespace {

// Each primitive reduced to a scalar through a random weighting, so every
// output element contributes a distinct coefficient.
struct PrimitiveCase {
    Primitive primitive;
    std::vector<Shape> shapes;
    bool kinked = false;
};

std::vector<PrimitiveCase> primitive_cases() {
    return {
        {Primitive::add, {{3, 2}, {3, 2}}},
        {Primitive::add, {{4}, {1}}},
        {Primitive::sub, {{3, 2}, {3, 2}}},
        {Primitive::sub, {{1}, {5}}},
        {Primitive::mul, {{3, 2}, {3, 2}}},
        {Primitive::mul, {{1}, {4}}},
        {Primitive::matmul, {{3, 4}, {4, 2}}},
        {Primitive::matmul, {{3, 4}, {4}}},
        {Primitive::matmul, {{4}, {4, 3}}},
        {Primitive::relu, {{5}}, true},
        {Primitive::sigmoid, {{5}}},
        {Primitive::tanh, {{2, 3}}},
        {Primitive::sum, {{2, 3}}},
        {Primitive::mean, {{7}}},
        {Primitive::dot, {{6}, {6}}},
        {Primitive::hinge, {{5}}, true},
        {Primitive::bce_with_logits, {{4}, {4}}},
    };
}

MultiFunction weighted(Primitive p, std::vector<double> weights) {
    return [p, weights](Graph& g, std::span<const Tensor> xs) {
        Tensor y = apply_primitive(p, xs);
        // Square the weighted sum so the second derivative is non-trivial for linear primitives.
        Tensor s = sum(mul(y, g.tensor(y.shape(), weights)));
        return add(s, mul(s, s));
    };
}

std::size_t output_size(const PrimitiveCase& c) {
    Graph g;
    std::vector<Tensor> xs;
    for (const Shape& s : c.shapes) xs.push_back(g.constant(s, 0.5));
    return apply_primitive(c.primitive, xs).numel();
}

}  // namespace

TEST(PrimitiveProperty, FirstOrderMatchesFiniteDifferencesOn100Seeds) {
    for (const auto& c : primitive_cases()) {
        const std::size_t out = output_size(c);
        for (std::uint64_t seed = 0; seed < 100; ++seed) {
            Rng rng(seed);
            std::vector<Point> points;
            for (const Shape& s : c.shapes) {
                points.push_back({s, c.kinked ? away_from_zero(rng, numel(s))
                                              : random_values(rng, numel(s))});
            }
            auto f = weighted(c.primitive, random_values(rng, out, -1, 1));
            EXPECT_LT(check_gradient(f, points, 1), 1e-4)
                << primitive_name(c.primitive) << " seed " << seed;
        }
    }
}

TEST(PrimitiveProperty, SecondOrderMatchesFiniteDifferences) {
    for (const auto& c : primitive_cases()) {
        const std::size_t out = output_size(c);
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Rng rng(1000 + seed);
            std::vector<Point> points;
            for (const Shape& s : c.shapes) {
                points.push_back({s, c.kinked ? away_from_zero(rng, numel(s))
                                              : random_values(rng, numel(s))});
            }
            auto f = weighted(c.primitive, random_values(rng, out, -1, 1));
            EXPECT_LT(check_gradient(f, points, 2), 1e-3)
                << primitive_name(c.primitive) << " seed " << seed;
        }
    }
}

TEST(GraphProperty, ReplayIsBitIdentical) {
    Rng rng(9);
    Graph g;
    Tensor w = g.tensor({3, 4}, random_values(rng, 12), true);
    Tensor x = g.tensor({4}, random_values(rng, 4), true);
    Tensor y = tanh(matmul(w, x));
    Tensor loss = mean(bce_with_logits(y, g.tensor({3}, {1, 0, 1})));
    auto grads = g.gradient(loss, std::vector<Tensor>{w, x}, true);
    Tensor second = sum(mul(grads[1], grads[1]));
    std::vector<std::vector<double>> before;
    for (std::uint32_t id = 0; id < g.size(); ++id) before.push_back(Tensor(&g, id).values());
    g.replay();
    for (std::uint32_t id = 0; id < g.size(); ++id) {
        EXPECT_EQ(Tensor(&g, id).values(), before[id]) << "node " << id;
    }
    // Changing a leaf and restoring it reproduces the same values again.
    auto saved = x.values();
    g.set_leaf(x, random_values(rng, 4));
    g.replay();
    EXPECT_NE(second.values(), before[second.id()]);
    g.set_leaf(x, saved);
    g.replay();
    EXPECT_EQ(second.values(), before[second.id()]);
}

TEST(GraphProperty, Linearity) {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        Graph g;
        Tensor x = g.tensor({5}, random_values(rng, 5), true);
        Tensor f = sum(mul(tanh(x), x));
        Tensor h = dot(sigmoid(x), x);
        const double a = rng.uniform(-3, 3), b = rng.uniform(-3, 3);
        auto combined = g.gradient(add(scale(f, a), scale(h, b)), std::vector<Tensor>{x}, false);
        auto gf = g.gradient(f, std::vector<Tensor>{x}, false);
        auto gh = g.gradient(h, std::vector<Tensor>{x}, false);
        for (std::size_t i = 0; i < 5; ++i) {
            const double expected = a * gf[0].at(i) + b * gh[0].at(i);
            EXPECT_NEAR(combined[0].at(i), expected, 1e-14 * (1 + std::abs(expected)));
        }
    }
}

TEST(GraphProperty, FiniteOutputsOnFiniteInputs) {
    Graph g;
    Tensor x = g.tensor({4}, {-800.0, -1.0, 1.0, 800.0});
    for (Tensor y : {sigmoid(x), tanh(x), bce_with_logits(x, g.tensor({4}, {1, 0, 1, 0}))}) {
        for (double v : y.values()) EXPECT_TRUE(std::isfinite(v));
    }
}
