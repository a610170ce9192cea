#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "sortlab/error.hpp"
#include "sortlab/gradcam.hpp"
#include "sortlab/rng.hpp"
#include "sortlab/sortloss.hpp"

using namespace sortlab;
using namespace sortlab::loss;

namespace {

autograd::Tensor vec(autograd::Graph& g, std::vector<double> v, bool grad = false) {
    const std::size_t n = v.size();
    return g.tensor({n}, std::move(v), grad);
}

double cos_of(const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) ab += a[i] * b[i], aa += a[i] * a[i], bb += b[i] * b[i];
    return ab / std::sqrt(aa * bb);
}

synth::GeneratorConfig tiny_generator() {
    synth::GeneratorConfig c;
    c.width = 3;
    c.height = 3;
    c.groups = 20;
    return c;
}

model::ModelParams tiny_model(std::uint64_t seed) {
    model::ModelConfig base;
    base.embed_dim = 4;
    base.question_dim = 5;
    base.cell_features = 2;
    base.joint_dim = 6;
    base.fusion_dim = 5;
    base.head_dim = 4;
    base.seed = seed;
    auto p = model::init_model(synth::model_config_for(tiny_generator(), base));
    Rng rng(seed + 1000);
    for (auto& t : p.tensors)
        for (double& v : t.values) v += rng.uniform(-0.5, 0.5);
    return p;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace

TEST(ContrastiveLoss, SubAlignedIrrelevantOrthogonal) {
    autograd::Graph g;
    EXPECT_EQ(contrastive_gradient_loss(vec(g, {1, 2}), vec(g, {1, 2}), vec(g, {-2, 1})).value.item(), 0.0);
}

TEST(ContrastiveLoss, IrrelevantAlignedSubOrthogonal) {
    autograd::Graph g;
    EXPECT_NEAR(contrastive_gradient_loss(vec(g, {1, 2}), vec(g, {-2, 1}), vec(g, {1, 2})).value.item(), 1.0, 1e-15);
}

TEST(ContrastiveLoss, ZeroVectorIsSkipped) {
    autograd::Graph g;
    const auto t = contrastive_gradient_loss(vec(g, {1, 2}), vec(g, {0, 0}), vec(g, {1, 2}));
    EXPECT_EQ(t.value.item(), 0.0);
    EXPECT_EQ(t.skipped, 1u);
}

TEST(ContrastiveLoss, BoundedOnRandomVectors) {
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        autograd::Graph g;
        std::vector<double> a(4), b(4), c(4);
        for (auto* v : {&a, &b, &c})
            for (double& x : *v) x = rng.uniform(-1, 1);
        const double l = contrastive_gradient_loss(vec(g, a), vec(g, b), vec(g, c)).value.item();
        EXPECT_GE(l, 0.0);
        EXPECT_LE(l, 2.0);
        EXPECT_NEAR(l, std::max(0.0, cos_of(a, c) - cos_of(a, b)), 1e-12);
    }
}

TEST(ContrastiveLoss, GradientMatchesFiniteDifferences) {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> r(5), s(5), ir(5);
        for (auto* v : {&r, &s, &ir})
            for (double& x : *v) x = rng.uniform(-1, 1);
        // Keep away from the hinge's kink.
        if (std::abs(cos_of(r, ir) - cos_of(r, s)) < 0.05) continue;
        auto f = [&](const std::vector<double>& rr) {
            autograd::Graph g;
            return contrastive_gradient_loss(vec(g, rr), vec(g, s), vec(g, ir)).value.item();
        };
        autograd::Graph g;
        auto rt = vec(g, r, true);
        const auto l = contrastive_gradient_loss(rt, vec(g, s), vec(g, ir)).value;
        const autograd::Tensor wrt[] = {rt};
        const auto grad = g.gradient(l, wrt, false)[0];
        for (std::size_t k = 0; k < 5; ++k) {
            auto up = r, down = r;
            up[k] += 1e-6;
            down[k] -= 1e-6;
            EXPECT_LT(rel_err(grad.at(k), (f(up) - f(down)) / 2e-6), 1e-4);
        }
    }
}

TEST(MatrixForm, SinglePairEqualsVectorForm) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> m(3 * 4);
        for (double& x : m) x = rng.uniform(-1, 1);
        autograd::Graph g;
        const auto G = g.tensor({3, 4}, m);
        const std::size_t sub[] = {1}, irr[] = {2};
        const double matrix = cg_from_gradcam(G, 0, sub, irr).value.item();
        const std::vector<double> r(m.begin(), m.begin() + 4), s(m.begin() + 4, m.begin() + 8), i(m.begin() + 8, m.end());
        const double vector = contrastive_gradient_loss(vec(g, r), vec(g, s), vec(g, i)).value.item();
        EXPECT_NEAR(matrix, vector, 1e-12);
    }
}

TEST(MatrixForm, AllPairsSatisfiedGivesZero) {
    autograd::Graph g;
    // Rows: R, two subs parallel to R, three irrelevant rows orthogonal to it.
    const auto G = g.tensor({6, 3}, {1, 0, 0, 2, 0, 0, 3, 0.1, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1});
    const std::size_t sub[] = {1, 2}, irr[] = {3, 4, 5};
    EXPECT_EQ(cg_from_gradcam(G, 0, sub, irr).value.item(), 0.0);
}

TEST(MatrixForm, MatchesPairEnumeration) {
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> m(6 * 5);
        for (double& x : m) x = rng.uniform(-1, 1);
        auto row = [&](std::size_t i) { return std::vector<double>(m.begin() + i * 5, m.begin() + (i + 1) * 5); };
        double brute = 0;
        for (std::size_t s : {1, 2})
            for (std::size_t i : {3, 4, 5}) brute += std::max(0.0, cos_of(row(0), row(i)) - cos_of(row(0), row(s)));
        brute /= 6;
        autograd::Graph g;
        const std::size_t sub[] = {1, 2}, irr[] = {3, 4, 5};
        EXPECT_NEAR(cg_from_gradcam(g.tensor({6, 5}, m), 0, sub, irr).value.item(), brute, 1e-12);
    }
}

TEST(MatrixForm, ZeroRowsAreSkipped) {
    autograd::Graph g;
    const auto G = g.tensor({4, 2}, {1, 0, 0, 0, 1, 1, 0, 1});
    const std::size_t sub[] = {1, 2}, irr[] = {3};
    const auto t = cg_from_gradcam(G, 0, sub, irr);
    EXPECT_EQ(t.skipped, 1u);
    EXPECT_NEAR(t.value.item(), std::max(0.0, 0.0 - std::sqrt(0.5)), 1e-12);
}

TEST(MatrixForm, SampledPairIsOneOfTheTerms) {
    Rng data(7);
    std::vector<double> m(5 * 3);
    for (double& x : m) x = data.uniform(-1, 1);
    auto row = [&](std::size_t i) { return std::vector<double>(m.begin() + i * 3, m.begin() + (i + 1) * 3); };
    std::vector<double> terms;
    for (std::size_t s : {1, 2})
        for (std::size_t i : {3, 4}) terms.push_back(std::max(0.0, cos_of(row(0), row(i)) - cos_of(row(0), row(s))));
    Rng pick(1);
    for (int k = 0; k < 20; ++k) {
        autograd::Graph g;
        const std::size_t sub[] = {1, 2}, irr[] = {3, 4};
        const double v = cg_from_gradcam(g.tensor({5, 3}, m), 0, sub, irr, {true, &pick}).value.item();
        EXPECT_TRUE(std::any_of(terms.begin(), terms.end(), [&](double t) { return std::abs(t - v) < 1e-12; }));
    }
}

TEST(SqAlignment, ExampleValues) {
    autograd::Graph g;
    const auto r = vec(g, {1, 2});
    const autograd::Tensor same[] = {vec(g, {2, 4})};
    const autograd::Tensor ortho[] = {vec(g, {-2, 1})};
    const autograd::Tensor anti[] = {vec(g, {-1, -2})};
    EXPECT_NEAR(sq_alignment_loss(r, same).value.item(), 0.0, 1e-15);
    EXPECT_NEAR(sq_alignment_loss(r, ortho).value.item(), 1.0, 1e-15);
    EXPECT_NEAR(sq_alignment_loss(r, anti).value.item(), 2.0, 1e-15);
    const auto G = g.tensor({4, 2}, {1, 2, 2, 4, -2, 1, -1, -2});
    const std::size_t subs[] = {1, 2, 3};
    EXPECT_NEAR(sq_from_gradcam(G, 0, subs).value.item(), 1.0, 1e-12);
}

TEST(Weights, DefaultsAndArithmetic) {
    const LossWeights w;
    EXPECT_EQ(w.lambda1, 2.27);
    EXPECT_EQ(w.lambda2, 2.27);
    EXPECT_EQ(w.lambda3, 0.0003);
    EXPECT_NEAR(combine(0.5, 0.1, 0.2, 0.3, w), 1.18109, 1e-12);
}

TEST(Weights, NegativeRejected) {
    LossWeights w;
    w.lambda2 = -1;
    try {
        w.validate();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
    }
}

TEST(Variant, Names) {
    EXPECT_EQ(variant_from_name("sq-only"), Variant::sq_only);
    EXPECT_STREQ(variant_name(Variant::full), "full");
    EXPECT_THROW(variant_from_name("both"), Error);
}

TEST(TotalLoss, BreakdownRecombines) {
    const auto p = tiny_model(1);
    for (const auto& group : synth::generate_dataset(tiny_generator())) {
        for (Variant v : {Variant::baseline, Variant::sq_only, Variant::full}) {
            autograd::Graph g;
            const auto bound = model::bind(g, p, true);
            const auto gl = sort_total_loss(bound, group, LossWeights{}, v);
            const auto& b = gl.breakdown;
            EXPECT_NEAR(b.total, combine(b.cg_loss, b.bce_reasoning, b.bce_sub, b.bce_irrelevant, LossWeights{}), 1e-12);
            EXPECT_EQ(gl.total.item(), b.total);
            if (v == Variant::baseline) {
                EXPECT_EQ(b.cg_loss, 0.0);
            }
        }
    }
}

TEST(TotalLoss, BaselineBuildsNoGradCam) {
    const auto p = tiny_model(2);
    const auto before = gradcam::construction_count();
    for (const auto& group : synth::generate_dataset(tiny_generator())) {
        autograd::Graph g;
        sort_total_loss(model::bind(g, p, true), group, LossWeights{}, Variant::baseline);
    }
    EXPECT_EQ(gradcam::construction_count(), before);
}

TEST(TotalLoss, SaturatedCorrectLogitsApproachZero) {
    auto p = tiny_model(3);
    auto group = synth::generate_dataset(tiny_generator())[0];
    for (auto* list : {&group.subs, &group.irrelevant})
        for (auto& q : *list) q.answer = synth::kNone;
    group.reasoning.answer = synth::kNone;
    for (double& v : p.get("answer_weights").values) v = 0.0;
    double previous = INFINITY;
    for (double scale : {5.0, 10.0, 20.0, 40.0}) {
        auto& bias = p.get("answer_bias").values;
        for (std::size_t k = 0; k < bias.size(); ++k) bias[k] = k == synth::kNone ? scale : -scale;
        autograd::Graph g;
        const auto gl = sort_total_loss(model::bind(g, p, true), group, LossWeights{}, Variant::full);
        EXPECT_LT(gl.breakdown.total, previous);
        previous = gl.breakdown.total;
    }
    EXPECT_LT(previous, 1e-15);
}

TEST(TotalLoss, GroupWithoutSubsIsInputError) {
    const auto p = tiny_model(3);
    auto group = synth::generate_dataset(tiny_generator())[0];
    group.subs.clear();
    autograd::Graph g;
    try {
        sort_total_loss(model::bind(g, p, true), group, LossWeights{}, Variant::full);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::input);
    }
}

TEST(TotalLoss, GroupCgEqualsPairEnumeration) {
    const auto p = tiny_model(4);
    for (const auto& group : synth::generate_dataset(tiny_generator())) {
        // Independent route: one Grad-CAM vector per question, then explicit pairs.
        autograd::Graph g;
        const auto bound = model::bind(g, p, true);
        const auto scene = group.scene.encode();
        auto cam = [&](const synth::Question& q) {
            return gradcam::fusion_gradcam_vector(bound, scene, q.tokens, q.answer, false).values;
        };
        const auto r = cam(group.reasoning);
        double brute = 0;
        for (const auto& s : group.subs)
            for (const auto& i : group.irrelevant) brute += std::max(0.0, cos_of(r, cam(i)) - cos_of(r, cam(s)));
        brute /= static_cast<double>(group.subs.size() * group.irrelevant.size());
        EXPECT_NEAR(group_cg_loss(bound, group).value.item(), brute, 1e-12) << "group " << group.group_id;
    }
}

TEST(TotalLoss, ParameterGradientMatchesFiniteDifferences) {
    const auto base = tiny_model(5);
    const auto groups = synth::generate_dataset(tiny_generator());
    for (Variant v : {Variant::sq_only, Variant::full}) {
        for (std::size_t gi = 0; gi < 3; ++gi) {
            const auto& group = groups[gi];
            auto value = [&](const model::ModelParams& p) {
                autograd::Graph g;
                return sort_total_loss(model::bind(g, p, true), group, LossWeights{}, v).breakdown.total;
            };
            autograd::Graph g;
            const auto bound = model::bind(g, base, true);
            const auto gl = sort_total_loss(bound, group, LossWeights{}, v);
            const auto grads = g.gradient(gl.total, bound.leaves, false);
            auto p = base;
            const double h = 1e-5;
            for (std::size_t t = 0; t < p.tensors.size(); ++t) {
                for (std::size_t j = 0; j < p.tensors[t].values.size(); j += 5) {
                    const double saved = p.tensors[t].values[j];
                    p.tensors[t].values[j] = saved + h;
                    const double up = value(p);
                    p.tensors[t].values[j] = saved - h;
                    const double down = value(p);
                    p.tensors[t].values[j] = saved;
                    EXPECT_LT(rel_err(grads[t].at(j), (up - down) / (2 * h)), 1e-3)
                        << variant_name(v) << " group " << gi << " " << p.tensors[t].name << "[" << j << "]";
                }
            }
        }
    }
}
