#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <filesystem>
#include <fstream>

#include "sortlab/error.hpp"
#include "sortlab/model.hpp"
#include "sortlab/rng.hpp"

using namespace sortlab;
using namespace sortlab::model;

namespace {

ModelConfig tiny_config() {
    ModelConfig c;
    c.grid_width = 3;
    c.grid_height = 2;
    c.channels = 4;
    c.vocab_size = 11;
    c.embed_dim = 5;
    c.question_dim = 6;
    c.cell_features = 2;
    c.joint_dim = 7;
    c.fusion_dim = 8;
    c.head_dim = 5;
    c.answer_classes = 4;
    c.seed = 17;
    return c;
}

SceneTensor random_scene(const ModelConfig& c, Rng& rng) {
    SceneTensor s{c.grid_width, c.grid_height, c.channels, {}};
    for (std::size_t i = 0; i < c.cells() * c.channels; ++i) s.values.push_back(rng.bernoulli(0.4) ? 1.0 : 0.0);
    return s;
}

std::filesystem::path temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "sortlab_model_test";
    std::filesystem::create_directories(dir);
    return dir / name;
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

double bce_loss(const ModelParams& params, const SceneTensor& scene, const std::vector<int>& q, int target) {
    autograd::Graph g;
    auto bound = bind(g, params, false);
    auto out = forward(bound, scene, q);
    std::vector<double> onehot(params.config.answer_classes, 0.0);
    onehot[static_cast<std::size_t>(target)] = 1.0;
    return autograd::sum(autograd::bce_with_logits(out.logits, g.tensor({onehot.size()}, onehot))).item();
}

}  // namespace

TEST(ModelInit, SameSeedGivesIdenticalParameters) {
    const auto a = init_model(tiny_config());
    const auto b = init_model(tiny_config());
    ASSERT_EQ(a.tensors.size(), b.tensors.size());
    for (std::size_t i = 0; i < a.tensors.size(); ++i) {
        EXPECT_EQ(a.tensors[i].name, b.tensors[i].name);
        EXPECT_EQ(a.tensors[i].values, b.tensors[i].values);
    }
}

TEST(ModelInit, DifferentSeedsDiffer) {
    auto c = tiny_config();
    const auto a = init_model(c);
    c.seed = 18;
    const auto b = init_model(c);
    EXPECT_NE(a.tensors[0].values, b.tensors[0].values);
}

TEST(ModelInit, EmbeddingTableSize) {
    ModelConfig c;
    c.embed_dim = 8;
    c.vocab_size = 20;
    const auto p = init_model(c);
    EXPECT_EQ(p.get("token_embedding").values.size(), 160u);
}

TEST(ModelInit, SingleAnswerClassRejected) {
    ModelConfig c;
    c.answer_classes = 1;
    EXPECT_EQ(kind_of([&] { init_model(c); }), ErrorKind::config);
}

TEST(ModelInit, ParameterCountMatchesLayout) {
    const auto c = tiny_config();
    const auto p = init_model(c);
    std::size_t expected = 0;
    for (const auto& [name, shape] : parameter_layout(c)) expected += autograd::numel(shape);
    EXPECT_EQ(p.parameter_count(), expected);
    EXPECT_EQ(kind_of([&] { (void)p.get("no_such_parameter"); }), ErrorKind::lookup);
}

TEST(ModelForward, ShapesAndFiniteness) {
    const auto c = tiny_config();
    const auto p = init_model(c);
    Rng rng(3);
    autograd::Graph g;
    auto bound = bind(g, p, false);
    auto out = forward(bound, random_scene(c, rng), {1, 4, 7});
    EXPECT_EQ(out.logits.numel(), c.answer_classes);
    EXPECT_EQ(out.fusion.numel(), c.fusion_dim);
    EXPECT_EQ(out.spatial.shape(), (autograd::Shape{c.cells(), c.cell_features}));
    for (double v : out.logits.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(ModelForward, Deterministic) {
    const auto c = tiny_config();
    const auto p = init_model(c);
    Rng rng(4);
    const auto scene = random_scene(c, rng);
    autograd::Graph g1, g2;
    auto o1 = forward(bind(g1, p, false), scene, {2, 3});
    auto o2 = forward(bind(g2, p, false), scene, {2, 3});
    EXPECT_EQ(o1.logits.values(), o2.logits.values());
}

TEST(ModelForward, TokenOrderDoesNotMatter) {
    const auto c = tiny_config();
    const auto p = init_model(c);
    Rng rng(5);
    const auto scene = random_scene(c, rng);
    autograd::Graph g1, g2;
    auto o1 = forward(bind(g1, p, false), scene, {1, 5, 9, 2});
    auto o2 = forward(bind(g2, p, false), scene, {9, 2, 1, 5});
    for (std::size_t i = 0; i < o1.logits.numel(); ++i) EXPECT_NEAR(o1.logits.at(i), o2.logits.at(i), 1e-12);
}

TEST(ModelForward, BatchRowsMatchSingleQuestions) {
    const auto c = tiny_config();
    const auto p = init_model(c);
    Rng rng(6);
    const auto scene = random_scene(c, rng);
    const std::vector<std::vector<int>> qs = {{1, 2}, {3}, {4, 5, 6}};
    autograd::Graph g;
    auto bound = bind(g, p, false);
    auto batch = forward_batch(bound, scene, qs);
    for (std::size_t r = 0; r < qs.size(); ++r) {
        auto single = forward(bound, scene, qs[r]);
        for (std::size_t k = 0; k < c.answer_classes; ++k) {
            EXPECT_NEAR(batch.logits.at(r * c.answer_classes + k), single.logits.at(k), 1e-12);
        }
    }
}

TEST(ModelForward, InvalidInputs) {
    const auto c = tiny_config();
    const auto p = init_model(c);
    Rng rng(7);
    autograd::Graph g;
    auto bound = bind(g, p, false);
    const auto scene = random_scene(c, rng);
    EXPECT_EQ(kind_of([&] { forward(bound, scene, {}); }), ErrorKind::input);
    EXPECT_EQ(kind_of([&] { forward(bound, scene, {11}); }), ErrorKind::input);
    SceneTensor wrong = scene;
    wrong.width = 4;
    EXPECT_EQ(kind_of([&] { forward(bound, wrong, {1}); }), ErrorKind::input);
}

TEST(ModelGradient, BceMatchesFiniteDifferences) {
    const auto c = tiny_config();
    auto p = init_model(c);
    Rng rng(8);
    const auto scene = random_scene(c, rng);
    const std::vector<int> q = {2, 6, 6};
    const int target = 3;

    autograd::Graph g;
    auto bound = bind(g, p, true);
    auto out = forward(bound, scene, q);
    std::vector<double> onehot(c.answer_classes, 0.0);
    onehot[target] = 1.0;
    auto loss = autograd::sum(autograd::bce_with_logits(out.logits, g.tensor({onehot.size()}, onehot)));
    const auto grads = g.gradient(loss, bound.leaves, false);

    const double h = 1e-5;
    for (std::size_t t = 0; t < p.tensors.size(); ++t) {
        for (std::size_t j = 0; j < p.tensors[t].values.size(); j += 3) {
            const double saved = p.tensors[t].values[j];
            p.tensors[t].values[j] = saved + h;
            const double up = bce_loss(p, scene, q, target);
            p.tensors[t].values[j] = saved - h;
            const double down = bce_loss(p, scene, q, target);
            p.tensors[t].values[j] = saved;
            const double numeric = (up - down) / (2 * h);
            const double analytic = grads[t].at(j);
            const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
            EXPECT_LT(std::abs(numeric - analytic) / denom, 1e-4)
                << p.tensors[t].name << "[" << j << "] analytic " << analytic << " numeric " << numeric;
        }
    }
}

TEST(Checkpoint, RoundTripIsBitwise) {
    const auto p = init_model(tiny_config());
    const auto path = temp_path("round.ckpt");
    save_checkpoint(p, path.string());
    const auto q = load_checkpoint(path.string());
    EXPECT_EQ(q.config, p.config);
    ASSERT_EQ(q.tensors.size(), p.tensors.size());
    for (std::size_t i = 0; i < p.tensors.size(); ++i) {
        EXPECT_EQ(q.tensors[i].name, p.tensors[i].name);
        EXPECT_EQ(q.tensors[i].shape, p.tensors[i].shape);
        EXPECT_EQ(0, std::memcmp(q.tensors[i].values.data(), p.tensors[i].values.data(),
                                 p.tensors[i].values.size() * sizeof(double)));
    }
}

TEST(Checkpoint, WrongVersionRejected) {
    const auto p = init_model(tiny_config());
    const auto path = temp_path("version.ckpt");
    save_checkpoint(p, path.string());
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(8);
        const unsigned char v[4] = {99, 0, 0, 0};
        f.write(reinterpret_cast<const char*>(v), 4);
    }
    EXPECT_EQ(kind_of([&] { load_checkpoint(path.string()); }), ErrorKind::version);
}

TEST(Checkpoint, TruncatedFileIsCorrupt) {
    const auto p = init_model(tiny_config());
    const auto path = temp_path("truncated.ckpt");
    save_checkpoint(p, path.string());
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 13);
    EXPECT_EQ(kind_of([&] { load_checkpoint(path.string()); }), ErrorKind::corruption);
}

TEST(Checkpoint, BadMagicAndMissingFile) {
    const auto path = temp_path("garbage.ckpt");
    {
        std::ofstream f(path, std::ios::binary);
        f << "NOTACHECKPOINT";
    }
    EXPECT_EQ(kind_of([&] { load_checkpoint(path.string()); }), ErrorKind::corruption);
    EXPECT_EQ(kind_of([&] { load_checkpoint(temp_path("absent.ckpt").string()); }), ErrorKind::io);
}
