#include <cmath>

#include "sortlab/error.hpp"
#include "sortlab/model.hpp"
#include "sortlab/rng.hpp"

namespace sortlab::model {

using autograd::Graph;
using autograd::Shape;
using autograd::Tensor;

namespace {

enum Slot : std::size_t {
    kCellWeights,
    kTokenEmbedding,
    kQuestionWeights,
    kQuestionBias,
    kImageProjection,
    kQuestionProjection,
    kFusionWeights,
    kFusionBias,
    kHeadWeights,
    kHeadBias,
    kAnswerWeights,
    kAnswerBias,
};

struct LayoutEntry {
    std::string name;
    Shape shape;
    std::size_t fan_in;
};

std::vector<LayoutEntry> layout(const ModelConfig& c) {
    const std::size_t in = c.channels + 1;
    const std::size_t flat = static_cast<std::size_t>(c.cells()) * c.cell_features;
    return {
        {"cell_weights", {in, c.cell_features}, in},
        {"token_embedding", {c.vocab_size, c.embed_dim}, c.embed_dim},
        {"question_weights", {c.embed_dim, c.question_dim}, c.embed_dim},
        {"question_bias", {1, c.question_dim}, c.embed_dim},
        {"image_projection", {flat, c.joint_dim}, flat},
        {"question_projection", {c.question_dim, c.joint_dim}, c.question_dim},
        {"fusion_weights", {c.joint_dim, c.fusion_dim}, c.joint_dim},
        {"fusion_bias", {1, c.fusion_dim}, c.joint_dim},
        {"head_weights", {c.fusion_dim, c.head_dim}, c.fusion_dim},
        {"head_bias", {1, c.head_dim}, c.fusion_dim},
        {"answer_weights", {c.head_dim, c.answer_classes}, c.head_dim},
        {"answer_bias", {1, c.answer_classes}, c.head_dim},
    };
}

}  // namespace

void ModelConfig::validate() const {
    const std::pair<const char*, std::uint32_t> dims[] = {
        {"grid_width", grid_width},       {"grid_height", grid_height},
        {"channels", channels},           {"vocab_size", vocab_size},
        {"embed_dim", embed_dim},         {"question_dim", question_dim},
        {"cell_features", cell_features}, {"joint_dim", joint_dim},
        {"fusion_dim", fusion_dim},       {"head_dim", head_dim},
        {"answer_classes", answer_classes},
    };
    for (const auto& [name, value] : dims) {
        if (value == 0) throw Error(ErrorKind::config, std::string(name) + " must be positive");
    }
    if (answer_classes < 2) throw Error(ErrorKind::config, "answer_classes must be at least 2");
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.values.size();
    return n;
}

const Parameter& ModelParams::get(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return t;
    }
    throw Error(ErrorKind::lookup, "no parameter named '" + name + "'");
}

Parameter& ModelParams::get(const std::string& name) {
    return const_cast<Parameter&>(static_cast<const ModelParams&>(*this).get(name));
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const ModelConfig& config) {
    std::vector<std::pair<std::string, Shape>> out;
    for (auto& e : layout(config)) out.emplace_back(e.name, e.shape);
    return out;
}

ModelParams init_model(const ModelConfig& config) {
    config.validate();
    ModelParams params;
    params.config = config;
    const auto entries = layout(config);
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        // Uniform on +-sqrt(3 / fan_in): unit variance after the 1/sqrt(fan_in) scaling.
        const double bound = std::sqrt(3.0 / static_cast<double>(e.fan_in));
        Rng rng(derive_seed(config.seed, i));
        std::vector<double> values(autograd::numel(e.shape));
        for (double& v : values) v = rng.uniform(-bound, bound);
        params.tensors.push_back({e.name, e.shape, std::move(values)});
    }
    return params;
}

BoundModel bind(Graph& graph, const ModelParams& params, bool requires_grad) {
    BoundModel bound;
    bound.config = &params.config;
    for (const auto& t : params.tensors) {
        bound.leaves.push_back(graph.tensor(t.shape, t.values, requires_grad));
    }
    return bound;
}

BatchForward forward_batch(const BoundModel& m, const SceneTensor& scene,
                           const std::vector<std::vector<int>>& questions) {
    const ModelConfig& c = *m.config;
    if (scene.width != c.grid_width || scene.height != c.grid_height ||
        scene.channels != c.channels ||
        scene.values.size() != static_cast<std::size_t>(c.cells()) * c.channels) {
        throw Error(ErrorKind::input, "scene shape does not match the model grid");
    }
    if (questions.empty()) throw Error(ErrorKind::input, "no questions to answer");

    Graph& g = m[kCellWeights].graph();
    const std::size_t cells = c.cells();
    const std::size_t n = questions.size();

    std::vector<double> x(cells * (c.channels + 1), 1.0);
    for (std::size_t cell = 0; cell < cells; ++cell) {
        for (std::size_t ch = 0; ch < c.channels; ++ch) {
            x[cell * (c.channels + 1) + ch] = scene.values[cell * c.channels + ch];
        }
    }
    std::vector<double> bag(n * c.vocab_size, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& q = questions[i];
        if (q.empty()) throw Error(ErrorKind::input, "question has no tokens");
        for (int tok : q) {
            if (tok < 0 || static_cast<std::uint32_t>(tok) >= c.vocab_size) {
                throw Error(ErrorKind::input, "token id " + std::to_string(tok) +
                                                  " outside vocabulary of " +
                                                  std::to_string(c.vocab_size));
            }
            bag[i * c.vocab_size + static_cast<std::size_t>(tok)] += 1.0 / static_cast<double>(q.size());
        }
    }

    Tensor ones = g.constant({n, 1}, 1.0);
    Tensor spatial = autograd::tanh(autograd::matmul(g.tensor({cells, c.channels + 1}, std::move(x)),
                                                     m[kCellWeights]));
    Tensor image = autograd::matmul(autograd::reshape(spatial, {1, cells * c.cell_features}),
                                    m[kImageProjection]);

    Tensor embedded = autograd::matmul(g.tensor({n, c.vocab_size}, std::move(bag)), m[kTokenEmbedding]);
    Tensor question = autograd::tanh(autograd::add(autograd::matmul(embedded, m[kQuestionWeights]),
                                                   autograd::matmul(ones, m[kQuestionBias])));

    Tensor joint = autograd::mul(autograd::matmul(ones, image),
                                 autograd::matmul(question, m[kQuestionProjection]));
    Tensor fusion = autograd::tanh(autograd::add(autograd::matmul(joint, m[kFusionWeights]),
                                                 autograd::matmul(ones, m[kFusionBias])));
    Tensor hidden = autograd::tanh(autograd::add(autograd::matmul(fusion, m[kHeadWeights]),
                                                 autograd::matmul(ones, m[kHeadBias])));
    Tensor logits = autograd::add(autograd::matmul(hidden, m[kAnswerWeights]),
                                  autograd::matmul(ones, m[kAnswerBias]));
    return {logits, fusion, spatial};
}

ForwardResult forward(const BoundModel& model, const SceneTensor& scene,
                      const std::vector<int>& question) {
    BatchForward b = forward_batch(model, scene, {question});
    return {autograd::reshape(b.logits, {model.config->answer_classes}), b.fusion, b.spatial};
}

}  // namespace sortlab::model
