#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sortlab/autograd.hpp"

namespace sortlab::model {

struct ModelConfig {
    std::uint32_t grid_width = 4;
    std::uint32_t grid_height = 4;
    std::uint32_t channels = 7;
    std::uint32_t vocab_size = 43;
    std::uint32_t embed_dim = 16;
    std::uint32_t question_dim = 128;
    std::uint32_t cell_features = 2;
    std::uint32_t joint_dim = 64;
    std::uint32_t fusion_dim = 64;
    std::uint32_t head_dim = 32;
    std::uint32_t answer_classes = 9;
    std::uint64_t seed = 1;

    std::uint32_t cells() const { return grid_width * grid_height; }
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

struct Parameter {
    std::string name;
    autograd::Shape shape;
    std::vector<double> values;
};

struct ModelParams {
    ModelConfig config;
    std::vector<Parameter> tensors;

    std::size_t parameter_count() const;
    const Parameter& get(const std::string& name) const;
    Parameter& get(const std::string& name);
};

// Names and shapes of every parameter, in storage order.
std::vector<std::pair<std::string, autograd::Shape>> parameter_layout(const ModelConfig& config);

ModelParams init_model(const ModelConfig& config);

// Scene encoding, cell-major: values[((y * width) + x) * channels + c].
struct SceneTensor {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t channels = 0;
    std::vector<double> values;
};

// Parameters registered as leaves of one graph.
struct BoundModel {
    const ModelConfig* config = nullptr;
    std::vector<autograd::Tensor> leaves;

    const autograd::Tensor& operator[](std::size_t i) const { return leaves[i]; }
};

BoundModel bind(autograd::Graph& graph, const ModelParams& params, bool requires_grad);

// Several questions about one scene. Rows of logits and fusion follow the
// question order; spatial is the per-cell feature map [cells, cell_features].
struct BatchForward {
    autograd::Tensor logits;
    autograd::Tensor fusion;
    autograd::Tensor spatial;
};

BatchForward forward_batch(const BoundModel& model, const SceneTensor& scene,
                           const std::vector<std::vector<int>>& questions);

struct ForwardResult {
    autograd::Tensor logits;   // [answer_classes]
    autograd::Tensor fusion;   // [1, fusion_dim]; the layer Grad-CAM vectors are taken at
    autograd::Tensor spatial;  // [cells, cell_features]
};

ForwardResult forward(const BoundModel& model, const SceneTensor& scene,
                      const std::vector<int>& question);

void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace sortlab::model
