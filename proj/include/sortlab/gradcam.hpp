#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sortlab/autograd.hpp"
#include "sortlab/metrics.hpp"
#include "sortlab/model.hpp"

namespace sortlab::gradcam {

struct GradCamVector {
    std::vector<double> values;
    int question_id = 0;
    int class_index = 0;
    bool differentiable = false;
    autograd::Tensor tensor;  // [fusion_dim]; valid when differentiable
};

struct SpatialHeatmap {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<double> values;  // y * width + x, non-negative
    int question_id = 0;
};

// (dy_c / dA) * A at the fusion layer for one question, y_c being the class logit.
GradCamVector fusion_gradcam_vector(const model::BoundModel& model, const model::SceneTensor& scene,
                                    const std::vector<int>& question, int class_index,
                                    bool keep_differentiable, int question_id = 0);

// Grad-CAM rows for every question of a batch forward, each taken at its own
// class. Returns [questions, fusion_dim].
autograd::Tensor fusion_gradcam_matrix(const model::BatchForward& forward,
                                       std::span<const int> classes, bool keep_differentiable);

// relu(sum over feature channels of dy_c/dF * F) on the per-cell feature map.
SpatialHeatmap spatial_gradcam_heatmap(const model::BoundModel& model, const model::SceneTensor& scene,
                                       const std::vector<int>& question, int class_index,
                                       int question_id = 0);

// Heatmap for row `row` of an existing batch forward.
SpatialHeatmap heatmap_from_forward(const model::BatchForward& forward, std::size_t row,
                                    int class_index, std::uint32_t width, std::uint32_t height);

struct Candidate {
    int question_id = 0;
    std::span<const double> values;
    bool is_sub = false;
};

// Plain cosine similarity of two value vectors, clamped to [-1, 1]. Returns
// false in `ok` (score 0) if either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b, bool* ok = nullptr);

// Descending cosine to the reasoning vector, ties by ascending question id,
// zero-norm candidates last with score 0.
std::vector<metrics::RankedCandidate> rank_candidates(std::span<const double> reasoning,
                                                      std::span<const Candidate> candidates);
std::vector<metrics::RankedCandidate> rank_candidates(const GradCamVector& reasoning,
                                                      std::span<const Candidate> candidates);

// Number of Grad-CAM graph constructions since process start.
std::uint64_t construction_count();

}  // namespace sortlab::gradcam
