#include "sortlab/gradcam.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "sortlab/error.hpp"

namespace sortlab::gradcam {

using autograd::Tensor;

namespace {

std::atomic<std::uint64_t> g_constructions{0};

void check_class(int class_index, std::size_t classes) {
    if (class_index < 0 || static_cast<std::size_t>(class_index) >= classes) {
        throw Error(ErrorKind::input, "class index " + std::to_string(class_index) +
                                          " outside " + std::to_string(classes) + " answer classes");
    }
}

// Sum of the selected logit in each row; its gradient with respect to a row of
// any per-question tensor is the gradient of that question's own logit.
Tensor selected_logits(const Tensor& logits, std::span<const int> classes) {
    const std::size_t n = logits.shape()[0], k = logits.shape()[1];
    if (classes.size() != n) throw Error(ErrorKind::input, "one class index per question is required");
    std::vector<double> select(n * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        check_class(classes[i], k);
        select[i * k + static_cast<std::size_t>(classes[i])] = 1.0;
    }
    return autograd::sum(autograd::mul(logits, logits.graph().tensor({n, k}, std::move(select))));
}

void require_attached(const model::BatchForward& forward) {
    if (!forward.fusion.requires_grad()) {
        throw Error(ErrorKind::usage, "Grad-CAM needs a model bound with requires_grad");
    }
}

}  // namespace

std::uint64_t construction_count() { return g_constructions.load(); }

Tensor fusion_gradcam_matrix(const model::BatchForward& forward, std::span<const int> classes,
                             bool keep_differentiable) {
    require_attached(forward);
    ++g_constructions;
    Tensor y = selected_logits(forward.logits, classes);
    const Tensor wrt[] = {forward.fusion};
    Tensor grad = y.graph().gradient(y, wrt, keep_differentiable)[0];
    if (keep_differentiable) return autograd::mul(grad, forward.fusion);
    std::vector<double> values(grad.numel());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = grad.at(i) * forward.fusion.at(i);
    return y.graph().tensor(forward.fusion.shape(), std::move(values));
}

GradCamVector fusion_gradcam_vector(const model::BoundModel& model, const model::SceneTensor& scene,
                                    const std::vector<int>& question, int class_index,
                                    bool keep_differentiable, int question_id) {
    check_class(class_index, model.config->answer_classes);
    const auto fwd = model::forward_batch(model, scene, {question});
    const int classes[] = {class_index};
    Tensor g = fusion_gradcam_matrix(fwd, classes, keep_differentiable);
    GradCamVector out;
    out.values = g.values();
    out.question_id = question_id;
    out.class_index = class_index;
    out.differentiable = keep_differentiable;
    if (keep_differentiable) out.tensor = autograd::reshape(g, {g.numel()});
    return out;
}

SpatialHeatmap heatmap_from_forward(const model::BatchForward& forward, std::size_t row,
                                    int class_index, std::uint32_t width, std::uint32_t height) {
    require_attached(forward);
    ++g_constructions;
    const std::size_t n = forward.logits.shape()[0];
    if (row >= n) throw Error(ErrorKind::input, "heatmap row outside the batch");
    check_class(class_index, forward.logits.shape()[1]);
    // Only the chosen row's logit is selected.
    const std::size_t k = forward.logits.shape()[1];
    std::vector<double> select(n * k, 0.0);
    select[row * k + static_cast<std::size_t>(class_index)] = 1.0;
    autograd::Graph& g = forward.logits.graph();
    Tensor y = autograd::sum(autograd::mul(forward.logits, g.tensor({n, k}, std::move(select))));
    const Tensor wrt[] = {forward.spatial};
    Tensor grad = g.gradient(y, wrt, false)[0];

    const std::size_t cells = forward.spatial.shape()[0], features = forward.spatial.shape()[1];
    if (cells != static_cast<std::size_t>(width) * height) {
        throw Error(ErrorKind::shape, "spatial map does not match the grid");
    }
    SpatialHeatmap map{width, height, std::vector<double>(cells, 0.0), 0};
    const auto& f = forward.spatial.values();
    const auto& d = grad.values();
    for (std::size_t c = 0; c < cells; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < features; ++j) acc += d[c * features + j] * f[c * features + j];
        map.values[c] = acc > 0.0 ? acc : 0.0;
    }
    return map;
}

SpatialHeatmap spatial_gradcam_heatmap(const model::BoundModel& model, const model::SceneTensor& scene,
                                       const std::vector<int>& question, int class_index,
                                       int question_id) {
    check_class(class_index, model.config->answer_classes);
    const auto fwd = model::forward_batch(model, scene, {question});
    SpatialHeatmap map = heatmap_from_forward(fwd, 0, class_index, model.config->grid_width,
                                              model.config->grid_height);
    map.question_id = question_id;
    return map;
}

double cosine(std::span<const double> a, std::span<const double> b, bool* ok) {
    if (a.size() != b.size()) throw Error(ErrorKind::input, "Grad-CAM vectors differ in length");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) {
        if (ok) *ok = false;
        return 0.0;
    }
    if (ok) *ok = true;
    return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

std::vector<metrics::RankedCandidate> rank_candidates(std::span<const double> reasoning,
                                                      std::span<const Candidate> candidates) {
    struct Entry {
        metrics::RankedCandidate c;
        bool valid;
    };
    std::vector<Entry> entries;
    entries.reserve(candidates.size());
    for (const auto& cand : candidates) {
        bool ok = false;
        const double score = cosine(reasoning, cand.values, &ok);
        entries.push_back({{cand.question_id, score, cand.is_sub}, ok});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.valid != b.valid) return a.valid;
        if (a.valid && a.c.score != b.c.score) return a.c.score > b.c.score;
        return a.c.question_id < b.c.question_id;
    });
    std::vector<metrics::RankedCandidate> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.c);
    return out;
}

std::vector<metrics::RankedCandidate> rank_candidates(const GradCamVector& reasoning,
                                                      std::span<const Candidate> candidates) {
    return rank_candidates(std::span<const double>(reasoning.values), candidates);
}

}  // namespace sortlab::gradcam
