#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "sortlab/autograd.hpp"
#include "sortlab/model.hpp"
#include "sortlab/rng.hpp"
#include "sortlab/synthdata.hpp"

namespace sortlab::loss {

struct LossWeights {
    double lambda1 = 2.27;
    double lambda2 = 2.27;
    double lambda3 = 0.0003;

    void validate() const;
    bool operator==(const LossWeights&) const = default;
};

enum class Variant { baseline, sq_only, full };
const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct LossBreakdown {
    double cg_loss = 0.0;
    double bce_reasoning = 0.0;
    double bce_sub = 0.0;
    double bce_irrelevant = 0.0;
    double total = 0.0;
    std::size_t skipped_degenerate_pairs = 0;
};

// cg + l1 * bce_r + l2 * bce_s + l3 * bce_i
double combine(double cg, double bce_r, double bce_s, double bce_i, const LossWeights& w);

struct Term {
    autograd::Tensor value;  // scalar
    std::size_t skipped = 0;
};

// max(0, cos(G_R, G_I) - cos(G_R, G_S)) on rank-1 vectors. A zero-norm vector
// gives a constant 0 with skipped = 1.
Term contrastive_gradient_loss(const autograd::Tensor& g_r, const autograd::Tensor& g_s,
                               const autograd::Tensor& g_i);

// Mean of 1 - cos(G_R, G_S) over the sub-question vectors, skipping zero norms.
Term sq_alignment_loss(const autograd::Tensor& g_r, std::span<const autograd::Tensor> g_s);

struct LossOptions {
    // Use one uniformly drawn (sub, irrelevant) pair per group instead of all pairs.
    bool sample_one_pair = false;
    Rng* pair_rng = nullptr;
};

// Contrastive term over the rows of a Grad-CAM matrix [questions, fusion_dim].
// Mean over every non-degenerate (sub, irrelevant) pair; 0 if there are none.
Term cg_from_gradcam(const autograd::Tensor& gradcam, std::size_t reasoning_row,
                     std::span<const std::size_t> sub_rows, std::span<const std::size_t> irrelevant_rows,
                     const LossOptions& options = {});

// Alignment term over the rows of a Grad-CAM matrix.
Term sq_from_gradcam(const autograd::Tensor& gradcam, std::size_t reasoning_row,
                     std::span<const std::size_t> sub_rows);

// Builds the group's Grad-CAM vectors at ground-truth classes, then the contrastive term.
Term group_cg_loss(const model::BoundModel& model, const synth::QuestionGroup& group,
                   const LossOptions& options = {});

struct GroupLoss {
    autograd::Tensor total;
    LossBreakdown breakdown;
};

GroupLoss sort_total_loss(const model::BoundModel& model, const synth::QuestionGroup& group,
                          const LossWeights& weights, Variant variant, const LossOptions& options = {});

}  // namespace sortlab::loss
