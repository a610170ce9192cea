#include "sortlab/sortloss.hpp"

#include <cmath>

#include "sortlab/error.hpp"
#include "sortlab/gradcam.hpp"

namespace sortlab::loss {

using autograd::Graph;
using autograd::Tensor;

void LossWeights::validate() const {
    for (double l : {lambda1, lambda2, lambda3}) {
        if (!(l >= 0.0) || !std::isfinite(l)) {
            throw Error(ErrorKind::config, "loss weights must be finite and non-negative");
        }
    }
}

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::baseline: return "baseline";
        case Variant::sq_only: return "sq-only";
        case Variant::full: return "full";
    }
    return "?";
}

Variant variant_from_name(const std::string& name) {
    for (Variant v : {Variant::baseline, Variant::sq_only, Variant::full}) {
        if (name == variant_name(v)) return v;
    }
    throw Error(ErrorKind::config, "unknown variant '" + name + "' (baseline, sq-only, full)");
}

double combine(double cg, double bce_r, double bce_s, double bce_i, const LossWeights& w) {
    return cg + w.lambda1 * bce_r + w.lambda2 * bce_s + w.lambda3 * bce_i;
}

Term contrastive_gradient_loss(const Tensor& g_r, const Tensor& g_s, const Tensor& g_i) {
    const auto cs = autograd::cosine_similarity(g_r, g_s);
    const auto ci = autograd::cosine_similarity(g_r, g_i);
    if (cs.degenerate || ci.degenerate) return {g_r.graph().scalar(0.0), 1};
    return {autograd::hinge(autograd::sub(ci.value, cs.value)), 0};
}

Term sq_alignment_loss(const Tensor& g_r, std::span<const Tensor> g_s) {
    Term out;
    Tensor acc;
    std::size_t used = 0;
    for (const Tensor& s : g_s) {
        const auto c = autograd::cosine_similarity(g_r, s);
        if (c.degenerate) {
            ++out.skipped;
            continue;
        }
        Tensor term = autograd::affine(c.value, -1.0, 1.0);
        acc = acc.valid() ? autograd::add(acc, term) : term;
        ++used;
    }
    out.value = used == 0 ? g_r.graph().scalar(0.0) : autograd::scale(acc, 1.0 / static_cast<double>(used));
    return out;
}

namespace {

struct RowCosines {
    Tensor cos;                  // [N, 1], cosine of each row with the reasoning row
    std::vector<bool> usable;    // non-zero norm
    bool reasoning_ok = false;
};

RowCosines row_cosines(const Tensor& G, std::size_t r) {
    Graph& g = G.graph();
    const std::size_t n = G.shape()[0], k = G.shape()[1];
    RowCosines out;
    out.usable.assign(n, false);
    std::vector<double> safe(n, 0.0);
    const auto& v = G.values();
    for (std::size_t i = 0; i < n; ++i) {
        double ss = 0.0;
        for (std::size_t j = 0; j < k; ++j) ss += v[i * k + j] * v[i * k + j];
        out.usable[i] = ss != 0.0;
        // Zero rows get a unit norm so the expression stays finite; they are
        // excluded from every pair below.
        safe[i] = out.usable[i] ? 0.0 : 1.0;
    }
    out.reasoning_ok = out.usable[r];
    if (!out.reasoning_ok) return out;

    std::vector<double> pick(n, 0.0);
    pick[r] = 1.0;
    Tensor select_r = g.tensor({1, n}, std::move(pick));
    Tensor row_r = autograd::matmul(select_r, G);                                 // [1, K]
    Tensor dots = autograd::matmul(G, autograd::transpose(row_r));                // [N, 1]
    Tensor sq = autograd::matmul(autograd::mul(G, G), g.constant({k, 1}, 1.0));   // [N, 1]
    Tensor sq_r = autograd::matmul(select_r, sq);                                 // [1, 1]
    Tensor norms = autograd::mul(autograd::add(sq, g.tensor({n, 1}, std::move(safe))), sq_r);
    out.cos = autograd::mul(dots, autograd::power(norms, -0.5));
    return out;
}

}  // namespace

Term cg_from_gradcam(const Tensor& G, std::size_t reasoning_row, std::span<const std::size_t> sub_rows,
                     std::span<const std::size_t> irrelevant_rows, const LossOptions& options) {
    Graph& g = G.graph();
    const std::size_t total_pairs = sub_rows.size() * irrelevant_rows.size();
    const RowCosines rc = row_cosines(G, reasoning_row);
    if (!rc.reasoning_ok) return {g.scalar(0.0), total_pairs};

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t s : sub_rows)
        for (std::size_t i : irrelevant_rows)
            if (rc.usable[s] && rc.usable[i]) pairs.emplace_back(s, i);
    const std::size_t skipped = total_pairs - pairs.size();
    if (pairs.empty()) return {g.scalar(0.0), skipped};
    if (options.sample_one_pair) {
        if (!options.pair_rng) throw Error(ErrorKind::usage, "pair sampling needs a random source");
        pairs = {pairs[options.pair_rng->below(pairs.size())]};
    }

    const std::size_t n = G.shape()[0], p = pairs.size();
    std::vector<double> diff(p * n, 0.0);
    for (std::size_t q = 0; q < p; ++q) {
        diff[q * n + pairs[q].second] += 1.0;
        diff[q * n + pairs[q].first] -= 1.0;
    }
    Tensor margins = autograd::matmul(g.tensor({p, n}, std::move(diff)), rc.cos);
    return {autograd::mean(autograd::hinge(margins)), skipped};
}

Term sq_from_gradcam(const Tensor& G, std::size_t reasoning_row, std::span<const std::size_t> sub_rows) {
    Graph& g = G.graph();
    const RowCosines rc = row_cosines(G, reasoning_row);
    if (!rc.reasoning_ok) return {g.scalar(0.0), sub_rows.size()};
    std::vector<std::size_t> rows;
    for (std::size_t s : sub_rows)
        if (rc.usable[s]) rows.push_back(s);
    const std::size_t skipped = sub_rows.size() - rows.size();
    if (rows.empty()) return {g.scalar(0.0), skipped};
    const std::size_t n = G.shape()[0];
    std::vector<double> pick(rows.size() * n, 0.0);
    for (std::size_t q = 0; q < rows.size(); ++q) pick[q * n + rows[q]] = 1.0;
    Tensor cos_s = autograd::matmul(g.tensor({rows.size(), n}, std::move(pick)), rc.cos);
    return {autograd::mean(autograd::affine(cos_s, -1.0, 1.0)), skipped};
}

namespace {

struct Prepared {
    model::BatchForward forward;
    std::vector<int> classes;
    std::vector<std::size_t> sub_rows;
    std::vector<std::size_t> irrelevant_rows;
};

Prepared prepare(const model::BoundModel& model, const synth::QuestionGroup& group) {
    if (group.subs.empty()) {
        throw Error(ErrorKind::input, "group " + std::to_string(group.group_id) + " has no sub-question");
    }
    Prepared p;
    std::vector<std::vector<int>> tokens;
    for (const synth::Question* q : group.all_questions()) {
        tokens.push_back(q->tokens);
        p.classes.push_back(q->answer);
    }
    for (std::size_t i = 0; i < group.subs.size(); ++i) p.sub_rows.push_back(1 + i);
    for (std::size_t i = 0; i < group.irrelevant.size(); ++i) {
        p.irrelevant_rows.push_back(1 + group.subs.size() + i);
    }
    p.forward = model::forward_batch(model, group.scene.encode(), tokens);
    return p;
}

// Mean over the given rows of the per-question mean BCE across classes.
Tensor set_bce(const Tensor& bce, std::span<const std::size_t> rows) {
    Graph& g = bce.graph();
    if (rows.empty()) return g.scalar(0.0);
    const std::size_t n = bce.shape()[0], k = bce.shape()[1];
    std::vector<double> w(n * k, 0.0);
    const double share = 1.0 / static_cast<double>(rows.size() * k);
    for (std::size_t r : rows)
        for (std::size_t j = 0; j < k; ++j) w[r * k + j] = share;
    return autograd::sum(autograd::mul(bce, g.tensor({n, k}, std::move(w))));
}

}  // namespace

Term group_cg_loss(const model::BoundModel& model, const synth::QuestionGroup& group,
                   const LossOptions& options) {
    const Prepared p = prepare(model, group);
    const Tensor G = gradcam::fusion_gradcam_matrix(p.forward, p.classes, true);
    return cg_from_gradcam(G, 0, p.sub_rows, p.irrelevant_rows, options);
}

GroupLoss sort_total_loss(const model::BoundModel& model, const synth::QuestionGroup& group,
                          const LossWeights& weights, Variant variant, const LossOptions& options) {
    weights.validate();
    const Prepared p = prepare(model, group);
    Graph& g = p.forward.logits.graph();
    const std::size_t n = p.classes.size(), k = p.forward.logits.shape()[1];

    std::vector<double> onehot(n * k, 0.0);
    for (std::size_t i = 0; i < n; ++i) onehot[i * k + static_cast<std::size_t>(p.classes[i])] = 1.0;
    const Tensor bce = autograd::bce_with_logits(p.forward.logits, g.tensor({n, k}, std::move(onehot)));
    const std::size_t reasoning_row[] = {0};
    const Tensor bce_r = set_bce(bce, reasoning_row);
    const Tensor bce_s = set_bce(bce, p.sub_rows);
    const Tensor bce_i = set_bce(bce, p.irrelevant_rows);

    Term cg{g.scalar(0.0), 0};
    if (variant != Variant::baseline) {
        const Tensor G = gradcam::fusion_gradcam_matrix(p.forward, p.classes, true);
        cg = variant == Variant::full ? cg_from_gradcam(G, 0, p.sub_rows, p.irrelevant_rows, options)
                                      : sq_from_gradcam(G, 0, p.sub_rows);
    }

    Tensor total = autograd::add(
        cg.value, autograd::add(autograd::add(autograd::scale(bce_r, weights.lambda1),
                                              autograd::scale(bce_s, weights.lambda2)),
                                autograd::scale(bce_i, weights.lambda3)));
    GroupLoss out;
    out.total = total;
    out.breakdown = {cg.value.item(), bce_r.item(), bce_s.item(), bce_i.item(), total.item(), cg.skipped};
    return out;
}

}  // namespace sortlab::loss
