#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sortlab/error.hpp"
#include "sortlab/harness.hpp"

namespace sortlab::harness {

using nlohmann::json;

namespace {

int argmax_row(const std::vector<double>& v, std::size_t row, std::size_t k) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
        if (v[row * k + j] > v[row * k + best]) best = j;
    return static_cast<int>(best);
}

}  // namespace

GroupEvaluation evaluate_group(const model::ModelParams& params, const synth::QuestionGroup& group,
                               GradCamClass gradcam_class) {
    autograd::Graph graph;
    const auto bound = model::bind(graph, params, true);
    const auto questions = group.all_questions();
    std::vector<std::vector<int>> tokens;
    GroupEvaluation out;
    out.group_id = group.group_id;
    for (const synth::Question* q : questions) {
        tokens.push_back(q->tokens);
        out.truths.push_back(q->answer);
    }
    const auto fwd = model::forward_batch(bound, group.scene.encode(), tokens);
    const std::size_t n = questions.size(), k = fwd.logits.shape()[1];
    for (std::size_t i = 0; i < n; ++i) out.predictions.push_back(argmax_row(fwd.logits.values(), i, k));

    const std::vector<int>& classes = gradcam_class == GradCamClass::predicted ? out.predictions : out.truths;
    const auto cams = gradcam::fusion_gradcam_matrix(fwd, classes, false);
    const auto& cv = cams.values();
    const std::size_t dim = cams.shape()[1];
    std::vector<gradcam::Candidate> candidates;
    for (std::size_t i = 1; i < n; ++i) {
        candidates.push_back({questions[i]->question_id, std::span<const double>(cv.data() + i * dim, dim),
                              questions[i]->role == synth::Role::sub});
    }
    out.ranking = gradcam::rank_candidates(std::span<const double>(cv.data(), dim), candidates);

    const auto heat = gradcam::heatmap_from_forward(fwd, 0, classes[0], group.scene.width, group.scene.height);
    std::vector<double> mask(group.mask.begin(), group.mask.end());
    const auto sp = metrics::spearman_correlation(heat.values, mask);
    out.grounding = sp.value;
    out.grounding_degenerate = sp.degenerate;
    return out;
}

metrics::MetricsReport summarize(const std::vector<synth::QuestionGroup>& groups,
                                 const std::vector<GroupEvaluation>& evaluations) {
    if (groups.size() != evaluations.size()) throw Error(ErrorKind::input, "one evaluation per group is required");
    if (groups.empty()) throw Error(ErrorKind::evaluation, "evaluation over zero groups");
    std::vector<metrics::PairRecord> pairs;
    std::vector<int> all_pred, all_truth, r_pred, r_truth;
    std::vector<metrics::RankedList> rankings;
    std::vector<double> grounding;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& e = evaluations[g];
        const bool r_ok = e.predictions[0] == e.truths[0];
        for (std::size_t s = 0; s < groups[g].subs.size(); ++s) {
            pairs.push_back({r_ok, e.predictions[1 + s] == e.truths[1 + s]});
        }
        all_pred.insert(all_pred.end(), e.predictions.begin(), e.predictions.end());
        all_truth.insert(all_truth.end(), e.truths.begin(), e.truths.end());
        r_pred.push_back(e.predictions[0]);
        r_truth.push_back(e.truths[0]);
        rankings.push_back(e.ranking);
        grounding.push_back(e.grounding);
    }
    const auto cons = metrics::consistency_report(pairs);
    const double total = static_cast<double>(cons.counts.total());
    metrics::MetricsReport r;
    r.quadrant_percentages = {100.0 * static_cast<double>(cons.counts.rs_both_correct) / total,
                              100.0 * static_cast<double>(cons.counts.r_correct_s_wrong) / total,
                              100.0 * static_cast<double>(cons.counts.r_wrong_s_correct) / total,
                              100.0 * static_cast<double>(cons.counts.both_wrong) / total};
    r.consistency = cons.consistency;
    r.reasoning_accuracy = 100.0 * metrics::accuracy(r_pred, r_truth);
    r.overall_accuracy = 100.0 * metrics::accuracy(all_pred, all_truth);
    r.mp_at_1 = metrics::mean_precision_at_1(rankings);
    r.ranking_accuracy = metrics::ranking_accuracy(rankings);
    r.mrr = metrics::mean_reciprocal_rank(rankings);
    r.wpr = metrics::wpr_loss(rankings);
    r.grounding_spearman = metrics::mean_with_error(grounding);
    return r;
}

metrics::MetricsReport evaluate_groups(const model::ModelParams& params,
                                       const std::vector<synth::QuestionGroup>& groups,
                                       const EvalOptions& options, std::vector<GroupEvaluation>* details) {
    std::vector<GroupEvaluation> results(groups.size());
    unsigned workers = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(groups.size(), 1)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < groups.size(); i = next++) {
            try {
                results[i] = evaluate_group(params, groups[i], options.gradcam_class);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    auto report = summarize(groups, results);
    if (details) *details = std::move(results);
    return report;
}

namespace {

std::string rankings_jsonl(const std::vector<GroupEvaluation>& evals) {
    std::string out;
    for (const auto& e : evals) {
        json cands = json::array();
        for (const auto& c : e.ranking) {
            cands.push_back({{"id", c.question_id}, {"score", c.score}, {"role", c.is_sub ? "sub" : "irrelevant"}});
        }
        json line = {{"group", e.group_id},
                     {"predictions", e.predictions},
                     {"grounding", e.grounding},
                     {"candidates", cands}};
        out += line.dump() + "\n";
    }
    return out;
}

}  // namespace

metrics::MetricsReport write_evaluation(const model::ModelParams& params,
                                        const std::vector<synth::QuestionGroup>& groups,
                                        const std::string& output_dir, const EvalOptions& options) {
    std::error_code ec;
    std::filesystem::create_directories(output_dir, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create '" + output_dir + "': " + ec.message());
    std::vector<GroupEvaluation> evals;
    const auto report = evaluate_groups(params, groups, options, &evals);
    const std::filesystem::path dir(output_dir);
    write_file((dir / kMetricsFile).string(), metrics::to_json(report));
    const std::pair<std::string, metrics::MetricsReport> row[] = {{"model", report}};
    write_file((dir / kMetricsTableFile).string(), metrics::render_table(row));
    write_file((dir / kRankingsFile).string(), rankings_jsonl(evals));
    return report;
}

metrics::MetricsReport evaluate_run(const std::string& checkpoint, const std::string& dataset,
                                    const std::string& output_dir, const EvalOptions& options) {
    const auto params = model::load_checkpoint(checkpoint);
    const auto data = synth::load_dataset(dataset, &params.config);
    return write_evaluation(params, data.groups, output_dir, options);
}

std::string rank_run(const std::string& checkpoint, const std::string& dataset, std::uint64_t group_id,
                     GradCamClass gradcam_class) {
    const auto params = model::load_checkpoint(checkpoint);
    const auto data = synth::load_dataset(dataset, &params.config);
    const auto it = std::find_if(data.groups.begin(), data.groups.end(),
                                 [&](const synth::QuestionGroup& g) { return g.group_id == group_id; });
    if (it == data.groups.end()) {
        throw Error(ErrorKind::lookup, "group " + std::to_string(group_id) + " is not in '" + dataset + "'");
    }
    const auto eval = evaluate_group(params, *it, gradcam_class);
    std::vector<const synth::Question*> by_id;
    for (const synth::Question* q : it->all_questions()) by_id.push_back(q);
    auto find = [&](int id) {
        for (const synth::Question* q : by_id)
            if (q->question_id == id) return q;
        throw Error(ErrorKind::lookup, "question " + std::to_string(id) + " missing from group");
    };

    std::ostringstream os;
    char buf[256];
    os << "group " << group_id << "\n";
    os << "reasoning: " << synth::render_question(it->reasoning) << "  answer=" << synth::answer_name(it->reasoning.answer)
       << " predicted=" << synth::answer_name(eval.predictions[0]) << "\n";
    std::snprintf(buf, sizeof buf, "%-5s %-4s %-16s %-11s %s\n", "rank", "id", "score", "label", "question");
    os << buf;
    for (std::size_t i = 0; i < eval.ranking.size(); ++i) {
        const auto& c = eval.ranking[i];
        std::snprintf(buf, sizeof buf, "%-5zu %-4d %+.12f  %-11s ", i + 1, c.question_id, c.score,
                      c.is_sub ? "sub" : "irrelevant");
        os << buf << synth::render_question(*find(c.question_id)) << "\n";
    }
    return os.str();
}

}  // namespace sortlab::harness
