#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sortlab/gradcam.hpp"
#include "sortlab/metrics.hpp"
#include "sortlab/model.hpp"
#include "sortlab/sortloss.hpp"
#include "sortlab/synthdata.hpp"

namespace sortlab::harness {

struct OptimizerSettings {
    double step_size = 0.45;
    std::uint32_t epochs = 40;
    std::uint32_t batch_size = 8;  // groups per step
    bool operator==(const OptimizerSettings&) const = default;
};

struct Seeds {
    std::uint64_t model = 1;    // parameter initialisation
    std::uint64_t data = 1;     // dataset generation and train/validation split
    std::uint64_t shuffle = 1;  // batch order
    bool operator==(const Seeds&) const = default;
};

enum class GradCamClass { ground_truth, predicted };

struct RunConfig {
    model::ModelConfig model;
    std::optional<synth::GeneratorConfig> generator;
    std::string dataset_path;
    loss::Variant variant = loss::Variant::baseline;
    loss::LossWeights weights;
    OptimizerSettings optimizer;
    Seeds seeds;
    std::string output_dir = "run";
    std::string init_checkpoint;  // fine-tune from here when set
    double train_fraction = 0.73;
    std::uint32_t checkpoint_every = 0;
    std::uint32_t eval_every = 0;  // validation metrics every N epochs, 0 disables
    bool sample_one_pair = false;
    std::uint32_t threads = 0;  // evaluation workers, 0 = hardware concurrency
    GradCamClass gradcam_class = GradCamClass::ground_truth;

    void validate() const;
    std::string to_json() const;
    static RunConfig from_json(const std::string& text);
    static RunConfig load(const std::string& path);
};

struct EpochAggregate {
    std::uint32_t epoch = 0;
    loss::LossBreakdown mean;  // means over groups; skipped pairs summed
};

struct EpochMetric {
    std::uint32_t epoch = 0;
    double consistency = 0.0;
};

struct RunManifest {
    RunConfig config;
    std::string start_time;
    std::string end_time;
    std::vector<EpochAggregate> epochs;
    std::vector<EpochMetric> validation_consistency;
    std::string checkpoint_path;  // relative to the manifest directory
    std::string metrics_path;     // relative to the manifest directory
    std::uint64_t gradcam_constructions = 0;  // during training steps
    std::size_t train_groups = 0;
    std::size_t validation_groups = 0;
    std::string directory;  // where the manifest lives; not serialised

    std::string to_json() const;
    static RunManifest from_json(const std::string& text);
    static RunManifest load(const std::string& path);
};

inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kMetricsTableFile = "metrics.txt";
inline constexpr const char* kLossesFile = "losses.csv";
inline constexpr const char* kCheckpointFile = "model.ckpt";
inline constexpr const char* kRankingsFile = "rankings.jsonl";

struct EvalOptions {
    GradCamClass gradcam_class = GradCamClass::ground_truth;
    std::uint32_t threads = 0;
};

struct GroupEvaluation {
    std::uint64_t group_id = 0;
    std::vector<int> predictions;  // reasoning, subs, irrelevant
    std::vector<int> truths;
    metrics::RankedList ranking;
    double grounding = 0.0;
    bool grounding_degenerate = false;
};

GroupEvaluation evaluate_group(const model::ModelParams& params, const synth::QuestionGroup& group,
                               GradCamClass gradcam_class = GradCamClass::ground_truth);

metrics::MetricsReport summarize(const std::vector<synth::QuestionGroup>& groups,
                                 const std::vector<GroupEvaluation>& evaluations);

metrics::MetricsReport evaluate_groups(const model::ModelParams& params,
                                       const std::vector<synth::QuestionGroup>& groups,
                                       const EvalOptions& options = {},
                                       std::vector<GroupEvaluation>* details = nullptr);

// Writes metrics.json, metrics.txt and rankings.jsonl into output_dir.
metrics::MetricsReport write_evaluation(const model::ModelParams& params,
                                        const std::vector<synth::QuestionGroup>& groups,
                                        const std::string& output_dir, const EvalOptions& options = {});

metrics::MetricsReport evaluate_run(const std::string& checkpoint, const std::string& dataset,
                                    const std::string& output_dir, const EvalOptions& options = {});

RunManifest train_run(const RunConfig& config);

std::string rank_run(const std::string& checkpoint, const std::string& dataset, std::uint64_t group_id,
                     GradCamClass gradcam_class = GradCamClass::ground_truth);

// comparison.txt, comparison.csv, loss.svg and consistency.svg in output_dir.
void emit_report(const std::vector<std::string>& manifest_paths, const std::string& output_dir);

// Pretrain a baseline, then fine-tune every variant from it with the same budget.
struct ProtocolConfig {
    synth::GeneratorConfig generator;
    model::ModelConfig model;
    std::uint64_t seed = 1;
    OptimizerSettings pretrain{0.45, 40, 8};
    OptimizerSettings finetune{0.05, 30, 8};
    loss::LossWeights pretrain_weights{1.0, 1.0, 1.0};
    loss::LossWeights weights;
    double train_fraction = 0.73;
    std::uint32_t threads = 0;
    std::string output_dir = "protocol";
};

struct ProtocolResult {
    metrics::MetricsReport pretrained;
    metrics::MetricsReport baseline;
    metrics::MetricsReport sq_only;
    metrics::MetricsReport full;
    std::vector<std::string> manifests;
};

ProtocolResult run_protocol(const ProtocolConfig& config);

std::string timestamp_now();
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace sortlab::harness
