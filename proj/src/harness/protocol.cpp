#include <filesystem>

#include "sortlab/harness.hpp"

namespace sortlab::harness {

ProtocolResult run_protocol(const ProtocolConfig& config) {
    const std::filesystem::path dir(config.output_dir);
    ProtocolResult result;

    RunConfig pre;
    pre.model = config.model;
    pre.generator = config.generator;
    pre.variant = loss::Variant::baseline;
    pre.weights = config.pretrain_weights;
    pre.optimizer = config.pretrain;
    pre.seeds = {config.seed, config.seed, config.seed};
    pre.train_fraction = config.train_fraction;
    pre.threads = config.threads;
    pre.output_dir = (dir / "pretrain").string();
    train_run(pre);
    result.pretrained = metrics::report_from_json(read_file((dir / "pretrain" / kMetricsFile).string()));

    for (loss::Variant v : {loss::Variant::baseline, loss::Variant::sq_only, loss::Variant::full}) {
        RunConfig run = pre;
        run.generator.reset();
        run.dataset_path = (dir / "pretrain" / "dataset.jsonl").string();
        run.init_checkpoint = (dir / "pretrain" / kCheckpointFile).string();
        run.variant = v;
        run.weights = config.weights;
        run.optimizer = config.finetune;
        run.output_dir = (dir / loss::variant_name(v)).string();
        train_run(run);
        const auto report = metrics::report_from_json(read_file((std::filesystem::path(run.output_dir) / kMetricsFile).string()));
        (v == loss::Variant::baseline ? result.baseline : v == loss::Variant::sq_only ? result.sq_only : result.full) =
            report;
        result.manifests.push_back((std::filesystem::path(run.output_dir) / kManifestFile).string());
    }
    return result;
}

}  // namespace sortlab::harness
