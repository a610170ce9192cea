#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>

#include <json.hpp>

#include "sortlab/error.hpp"
#include "sortlab/harness.hpp"
#include "sortlab/rng.hpp"

namespace sortlab::harness {

namespace {

struct Prepared {
    RunConfig config;  // effective: generator seed taken from the data seed
    model::ModelParams params;
    std::vector<synth::QuestionGroup> train;
    std::vector<synth::QuestionGroup> validation;
    synth::GeneratorConfig generator;
};

Prepared prepare(const RunConfig& input, const std::filesystem::path& dir) {
    Prepared p;
    p.config = input;
    synth::Dataset data;
    if (p.config.generator) {
        p.config.generator->seed = p.config.seeds.data;
        data.config = *p.config.generator;
        data.groups = synth::generate_dataset(data.config);
    }

    if (!p.config.init_checkpoint.empty()) {
        p.params = model::load_checkpoint(p.config.init_checkpoint);
        if (!p.config.generator) data = synth::load_dataset(p.config.dataset_path, &p.params.config);
        else if (synth::model_config_for(data.config, p.params.config) != p.params.config) {
            throw Error(ErrorKind::compatibility, "checkpoint '" + p.config.init_checkpoint +
                                                      "' does not match the generated dataset");
        }
    } else {
        if (!p.config.generator) data = synth::load_dataset(p.config.dataset_path);
        model::ModelConfig mc = synth::model_config_for(data.config, p.config.model);
        mc.seed = p.config.seeds.model;
        p.params = model::init_model(mc);
    }
    p.config.model = p.params.config;
    p.generator = data.config;

    auto [train, validation] = synth::split_dataset(data.groups, p.config.train_fraction, p.config.seeds.data);
    p.train = std::move(train);
    p.validation = std::move(validation);
    if (p.train.empty() || p.validation.empty()) {
        throw Error(ErrorKind::config, "train fraction leaves an empty split");
    }
    synth::serialize_dataset(data.groups, data.config, (dir / "dataset.jsonl").string());
    synth::serialize_dataset(p.validation, data.config, (dir / "validation.jsonl").string());
    return p;
}

std::string seed_columns(const Seeds& s) {
    return std::to_string(s.model) + "," + std::to_string(s.data) + "," + std::to_string(s.shuffle);
}

std::string csv_row(const EpochAggregate& e, const Seeds& s) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%u,%.17g,%.17g,%.17g,%.17g,%.17g,%zu,", e.epoch, e.mean.cg_loss,
                  e.mean.bce_reasoning, e.mean.bce_sub, e.mean.bce_irrelevant, e.mean.total,
                  e.mean.skipped_degenerate_pairs);
    return buf + seed_columns(s) + "\n";
}

}  // namespace

RunManifest train_run(const RunConfig& input) {
    input.validate();
    RunManifest manifest;
    manifest.start_time = timestamp_now();
    const std::filesystem::path dir(input.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create '" + input.output_dir + "': " + ec.message());

    Prepared p = prepare(input, dir);
    const RunConfig& config = p.config;
    manifest.config = config;
    manifest.train_groups = p.train.size();
    manifest.validation_groups = p.validation.size();
    manifest.directory = dir.string();

    std::string csv =
        "epoch,cg_loss,bce_reasoning,bce_sub,bce_irrelevant,total,skipped_degenerate_pairs,"
        "model_seed,data_seed,shuffle_seed\n";
    const std::uint64_t cams_before = gradcam::construction_count();
    const EvalOptions eval_options{config.gradcam_class, config.threads};
    const double lr = config.optimizer.step_size;
    std::uint64_t eval_cams = 0;

    for (std::uint32_t epoch = 1; epoch <= config.optimizer.epochs; ++epoch) {
        std::vector<std::size_t> order(p.train.size());
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle(derive_seed(config.seeds.shuffle, epoch));
        shuffle.shuffle(order);
        Rng pair_rng(derive_seed(derive_seed(config.seeds.shuffle, epoch), 1));
        const loss::LossOptions loss_options{config.sample_one_pair, &pair_rng};

        EpochAggregate agg;
        agg.epoch = epoch;
        for (std::size_t start = 0; start < order.size(); start += config.optimizer.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.optimizer.batch_size);
            autograd::Graph graph;
            const auto bound = model::bind(graph, p.params, true);
            autograd::Tensor batch;
            for (std::size_t b = start; b < end; ++b) {
                const auto& group = p.train[order[b]];
                const auto gl = loss::sort_total_loss(bound, group, config.weights, config.variant, loss_options);
                if (!std::isfinite(gl.breakdown.total)) {
                    throw Error(ErrorKind::evaluation, "non-finite loss in group " + std::to_string(group.group_id) +
                                                           " at epoch " + std::to_string(epoch));
                }
                agg.mean.cg_loss += gl.breakdown.cg_loss;
                agg.mean.bce_reasoning += gl.breakdown.bce_reasoning;
                agg.mean.bce_sub += gl.breakdown.bce_sub;
                agg.mean.bce_irrelevant += gl.breakdown.bce_irrelevant;
                agg.mean.total += gl.breakdown.total;
                agg.mean.skipped_degenerate_pairs += gl.breakdown.skipped_degenerate_pairs;
                batch = batch.valid() ? autograd::add(batch, gl.total) : gl.total;
            }
            batch = autograd::scale(batch, 1.0 / static_cast<double>(end - start));
            const auto grads = graph.gradient(batch, bound.leaves, false);
            for (std::size_t i = 0; i < grads.size(); ++i) {
                auto& values = p.params.tensors[i].values;
                const auto& g = grads[i].values();
                for (std::size_t j = 0; j < values.size(); ++j) {
                    if (!std::isfinite(g[j])) {
                        throw Error(ErrorKind::evaluation, "non-finite gradient for " + p.params.tensors[i].name +
                                                               " at epoch " + std::to_string(epoch));
                    }
                    values[j] -= lr * g[j];
                }
            }
        }
        const double n = static_cast<double>(p.train.size());
        agg.mean.cg_loss /= n;
        agg.mean.bce_reasoning /= n;
        agg.mean.bce_sub /= n;
        agg.mean.bce_irrelevant /= n;
        agg.mean.total /= n;
        manifest.epochs.push_back(agg);
        csv += csv_row(agg, config.seeds);

        if (config.checkpoint_every && epoch % config.checkpoint_every == 0 && epoch != config.optimizer.epochs) {
            model::save_checkpoint(p.params, (dir / ("checkpoint-epoch-" + std::to_string(epoch) + ".ckpt")).string());
        }
        if (config.eval_every && epoch % config.eval_every == 0) {
            const std::uint64_t before = gradcam::construction_count();
            const auto report = evaluate_groups(p.params, p.validation, eval_options);
            eval_cams += gradcam::construction_count() - before;
            manifest.validation_consistency.push_back({epoch, report.consistency});
        }
    }
    manifest.gradcam_constructions = gradcam::construction_count() - cams_before - eval_cams;

    write_file((dir / kLossesFile).string(), csv);
    model::save_checkpoint(p.params, (dir / kCheckpointFile).string());
    write_evaluation(p.params, p.validation, dir.string(), eval_options);
    {
        const std::string path = (dir / kMetricsFile).string();
        auto j = nlohmann::json::parse(read_file(path));
        j["seeds"] = {{"model", config.seeds.model}, {"data", config.seeds.data}, {"shuffle", config.seeds.shuffle}};
        write_file(path, j.dump(2) + "\n");
    }
    manifest.checkpoint_path = kCheckpointFile;
    manifest.metrics_path = kMetricsFile;
    manifest.end_time = timestamp_now();
    write_file((dir / kManifestFile).string(), manifest.to_json());
    return manifest;
}

}  // namespace sortlab::harness
