#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sortlab/error.hpp"
#include "sortlab/harness.hpp"

using namespace sortlab;

namespace {

harness::GradCamClass parse_class(const std::string& s) {
    if (s == "ground-truth") return harness::GradCamClass::ground_truth;
    if (s == "predicted") return harness::GradCamClass::predicted;
    throw Error(ErrorKind::config, "unknown Grad-CAM class mode '" + s + "'");
}

void add_generator_flags(CLI::App* cmd, synth::GeneratorConfig& g) {
    cmd->add_option("--width", g.width, "grid width");
    cmd->add_option("--height", g.height, "grid height");
    cmd->add_option("--groups", g.groups, "number of question groups");
    cmd->add_option("--presence", g.presence, "probability a cell holds an object");
    cmd->add_option("--mix-count", g.mix_count, "weight of count comparison templates");
    cmd->add_option("--mix-line", g.mix_line, "weight of row/column universal templates");
    cmd->add_option("--mix-conjunction", g.mix_conjunction, "weight of conjunction templates");
    cmd->add_option("--mean-subs", g.mean_subs, "mean sub-questions per group");
    cmd->add_option("--mean-irrelevant", g.mean_irrelevant, "mean irrelevant questions per group");
    cmd->add_option("--shortcut-bias", g.shortcut_bias, "background bias toward the reasoning answer");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contrastive gradient fine-tuning on a synthetic grid VQA benchmark"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
    std::string gen_config_path, gen_out = "dataset.jsonl";
    synth::GeneratorConfig gen_flags;
    std::optional<std::uint64_t> gen_seed;
    gen->add_option("--config", gen_config_path, "key=value generator config file");
    add_generator_flags(gen, gen_flags);
    gen->add_option("--seed", gen_seed, "master seed");
    gen->add_option("--out", gen_out, "dataset path");

    // train
    auto* train = app.add_subcommand("train", "train one variant");
    std::string run_config_path, generator_config_path, variant, dataset, init_ckpt, output_dir, train_class;
    std::optional<double> step_size, lambda1, lambda2, lambda3, train_fraction;
    std::optional<std::uint32_t> epochs, batch_size, checkpoint_every, eval_every, threads;
    std::optional<std::uint64_t> model_seed, data_seed, shuffle_seed;
    bool sample_one_pair = false;
    train->add_option("--config", run_config_path, "run config JSON; flags override its fields");
    train->add_option("--generator-config", generator_config_path, "key=value generator config file");
    train->add_option("--dataset", dataset, "dataset path");
    train->add_option("--variant", variant, "baseline, sq-only or full");
    train->add_option("--init-checkpoint", init_ckpt, "fine-tune from this checkpoint");
    train->add_option("--output-dir", output_dir, "run directory");
    train->add_option("--step-size", step_size, "SGD step size");
    train->add_option("--epochs", epochs, "epochs");
    train->add_option("--batch-size", batch_size, "groups per step");
    train->add_option("--lambda1", lambda1, "reasoning BCE weight");
    train->add_option("--lambda2", lambda2, "sub-question BCE weight");
    train->add_option("--lambda3", lambda3, "irrelevant-question BCE weight");
    train->add_option("--model-seed", model_seed, "parameter initialisation seed");
    train->add_option("--data-seed", data_seed, "dataset and split seed");
    train->add_option("--shuffle-seed", shuffle_seed, "batch order seed");
    train->add_option("--train-fraction", train_fraction, "share of groups used for training");
    train->add_option("--checkpoint-every", checkpoint_every, "periodic checkpoint interval in epochs");
    train->add_option("--eval-every", eval_every, "validation interval in epochs");
    train->add_option("--threads", threads, "evaluation workers");
    train->add_option("--gradcam-class", train_class, "ground-truth or predicted");
    train->add_flag("--sample-one-pair", sample_one_pair, "one (sub, irrelevant) pair per group");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string eval_ckpt, eval_dataset, eval_out = "eval", eval_class = "ground-truth";
    std::uint32_t eval_threads = 0;
    eval->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
    eval->add_option("--dataset", eval_dataset, "dataset path")->required();
    eval->add_option("--output-dir", eval_out, "where metrics.json and metrics.txt go");
    eval->add_option("--gradcam-class", eval_class, "ground-truth or predicted");
    eval->add_option("--threads", eval_threads, "evaluation workers");

    // rank
    auto* rank = app.add_subcommand("rank", "list one group's candidates by Grad-CAM similarity");
    std::string rank_ckpt, rank_dataset, rank_class = "ground-truth";
    std::uint64_t rank_group = 0;
    rank->add_option("--checkpoint", rank_ckpt, "model checkpoint")->required();
    rank->add_option("--dataset", rank_dataset, "dataset path")->required();
    rank->add_option("--group", rank_group, "group id")->required();
    rank->add_option("--gradcam-class", rank_class, "ground-truth or predicted");

    // report
    auto* report = app.add_subcommand("report", "compare runs");
    std::vector<std::string> manifests;
    std::string report_out = "report";
    report->add_option("--manifest", manifests, "run manifest (repeatable)")->required();
    report->add_option("--output-dir", report_out, "where the table and plots go");

    // protocol
    auto* protocol = app.add_subcommand("protocol", "pretrain a baseline, then fine-tune all three variants");
    harness::ProtocolConfig pc;
    add_generator_flags(protocol, pc.generator);
    protocol->add_option("--seed", pc.seed, "seed for data, model and shuffling");
    protocol->add_option("--pretrain-epochs", pc.pretrain.epochs, "baseline pretraining epochs");
    protocol->add_option("--pretrain-step-size", pc.pretrain.step_size, "baseline pretraining step size");
    protocol->add_option("--finetune-epochs", pc.finetune.epochs, "fine-tuning epochs");
    protocol->add_option("--finetune-step-size", pc.finetune.step_size, "fine-tuning step size");
    protocol->add_option("--batch-size", pc.finetune.batch_size, "groups per step");
    protocol->add_option("--threads", pc.threads, "evaluation workers");
    protocol->add_option("--output-dir", pc.output_dir, "protocol directory");

    try {
        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e);
        } catch (const CLI::CallForAllHelp& e) {
            return app.exit(e);
        } catch (const CLI::ParseError& e) {
            throw Error(ErrorKind::usage, e.what());
        }

        if (*gen) {
            synth::GeneratorConfig g = gen_config_path.empty() ? gen_flags : synth::GeneratorConfig::load(gen_config_path);
            if (gen_seed) g.seed = *gen_seed;
            g.validate();
            synth::serialize_dataset(synth::generate_dataset(g), g, gen_out);
            std::cout << "wrote " << g.groups << " groups to " << gen_out << "\n";
        } else if (*train) {
            harness::RunConfig c = run_config_path.empty() ? harness::RunConfig{} : harness::RunConfig::load(run_config_path);
            if (!generator_config_path.empty()) {
                c.generator = synth::GeneratorConfig::load(generator_config_path);
                c.dataset_path.clear();
            }
            if (!dataset.empty()) {
                c.dataset_path = dataset;
                c.generator.reset();
            }
            if (run_config_path.empty() && generator_config_path.empty() && dataset.empty()) {
                c.generator = synth::GeneratorConfig{};
            }
            if (!variant.empty()) c.variant = loss::variant_from_name(variant);
            if (!init_ckpt.empty()) c.init_checkpoint = init_ckpt;
            if (!output_dir.empty()) c.output_dir = output_dir;
            if (step_size) c.optimizer.step_size = *step_size;
            if (epochs) c.optimizer.epochs = *epochs;
            if (batch_size) c.optimizer.batch_size = *batch_size;
            if (lambda1) c.weights.lambda1 = *lambda1;
            if (lambda2) c.weights.lambda2 = *lambda2;
            if (lambda3) c.weights.lambda3 = *lambda3;
            if (model_seed) c.seeds.model = *model_seed;
            if (data_seed) c.seeds.data = *data_seed;
            if (shuffle_seed) c.seeds.shuffle = *shuffle_seed;
            if (train_fraction) c.train_fraction = *train_fraction;
            if (checkpoint_every) c.checkpoint_every = *checkpoint_every;
            if (eval_every) c.eval_every = *eval_every;
            if (threads) c.threads = *threads;
            if (!train_class.empty()) c.gradcam_class = parse_class(train_class);
            if (sample_one_pair) c.sample_one_pair = true;
            const auto m = harness::train_run(c);
            std::cout << harness::read_file(m.directory + "/" + harness::kMetricsTableFile);
            std::cout << "manifest " << m.directory << "/" << harness::kManifestFile << "\n";
        } else if (*eval) {
            const auto r = harness::evaluate_run(eval_ckpt, eval_dataset, eval_out, {parse_class(eval_class), eval_threads});
            const std::pair<std::string, metrics::MetricsReport> row[] = {{"model", r}};
            std::cout << metrics::render_table(row);
        } else if (*rank) {
            std::cout << harness::rank_run(rank_ckpt, rank_dataset, rank_group, parse_class(rank_class));
        } else if (*report) {
            harness::emit_report(manifests, report_out);
            std::cout << harness::read_file(report_out + "/comparison.txt");
        } else if (*protocol) {
            pc.pretrain.batch_size = pc.finetune.batch_size;
            const auto r = harness::run_protocol(pc);
            const std::pair<std::string, metrics::MetricsReport> rows[] = {
                {"pretrained", r.pretrained}, {"baseline", r.baseline}, {"sq-only", r.sq_only}, {"full", r.full}};
            std::cout << metrics::render_table(rows);
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error=" << e.category() << " message=" << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error=internal message=" << e.what() << "\n";
        return 3;
    }
}
