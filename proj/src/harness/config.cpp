#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sortlab/error.hpp"
#include "sortlab/harness.hpp"

namespace sortlab::harness {

using nlohmann::json;

std::string timestamp_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write '" + path + "'");
    out << contents;
    out.flush();
    if (!out) throw Error(ErrorKind::io, "write failed for '" + path + "'");
}

namespace {

const char* class_name(GradCamClass c) { return c == GradCamClass::predicted ? "predicted" : "ground-truth"; }

GradCamClass class_from_name(const std::string& s) {
    if (s == "ground-truth") return GradCamClass::ground_truth;
    if (s == "predicted") return GradCamClass::predicted;
    throw Error(ErrorKind::config, "unknown Grad-CAM class mode '" + s + "' (ground-truth, predicted)");
}

json model_json(const model::ModelConfig& m) {
    return {{"grid_width", m.grid_width},     {"grid_height", m.grid_height},
            {"channels", m.channels},         {"vocab_size", m.vocab_size},
            {"embed_dim", m.embed_dim},       {"question_dim", m.question_dim},
            {"cell_features", m.cell_features}, {"joint_dim", m.joint_dim},
            {"fusion_dim", m.fusion_dim},     {"head_dim", m.head_dim},
            {"answer_classes", m.answer_classes}, {"seed", m.seed}};
}

model::ModelConfig model_from_json(const json& j) {
    model::ModelConfig m;
    auto field = [&](const char* key, auto& target) {
        if (j.contains(key)) target = j.at(key).get<std::remove_reference_t<decltype(target)>>();
    };
    field("grid_width", m.grid_width);
    field("grid_height", m.grid_height);
    field("channels", m.channels);
    field("vocab_size", m.vocab_size);
    field("embed_dim", m.embed_dim);
    field("question_dim", m.question_dim);
    field("cell_features", m.cell_features);
    field("joint_dim", m.joint_dim);
    field("fusion_dim", m.fusion_dim);
    field("head_dim", m.head_dim);
    field("answer_classes", m.answer_classes);
    field("seed", m.seed);
    return m;
}

json config_json(const RunConfig& c) {
    json j = {
        {"model", model_json(c.model)},
        {"generator", c.generator ? json::parse(synth::generator_config_json(*c.generator)) : json()},
        {"dataset", c.dataset_path},
        {"variant", loss::variant_name(c.variant)},
        {"weights", {{"lambda1", c.weights.lambda1}, {"lambda2", c.weights.lambda2}, {"lambda3", c.weights.lambda3}}},
        {"optimizer",
         {{"step_size", c.optimizer.step_size}, {"epochs", c.optimizer.epochs}, {"batch_size", c.optimizer.batch_size}}},
        {"seeds", {{"model", c.seeds.model}, {"data", c.seeds.data}, {"shuffle", c.seeds.shuffle}}},
        {"output_dir", c.output_dir},
        {"init_checkpoint", c.init_checkpoint},
        {"train_fraction", c.train_fraction},
        {"checkpoint_every", c.checkpoint_every},
        {"eval_every", c.eval_every},
        {"sample_one_pair", c.sample_one_pair},
        {"threads", c.threads},
        {"gradcam_class", class_name(c.gradcam_class)},
    };
    return j;
}

// Every key is optional; missing keys keep their defaults.
RunConfig config_from_json(const json& j) {
    RunConfig c;
    if (j.contains("model")) c.model = model_from_json(j.at("model"));
    if (j.contains("generator") && !j.at("generator").is_null()) {
        synth::GeneratorConfig base;
        json g = json::parse(synth::generator_config_json(base));
        for (const auto& [k, v] : j.at("generator").items()) {
            if (!g.contains(k)) throw Error(ErrorKind::config, "unknown generator key '" + k + "'");
            g[k] = v;
        }
        c.generator = synth::generator_config_from_json(g.dump());
    }
    if (j.contains("dataset")) c.dataset_path = j.at("dataset").get<std::string>();
    if (j.contains("variant")) c.variant = loss::variant_from_name(j.at("variant").get<std::string>());
    if (j.contains("weights")) {
        const json& w = j.at("weights");
        c.weights.lambda1 = w.value("lambda1", c.weights.lambda1);
        c.weights.lambda2 = w.value("lambda2", c.weights.lambda2);
        c.weights.lambda3 = w.value("lambda3", c.weights.lambda3);
    }
    if (j.contains("optimizer")) {
        const json& o = j.at("optimizer");
        c.optimizer.step_size = o.value("step_size", c.optimizer.step_size);
        c.optimizer.epochs = o.value("epochs", c.optimizer.epochs);
        c.optimizer.batch_size = o.value("batch_size", c.optimizer.batch_size);
    }
    if (j.contains("seeds")) {
        const json& s = j.at("seeds");
        c.seeds.model = s.value("model", c.seeds.model);
        c.seeds.data = s.value("data", c.seeds.data);
        c.seeds.shuffle = s.value("shuffle", c.seeds.shuffle);
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    c.init_checkpoint = j.value("init_checkpoint", c.init_checkpoint);
    c.train_fraction = j.value("train_fraction", c.train_fraction);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.sample_one_pair = j.value("sample_one_pair", c.sample_one_pair);
    c.threads = j.value("threads", c.threads);
    if (j.contains("gradcam_class")) c.gradcam_class = class_from_name(j.at("gradcam_class").get<std::string>());
    return c;
}

json breakdown_json(const loss::LossBreakdown& b) {
    return {{"cg_loss", b.cg_loss},
            {"bce_reasoning", b.bce_reasoning},
            {"bce_sub", b.bce_sub},
            {"bce_irrelevant", b.bce_irrelevant},
            {"total", b.total},
            {"skipped_degenerate_pairs", b.skipped_degenerate_pairs}};
}

}  // namespace

void RunConfig::validate() const {
    model.validate();
    weights.validate();
    if (generator.has_value() == !dataset_path.empty()) {
        throw Error(ErrorKind::config, "exactly one of a generator config or a dataset path is required");
    }
    if (generator) generator->validate();
    if (!dataset_path.empty() && !std::filesystem::exists(dataset_path)) {
        throw Error(ErrorKind::io, "dataset '" + dataset_path + "' does not exist");
    }
    if (!init_checkpoint.empty() && !std::filesystem::exists(init_checkpoint)) {
        throw Error(ErrorKind::io, "checkpoint '" + init_checkpoint + "' does not exist");
    }
    if (!(optimizer.step_size > 0.0) || !std::isfinite(optimizer.step_size)) {
        throw Error(ErrorKind::config, "step size must be positive and finite");
    }
    if (optimizer.epochs == 0) throw Error(ErrorKind::config, "epochs must be positive");
    if (optimizer.batch_size == 0) throw Error(ErrorKind::config, "batch size must be positive");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw Error(ErrorKind::config, "train fraction must lie strictly between 0 and 1");
    }
    if (output_dir.empty()) throw Error(ErrorKind::config, "output directory is required");
}

std::string RunConfig::to_json() const { return config_json(*this).dump(2) + "\n"; }

RunConfig RunConfig::from_json(const std::string& text) {
    try {
        return config_from_json(json::parse(text));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse, std::string("run config: ") + e.what());
    }
}

RunConfig RunConfig::load(const std::string& path) { return from_json(read_file(path)); }

std::string RunManifest::to_json() const {
    json epochs_j = json::array();
    for (const auto& e : epochs) {
        json row = breakdown_json(e.mean);
        row["epoch"] = e.epoch;
        epochs_j.push_back(row);
    }
    json val = json::array();
    for (const auto& v : validation_consistency) val.push_back({{"epoch", v.epoch}, {"consistency", v.consistency}});
    json j = {{"config", config_json(config)},
              {"start_time", start_time},
              {"end_time", end_time},
              {"epochs", epochs_j},
              {"validation_consistency", val},
              {"checkpoint", checkpoint_path},
              {"metrics", metrics_path},
              {"gradcam_constructions", gradcam_constructions},
              {"train_groups", train_groups},
              {"validation_groups", validation_groups}};
    return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        RunManifest m;
        m.config = config_from_json(j.at("config"));
        m.start_time = j.at("start_time").get<std::string>();
        m.end_time = j.at("end_time").get<std::string>();
        for (const auto& e : j.at("epochs")) {
            EpochAggregate a;
            a.epoch = e.at("epoch").get<std::uint32_t>();
            a.mean = {e.at("cg_loss").get<double>(),       e.at("bce_reasoning").get<double>(),
                      e.at("bce_sub").get<double>(),       e.at("bce_irrelevant").get<double>(),
                      e.at("total").get<double>(),         e.at("skipped_degenerate_pairs").get<std::size_t>()};
            m.epochs.push_back(a);
        }
        for (const auto& v : j.at("validation_consistency")) {
            m.validation_consistency.push_back({v.at("epoch").get<std::uint32_t>(), v.at("consistency").get<double>()});
        }
        m.checkpoint_path = j.at("checkpoint").get<std::string>();
        m.metrics_path = j.at("metrics").get<std::string>();
        m.gradcam_constructions = j.at("gradcam_constructions").get<std::uint64_t>();
        m.train_groups = j.at("train_groups").get<std::size_t>();
        m.validation_groups = j.at("validation_groups").get<std::size_t>();
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse, std::string("manifest: ") + e.what());
    }
}

RunManifest RunManifest::load(const std::string& path) {
    RunManifest m = from_json(read_file(path));
    m.directory = std::filesystem::path(path).parent_path().string();
    return m;
}

}  // namespace sortlab::harness
