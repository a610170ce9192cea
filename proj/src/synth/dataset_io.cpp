#include <fstream>

#include <json.hpp>

#include "sortlab/error.hpp"
#include "sortlab/synthdata.hpp"

namespace sortlab::synth {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "sortlab-dataset";
constexpr int kFormatVersion = 1;

json config_json(const GeneratorConfig& c) {
    return {{"width", c.width},
            {"height", c.height},
            {"presence", c.presence},
            {"mix_count", c.mix_count},
            {"mix_line", c.mix_line},
            {"mix_conjunction", c.mix_conjunction},
            {"mean_subs", c.mean_subs},
            {"mean_irrelevant", c.mean_irrelevant},
            {"shortcut_bias", c.shortcut_bias},
            {"seed", c.seed},
            {"groups", c.groups}};
}

GeneratorConfig config_from_json(const json& j) {
    GeneratorConfig c;
    c.width = j.at("width").get<std::uint32_t>();
    c.height = j.at("height").get<std::uint32_t>();
    c.presence = j.at("presence").get<double>();
    c.mix_count = j.at("mix_count").get<double>();
    c.mix_line = j.at("mix_line").get<double>();
    c.mix_conjunction = j.at("mix_conjunction").get<double>();
    c.mean_subs = j.at("mean_subs").get<double>();
    c.mean_irrelevant = j.at("mean_irrelevant").get<double>();
    c.shortcut_bias = j.at("shortcut_bias").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.groups = j.at("groups").get<std::uint32_t>();
    return c;
}

json question_json(const Question& q) {
    json targets = json::array();
    for (const auto& t : q.target_cells) targets.push_back({t.x, t.y});
    return {{"id", q.question_id},
            {"template", template_name(q.template_id)},
            {"params", q.params},
            {"tokens", q.tokens},
            {"role", role_name(q.role)},
            {"answer", q.answer},
            {"targets", targets}};
}

Question question_from_json(const json& j) {
    Question q;
    q.question_id = j.at("id").get<int>();
    q.template_id = template_from_name(j.at("template").get<std::string>());
    q.params = j.at("params").get<std::vector<int>>();
    q.tokens = j.at("tokens").get<std::vector<int>>();
    q.role = role_from_name(j.at("role").get<std::string>());
    q.answer = j.at("answer").get<int>();
    for (const auto& t : j.at("targets")) {
        q.target_cells.push_back({t.at(0).get<std::uint32_t>(), t.at(1).get<std::uint32_t>()});
    }
    return q;
}

json group_json(const QuestionGroup& g) {
    json cells = json::array();
    for (const auto& c : g.scene.cells) cells.push_back({c.present ? 1 : 0, c.shape, c.color});
    json subs = json::array(), irr = json::array();
    for (const auto& q : g.subs) subs.push_back(question_json(q));
    for (const auto& q : g.irrelevant) irr.push_back(question_json(q));
    return {{"group", g.group_id},
            {"scene", {{"id", g.scene.scene_id}, {"width", g.scene.width}, {"height", g.scene.height}, {"cells", cells}}},
            {"mask", g.mask},
            {"reasoning", question_json(g.reasoning)},
            {"subs", subs},
            {"irrelevant", irr}};
}

QuestionGroup group_from_json(const json& j) {
    QuestionGroup g;
    g.group_id = j.at("group").get<std::uint64_t>();
    const json& s = j.at("scene");
    g.scene.scene_id = s.at("id").get<std::uint64_t>();
    g.scene.width = s.at("width").get<std::uint32_t>();
    g.scene.height = s.at("height").get<std::uint32_t>();
    for (const auto& c : s.at("cells")) {
        g.scene.cells.push_back({c.at(0).get<int>() != 0, c.at(1).get<int>(), c.at(2).get<int>()});
    }
    if (g.scene.cells.size() != static_cast<std::size_t>(g.scene.width) * g.scene.height) {
        throw Error(ErrorKind::parse, "scene cell count does not match its grid size");
    }
    g.mask = j.at("mask").get<std::vector<std::uint8_t>>();
    g.reasoning = question_from_json(j.at("reasoning"));
    for (const auto& q : j.at("subs")) g.subs.push_back(question_from_json(q));
    for (const auto& q : j.at("irrelevant")) g.irrelevant.push_back(question_from_json(q));
    return g;
}

}  // namespace

std::string generator_config_json(const GeneratorConfig& config) { return config_json(config).dump(); }

GeneratorConfig generator_config_from_json(const std::string& text) {
    try {
        GeneratorConfig c = config_from_json(json::parse(text));
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse, std::string("generator config: ") + e.what());
    }
}

void serialize_dataset(const std::vector<QuestionGroup>& groups, const GeneratorConfig& config,
                       const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot open '" + path + "' for writing");
    const model::ModelConfig m = model_config_for(config);
    json header = {{"format", kFormat},
                   {"version", kFormatVersion},
                   {"seed", config.seed},
                   {"generator", config_json(config)},
                   {"model", {{"grid_width", m.grid_width},
                              {"grid_height", m.grid_height},
                              {"channels", m.channels},
                              {"vocab_size", m.vocab_size},
                              {"answer_classes", m.answer_classes}}}};
    out << header.dump() << '\n';
    for (const auto& g : groups) out << group_json(g).dump() << '\n';
    out.close();
    if (!out) throw Error(ErrorKind::io, "failed writing dataset '" + path + "'");
}

Dataset load_dataset(const std::string& path, const model::ModelConfig* expected) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open dataset '" + path + "'");
    Dataset ds;
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(ErrorKind::compatibility, "dataset '" + path + "' has no header line");
    }
    json header = json::parse(line, nullptr, false);
    if (header.is_discarded() || !header.is_object() || !header.contains("format") ||
        header["format"] != kFormat) {
        throw Error(ErrorKind::compatibility, "dataset '" + path + "' does not start with a dataset header");
    }
    if (header.value("version", -1) != kFormatVersion) {
        throw Error(ErrorKind::compatibility, "dataset '" + path + "' has an unsupported format version");
    }
    try {
        ds.config = config_from_json(header.at("generator"));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse, "line 1: " + std::string(e.what()));
    }
    if (expected) {
        const model::ModelConfig m = model_config_for(ds.config);
        if (m.grid_width != expected->grid_width || m.grid_height != expected->grid_height ||
            m.channels != expected->channels || m.vocab_size != expected->vocab_size ||
            m.answer_classes != expected->answer_classes) {
            throw Error(ErrorKind::compatibility, "dataset '" + path + "' does not match the model configuration");
        }
    }

    std::size_t number = 1;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        try {
            QuestionGroup g = group_from_json(json::parse(line));
            if (g.scene.width != ds.config.width || g.scene.height != ds.config.height) {
                throw Error(ErrorKind::parse, "scene size differs from the header grid");
            }
            ds.groups.push_back(std::move(g));
        } catch (const json::exception& e) {
            throw Error(ErrorKind::parse, "dataset '" + path + "' line " + std::to_string(number) + ": " + e.what());
        } catch (const Error& e) {
            throw Error(ErrorKind::parse, "dataset '" + path + "' line " + std::to_string(number) + ": " + e.what());
        }
    }
    return ds;
}

}  // namespace sortlab::synth
