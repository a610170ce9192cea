#include <sstream>

#include "sortlab/error.hpp"
#include "sortlab/synthdata.hpp"

namespace sortlab::synth {

namespace {

const std::vector<std::string> kShapes = {"circle", "square", "triangle"};
const std::vector<std::string> kColors = {"red", "green", "blue"};
const std::vector<std::string> kAnswers = {"yes",    "no",     "red",      "green", "blue",
                                           "circle", "square", "triangle", "none"};

std::string cell_token(std::uint32_t x, std::uint32_t y) {
    return "cell_" + std::to_string(x) + "_" + std::to_string(y);
}

std::string line_token(int orientation, int index) {
    return (orientation == 0 ? "row" : "col") + std::to_string(index);
}

}  // namespace

const std::string& shape_name(int shape) { return kShapes.at(static_cast<std::size_t>(shape)); }
const std::string& color_name(int color) { return kColors.at(static_cast<std::size_t>(color)); }
const std::string& answer_name(int answer) { return kAnswers.at(static_cast<std::size_t>(answer)); }

const char* role_name(Role role) {
    switch (role) {
        case Role::reasoning: return "reasoning";
        case Role::sub: return "sub";
        case Role::irrelevant: return "irrelevant";
    }
    return "?";
}

Role role_from_name(const std::string& name) {
    for (Role r : {Role::reasoning, Role::sub, Role::irrelevant}) {
        if (name == role_name(r)) return r;
    }
    throw Error(ErrorKind::parse, "unknown role '" + name + "'");
}

const char* template_name(Template t) {
    switch (t) {
        case Template::count_compare: return "count_compare";
        case Template::line_universal: return "line_universal";
        case Template::conjunction: return "conjunction";
        case Template::what_color: return "what_color";
        case Template::what_shape: return "what_shape";
    }
    return "?";
}

Template template_from_name(const std::string& name) {
    for (Template t : {Template::count_compare, Template::line_universal, Template::conjunction,
                       Template::what_color, Template::what_shape}) {
        if (name == template_name(t)) return t;
    }
    throw Error(ErrorKind::parse, "unknown template '" + name + "'");
}

Vocabulary::Vocabulary(std::uint32_t width, std::uint32_t height) : width_(width), height_(height) {
    tokens_ = {"what", "color", "shape", "is", "a", "are", "all"};
    for (std::uint32_t y = 0; y < height; ++y) tokens_.push_back(line_token(0, static_cast<int>(y)));
    for (std::uint32_t x = 0; x < width; ++x) tokens_.push_back(line_token(1, static_cast<int>(x)));
    for (std::uint32_t y = 0; y < height; ++y)
        for (std::uint32_t x = 0; x < width; ++x) tokens_.push_back(cell_token(x, y));
    for (const auto& c : kColors) tokens_.push_back(c);
    for (const auto& s : kShapes) tokens_.push_back(s);
    // Comparison operands are order sensitive, which a bag of tokens cannot
    // express, so each side gets its own token.
    for (const auto& c : kColors) tokens_.push_back("more_" + c);
    for (const auto& c : kColors) tokens_.push_back("than_" + c);
}

int Vocabulary::id(const std::string& token) const {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (tokens_[i] == token) return static_cast<int>(i);
    }
    throw Error(ErrorKind::lookup, "token '" + token + "' not in vocabulary");
}

std::vector<int> Vocabulary::encode(const Question& q) const {
    const auto& p = q.params;
    std::vector<std::string> words;
    switch (q.template_id) {
        case Template::count_compare:
            words = {"more_" + color_name(p[2]), "than_" + color_name(p[3]), line_token(p[0], p[1])};
            break;
        case Template::line_universal:
            words = {"are", "all", line_token(p[0], p[1]), shape_name(p[2])};
            break;
        case Template::conjunction:
            words = {"is", cell_token(static_cast<std::uint32_t>(p[0]), static_cast<std::uint32_t>(p[1])),
                     "a", color_name(p[2]), shape_name(p[3])};
            break;
        case Template::what_color:
            words = {"what", "color", cell_token(static_cast<std::uint32_t>(p[0]), static_cast<std::uint32_t>(p[1]))};
            break;
        case Template::what_shape:
            words = {"what", "shape", cell_token(static_cast<std::uint32_t>(p[0]), static_cast<std::uint32_t>(p[1]))};
            break;
    }
    std::vector<int> ids;
    for (const auto& w : words) ids.push_back(id(w));
    return ids;
}

std::string render_question(const Question& q) {
    const auto& p = q.params;
    std::ostringstream os;
    auto line = [](int orientation, int index) {
        return std::string(orientation == 0 ? "row " : "column ") + std::to_string(index);
    };
    switch (q.template_id) {
        case Template::count_compare:
            os << "are there more " << color_name(p[2]) << " than " << color_name(p[3])
               << " objects in " << line(p[0], p[1]) << "?";
            break;
        case Template::line_universal:
            os << "are all objects in " << line(p[0], p[1]) << " " << shape_name(p[2]) << "s?";
            break;
        case Template::conjunction:
            os << "is cell (" << p[0] << "," << p[1] << ") a " << color_name(p[2]) << " "
               << shape_name(p[3]) << "?";
            break;
        case Template::what_color:
            os << "what color is cell (" << p[0] << "," << p[1] << ")?";
            break;
        case Template::what_shape:
            os << "what shape is cell (" << p[0] << "," << p[1] << ")?";
            break;
    }
    return os.str();
}

model::SceneTensor GridScene::encode() const {
    model::SceneTensor t{width, height, kChannels, std::vector<double>(cells.size() * kChannels, 0.0)};
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const Cell& c = cells[i];
        if (!c.present) continue;
        t.values[i * kChannels] = 1.0;
        t.values[i * kChannels + 1 + static_cast<std::size_t>(c.shape)] = 1.0;
        t.values[i * kChannels + 1 + kShapeCount + static_cast<std::size_t>(c.color)] = 1.0;
    }
    return t;
}

GridScene GridScene::decode(const model::SceneTensor& t, std::uint64_t scene_id) {
    if (t.channels != kChannels || t.values.size() != static_cast<std::size_t>(t.width) * t.height * kChannels) {
        throw Error(ErrorKind::input, "scene tensor does not have the grid encoding layout");
    }
    GridScene s{t.width, t.height, std::vector<Cell>(static_cast<std::size_t>(t.width) * t.height), scene_id};
    for (std::size_t i = 0; i < s.cells.size(); ++i) {
        const double* v = t.values.data() + i * kChannels;
        if (v[0] == 0.0) continue;
        Cell& c = s.cells[i];
        c.present = true;
        for (int k = 0; k < kShapeCount; ++k)
            if (v[1 + k] != 0.0) c.shape = k;
        for (int k = 0; k < kColorCount; ++k)
            if (v[1 + kShapeCount + k] != 0.0) c.color = k;
    }
    return s;
}

std::vector<const Question*> QuestionGroup::all_questions() const {
    std::vector<const Question*> out{&reasoning};
    for (const auto& q : subs) out.push_back(&q);
    for (const auto& q : irrelevant) out.push_back(&q);
    return out;
}

model::ModelConfig model_config_for(const GeneratorConfig& config, model::ModelConfig base) {
    base.grid_width = config.width;
    base.grid_height = config.height;
    base.channels = kChannels;
    base.vocab_size = static_cast<std::uint32_t>(Vocabulary(config.width, config.height).size());
    base.answer_classes = kAnswerClasses;
    return base;
}

}  // namespace sortlab::synth
