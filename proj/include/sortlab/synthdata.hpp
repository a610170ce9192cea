#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sortlab/model.hpp"

namespace sortlab::synth {

inline constexpr int kShapeCount = 3;  // circle, square, triangle
inline constexpr int kColorCount = 3;  // red, green, blue
inline constexpr std::uint32_t kChannels = 1 + kShapeCount + kColorCount;

const std::string& shape_name(int shape);
const std::string& color_name(int color);

// Answer classes: yes, no, the colors, the shapes, none.
enum Answer : int { kYes = 0, kNo = 1, kFirstColor = 2, kFirstShape = 5, kNone = 8 };
inline constexpr std::uint32_t kAnswerClasses = 9;
const std::string& answer_name(int answer);
inline int color_answer(int color) { return kFirstColor + color; }
inline int shape_answer(int shape) { return kFirstShape + shape; }

struct Cell {
    bool present = false;
    int shape = 0;
    int color = 0;
    bool operator==(const Cell&) const = default;
};

struct CellRef {
    std::uint32_t x = 0;
    std::uint32_t y = 0;
    auto operator<=>(const CellRef&) const = default;
};

struct GridScene {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<Cell> cells;  // y * width + x
    std::uint64_t scene_id = 0;

    const Cell& at(std::uint32_t x, std::uint32_t y) const { return cells[y * width + x]; }
    Cell& at(std::uint32_t x, std::uint32_t y) { return cells[y * width + x]; }

    // One-hot planes per cell: presence, shape one-hot, color one-hot.
    model::SceneTensor encode() const;
    static GridScene decode(const model::SceneTensor& tensor, std::uint64_t scene_id = 0);
    bool operator==(const GridScene&) const = default;
};

enum class Role { reasoning, sub, irrelevant };
const char* role_name(Role role);
Role role_from_name(const std::string& name);

// Template parameters:
//   count_compare   {orientation, index, color_a, color_b}  more color_a than color_b in the line
//   line_universal  {orientation, index, shape}             every object in the line has shape
//   conjunction     {x, y, color, shape}                    the cell holds a color shape
//   what_color      {x, y}
//   what_shape      {x, y}
// orientation 0 is a row (index = y), 1 is a column (index = x).
enum class Template { count_compare, line_universal, conjunction, what_color, what_shape };
const char* template_name(Template t);
Template template_from_name(const std::string& name);

struct Question {
    int question_id = 0;
    Template template_id = Template::what_color;
    std::vector<int> params;
    std::vector<int> tokens;
    Role role = Role::sub;
    int answer = 0;
    std::vector<CellRef> target_cells;
    bool operator==(const Question&) const = default;
};

struct QuestionGroup {
    std::uint64_t group_id = 0;
    GridScene scene;
    Question reasoning;
    std::vector<Question> subs;
    std::vector<Question> irrelevant;
    std::vector<std::uint8_t> mask;  // y * width + x, 1 on reasoning target cells

    // Reasoning first, then subs, then irrelevant questions.
    std::vector<const Question*> all_questions() const;
    bool operator==(const QuestionGroup&) const = default;
};

class Vocabulary {
public:
    Vocabulary(std::uint32_t width, std::uint32_t height);

    std::size_t size() const { return tokens_.size(); }
    int id(const std::string& token) const;
    const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

    std::vector<int> encode(const Question& q) const;

private:
    std::uint32_t width_;
    std::uint32_t height_;
    std::vector<std::string> tokens_;
};

struct GeneratorConfig {
    std::uint32_t width = 4;
    std::uint32_t height = 4;
    double presence = 0.5;
    double mix_count = 1.0;
    double mix_line = 1.0;
    double mix_conjunction = 1.0;
    double mean_subs = 2.58;
    double mean_irrelevant = 7.63;
    // Background objects lean toward the reasoning answer by this much
    // probability mass, giving the model a shortcut that bypasses the sub-questions.
    double shortcut_bias = 0.25;
    std::uint64_t seed = 1;
    std::uint32_t groups = 2000;

    void validate() const;
    std::string to_text() const;
    static GeneratorConfig from_text(const std::string& text);
    static GeneratorConfig load(const std::string& path);
    bool operator==(const GeneratorConfig&) const = default;
};

// Model dimensions fixed by the grid and the closed vocabulary.
model::ModelConfig model_config_for(const GeneratorConfig& config, model::ModelConfig base = {});

QuestionGroup generate_group(std::uint64_t rng_seed, const GeneratorConfig& config);
std::vector<QuestionGroup> generate_dataset(const GeneratorConfig& config);

// Applies the template's rule to the sub-question answers.
int reasoning_answer_from_subs(const Question& reasoning, const std::vector<Question>& subs);

std::string render_question(const Question& q);

struct Dataset {
    GeneratorConfig config;
    std::vector<QuestionGroup> groups;
};

// The generator block of the dataset header, as a JSON object.
std::string generator_config_json(const GeneratorConfig& config);
GeneratorConfig generator_config_from_json(const std::string& text);

void serialize_dataset(const std::vector<QuestionGroup>& groups, const GeneratorConfig& config,
                       const std::string& path);
Dataset load_dataset(const std::string& path, const model::ModelConfig* expected = nullptr);

std::pair<std::vector<QuestionGroup>, std::vector<QuestionGroup>> split_dataset(
    const std::vector<QuestionGroup>& groups, double train_fraction, std::uint64_t seed);

}  // namespace sortlab::synth
