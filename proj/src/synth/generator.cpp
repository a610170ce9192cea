#include <algorithm>
#include <cmath>

#include "sortlab/error.hpp"
#include "sortlab/rng.hpp"
#include "sortlab/synthdata.hpp"

namespace sortlab::synth {

namespace {

constexpr int kAttempts = 16;
constexpr int kAnswerRetries = 100;
constexpr int kIrrelevantSpread = 6;

// Draw one of three attribute values, shifting probability mass toward
// `favored` and away from `avoided` (-1 disables either).
int biased_draw(Rng& rng, double bias, int favored, int avoided) {
    std::vector<double> p(3, 1.0 / 3.0);
    if (favored >= 0) p[static_cast<std::size_t>(favored)] += bias;
    if (avoided >= 0) p[static_cast<std::size_t>(avoided)] -= bias;
    for (double& v : p) v = std::max(v, 0.0);
    return static_cast<int>(rng.categorical(p));
}

int uniform3(Rng& rng) { return static_cast<int>(rng.below(3)); }

std::vector<CellRef> line_cells(const GeneratorConfig& c, int orientation, int index) {
    std::vector<CellRef> out;
    if (orientation == 0) {
        for (std::uint32_t x = 0; x < c.width; ++x) out.push_back({x, static_cast<std::uint32_t>(index)});
    } else {
        for (std::uint32_t y = 0; y < c.height; ++y) out.push_back({static_cast<std::uint32_t>(index), y});
    }
    return out;
}

// Success probability for the number of extra objects placed in a line so
// that the dataset-wide mean sub-question count matches the configured value.
double line_fill_probability(const GeneratorConfig& c) {
    const double total = c.mix_count + c.mix_line + c.mix_conjunction;
    const double w_line = (c.mix_count + c.mix_line) / total;
    const double w_conj = c.mix_conjunction / total;
    const double mean_extra = ((static_cast<double>(c.width) - 1) + (static_cast<double>(c.height) - 1)) / 2.0;
    if (w_line <= 0.0 || mean_extra <= 0.0) return 0.0;
    const double line_mean = (c.mean_subs - 2.0 * w_conj) / w_line;
    return std::clamp((line_mean - 1.0) / mean_extra, 0.0, 1.0);
}

Question perception(Template t, std::uint32_t x, std::uint32_t y, Role role, const GridScene& scene) {
    Question q;
    q.template_id = t;
    q.params = {static_cast<int>(x), static_cast<int>(y)};
    q.role = role;
    q.target_cells = {{x, y}};
    const Cell& cell = scene.at(x, y);
    if (!cell.present) {
        q.answer = kNone;
    } else {
        q.answer = t == Template::what_color ? color_answer(cell.color) : shape_answer(cell.shape);
    }
    return q;
}

struct Draft {
    GridScene scene;
    Question reasoning;
    std::vector<Question> subs;
};

void fill_background(Draft& d, Rng& rng, const GeneratorConfig& c, int favored_color,
                     int avoided_color, int favored_shape, int avoided_shape) {
    for (auto& cell : d.scene.cells) {
        cell = Cell{};
        if (!rng.bernoulli(c.presence)) continue;
        cell.present = true;
        cell.shape = biased_draw(rng, c.shortcut_bias, favored_shape, avoided_shape);
        cell.color = biased_draw(rng, c.shortcut_bias, favored_color, avoided_color);
    }
}

// Place k objects at random positions of a line, clearing the rest of it.
std::vector<CellRef> place_in_line(Rng& rng, const std::vector<CellRef>& line, int k) {
    std::vector<CellRef> slots = line;
    rng.shuffle(slots);
    slots.resize(static_cast<std::size_t>(k));
    std::sort(slots.begin(), slots.end(), [](const CellRef& a, const CellRef& b) {
        return a.y != b.y ? a.y < b.y : a.x < b.x;
    });
    return slots;
}

Draft count_compare(Rng& rng, const GeneratorConfig& c, double fill) {
    Draft d;
    d.scene = GridScene{c.width, c.height, std::vector<Cell>(static_cast<std::size_t>(c.width) * c.height), 0};
    const int orientation = static_cast<int>(rng.below(2));
    const int index = static_cast<int>(rng.below(orientation == 0 ? c.height : c.width));
    const int ca = uniform3(rng);
    const int cb = (ca + 1 + static_cast<int>(rng.below(2))) % 3;
    const bool want = rng.bernoulli(0.5);
    fill_background(d, rng, c, want ? ca : cb, want ? cb : ca, -1, -1);

    const auto line = line_cells(c, orientation, index);
    const int k = 1 + rng.binomial(static_cast<int>(line.size()) - 1, fill);
    for (const auto& ref : line) d.scene.at(ref.x, ref.y) = Cell{};
    const auto slots = place_in_line(rng, line, k);
    std::vector<int> colors(static_cast<std::size_t>(k));
    for (int attempt = 0; attempt < kAnswerRetries; ++attempt) {
        for (int& col : colors) col = uniform3(rng);
        const auto na = std::count(colors.begin(), colors.end(), ca);
        const auto nb = std::count(colors.begin(), colors.end(), cb);
        if ((na > nb) == want) break;
    }
    for (std::size_t i = 0; i < slots.size(); ++i) {
        d.scene.at(slots[i].x, slots[i].y) = Cell{true, uniform3(rng), colors[i]};
    }

    d.reasoning.template_id = Template::count_compare;
    d.reasoning.params = {orientation, index, ca, cb};
    d.reasoning.target_cells = line;
    for (const auto& ref : slots) {
        d.subs.push_back(perception(Template::what_color, ref.x, ref.y, Role::sub, d.scene));
    }
    return d;
}

Draft line_universal(Rng& rng, const GeneratorConfig& c, double fill) {
    Draft d;
    d.scene = GridScene{c.width, c.height, std::vector<Cell>(static_cast<std::size_t>(c.width) * c.height), 0};
    const int orientation = static_cast<int>(rng.below(2));
    const int index = static_cast<int>(rng.below(orientation == 0 ? c.height : c.width));
    const int shape = uniform3(rng);
    const bool want = rng.bernoulli(0.5);
    fill_background(d, rng, c, -1, -1, want ? shape : -1, want ? -1 : shape);

    const auto line = line_cells(c, orientation, index);
    const int k = 1 + rng.binomial(static_cast<int>(line.size()) - 1, fill);
    for (const auto& ref : line) d.scene.at(ref.x, ref.y) = Cell{};
    const auto slots = place_in_line(rng, line, k);
    std::vector<int> shapes(static_cast<std::size_t>(k), shape);
    if (!want) {
        for (int attempt = 0; attempt < kAnswerRetries; ++attempt) {
            for (int& s : shapes) s = uniform3(rng);
            if (std::count(shapes.begin(), shapes.end(), shape) != k) break;
        }
    }
    for (std::size_t i = 0; i < slots.size(); ++i) {
        d.scene.at(slots[i].x, slots[i].y) = Cell{true, shapes[i], uniform3(rng)};
    }

    d.reasoning.template_id = Template::line_universal;
    d.reasoning.params = {orientation, index, shape};
    d.reasoning.target_cells = line;
    for (const auto& ref : slots) {
        d.subs.push_back(perception(Template::what_shape, ref.x, ref.y, Role::sub, d.scene));
    }
    return d;
}

Draft conjunction(Rng& rng, const GeneratorConfig& c) {
    Draft d;
    d.scene = GridScene{c.width, c.height, std::vector<Cell>(static_cast<std::size_t>(c.width) * c.height), 0};
    const auto x = static_cast<std::uint32_t>(rng.below(c.width));
    const auto y = static_cast<std::uint32_t>(rng.below(c.height));
    const int color = uniform3(rng);
    const int shape = uniform3(rng);
    const bool want = rng.bernoulli(0.5);
    fill_background(d, rng, c, want ? color : -1, want ? -1 : color, want ? shape : -1,
                    want ? -1 : shape);

    Cell target{true, shape, color};
    if (!want) {
        const auto mode = rng.below(3);
        if (mode != 1) target.shape = (shape + 1 + static_cast<int>(rng.below(2))) % 3;
        if (mode != 0) target.color = (color + 1 + static_cast<int>(rng.below(2))) % 3;
    }
    d.scene.at(x, y) = target;

    d.reasoning.template_id = Template::conjunction;
    d.reasoning.params = {static_cast<int>(x), static_cast<int>(y), color, shape};
    d.reasoning.target_cells = {{x, y}};
    d.subs.push_back(perception(Template::what_color, x, y, Role::sub, d.scene));
    d.subs.push_back(perception(Template::what_shape, x, y, Role::sub, d.scene));
    return d;
}

}  // namespace

int reasoning_answer_from_subs(const Question& reasoning, const std::vector<Question>& subs) {
    const auto& p = reasoning.params;
    switch (reasoning.template_id) {
        case Template::count_compare: {
            int na = 0, nb = 0;
            for (const auto& s : subs) {
                na += s.answer == color_answer(p[2]) ? 1 : 0;
                nb += s.answer == color_answer(p[3]) ? 1 : 0;
            }
            return na > nb ? kYes : kNo;
        }
        case Template::line_universal: {
            for (const auto& s : subs) {
                if (s.answer != shape_answer(p[2])) return kNo;
            }
            return kYes;
        }
        case Template::conjunction: {
            bool color_ok = false, shape_ok = false;
            for (const auto& s : subs) {
                if (s.template_id == Template::what_color) color_ok = s.answer == color_answer(p[2]);
                if (s.template_id == Template::what_shape) shape_ok = s.answer == shape_answer(p[3]);
            }
            return color_ok && shape_ok ? kYes : kNo;
        }
        default:
            throw Error(ErrorKind::input, "not a reasoning template");
    }
}

QuestionGroup generate_group(std::uint64_t rng_seed, const GeneratorConfig& config) {
    config.validate();
    Rng rng(rng_seed);
    const double fill = line_fill_probability(config);
    const Vocabulary vocab(config.width, config.height);
    const std::vector<double> mix = {config.mix_count, config.mix_line, config.mix_conjunction};

    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        Draft d;
        switch (rng.categorical(mix)) {
            case 0: d = count_compare(rng, config, fill); break;
            case 1: d = line_universal(rng, config, fill); break;
            default: d = conjunction(rng, config); break;
        }
        d.reasoning.role = Role::reasoning;
        d.reasoning.answer = reasoning_answer_from_subs(d.reasoning, d.subs);

        const double round_mean = std::round(config.mean_irrelevant);
        const int base = static_cast<int>(std::max(0.0, round_mean - kIrrelevantSpread / 2));
        const double p = std::clamp((config.mean_irrelevant - base) / kIrrelevantSpread, 0.0, 1.0);
        const int wanted = base + rng.binomial(kIrrelevantSpread, p);

        // Candidate perception questions outside the reasoning cells; occupied
        // cells first so "none" answers appear only when the grid runs short.
        std::vector<std::pair<CellRef, Template>> occupied, empty;
        for (std::uint32_t y = 0; y < config.height; ++y) {
            for (std::uint32_t x = 0; x < config.width; ++x) {
                const CellRef ref{x, y};
                if (std::find(d.reasoning.target_cells.begin(), d.reasoning.target_cells.end(), ref) !=
                    d.reasoning.target_cells.end()) {
                    continue;
                }
                auto& pool = d.scene.at(x, y).present ? occupied : empty;
                pool.push_back({ref, Template::what_color});
                pool.push_back({ref, Template::what_shape});
            }
        }
        if (wanted > 0 && occupied.empty() && empty.empty()) continue;
        rng.shuffle(occupied);
        rng.shuffle(empty);
        occupied.insert(occupied.end(), empty.begin(), empty.end());
        occupied.resize(std::min(occupied.size(), static_cast<std::size_t>(wanted)));

        QuestionGroup g;
        g.scene = std::move(d.scene);
        g.reasoning = std::move(d.reasoning);
        g.subs = std::move(d.subs);
        for (const auto& [ref, t] : occupied) {
            g.irrelevant.push_back(perception(t, ref.x, ref.y, Role::irrelevant, g.scene));
        }

        // Candidate ids are a random permutation so that id-based tie breaking
        // carries no information about relevance.
        std::vector<int> ids(g.subs.size() + g.irrelevant.size());
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i) + 1;
        rng.shuffle(ids);
        std::size_t next = 0;
        g.reasoning.question_id = 0;
        g.reasoning.tokens = vocab.encode(g.reasoning);
        for (auto* list : {&g.subs, &g.irrelevant}) {
            for (auto& q : *list) {
                q.question_id = ids[next++];
                q.tokens = vocab.encode(q);
            }
        }
        g.mask.assign(g.scene.cells.size(), 0);
        for (const auto& ref : g.reasoning.target_cells) g.mask[ref.y * config.width + ref.x] = 1;
        return g;
    }
    throw Error(ErrorKind::generation, "could not place irrelevant questions outside the reasoning cells after " +
                                           std::to_string(kAttempts) + " attempts");
}

std::vector<QuestionGroup> generate_dataset(const GeneratorConfig& config) {
    config.validate();
    std::vector<QuestionGroup> groups;
    groups.reserve(config.groups);
    for (std::uint32_t i = 0; i < config.groups; ++i) {
        QuestionGroup g = generate_group(derive_seed(config.seed, i), config);
        g.group_id = i;
        g.scene.scene_id = i;
        groups.push_back(std::move(g));
    }
    return groups;
}

std::pair<std::vector<QuestionGroup>, std::vector<QuestionGroup>> split_dataset(
    const std::vector<QuestionGroup>& groups, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw Error(ErrorKind::config, "train fraction must lie strictly between 0 and 1");
    }
    std::vector<std::size_t> order(groups.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(groups.size())));
    std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> val_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::pair<std::vector<QuestionGroup>, std::vector<QuestionGroup>> out;
    for (std::size_t i : train_idx) out.first.push_back(groups[i]);
    for (std::size_t i : val_idx) out.second.push_back(groups[i]);
    return out;
}

}  // namespace sortlab::synth
