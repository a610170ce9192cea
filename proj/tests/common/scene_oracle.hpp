#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "sortlab/synthdata.hpp"

namespace scene_oracle {

using sortlab::synth::answer_name;
using sortlab::synth::Cell;
using sortlab::synth::GridScene;
using sortlab::synth::Question;
using sortlab::synth::Template;

// Oracle written against the raw scene, sharing nothing with the generator.
// Answers as strings to avoid leaning on the answer enum.
inline std::string oracle_answer(const GridScene& s, const Question& q) {
    const auto& p = q.params;
    static const char* colors[] = {"red", "green", "blue"};
    static const char* shapes[] = {"circle", "square", "triangle"};
    auto cell = [&](int x, int y) { return s.cells[static_cast<std::size_t>(y) * s.width + static_cast<std::size_t>(x)]; };
    auto line = [&](int orientation, int index) {
        std::vector<Cell> out;
        const int n = orientation == 0 ? static_cast<int>(s.width) : static_cast<int>(s.height);
        for (int i = 0; i < n; ++i) out.push_back(orientation == 0 ? cell(i, index) : cell(index, i));
        return out;
    };
    switch (q.template_id) {
        case Template::count_compare: {
            int a = 0, b = 0;
            for (const Cell& c : line(p[0], p[1])) {
                if (!c.present) continue;
                a += c.color == p[2];
                b += c.color == p[3];
            }
            return a > b ? "yes" : "no";
        }
        case Template::line_universal: {
            for (const Cell& c : line(p[0], p[1]))
                if (c.present && c.shape != p[2]) return "no";
            return "yes";
        }
        case Template::conjunction: {
            const Cell c = cell(p[0], p[1]);
            return c.present && c.color == p[2] && c.shape == p[3] ? "yes" : "no";
        }
        case Template::what_color: {
            const Cell c = cell(p[0], p[1]);
            return c.present ? colors[c.color] : "none";
        }
        case Template::what_shape: {
            const Cell c = cell(p[0], p[1]);
            return c.present ? shapes[c.shape] : "none";
        }
    }
    return "?";
}

// Rule applied to sub-question answers only, coded separately from the library.
inline std::string rule_from_subs(const Question& r, const std::vector<Question>& subs) {
    static const char* colors[] = {"red", "green", "blue"};
    static const char* shapes[] = {"circle", "square", "triangle"};
    const auto& p = r.params;
    if (r.template_id == Template::count_compare) {
        int a = 0, b = 0;
        for (const auto& s : subs) {
            a += answer_name(s.answer) == colors[p[2]];
            b += answer_name(s.answer) == colors[p[3]];
        }
        return a > b ? "yes" : "no";
    }
    if (r.template_id == Template::line_universal) {
        return std::all_of(subs.begin(), subs.end(),
                           [&](const Question& s) { return answer_name(s.answer) == shapes[p[2]]; })
                   ? "yes"
                   : "no";
    }
    bool color_ok = false, shape_ok = false;
    for (const auto& s : subs) {
        if (s.template_id == Template::what_color) color_ok = answer_name(s.answer) == colors[p[2]];
        if (s.template_id == Template::what_shape) shape_ok = answer_name(s.answer) == shapes[p[3]];
    }
    return color_ok && shape_ok ? "yes" : "no";
}

}  // namespace scene_oracle
