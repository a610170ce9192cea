#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "sortlab/error.hpp"
#include "sortlab/metrics.hpp"

namespace sortlab::metrics {

namespace {

void require_groups(std::span<const RankedList> groups, const char* metric) {
    if (groups.empty()) throw Error(ErrorKind::evaluation, std::string(metric) + " over zero groups");
    for (std::size_t i = 0; i < groups.size(); ++i) {
        if (groups[i].empty()) {
            throw Error(ErrorKind::evaluation, std::string(metric) + ": group " + std::to_string(i) +
                                                   " has no candidates");
        }
    }
}

}  // namespace

double mean_precision_at_1(std::span<const RankedList> groups) {
    require_groups(groups, "MP@1");
    double hits = 0.0;
    for (const auto& g : groups) hits += g.front().is_sub ? 1.0 : 0.0;
    return hits / static_cast<double>(groups.size());
}

double ranking_accuracy(std::span<const RankedList> groups) {
    require_groups(groups, "ranking accuracy");
    double ok = 0.0;
    for (const auto& g : groups) {
        // Every sub-question must come before the first irrelevant one.
        bool seen_irrelevant = false, good = true;
        for (const auto& c : g) {
            if (!c.is_sub) seen_irrelevant = true;
            else if (seen_irrelevant) good = false;
        }
        ok += good ? 1.0 : 0.0;
    }
    return ok / static_cast<double>(groups.size());
}

double reciprocal_rank(const RankedList& group) {
    for (std::size_t i = 0; i < group.size(); ++i) {
        if (group[i].is_sub) return 1.0 / static_cast<double>(i + 1);
    }
    throw Error(ErrorKind::evaluation, "group has no sub-question");
}

double mean_reciprocal_rank(std::span<const RankedList> groups) {
    require_groups(groups, "MRR");
    double total = 0.0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        try {
            total += reciprocal_rank(groups[i]);
        } catch (const Error&) {
            throw Error(ErrorKind::evaluation, "MRR: group " + std::to_string(i) + " has no sub-question");
        }
    }
    return total / static_cast<double>(groups.size());
}

double group_wpr(const RankedList& group) {
    RankedList parallel;
    parallel.reserve(group.size());
    for (const auto& c : group)
        if (c.is_sub) parallel.push_back(c);
    for (const auto& c : group)
        if (!c.is_sub) parallel.push_back(c);
    double total = 0.0;
    std::size_t mismatched = 0;
    for (std::size_t i = 0; i < group.size(); ++i) {
        if (group[i].question_id == parallel[i].question_id && group[i].is_sub == parallel[i].is_sub) {
            continue;
        }
        total += std::abs(group[i].score - parallel[i].score);
        ++mismatched;
    }
    return mismatched == 0 ? 0.0 : total / static_cast<double>(mismatched);
}

double wpr_loss(std::span<const RankedList> groups) {
    if (groups.empty()) throw Error(ErrorKind::evaluation, "WPR over zero groups");
    double total = 0.0;
    for (const auto& g : groups) total += group_wpr(g);
    return total / static_cast<double>(groups.size());
}

double consistency_percent(double both_correct, double r_correct_s_wrong) {
    const double denom = both_correct + r_correct_s_wrong;
    return denom == 0.0 ? 100.0 : both_correct / denom * 100.0;
}

ConsistencyResult consistency_report(std::span<const PairRecord> records) {
    if (records.empty()) throw Error(ErrorKind::evaluation, "consistency over zero pairs");
    ConsistencyResult r;
    for (const auto& rec : records) {
        if (rec.reasoning_correct) {
            (rec.sub_correct ? r.counts.rs_both_correct : r.counts.r_correct_s_wrong)++;
        } else {
            (rec.sub_correct ? r.counts.r_wrong_s_correct : r.counts.both_wrong)++;
        }
    }
    r.degenerate = r.counts.rs_both_correct + r.counts.r_correct_s_wrong == 0;
    r.consistency = consistency_percent(static_cast<double>(r.counts.rs_both_correct),
                                        static_cast<double>(r.counts.r_correct_s_wrong));
    return r;
}

double accuracy(std::span<const int> predictions, std::span<const int> truth,
                std::span<const bool> filter) {
    if (predictions.size() != truth.size() || (!filter.empty() && filter.size() != truth.size())) {
        throw Error(ErrorKind::input, "accuracy: prediction, label and filter lengths differ");
    }
    std::size_t n = 0, hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!filter.empty() && !filter[i]) continue;
        ++n;
        hits += predictions[i] == truth[i] ? 1 : 0;
    }
    if (n == 0) throw Error(ErrorKind::evaluation, "accuracy over an empty selection");
    return static_cast<double>(hits) / static_cast<double>(n);
}

std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

SpearmanResult spearman_correlation(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorKind::input, "spearman: maps differ in size");
    if (a.size() < 2) throw Error(ErrorKind::input, "spearman: needs at least two cells");
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double mean = (n + 1.0) / 2.0;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        const double da = ra[i] - mean, db = rb[i] - mean;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) return {0.0, true};
    return {std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0), false};
}

MeanWithError mean_with_error(std::span<const double> values) {
    MeanWithError r;
    if (values.empty()) return r;
    const double n = static_cast<double>(values.size());
    for (double v : values) r.mean += v;
    r.mean /= n;
    if (values.size() < 2) return r;
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    r.standard_error = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    return r;
}

bool MetricsReport::within_bounds() const {
    auto pct = [](double v) { return v >= 0.0 && v <= 100.0; };
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    return pct(quadrant_percentages.rs_both_correct) && pct(quadrant_percentages.r_correct_s_wrong) &&
           pct(quadrant_percentages.r_wrong_s_correct) && pct(quadrant_percentages.both_wrong) &&
           pct(consistency) && pct(reasoning_accuracy) && pct(overall_accuracy) && unit(mp_at_1) &&
           unit(ranking_accuracy) && unit(mrr) && wpr >= 0.0 && wpr <= 2.0 &&
           grounding_spearman.mean >= -1.0 && grounding_spearman.mean <= 1.0 &&
           grounding_spearman.standard_error >= 0.0;
}

using nlohmann::json;

std::string to_json(const MetricsReport& r) {
    json j = {
        {"quadrant-percentages",
         {{"rs-both-correct", r.quadrant_percentages.rs_both_correct},
          {"r-correct-s-wrong", r.quadrant_percentages.r_correct_s_wrong},
          {"r-wrong-s-correct", r.quadrant_percentages.r_wrong_s_correct},
          {"both-wrong", r.quadrant_percentages.both_wrong}}},
        {"consistency", r.consistency},
        {"reasoning-accuracy", r.reasoning_accuracy},
        {"overall-accuracy", r.overall_accuracy},
        {"mp-at-1", r.mp_at_1},
        {"ranking-accuracy", r.ranking_accuracy},
        {"mrr", r.mrr},
        {"wpr", r.wpr},
        {"grounding-spearman",
         {{"mean", r.grounding_spearman.mean}, {"standard-error", r.grounding_spearman.standard_error}}},
    };
    return j.dump(2) + "\n";
}

MetricsReport report_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        MetricsReport r;
        const json& q = j.at("quadrant-percentages");
        r.quadrant_percentages = {q.at("rs-both-correct").get<double>(), q.at("r-correct-s-wrong").get<double>(),
                                  q.at("r-wrong-s-correct").get<double>(), q.at("both-wrong").get<double>()};
        r.consistency = j.at("consistency").get<double>();
        r.reasoning_accuracy = j.at("reasoning-accuracy").get<double>();
        r.overall_accuracy = j.at("overall-accuracy").get<double>();
        r.mp_at_1 = j.at("mp-at-1").get<double>();
        r.ranking_accuracy = j.at("ranking-accuracy").get<double>();
        r.mrr = j.at("mrr").get<double>();
        r.wpr = j.at("wpr").get<double>();
        r.grounding_spearman = {j.at("grounding-spearman").at("mean").get<double>(),
                                j.at("grounding-spearman").at("standard-error").get<double>()};
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::parse, std::string("metrics report: ") + e.what());
    }
}

namespace {

const char* const kColumns[] = {"R+S+",  "R+S-", "R-S+", "R-S-", "Consistency", "Reasoning Acc",
                                "Overall Acc", "MP@1", "Ranking Acc", "MRR", "WPR", "Grounding"};

std::vector<double> row_values(const MetricsReport& r) {
    return {r.quadrant_percentages.rs_both_correct, r.quadrant_percentages.r_correct_s_wrong,
            r.quadrant_percentages.r_wrong_s_correct, r.quadrant_percentages.both_wrong,
            r.consistency, r.reasoning_accuracy, r.overall_accuracy, r.mp_at_1,
            r.ranking_accuracy, r.mrr, r.wpr, r.grounding_spearman.mean,
            r.grounding_spearman.standard_error};
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string render_table(std::span<const std::pair<std::string, MetricsReport>> rows) {
    std::vector<std::vector<std::string>> cells;
    std::vector<std::string> header = {"Variant"};
    header.insert(header.end(), std::begin(kColumns), std::end(kColumns));
    cells.push_back(header);
    for (const auto& [label, r] : rows) {
        const auto v = row_values(r);
        std::vector<std::string> line = {label};
        for (std::size_t i = 0; i < 7; ++i) line.push_back(fixed(v[i], 2));
        for (std::size_t i = 7; i < 11; ++i) line.push_back(fixed(v[i], 4));
        line.push_back(fixed(v[11], 4) + " +- " + fixed(v[12], 4));
        cells.push_back(line);
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& line : cells)
        for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
    std::ostringstream os;
    for (const auto& line : cells) {
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (i) os << " | ";
            if (i == 0) os << line[i] << std::string(width[i] - line[i].size(), ' ');
            else os << std::string(width[i] - line[i].size(), ' ') << line[i];
        }
        os << '\n';
    }
    return os.str();
}

std::string render_csv(std::span<const std::pair<std::string, MetricsReport>> rows) {
    std::ostringstream os;
    os << "variant,rs_both_correct,r_correct_s_wrong,r_wrong_s_correct,both_wrong,consistency,"
          "reasoning_accuracy,overall_accuracy,mp_at_1,ranking_accuracy,mrr,wpr,grounding_mean,"
          "grounding_standard_error\n";
    for (const auto& [label, r] : rows) {
        os << label;
        for (double v : row_values(r)) {
            char buf[64];
            std::snprintf(buf, sizeof buf, ",%.17g", v);
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

std::vector<std::pair<std::string, MetricsReport>> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    std::vector<std::pair<std::string, MetricsReport>> out;
    int number = 1;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream ls(line);
        std::string f;
        while (std::getline(ls, f, ',')) fields.push_back(f);
        if (fields.size() != 14) {
            throw Error(ErrorKind::parse, "comparison csv line " + std::to_string(number) + ": expected 14 fields");
        }
        std::vector<double> v;
        for (std::size_t i = 1; i < fields.size(); ++i) v.push_back(std::stod(fields[i]));
        MetricsReport r;
        r.quadrant_percentages = {v[0], v[1], v[2], v[3]};
        r.consistency = v[4];
        r.reasoning_accuracy = v[5];
        r.overall_accuracy = v[6];
        r.mp_at_1 = v[7];
        r.ranking_accuracy = v[8];
        r.mrr = v[9];
        r.wpr = v[10];
        r.grounding_spearman = {v[11], v[12]};
        out.emplace_back(fields[0], r);
    }
    return out;
}

}  // namespace sortlab::metrics
