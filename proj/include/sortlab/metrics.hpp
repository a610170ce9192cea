#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sortlab::metrics {

struct RankedCandidate {
    int question_id = 0;
    double score = 0.0;
    bool is_sub = false;
};

// One group's candidates in rank order (rank 1 first).
using RankedList = std::vector<RankedCandidate>;

double mean_precision_at_1(std::span<const RankedList> groups);
double ranking_accuracy(std::span<const RankedList> groups);
double mean_reciprocal_rank(std::span<const RankedList> groups);
double wpr_loss(std::span<const RankedList> groups);

// Per-group pieces of the above, exposed for reporting and tests.
double group_wpr(const RankedList& group);
double reciprocal_rank(const RankedList& group);

struct QuadrantCounts {
    std::size_t rs_both_correct = 0;
    std::size_t r_correct_s_wrong = 0;
    std::size_t r_wrong_s_correct = 0;
    std::size_t both_wrong = 0;

    std::size_t total() const {
        return rs_both_correct + r_correct_s_wrong + r_wrong_s_correct + both_wrong;
    }
};

struct PairRecord {
    bool reasoning_correct = false;
    bool sub_correct = false;
};

struct ConsistencyResult {
    QuadrantCounts counts;
    double consistency = 100.0;  // percent
    bool degenerate = false;     // no pair with a correct reasoning answer
};

ConsistencyResult consistency_report(std::span<const PairRecord> records);

// both / (both + r_correct_s_wrong) * 100, from counts or percentage shares.
double consistency_percent(double both_correct, double r_correct_s_wrong);

// Fraction of exact matches, optionally restricted to entries with filter[i] set.
double accuracy(std::span<const int> predictions, std::span<const int> truth,
                std::span<const bool> filter = {});

// Ranks starting at 1; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

struct SpearmanResult {
    double value = 0.0;
    bool degenerate = false;  // one of the maps is constant
};

SpearmanResult spearman_correlation(std::span<const double> a, std::span<const double> b);

struct MeanWithError {
    double mean = 0.0;
    double standard_error = 0.0;
};

// Sample standard deviation over sqrt(n); zero error for fewer than two values.
MeanWithError mean_with_error(std::span<const double> values);

struct QuadrantShares {
    double rs_both_correct = 0.0;
    double r_correct_s_wrong = 0.0;
    double r_wrong_s_correct = 0.0;
    double both_wrong = 0.0;
};

struct MetricsReport {
    QuadrantShares quadrant_percentages;
    double consistency = 0.0;
    double reasoning_accuracy = 0.0;
    double overall_accuracy = 0.0;
    double mp_at_1 = 0.0;
    double ranking_accuracy = 0.0;
    double mrr = 0.0;
    double wpr = 0.0;
    MeanWithError grounding_spearman;

    // Percentages in [0, 100] and ranking metrics in their natural bounds.
    bool within_bounds() const;
};

std::string to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);

// Aligned table, one row per labelled report, columns in the order
// R+S+ | R+S- | R-S+ | R-S- | Consistency | Reasoning Acc | Overall Acc | MP@1 |
// Ranking Acc | MRR | WPR | Grounding.
std::string render_table(std::span<const std::pair<std::string, MetricsReport>> rows);

// Same columns as render_table, comma separated with a header line.
std::string render_csv(std::span<const std::pair<std::string, MetricsReport>> rows);
std::vector<std::pair<std::string, MetricsReport>> parse_csv(const std::string& text);

}  // namespace sortlab::metrics
