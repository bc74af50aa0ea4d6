#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svbrd/error.hpp"

namespace svbrd {

inline constexpr std::string_view kUndetermined = "undetermined";

/// counts[t][p]: samples of true class t predicted as class p.
struct ConfusionMatrix {
    std::vector<std::string> classes;
    std::vector<std::vector<std::size_t>> counts;

    explicit ConfusionMatrix(std::vector<std::string> cls = {})
        : classes(std::move(cls)), counts(classes.size(), std::vector<std::size_t>(classes.size(), 0)) {}

    /// Binary matrix with the first class positive.
    static ConfusionMatrix binary(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn,
                                  std::string positive = "AV", std::string negative = "HDV") {
        ConfusionMatrix m({std::move(positive), std::move(negative)});
        m.counts = {{tp, fn}, {fp, tn}};
        return m;
    }

    std::size_t index(std::string_view name) const {
        auto it = std::find(classes.begin(), classes.end(), name);
        if (it == classes.end()) throw Error(ErrorCode::InvalidArgument, "unknown class '" + std::string(name) + "'");
        return static_cast<std::size_t>(it - classes.begin());
    }

    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& row : counts) n = std::accumulate(row.begin(), row.end(), n);
        return n;
    }
    std::size_t correct() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < counts.size(); ++i) n += counts[i][i];
        return n;
    }
    std::size_t predicted_as(std::size_t c) const {
        std::size_t n = 0;
        for (const auto& row : counts) n += row[c];
        return n;
    }
    std::size_t support(std::size_t c) const { return std::accumulate(counts[c].begin(), counts[c].end(), std::size_t{0}); }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct ClassMetrics {
    std::string name;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;

    friend bool operator==(const ClassMetrics&, const ClassMetrics&) = default;
};

struct MetricsReport {
    ConfusionMatrix confusion;
    double accuracy = 0.0;
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    std::optional<double> roc_auc;
    std::size_t n_samples = 0;
    std::size_t n_undetermined = 0;

    /// Positive-class metrics of a binary task (first class).
    const ClassMetrics& positive() const { return per_class.front(); }

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

inline double f1_score(double precision, double recall) {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

inline MetricsReport metrics_from_matrix(ConfusionMatrix cm) {
    MetricsReport rep;
    const std::size_t total = cm.total();
    rep.n_samples = total;
    rep.accuracy = total ? static_cast<double>(cm.correct()) / static_cast<double>(total) : 0.0;
    for (std::size_t c = 0; c < cm.classes.size(); ++c) {
        ClassMetrics m;
        m.name = cm.classes[c];
        m.support = cm.support(c);
        const std::size_t tp = cm.counts[c][c];
        const std::size_t pred = cm.predicted_as(c);
        m.precision = pred ? static_cast<double>(tp) / static_cast<double>(pred) : 0.0;
        m.recall = m.support ? static_cast<double>(tp) / static_cast<double>(m.support) : 0.0;
        m.f1 = f1_score(m.precision, m.recall);
        rep.macro_precision += m.precision;
        rep.macro_recall += m.recall;
        rep.macro_f1 += m.f1;
        rep.per_class.push_back(std::move(m));
    }
    if (!cm.classes.empty()) {
        const auto k = static_cast<double>(cm.classes.size());
        rep.macro_precision /= k;
        rep.macro_recall /= k;
        rep.macro_f1 /= k;
    }
    rep.confusion = std::move(cm);
    return rep;
}

enum class UndeterminedPolicy { exclude, count_as_wrong };

/// Aligned predictions and labels over the given classes. Predictions equal
/// to "undetermined" are counted in n_undetermined and either left out of
/// the matrix or booked as a miss against the first other class.
inline MetricsReport compute_metrics(std::span<const std::string> predictions, std::span<const std::string> labels,
                                     std::vector<std::string> classes,
                                     UndeterminedPolicy policy = UndeterminedPolicy::exclude) {
    if (predictions.size() != labels.size()) {
        throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                                   std::to_string(labels.size()) + " labels");
    }
    if (predictions.empty()) throw Error(ErrorCode::EmptyInput, "no predictions to score");
    if (classes.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two classes");
    ConfusionMatrix cm(std::move(classes));
    std::size_t undetermined = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const std::size_t t = cm.index(labels[i]);
        if (predictions[i] == kUndetermined) {
            ++undetermined;
            if (policy == UndeterminedPolicy::count_as_wrong) ++cm.counts[t][t == 0 ? 1 : 0];
            continue;
        }
        ++cm.counts[t][cm.index(predictions[i])];
    }
    if (cm.total() == 0) throw Error(ErrorCode::EmptyInput, "every prediction is undetermined");
    auto rep = metrics_from_matrix(std::move(cm));
    rep.n_undetermined = undetermined;
    return rep;
}

/// Area under the ROC curve via the rank-sum statistic; tied scores get
/// their average rank, which equals the trapezoidal sweep.
inline double compute_roc_auc(std::span<const double> scores, const std::vector<bool>& positive) {
    if (scores.size() != positive.size()) throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
    const auto n_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
    const std::size_t n_neg = positive.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw Error(ErrorCode::DegenerateLabels, "ROC-AUC needs both classes");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (positive[order[k]]) rank_sum += avg_rank;
        }
        i = j + 1;
    }
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

}  // namespace svbrd
