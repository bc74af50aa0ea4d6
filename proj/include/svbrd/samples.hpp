#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "svbrd/features.hpp"
#include "svbrd/lane_change.hpp"
#include "svbrd/rule.hpp"
#include "svbrd/types.hpp"

namespace svbrd {

/// One vehicle as seen by the rule stages: its features, traffic context,
/// optional ground-truth label and a compact digest of the trajectory.
struct Sample {
    std::string vehicle_id;
    FeatureVector features;
    TrafficContext context = TrafficContext::free_flow;
    std::optional<Label> label;
    std::vector<LaneChangeEvent> lane_changes;
    std::vector<double> speed_profile;  ///< speed sampled once per second

    friend bool operator==(const Sample&, const Sample&) = default;
};

struct RuleStats {
    std::string rule_id;
    int iteration = 0;
    std::size_t n_samples = 0;     ///< validation set size
    std::size_t n_applicable = 0;  ///< samples where the rule applied
    std::size_t n_correct = 0;
    std::size_t n_indicated = 0;          ///< applicable samples carrying the rule's indicated label
    std::size_t n_indicated_matched = 0;  ///< ... of which the rule matched
    double confidence = 0.0;
    bool no_coverage = false;

    double recall() const {
        return n_indicated == 0 ? 0.0 : static_cast<double>(n_indicated_matched) / static_cast<double>(n_indicated);
    }

    friend bool operator==(const RuleStats&, const RuleStats&) = default;
};

/// Validation sample on which a rule's label prediction was wrong.
struct FailureCase {
    Sample sample;
    Label true_label = Label::AV;
    Label predicted_label = Label::AV;
    /// Verdict of every rule in the library on this sample, in library order.
    std::vector<std::pair<std::string, Verdict>> rule_verdicts;
};

}  // namespace svbrd
