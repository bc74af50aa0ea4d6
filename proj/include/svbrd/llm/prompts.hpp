#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svbrd/error.hpp"
#include "svbrd/llm/response_parser.hpp"
#include "svbrd/rule.hpp"
#include "svbrd/samples.hpp"

namespace svbrd::llm {

enum class Role { system, user };

constexpr std::string_view to_string(Role r) { return r == Role::system ? "system" : "user"; }

struct ChatMessage {
    Role role = Role::user;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

enum class PromptKind { discovery, verification, reflection, identification };

constexpr std::string_view to_string(PromptKind k) {
    switch (k) {
        case PromptKind::discovery: return "discovery";
        case PromptKind::verification: return "verification";
        case PromptKind::reflection: return "reflection";
        case PromptKind::identification: return "identification";
    }
    return "?";
}

/// A prompt ready to send: its kind (used by the mock backend for fixture
/// lookup), an optional subject such as the rule under reflection, and the
/// message list.
struct Prompt {
    PromptKind kind = PromptKind::discovery;
    std::string subject;
    std::vector<ChatMessage> messages;

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& m : messages) n += m.content.size();
        return n;
    }

    friend bool operator==(const Prompt&, const Prompt&) = default;
};

inline constexpr std::size_t kDefaultPromptBudget = 60000;

namespace detail {

inline double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

}  // namespace detail

/// Compact JSON digest of a sample as embedded in prompts.
inline nlohmann::json sample_digest(const Sample& s, bool include_label) {
    using detail::round3;
    nlohmann::json features = nlohmann::json::object();
    for (const auto& [atom, name] : svbrd::detail::kAtoms) {
        if (auto v = s.features.value(atom)) features[std::string(name)] = round3(*v);
    }
    nlohmann::json j;
    j["id"] = s.vehicle_id;
    if (include_label && s.label) j["label"] = std::string(to_string(*s.label));
    j["context"] = std::string(to_string(s.context));
    j["duration_s"] = round3(s.features.duration);
    j["features"] = std::move(features);
    nlohmann::json lcs = nlohmann::json::array();
    for (const auto& e : s.lane_changes) {
        lcs.push_back({{"start_frame", e.start_frame},
                       {"end_frame", e.end_frame},
                       {"direction", std::string(to_string(e.direction))},
                       {"lateral_displacement", round3(e.cumulative_displacement)}});
    }
    j["lane_changes"] = std::move(lcs);
    nlohmann::json profile = nlohmann::json::array();
    for (double v : s.speed_profile) profile.push_back(round3(v));
    j["speed_profile_1hz"] = std::move(profile);
    return j;
}

inline std::string digest_array(std::span<const Sample> samples, bool include_label) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : samples) arr.push_back(sample_digest(s, include_label));
    return arr.dump();
}

inline std::string rule_block_format_help() {
    return "Output format: emit every rule as a fenced block tagged `rule`, one `key: value` pair per line:\n"
           "```rule\n"
           "id: <short token such as R1>\n"
           "description: <one-line natural language description>\n"
           "condition: <predicate, e.g. std_jerk < 0.3 AND mean_speed > 2>\n"
           "contexts: <any | free_flow | congested>\n"
           "tasks: <comma separated subset of identification, speed, lane_change>\n"
           "category: <speed | lane_change | following | smoothness>\n"
           "polarity: <AV_indicative | HDV_indicative>\n"
           "outcome: <optional; accelerate | decelerate | maintain | left_LC | right_LC | keep_lane>\n"
           "```\n"
           "Conditions use the feature names mean_speed, std_speed, mean_accel, std_accel, std_jerk, "
           "lane_change_count, max_decel, lane_change_rate, speed_fluctuation_rate, pre_lane_change_decel, "
           "lane_change_angle, following_accel_delta; the operators <, <=, >, >=, =, `name IN a..b`; and "
           "AND, OR, NOT with parentheses. Put the key discrimination basis in the description.\n";
}

inline std::string prediction_format_help() {
    return "Return a single fenced block tagged `json` holding an array with one object per vehicle: "
           "{\"id\": ..., \"predicted_label\": \"AV\"|\"HDV\", \"matching_score\": 0..1, "
           "\"matched_rules\": [{\"rule_id\": ..., \"basis\": ...}], "
           "\"unmatched_rules\": [{\"rule_id\": ..., \"reason\": ...}], \"confidence\": 0..1, "
           "\"reasoning\": ...}.\n";
}

/// Builds the comparative rule-discovery prompt. When the digests exceed
/// `budget` characters, whole digests are dropped from the front of the
/// larger set until the prompt fits; the omission is stated in the prompt.
inline Prompt build_discovery_prompt(std::span<const Sample> av_samples, std::span<const Sample> hdv_samples,
                                     std::size_t budget = kDefaultPromptBudget) {
    if (av_samples.empty()) throw Error(ErrorCode::EmptySampleSet, "no AV samples for discovery");
    if (hdv_samples.empty()) throw Error(ErrorCode::EmptySampleSet, "no HDV samples for discovery");

    const std::string system =
        "You are a senior driving behavior analysis expert with backgrounds in transportation engineering and "
        "vehicle dynamics. Your task is to discover essential behavioral differences between autonomous "
        "vehicles (AVs) and human-driven vehicles (HDVs) from real trajectory data.";

    auto render = [&](std::size_t av_from, std::size_t hdv_from) {
        const auto av = av_samples.subspan(av_from);
        const auto hdv = hdv_samples.subspan(hdv_from);
        std::string u;
        u += "Data input: the following are trajectory data of AVs and HDVs in JSON format, containing "
             "kinematic feature statistics, lane change event records, traffic context and a per-second speed "
             "profile of each vehicle.\n\n";
        if (av_from + hdv_from > 0) {
            u += "Note: " + std::to_string(av_from) + " AV and " + std::to_string(hdv_from) +
                 " HDV sample digests were omitted to fit the prompt budget.\n\n";
        }
        u += "[AV trajectory data]\n" + digest_array(av, false) + "\n\n";
        u += "[HDV trajectory data]\n" + digest_array(hdv, false) + "\n\n";
        u += "Analysis task: systematically compare the two vehicle types along these dimensions:\n"
             "1. Speed control patterns: speed fluctuation amplitude, change frequency, and adjustment strategies "
             "under different traffic densities.\n"
             "2. Acceleration smoothness: jerk standard deviation, smoothness of acceleration and deceleration, "
             "and frequency of sudden braking.\n"
             "3. Lane change behavior: triggering conditions, execution patterns, advance time, and speed "
             "adjustment strategies.\n"
             "4. Interaction behavior: following distance maintenance and response to leading vehicle changes.\n\n";
        u += "Output requirements: output a structured set of behavioral rules. Each rule needs a clear natural "
             "language description, explicit quantified features with discrimination thresholds, the applicable "
             "traffic scenarios and contextual constraints, and the key discrimination basis.\n\n";
        u += rule_block_format_help();
        return Prompt{PromptKind::discovery, "", {{Role::system, system}, {Role::user, u}}};
    };

    std::size_t av_from = 0, hdv_from = 0;
    Prompt p = render(0, 0);
    while (p.size() > budget) {
        const std::size_t av_left = av_samples.size() - av_from;
        const std::size_t hdv_left = hdv_samples.size() - hdv_from;
        if (av_left <= 1 && hdv_left <= 1) {
            throw Error(ErrorCode::BudgetExceeded, "prompt budget of " + std::to_string(budget) +
                                                       " characters cannot hold one sample per class");
        }
        if (av_left >= hdv_left) ++av_from;
        else ++hdv_from;
        p = render(av_from, hdv_from);
    }
    return p;
}

inline std::string rule_listing(std::span<const Rule> rules, bool with_confidence) {
    std::string out;
    for (const auto& r : rules) out += format_rule_block(r, with_confidence);
    return out;
}

inline Prompt build_verification_prompt(std::span<const Rule> rules, std::span<const Sample> val_samples) {
    if (rules.empty()) throw Error(ErrorCode::EmptySampleSet, "verification prompt needs at least one rule");
    if (val_samples.empty()) throw Error(ErrorCode::EmptySampleSet, "verification prompt needs validation samples");
    const std::string system =
        "You are a driving behavior analysis expert who now needs to classify unknown vehicles based on "
        "discovered behavioral rules.";
    std::string u;
    u += "Discovered behavioral rule library: each rule contains a natural language description, a quantified "
         "decision condition and applicable scenario constraints.\n\n";
    u += rule_listing(rules, false) + "\n";
    u += "Vehicle trajectory data to be analyzed (validation set, JSON):\n" + digest_array(val_samples, false) + "\n\n";
    u += "Prediction task: for each vehicle, check whether its features satisfy the decision condition of each "
         "rule, count the matched rules, evaluate scenario applicability, and make a weighted judgment that "
         "considers rule confidence.\n\n";
    u += "Output requirements: for each vehicle output the predicted label, the matched rules with their matching "
         "basis, a comprehensive confidence score and the reasoning process. ";
    u += prediction_format_help();
    return Prompt{PromptKind::verification, "", {{Role::system, system}, {Role::user, u}}};
}

inline nlohmann::json failure_digest(const FailureCase& f) {
    auto j = sample_digest(f.sample, false);
    j["true_label"] = std::string(to_string(f.true_label));
    j["predicted_label"] = std::string(to_string(f.predicted_label));
    nlohmann::json verdicts = nlohmann::json::object();
    for (const auto& [id, v] : f.rule_verdicts) verdicts[id] = std::string(to_string(v));
    j["rule_verdicts"] = std::move(verdicts);
    return j;
}

inline std::string percent(double fraction) {
    return svbrd::detail::format_number(std::round(fraction * 1000.0) / 10.0);
}

inline Prompt build_reflection_prompt(const Rule& rule, const RuleStats& stats, std::span<const FailureCase> failures) {
    if (failures.empty()) throw Error(ErrorCode::EmptySampleSet, "reflection prompt needs at least one failure case");
    const std::string system =
        "You are a driving behavior analysis expert reviewing why a behavioral rule fails on validation data.";
    std::string u;
    u += "Rule under review:\n" + format_rule_block(rule) + "\n";
    u += "Rule performance evaluation: rule " + rule.id + " achieves " + percent(stats.confidence) +
         " percent accuracy and " + percent(stats.recall()) + " percent recall on the validation set (" +
         std::to_string(stats.n_correct) + " of " + std::to_string(stats.n_applicable) +
         " applicable samples correct). The following are cases where this rule prediction failed.\n\n";
    u += "Failure case details: each case contains vehicle trajectory features, true label, predicted label, "
         "driving scenario context, and intermediate results of rule judgment.\n";
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : failures) arr.push_back(failure_digest(f));
    u += arr.dump() + "\n\n";
    u += "Reflection task: analyze the fundamental reasons why this rule fails in these cases. Consider:\n"
         "- whether the current threshold is reasonable or boundary conditions need adjustment;\n"
         "- whether the applicable scenarios are too broad or too restrictive and contextual constraints are "
         "missing;\n"
         "- whether a single feature suffices or other features should be combined into a composite rule;\n"
         "- whether the rule generalizes well enough to be retained, modified, or deleted.\n\n";
    u += "Refinement suggestion requirements: give a specific refinement with recommended threshold values, "
         "contextual constraints to add, feature combinations, and the complete expression of the refined rule, "
         "with a short qualitative analysis of why it resolves the failures.\n\n";
    u += "Output format: one fenced block tagged `refinement`, one `key: value` pair per line:\n"
         "```refinement\n"
         "rule_id: " + rule.id + "\n"
         "action: <adjust_threshold | add_context | combine_features | retire>\n"
         "new_predicate: <full refined condition, required for adjust_threshold and combine_features>\n"
         "new_contexts: <any | free_flow | congested, for add_context>\n"
         "rationale: <one line>\n"
         "```\n";
    return Prompt{PromptKind::reflection, rule.id, {{Role::system, system}, {Role::user, u}}};
}

/// Identification prompt; rules are listed by descending confidence
/// (stable for equal confidences).
inline Prompt build_identification_prompt(std::span<const Rule> rules, std::span<const Sample> test_samples) {
    if (rules.empty()) throw Error(ErrorCode::EmptySampleSet, "identification prompt needs at least one rule");
    if (test_samples.empty()) throw Error(ErrorCode::EmptySampleSet, "identification prompt needs test samples");
    std::vector<Rule> sorted(rules.begin(), rules.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const Rule& a, const Rule& b) { return a.weight() > b.weight(); });
    const std::string system =
        "You are a driving behavior analysis expert who needs to identify the types of unlabeled vehicles in the "
        "test set based on a verified high-confidence rule library.";
    std::string u;
    u += "High-confidence rule library: each rule contains a natural language description, a quantified decision "
         "condition, validation set confidence and applicable scenario constraints. Rules are sorted by "
         "confidence.\n\n";
    u += rule_listing(sorted, true) + "\n";
    u += "Vehicle data to be identified (test set, JSON):\n" + digest_array(test_samples, false) + "\n\n";
    u += "Identification task: for each vehicle,\n"
         "- check rule matching one by one;\n"
         "- check that each rule's applicable scenarios are consistent with the vehicle's driving scenario;\n"
         "- compute a matching score weighted by rule confidence;\n"
         "- evaluate how far the key discriminative features deviate from the thresholds;\n"
         "- judge the vehicle type from the matching score and the consistency of multiple rules.\n\n";
    u += "Output requirements: for each vehicle output the predicted label, comprehensive matching score, matched "
         "rules with matching status for each rule, unmatched rules with reasons, a comprehensive confidence "
         "score and the reasoning basis. ";
    u += prediction_format_help();
    return Prompt{PromptKind::identification, "", {{Role::system, system}, {Role::user, u}}};
}

}  // namespace svbrd::llm
