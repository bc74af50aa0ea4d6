#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "svbrd/error.hpp"
#include "svbrd/features.hpp"
#include "svbrd/predicate.hpp"
#include "svbrd/types.hpp"

namespace svbrd {

/// Where and for which task a rule may be applied.
struct ContextConstraint {
    bool free_flow = true;
    bool congested = true;
    std::set<Task> tasks{Task::identification};

    bool allows(TrafficContext c) const { return c == TrafficContext::free_flow ? free_flow : congested; }
    bool applies_to(Task t) const { return tasks.count(t) != 0; }
    bool any_context() const { return free_flow && congested; }

    friend bool operator==(const ContextConstraint&, const ContextConstraint&) = default;
};

enum class Verdict { matched, not_matched, not_applicable };

constexpr std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::matched: return "matched";
        case Verdict::not_matched: return "not_matched";
        case Verdict::not_applicable: return "not_applicable";
    }
    return "?";
}

/// Behavioral rule: description, executable predicate and context
/// constraint, plus its validation confidence (which doubles as the
/// voting weight) and lifecycle state.
struct Rule {
    std::string id;
    std::string description;
    Predicate predicate;
    ContextConstraint context;
    RuleCategory category = RuleCategory::speed;
    Polarity polarity = Polarity::AV_indicative;
    std::optional<double> confidence;
    RuleState state = RuleState::candidate;
    int revision = 0;
    /// Outcome voted for in the speed / lane-change prediction tasks.
    std::optional<Outcome> outcome;
    /// Fields this version does not understand, kept for round-trips.
    nlohmann::json extra = nlohmann::json::object();

    double weight() const { return confidence.value_or(0.0); }

    friend bool operator==(const Rule&, const Rule&) = default;
};

inline Verdict evaluate_rule(const Rule& rule, const FeatureVector& features, TrafficContext context,
                             UnitSystem library_units) {
    if (features.unit_system != library_units) {
        throw Error(ErrorCode::UnitMismatch, "rule " + rule.id + " expects " + std::string(to_string(library_units)) +
                                                 " features, got " + std::string(to_string(features.unit_system)));
    }
    if (!rule.context.allows(context)) return Verdict::not_applicable;
    const auto result = evaluate(rule.predicate, features);
    if (!result) return Verdict::not_applicable;
    return *result ? Verdict::matched : Verdict::not_matched;
}

/// Label a rule predicts for a sample it applies to, or nullopt when it
/// does not apply.
inline std::optional<Label> predicted_label(const Rule& rule, Verdict v) {
    if (v == Verdict::not_applicable) return std::nullopt;
    const Label indicated = indicated_label(rule.polarity);
    return v == Verdict::matched ? indicated : opposite(indicated);
}

struct ProvenanceEntry {
    std::int64_t library_version = 0;
    int iteration = 0;
    std::string rule_id;
    std::string action;  ///< "refine" or "retire"
    std::string before;
    std::string after;
    std::string rationale;

    friend bool operator==(const ProvenanceEntry&, const ProvenanceEntry&) = default;
};

/// Ordered, versioned rule collection. Every mutating call bumps the
/// version; the provenance log only grows.
class RuleLibrary {
public:
    RuleLibrary() = default;
    explicit RuleLibrary(double theta, UnitSystem units = UnitSystem::metric) : theta_(theta), units_(units) {
        check_theta(theta);
    }

    const std::vector<Rule>& rules() const { return rules_; }
    double theta() const { return theta_; }
    std::int64_t version() const { return version_; }
    UnitSystem units() const { return units_; }
    const std::vector<ProvenanceEntry>& provenance() const { return provenance_; }
    const nlohmann::json& extra() const { return extra_; }

    const Rule* find(std::string_view id) const {
        auto it = std::find_if(rules_.begin(), rules_.end(), [&](const Rule& r) { return r.id == id; });
        return it == rules_.end() ? nullptr : &*it;
    }

    void add(Rule rule) {
        if (find(rule.id)) throw Error(ErrorCode::ValidationFailed, "duplicate rule id '" + rule.id + "'");
        rules_.push_back(std::move(rule));
        ++version_;
    }

    /// Replaces the rule with the same id.
    void update(Rule rule) {
        auto it = std::find_if(rules_.begin(), rules_.end(), [&](const Rule& r) { return r.id == rule.id; });
        if (it == rules_.end()) throw Error(ErrorCode::ValidationFailed, "no rule with id '" + rule.id + "'");
        if (*it == rule) return;
        *it = std::move(rule);
        ++version_;
    }

    void set_theta(double theta) {
        check_theta(theta);
        if (theta == theta_) return;
        theta_ = theta;
        ++version_;
    }

    void set_units(UnitSystem u) {
        if (u == units_) return;
        units_ = u;
        ++version_;
    }

    void log(ProvenanceEntry entry) {
        entry.library_version = version_;
        provenance_.push_back(std::move(entry));
    }

    std::vector<const Rule*> verified() const {
        std::vector<const Rule*> out;
        for (const auto& r : rules_) {
            if (r.state == RuleState::verified) out.push_back(&r);
        }
        return out;
    }

    std::vector<const Rule*> verified_av() const {
        std::vector<const Rule*> out;
        for (const auto* r : verified()) {
            if (r->polarity == Polarity::AV_indicative) out.push_back(r);
        }
        return out;
    }

    /// Throws ValidationFailed on duplicate ids or a verified rule whose
    /// confidence is unset or below theta.
    void validate() const {
        std::unordered_set<std::string> seen;
        for (const auto& r : rules_) {
            if (r.id.empty()) throw Error(ErrorCode::ValidationFailed, "rule with empty id");
            if (!seen.insert(r.id).second) throw Error(ErrorCode::ValidationFailed, "duplicate rule id '" + r.id + "'");
            if (r.confidence && !(*r.confidence >= 0.0 && *r.confidence <= 1.0)) {
                throw Error(ErrorCode::ValidationFailed, "rule " + r.id + " confidence outside [0,1]");
            }
            if (r.state == RuleState::verified && (!r.confidence || *r.confidence < theta_)) {
                throw Error(ErrorCode::ValidationFailed, "verified rule " + r.id + " lacks confidence >= theta");
            }
            if (!r.context.free_flow && !r.context.congested) {
                throw Error(ErrorCode::ValidationFailed, "rule " + r.id + " allows no traffic context");
            }
            if (r.context.tasks.empty()) throw Error(ErrorCode::ValidationFailed, "rule " + r.id + " has no task");
        }
    }

    friend bool operator==(const RuleLibrary&, const RuleLibrary&) = default;

private:
    friend struct LibraryCodec;

    static void check_theta(double theta) {
        if (!(theta >= 0.0 && theta <= 1.0)) throw Error(ErrorCode::InvalidArgument, "theta must lie in [0,1]");
    }

    std::vector<Rule> rules_;
    double theta_ = 0.7;
    std::int64_t version_ = 0;
    UnitSystem units_ = UnitSystem::metric;
    std::vector<ProvenanceEntry> provenance_;
    nlohmann::json extra_ = nlohmann::json::object();
};

}  // namespace svbrd
