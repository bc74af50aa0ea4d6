#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svbrd/error.hpp"
#include "svbrd/llm/backend.hpp"
#include "svbrd/llm/prompts.hpp"
#include "svbrd/llm/response_parser.hpp"
#include "svbrd/rule.hpp"
#include "svbrd/samples.hpp"

namespace svbrd {

struct ConfidenceOptions {
    /// Divide by the whole validation set (samples a rule does not apply to
    /// count as wrong) instead of by the applicable samples only.
    bool strict = false;
};

/// Fraction of applicable validation samples whose label the rule predicts
/// correctly. A rule covering no sample gets confidence 0 and no_coverage.
inline RuleStats compute_confidence(const Rule& rule, std::span<const Sample> val_set, UnitSystem units,
                                    const ConfidenceOptions& opts = {}, int iteration = 0) {
    if (val_set.empty()) throw Error(ErrorCode::EmptyValidationSet, "cannot score rule " + rule.id);
    RuleStats st;
    st.rule_id = rule.id;
    st.iteration = iteration;
    st.n_samples = val_set.size();
    const Label indicated = indicated_label(rule.polarity);
    for (const auto& s : val_set) {
        if (!s.label) throw Error(ErrorCode::InvalidArgument, "validation sample '" + s.vehicle_id + "' has no label");
        const Verdict v = evaluate_rule(rule, s.features, s.context, units);
        const auto predicted = predicted_label(rule, v);
        if (!predicted) continue;
        ++st.n_applicable;
        if (*predicted == *s.label) ++st.n_correct;
        if (*s.label == indicated) {
            ++st.n_indicated;
            if (v == Verdict::matched) ++st.n_indicated_matched;
        }
    }
    st.no_coverage = st.n_applicable == 0;
    const std::size_t denom = opts.strict ? st.n_samples : st.n_applicable;
    st.confidence = denom == 0 ? 0.0 : static_cast<double>(st.n_correct) / static_cast<double>(denom);
    return st;
}

/// Applies stats to the library: confidence is stored on each rule and
/// rules at or above theta become verified, the rest candidates. Retired
/// rules are left alone. Every non-retired rule needs a stats entry.
inline RuleLibrary filter_rules(RuleLibrary lib, std::span<const RuleStats> stats) {
    std::map<std::string, const RuleStats*> by_id;
    for (const auto& s : stats) by_id[s.rule_id] = &s;
    for (const auto& r : std::vector<Rule>(lib.rules())) {
        if (r.state == RuleState::retired) continue;
        auto it = by_id.find(r.id);
        if (it == by_id.end()) throw Error(ErrorCode::InvalidArgument, "no stats for rule " + r.id);
        Rule updated = r;
        updated.confidence = it->second->confidence;
        updated.state = it->second->confidence >= lib.theta() ? RuleState::verified : RuleState::candidate;
        lib.update(std::move(updated));
    }
    return lib;
}

/// Applicable samples where the rule's label prediction contradicts the
/// true label, with every library rule's verdict on that sample.
inline std::vector<FailureCase> collect_failures(const Rule& rule, std::span<const Sample> val_set,
                                                 const RuleLibrary& lib) {
    std::vector<FailureCase> out;
    for (const auto& s : val_set) {
        if (!s.label) continue;
        const auto predicted = predicted_label(rule, evaluate_rule(rule, s.features, s.context, lib.units()));
        if (!predicted || *predicted == *s.label) continue;
        FailureCase fc;
        fc.sample = s;
        fc.true_label = *s.label;
        fc.predicted_label = *predicted;
        for (const auto& other : lib.rules()) {
            fc.rule_verdicts.emplace_back(other.id, evaluate_rule(other, s.features, s.context, lib.units()));
        }
        out.push_back(std::move(fc));
    }
    return out;
}

inline std::string describe_rule_logic(const Rule& r) {
    return to_string(r.predicate) + " [" + llm::format_contexts(r.context) + "]";
}

struct Refinement {
    Rule rule;
    ProvenanceEntry entry;
};

/// Applies one parsed suggestion to a rule. Suggestions that do not yield a
/// valid rule retire it.
inline Refinement apply_suggestion(const Rule& rule, const llm::RefinementSuggestion& s, int iteration) {
    Refinement out{rule, {}};
    out.entry.iteration = iteration;
    out.entry.rule_id = rule.id;
    out.entry.before = describe_rule_logic(rule);
    out.entry.rationale = s.rationale;
    Rule& r = out.rule;
    bool retire = s.action == llm::RefinementAction::retire;
    if (!retire) {
        try {
            if (s.new_predicate) r.predicate = parse_predicate(*s.new_predicate);
            if (s.new_contexts) {
                r.context.free_flow = s.new_contexts->free_flow;
                r.context.congested = s.new_contexts->congested;
            }
        } catch (const Error& e) {
            retire = true;
            out.entry.rationale = std::string("unparseable: ") + e.what();
        }
    }
    if (retire) {
        r.state = RuleState::retired;
        out.entry.action = "retire";
    } else {
        r.state = RuleState::candidate;
        r.confidence.reset();
        ++r.revision;
        out.entry.action = "refine";
    }
    out.entry.after = r.state == RuleState::retired ? "retired" : describe_rule_logic(r);
    return out;
}

/// Asks the backend to reflect on the failures and applies the suggestion
/// addressed to this rule. Backend errors propagate.
inline Refinement refine_rule(const Rule& rule, std::span<const FailureCase> failures, const RuleStats& stats,
                              llm::ChatBackend& backend, const llm::BackendConfig& cfg, int iteration = 0) {
    if (failures.empty()) throw Error(ErrorCode::InvalidArgument, "refine_rule needs failure cases for " + rule.id);
    const auto prompt = llm::build_reflection_prompt(rule, stats, failures);
    const auto suggestions = llm::parse_refinement_response(llm::complete(cfg, backend, prompt));

    const llm::RefinementSuggestion* chosen = nullptr;
    for (const auto& s : suggestions) {
        if (s.rule_id == rule.id) {
            chosen = &s;
            break;
        }
    }
    if (!chosen && suggestions.size() == 1 && suggestions.front().rule_id.empty()) chosen = &suggestions.front();
    if (!chosen) {
        llm::RefinementSuggestion none;
        none.rule_id = rule.id;
        none.action = llm::RefinementAction::retire;
        none.rationale = "unparseable: no refinement block for rule " + rule.id;
        return apply_suggestion(rule, none, iteration);
    }
    return apply_suggestion(rule, *chosen, iteration);
}

struct VerificationOptions {
    int max_iters = 5;
    double epsilon = 0.01;  ///< confidence change below which an iteration counts as stalled
    ConfidenceOptions confidence;
    llm::BackendConfig backend;
};

struct IterationRecord {
    std::string rule_id;
    int iteration = 0;
    double confidence = 0.0;
    std::string action;  ///< verified, refine, retire

    friend bool operator==(const IterationRecord&, const IterationRecord&) = default;
};

struct VerificationResult {
    RuleLibrary library;
    std::vector<IterationRecord> log;
    int iterations = 0;
};

/// Thrown when a backend failure aborts the loop; carries the library and
/// log as they stood, provenance included.
class VerificationAborted : public Error {
public:
    VerificationAborted(const Error& cause, VerificationResult partial)
        : Error(cause.code(), cause.what()), partial_(std::move(partial)) {}
    const VerificationResult& partial() const { return partial_; }

private:
    VerificationResult partial_;
};

/// Score, filter, reflect and refine until every rule is verified or
/// retired, no confidence moves by more than epsilon, or max_iters is hit.
/// Rules still below theta when the loop stops are retired, so the final
/// library satisfies the verified-set definition exactly.
inline VerificationResult run_verification_loop(RuleLibrary lib, std::span<const Sample> val_set,
                                                llm::ChatBackend& backend, const VerificationOptions& opts = {}) {
    if (opts.max_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_iters must be >= 1");
    if (val_set.empty()) throw Error(ErrorCode::EmptyValidationSet, "verification needs validation samples");

    VerificationResult res{std::move(lib), {}, 0};
    std::map<std::string, double> previous;
    for (int iter = 1; iter <= opts.max_iters; ++iter) {
        res.iterations = iter;
        std::vector<RuleStats> stats;
        for (const auto& r : res.library.rules()) {
            if (r.state != RuleState::retired) {
                stats.push_back(compute_confidence(r, val_set, res.library.units(), opts.confidence, iter));
            }
        }
        res.library = filter_rules(std::move(res.library), stats);

        bool stalled = iter > 1;
        for (const auto& s : stats) {
            auto it = previous.find(s.rule_id);
            if (it == previous.end() || std::abs(it->second - s.confidence) > opts.epsilon) stalled = false;
        }
        bool any_candidate = false;
        for (const auto& r : res.library.rules()) any_candidate |= r.state == RuleState::candidate;
        const bool stop = !any_candidate || stalled || iter == opts.max_iters;

        for (const auto& s : stats) {
            const Rule rule = *res.library.find(s.rule_id);
            if (rule.state == RuleState::verified) {
                res.log.push_back({rule.id, iter, s.confidence, "verified"});
                continue;
            }
            Refinement ref;
            const auto failures = collect_failures(rule, val_set, res.library);
            if (stop || s.no_coverage || failures.empty()) {
                Rule retired = rule;
                retired.state = RuleState::retired;
                std::string why = s.no_coverage       ? "no applicable validation samples"
                                  : stalled            ? "confidence below theta after convergence"
                                  : stop               ? "refinement budget exhausted"
                                                       : "coverage below theta with no failure cases";
                ref = {retired, {0, iter, rule.id, "retire", describe_rule_logic(rule), "retired", why}};
            } else {
                try {
                    ref = refine_rule(rule, failures, s, backend, opts.backend, iter);
                } catch (const Error& e) {
                    throw VerificationAborted(e, res);
                }
            }
            res.library.update(ref.rule);
            res.library.log(ref.entry);
            res.log.push_back({rule.id, iter, s.confidence, ref.entry.action});
        }
        for (const auto& s : stats) previous[s.rule_id] = s.confidence;
        if (stop) break;
    }
    return res;
}

}  // namespace svbrd
