#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "svbrd/error.hpp"
#include "svbrd/library_io.hpp"
#include "svbrd/predicate.hpp"
#include "svbrd/rule.hpp"
#include "svbrd/types.hpp"

namespace svbrd::llm {

// Responses carry fenced blocks tagged with their kind:
//
//   ```rule
//   id: R27
//   description: AV lower jerk standard deviation
//   condition: std_jerk < 0.3
//   contexts: any
//   tasks: identification
//   category: smoothness
//   polarity: AV_indicative
//   ```
//
// One "key: value" pair per line; list values are comma separated.

struct FencedBlock {
    std::string tag;
    std::string body;
    std::size_t index = 0;  ///< ordinal among blocks with the same tag
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss{std::string(s)};
    while (std::getline(ss, item, ',')) {
        auto t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

/// Parses "key: value" lines. Keys are lower-cased; lines without a colon
/// are reported through `stray`.
inline std::map<std::string, std::string> parse_fields(std::string_view body, std::vector<std::string>* stray = nullptr) {
    std::map<std::string, std::string> fields;
    std::stringstream ss{std::string(body)};
    std::string line;
    while (std::getline(ss, line)) {
        auto t = trim(line);
        if (t.empty()) continue;
        if (t.rfind("- ", 0) == 0) t = trim(t.substr(2));
        const auto colon = t.find(':');
        if (colon == std::string::npos) {
            if (stray) stray->push_back(t);
            continue;
        }
        fields[lower(trim(t.substr(0, colon)))] = trim(t.substr(colon + 1));
    }
    return fields;
}

}  // namespace detail

/// Extracts every ```tag ... ``` block. An unterminated final block runs
/// to the end of the text (responses can be cut at the token cap).
inline std::vector<FencedBlock> extract_blocks(std::string_view text, std::string_view wanted_tag) {
    std::vector<FencedBlock> blocks;
    std::stringstream ss{std::string(text)};
    std::string line;
    std::optional<FencedBlock> open;
    std::size_t count = 0;
    while (std::getline(ss, line)) {
        const auto t = detail::trim(line);
        if (t.rfind("```", 0) == 0) {
            if (open) {
                blocks.push_back(std::move(*open));
                open.reset();
                continue;
            }
            const auto tag = detail::lower(detail::trim(t.substr(3)));
            if (tag == wanted_tag) {
                open = FencedBlock{tag, "", count++};
            } else {
                // skip foreign fenced content up to its closing fence
                while (std::getline(ss, line)) {
                    if (detail::trim(line).rfind("```", 0) == 0) break;
                }
            }
            continue;
        }
        if (open) {
            open->body += line;
            open->body += '\n';
        }
    }
    if (open) blocks.push_back(std::move(*open));
    return blocks;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

inline std::string format_contexts(const ContextConstraint& c) {
    std::vector<std::string> names;
    for (const auto& n : LibraryCodec::contexts_to_json(c)) names.push_back(n.get<std::string>());
    return join(names, ", ");
}

/// Canonical block text for a rule. `with_confidence` adds the validation
/// confidence line used in rule listings.
inline std::string format_rule_block(const Rule& r, bool with_confidence = false) {
    std::vector<std::string> tasks;
    for (Task t : r.context.tasks) tasks.emplace_back(to_string(t));
    std::string out = "```rule\n";
    out += "id: " + r.id + "\n";
    out += "description: " + r.description + "\n";
    out += "condition: " + to_string(r.predicate) + "\n";
    out += "contexts: " + format_contexts(r.context) + "\n";
    out += "tasks: " + join(tasks, ", ") + "\n";
    out += "category: " + std::string(to_string(r.category)) + "\n";
    out += "polarity: " + std::string(to_string(r.polarity)) + "\n";
    if (r.outcome) out += "outcome: " + std::string(to_string(*r.outcome)) + "\n";
    if (with_confidence && r.confidence) out += "confidence: " + svbrd::detail::format_number(*r.confidence) + "\n";
    out += "```\n";
    return out;
}

struct RejectedBlock {
    std::size_t index = 0;
    std::string text;
    ErrorCode reason = ErrorCode::SchemaViolation;
    std::string message;
};

struct RuleParseResult {
    std::vector<Rule> rules;
    std::vector<RejectedBlock> rejected;
};

/// Compiles every rule block into a candidate rule. Blocks that fail are
/// returned as rejections; the batch is never aborted.
inline RuleParseResult parse_rule_response(std::string_view text) {
    RuleParseResult result;
    std::set<std::string> seen;
    for (const auto& block : extract_blocks(text, "rule")) {
        try {
            const auto f = detail::parse_fields(block.body);
            auto need = [&](const char* key) -> const std::string& {
                auto it = f.find(key);
                if (it == f.end() || it->second.empty()) {
                    throw Error(ErrorCode::SchemaViolation, std::string("missing field '") + key + "'");
                }
                return it->second;
            };
            Rule r;
            r.id = need("id");
            r.description = need("description");
            r.predicate = parse_predicate(need("condition"));
            LibraryCodec::contexts_from_names(detail::split_list(need("contexts")), r.context);
            r.context.tasks = {Task::identification};
            if (auto it = f.find("tasks"); it != f.end()) {
                r.context.tasks.clear();
                for (const auto& t : detail::split_list(it->second)) r.context.tasks.insert(parse_task(t));
                if (r.context.tasks.empty()) throw Error(ErrorCode::SchemaViolation, "empty task list");
            }
            r.category = parse_category(need("category"));
            r.polarity = parse_polarity(need("polarity"));
            if (auto it = f.find("outcome"); it != f.end() && !it->second.empty()) r.outcome = parse_outcome(it->second);
            r.state = RuleState::candidate;
            if (!seen.insert(r.id).second) throw Error(ErrorCode::ValidationFailed, "duplicate rule id '" + r.id + "'");
            result.rules.push_back(std::move(r));
        } catch (const Error& e) {
            result.rejected.push_back({block.index, block.body, e.code(), e.what()});
        }
    }
    return result;
}

enum class RefinementAction { adjust_threshold, add_context, combine_features, retire };

constexpr std::string_view to_string(RefinementAction a) {
    switch (a) {
        case RefinementAction::adjust_threshold: return "adjust_threshold";
        case RefinementAction::add_context: return "add_context";
        case RefinementAction::combine_features: return "combine_features";
        case RefinementAction::retire: return "retire";
    }
    return "?";
}

struct RefinementSuggestion {
    std::string rule_id;
    RefinementAction action = RefinementAction::retire;
    std::optional<std::string> new_predicate;        ///< canonical DSL text
    std::optional<ContextConstraint> new_contexts;   ///< only the context flags are meaningful
    std::string rationale;
};

/// One suggestion per refinement block. Anything that cannot be applied
/// as written becomes a retire suggestion whose rationale starts with
/// "unparseable".
inline std::vector<RefinementSuggestion> parse_refinement_response(std::string_view text) {
    std::vector<RefinementSuggestion> out;
    for (const auto& block : extract_blocks(text, "refinement")) {
        const auto f = detail::parse_fields(block.body);
        RefinementSuggestion s;
        if (auto it = f.find("rule_id"); it != f.end()) s.rule_id = it->second;
        const std::string rationale = f.count("rationale") ? f.at("rationale") : "";
        auto unparseable = [&](const std::string& why) {
            s.action = RefinementAction::retire;
            s.new_predicate.reset();
            s.new_contexts.reset();
            s.rationale = "unparseable: " + why;
            out.push_back(s);
        };
        const auto action_it = f.find("action");
        if (action_it == f.end()) {
            unparseable("no action field");
            continue;
        }
        const std::string action = detail::lower(action_it->second);
        try {
            if (action == "adjust_threshold" || action == "relax_threshold" || action == "combine_features") {
                s.action = action == "combine_features" ? RefinementAction::combine_features
                                                        : RefinementAction::adjust_threshold;
                auto it = f.find("new_predicate");
                if (it == f.end() || it->second.empty()) throw Error(ErrorCode::SchemaViolation, "missing new_predicate");
                s.new_predicate = to_string(parse_predicate(it->second));
            } else if (action == "add_context") {
                s.action = RefinementAction::add_context;
                auto it = f.find("new_contexts");
                if (it == f.end()) throw Error(ErrorCode::SchemaViolation, "missing new_contexts");
                ContextConstraint c;
                LibraryCodec::contexts_from_names(detail::split_list(it->second), c);
                s.new_contexts = c;
                if (auto p = f.find("new_predicate"); p != f.end() && !p->second.empty()) {
                    s.new_predicate = to_string(parse_predicate(p->second));
                }
            } else if (action == "retire" || action == "delete") {
                s.action = RefinementAction::retire;
            } else {
                throw Error(ErrorCode::SchemaViolation, "unknown action '" + action_it->second + "'");
            }
        } catch (const Error& e) {
            unparseable(e.what());
            continue;
        }
        s.rationale = rationale;
        out.push_back(std::move(s));
    }
    return out;
}

inline std::string format_refinement_block(const RefinementSuggestion& s) {
    std::string out = "```refinement\n";
    out += "rule_id: " + s.rule_id + "\n";
    out += "action: " + std::string(to_string(s.action)) + "\n";
    if (s.new_predicate) out += "new_predicate: " + *s.new_predicate + "\n";
    if (s.new_contexts) out += "new_contexts: " + format_contexts(*s.new_contexts) + "\n";
    out += "rationale: " + s.rationale + "\n";
    out += "```\n";
    return out;
}

}  // namespace svbrd::llm
