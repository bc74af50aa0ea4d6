#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "svbrd/error.hpp"
#include "svbrd/rule.hpp"

namespace svbrd {

/// JSON codec for rule libraries. Field names are stable; unknown fields
/// at the library and rule level are carried through unchanged.
struct LibraryCodec {
    using json = nlohmann::json;

    static json contexts_to_json(const ContextConstraint& c) {
        if (c.any_context()) return json::array({"any"});
        json out = json::array();
        if (c.free_flow) out.push_back("free_flow");
        if (c.congested) out.push_back("congested");
        return out;
    }

    /// Accepts "any", "free_flow", "congested" and "non_congested" (alias
    /// for free_flow).
    static void contexts_from_names(const std::vector<std::string>& names, ContextConstraint& c) {
        if (names.empty()) throw Error(ErrorCode::SchemaViolation, "contexts must be non-empty");
        c.free_flow = false;
        c.congested = false;
        for (const auto& n : names) {
            if (n == "any") {
                c.free_flow = c.congested = true;
            } else if (n == "free_flow" || n == "non_congested" || n == "non-congested") {
                c.free_flow = true;
            } else if (n == "congested") {
                c.congested = true;
            } else {
                throw Error(ErrorCode::SchemaViolation, "unknown context '" + n + "'");
            }
        }
    }

    static json rule_to_json(const Rule& r) {
        json j = r.extra.is_object() ? r.extra : json::object();
        j["id"] = r.id;
        j["description"] = r.description;
        j["predicate"] = to_string(r.predicate);
        j["contexts"] = contexts_to_json(r.context);
        json tasks = json::array();
        for (Task t : r.context.tasks) tasks.push_back(std::string(to_string(t)));
        j["tasks"] = tasks;
        j["category"] = std::string(to_string(r.category));
        j["polarity"] = std::string(to_string(r.polarity));
        j["confidence"] = r.confidence ? json(*r.confidence) : json(nullptr);
        j["state"] = std::string(to_string(r.state));
        j["revision"] = r.revision;
        if (r.outcome) j["outcome"] = std::string(to_string(*r.outcome));
        return j;
    }

    static Rule rule_from_json(const json& j) {
        static const std::set<std::string> known{"id",     "description", "predicate", "contexts", "tasks",
                                                 "category", "polarity",  "confidence", "state",  "revision",
                                                 "outcome"};
        if (!j.is_object()) throw Error(ErrorCode::CorruptFile, "rule entry is not an object");
        Rule r;
        r.id = j.at("id").get<std::string>();
        r.description = j.value("description", std::string{});
        r.predicate = parse_predicate(j.at("predicate").get<std::string>());
        contexts_from_names(j.at("contexts").get<std::vector<std::string>>(), r.context);
        r.context.tasks.clear();
        for (const auto& t : j.at("tasks").get<std::vector<std::string>>()) r.context.tasks.insert(parse_task(t));
        r.category = parse_category(j.at("category").get<std::string>());
        r.polarity = parse_polarity(j.at("polarity").get<std::string>());
        if (j.contains("confidence") && !j.at("confidence").is_null()) r.confidence = j.at("confidence").get<double>();
        r.state = parse_state(j.at("state").get<std::string>());
        r.revision = j.value("revision", 0);
        if (j.contains("outcome") && !j.at("outcome").is_null()) r.outcome = parse_outcome(j.at("outcome").get<std::string>());
        for (const auto& [key, value] : j.items()) {
            if (!known.count(key)) r.extra[key] = value;
        }
        return r;
    }

    static json provenance_to_json(const ProvenanceEntry& p) {
        return {{"library_version", p.library_version},
                {"iteration", p.iteration},
                {"rule_id", p.rule_id},
                {"action", p.action},
                {"before", p.before},
                {"after", p.after},
                {"rationale", p.rationale}};
    }

    static ProvenanceEntry provenance_from_json(const json& j) {
        ProvenanceEntry p;
        p.library_version = j.at("library_version").get<std::int64_t>();
        p.iteration = j.at("iteration").get<int>();
        p.rule_id = j.at("rule_id").get<std::string>();
        p.action = j.at("action").get<std::string>();
        p.before = j.value("before", std::string{});
        p.after = j.value("after", std::string{});
        p.rationale = j.value("rationale", std::string{});
        return p;
    }

    static json to_json(const RuleLibrary& lib) {
        json j = lib.extra_.is_object() ? lib.extra_ : json::object();
        j["format"] = "svbrd-rule-library";
        j["version"] = lib.version_;
        j["theta"] = lib.theta_;
        j["units"] = std::string(to_string(lib.units_));
        json rules = json::array();
        for (const auto& r : lib.rules_) rules.push_back(rule_to_json(r));
        j["rules"] = std::move(rules);
        json prov = json::array();
        for (const auto& p : lib.provenance_) prov.push_back(provenance_to_json(p));
        j["provenance"] = std::move(prov);
        return j;
    }

    static RuleLibrary from_json(const json& j) {
        static const std::set<std::string> known{"format", "version", "theta", "units", "rules", "provenance"};
        if (!j.is_object()) throw Error(ErrorCode::CorruptFile, "library root is not an object");
        if (!j.contains("version")) throw Error(ErrorCode::MissingVersion, "library has no 'version' field");
        RuleLibrary lib;
        try {
            lib.version_ = j.at("version").get<std::int64_t>();
            lib.theta_ = j.at("theta").get<double>();
            RuleLibrary::check_theta(lib.theta_);
            lib.units_ = parse_unit_system(j.value("units", std::string("metric")));
            for (const auto& rj : j.at("rules")) lib.rules_.push_back(rule_from_json(rj));
            if (j.contains("provenance")) {
                for (const auto& pj : j.at("provenance")) lib.provenance_.push_back(provenance_from_json(pj));
            }
        } catch (const json::exception& e) {
            throw Error(ErrorCode::CorruptFile, std::string("malformed library: ") + e.what());
        }
        for (const auto& [key, value] : j.items()) {
            if (!known.count(key)) lib.extra_[key] = value;
        }
        lib.validate();
        return lib;
    }
};

inline nlohmann::json library_to_json(const RuleLibrary& lib) { return LibraryCodec::to_json(lib); }
inline RuleLibrary library_from_json(const nlohmann::json& j) { return LibraryCodec::from_json(j); }

inline std::string serialize_library(const RuleLibrary& lib) { return library_to_json(lib).dump(2) + "\n"; }

inline RuleLibrary parse_library(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::CorruptFile, std::string("library is not valid JSON: ") + e.what());
    }
    return library_from_json(j);
}

inline void save_library(const RuleLibrary& lib, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << serialize_library(lib);
}

inline RuleLibrary load_library(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_library(ss.str());
}

}  // namespace svbrd
