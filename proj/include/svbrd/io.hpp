#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svbrd/classification.hpp"
#include "svbrd/error.hpp"
#include "svbrd/features.hpp"
#include "svbrd/lane_change.hpp"
#include "svbrd/samples.hpp"
#include "svbrd/trajectory.hpp"
#include "svbrd/types.hpp"

namespace svbrd {

/// Failure tied to one line of a line-delimited file (1-based).
class LineError : public Error {
public:
    LineError(ErrorCode code, std::size_t line, const std::string& message)
        : Error(code, "line " + std::to_string(line) + ": " + message), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Calls fn(json, line_number) for every non-blank line. JSON syntax errors
/// and exceptions from fn are rethrown as LineError.
inline void for_each_jsonl(std::istream& in, const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw LineError(ErrorCode::SchemaViolation, n, std::string("malformed JSON: ") + e.what());
        }
        try {
            fn(j, n);
        } catch (const LineError&) {
            throw;
        } catch (const Error& e) {
            throw LineError(e.code(), n, e.what());
        } catch (const nlohmann::json::exception& e) {
            throw LineError(ErrorCode::SchemaViolation, n, e.what());
        }
    }
}

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    return out;
}

namespace io_detail {

inline double number(const nlohmann::json& j, const char* what) {
    if (!j.is_number()) throw Error(ErrorCode::SchemaViolation, std::string(what) + " must be a number");
    return j.get<double>();
}

inline std::int64_t frame(const nlohmann::json& j) {
    if (j.is_number_integer()) return j.get<std::int64_t>();
    const double v = number(j, "frame index");
    if (v != std::floor(v)) throw Error(ErrorCode::InvalidFrame, "frame index must be an integer");
    return static_cast<std::int64_t>(v);
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// Trajectories

/// {"vehicle_id", "frame_rate", "unit_scale", "unit_system", "label",
///  "context", "extra_features", "points": [[t, x, y], ...]}. Only
/// vehicle_id and points are required; unknown fields are ignored.
inline Trajectory trajectory_from_json(const nlohmann::json& j) {
    using namespace io_detail;
    if (!j.is_object()) throw Error(ErrorCode::SchemaViolation, "trajectory record must be an object");
    Trajectory t;
    if (!j.contains("vehicle_id")) throw Error(ErrorCode::SchemaViolation, "missing vehicle_id");
    const auto& id = j.at("vehicle_id");
    t.vehicle_id = id.is_string() ? id.get<std::string>() : id.dump();
    if (j.contains("frame_rate")) t.frame_rate = number(j.at("frame_rate"), "frame_rate");
    if (j.contains("unit_scale")) t.unit_scale = number(j.at("unit_scale"), "unit_scale");
    if (j.contains("unit_system")) t.unit_system = parse_unit_system(j.at("unit_system").get<std::string>());
    if (j.contains("label") && !j.at("label").is_null()) t.label = parse_label(j.at("label").get<std::string>());
    if (j.contains("context") && !j.at("context").is_null()) {
        t.context = parse_context(j.at("context").get<std::string>());
    }
    if (j.contains("extra_features")) {
        for (const auto& [name, value] : j.at("extra_features").items()) {
            const auto atom = find_atom(name);
            if (!atom || is_core_atom(*atom)) {
                throw Error(ErrorCode::UnknownAtom, "extra_features may only carry extended atoms, got '" + name + "'");
            }
            t.extra_features[*atom] = number(value, "extra feature");
        }
    }
    if (!j.contains("points") || !j.at("points").is_array()) throw Error(ErrorCode::SchemaViolation, "missing points");
    for (const auto& p : j.at("points")) {
        if (!p.is_array() || p.size() != 3) throw Error(ErrorCode::SchemaViolation, "point must be [t, x, y]");
        t.points.push_back({frame(p[0]), number(p[1], "x"), number(p[2], "y")});
    }
    if (!(t.frame_rate > 0.0)) throw Error(ErrorCode::NonPositiveParameter, "frame_rate must be > 0");
    if (!(t.unit_scale > 0.0)) throw Error(ErrorCode::NonPositiveParameter, "unit_scale must be > 0");
    return t;
}

inline nlohmann::json trajectory_to_json(const Trajectory& t) {
    nlohmann::json j;
    j["vehicle_id"] = t.vehicle_id;
    j["frame_rate"] = t.frame_rate;
    j["unit_scale"] = t.unit_scale;
    j["unit_system"] = std::string(to_string(t.unit_system));
    if (t.label) j["label"] = std::string(to_string(*t.label));
    if (t.context) j["context"] = std::string(to_string(*t.context));
    if (!t.extra_features.empty()) {
        nlohmann::json extra = nlohmann::json::object();
        for (const auto& [atom, v] : t.extra_features) extra[std::string(to_string(atom))] = v;
        j["extra_features"] = std::move(extra);
    }
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : t.points) pts.push_back({p.t, p.x, p.y});
    j["points"] = std::move(pts);
    return j;
}

inline std::vector<Trajectory> read_trajectories(std::istream& in) {
    std::vector<Trajectory> out;
    for_each_jsonl(in, [&](const nlohmann::json& j, std::size_t) { out.push_back(trajectory_from_json(j)); });
    return out;
}

inline void write_trajectories(std::ostream& out, std::span<const Trajectory> trajs) {
    for (const auto& t : trajs) out << trajectory_to_json(t).dump() << '\n';
}

// ---------------------------------------------------------------------------
// Feature records

inline nlohmann::json features_to_json(const FeatureVector& f) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [atom, name] : detail::kAtoms) {
        if (auto v = f.value(atom)) j[std::string(name)] = *v;
    }
    return j;
}

inline FeatureVector features_from_json(const nlohmann::json& j, double duration, UnitSystem units) {
    FeatureVector f;
    f.duration = duration;
    f.unit_system = units;
    for (const auto& [name, value] : j.items()) {
        const auto atom = find_atom(name);
        if (!atom) throw Error(ErrorCode::UnknownAtom, "unknown feature '" + name + "'");
        if (value.is_null()) continue;
        const double v = io_detail::number(value, "feature");
        switch (*atom) {
            case FeatureAtom::mean_speed: f.mean_speed = v; break;
            case FeatureAtom::std_speed: f.std_speed = v; break;
            case FeatureAtom::mean_accel: f.mean_accel = v; break;
            case FeatureAtom::std_accel: f.std_accel = v; break;
            case FeatureAtom::std_jerk: f.std_jerk = v; break;
            case FeatureAtom::lane_change_count: f.lane_change_count = static_cast<int>(v); break;
            default: *f.extended_slot(*atom) = v;
        }
    }
    return f;
}

inline nlohmann::json events_to_json(std::span<const LaneChangeEvent> events) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : events) {
        arr.push_back({{"start_frame", e.start_frame},
                       {"end_frame", e.end_frame},
                       {"cumulative_displacement", e.cumulative_displacement},
                       {"net_displacement", e.net_displacement},
                       {"direction", std::string(to_string(e.direction))}});
    }
    return arr;
}

inline std::vector<LaneChangeEvent> events_from_json(const nlohmann::json& arr) {
    std::vector<LaneChangeEvent> out;
    for (const auto& e : arr) {
        LaneChangeEvent ev;
        ev.start_frame = e.at("start_frame").get<std::int64_t>();
        ev.end_frame = e.at("end_frame").get<std::int64_t>();
        ev.cumulative_displacement = e.at("cumulative_displacement").get<double>();
        ev.net_displacement = e.at("net_displacement").get<double>();
        const auto dir = e.at("direction").get<std::string>();
        if (dir != "left" && dir != "right") throw Error(ErrorCode::SchemaViolation, "bad direction '" + dir + "'");
        ev.direction = dir == "left" ? LaneChangeDirection::left : LaneChangeDirection::right;
        out.push_back(ev);
    }
    return out;
}

/// Inputs of the two prediction tasks for one vehicle: features of the
/// observed prefix, its last-second motion and, when the trajectory was
/// long enough, the outcomes observed over the held-out horizon.
struct Forecast {
    int horizon = 3;
    FeatureVector features;
    RecentMotion recent;
    FutureOutcomes future;

    friend bool operator==(const Forecast& a, const Forecast& b) {
        return a.horizon == b.horizon && a.features == b.features &&
               a.recent.mean_acceleration == b.recent.mean_acceleration &&
               a.recent.lateral_velocity == b.recent.lateral_velocity && a.future.speed == b.future.speed &&
               a.future.lane == b.future.lane;
    }
};

/// One line of a feature file.
struct FeatureRecord {
    std::string vehicle_id;
    std::optional<Label> label;
    TrafficContext context = TrafficContext::free_flow;
    bool context_explicit = false;
    double frame_rate = 30.0;
    FeatureVector features;
    std::vector<LaneChangeEvent> lane_changes;
    std::vector<double> speed_profile;
    std::optional<Forecast> forecast;

    Sample sample() const { return {vehicle_id, features, context, label, lane_changes, speed_profile}; }

    friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

inline nlohmann::json feature_record_to_json(const FeatureRecord& r) {
    nlohmann::json j;
    j["vehicle_id"] = r.vehicle_id;
    j["label"] = r.label ? nlohmann::json(std::string(to_string(*r.label))) : nlohmann::json();
    j["context"] = std::string(to_string(r.context));
    j["context_source"] = r.context_explicit ? "explicit" : "derived";
    j["unit_system"] = std::string(to_string(r.features.unit_system));
    j["frame_rate"] = r.frame_rate;
    j["duration"] = r.features.duration;
    j["features"] = features_to_json(r.features);
    j["lane_changes"] = events_to_json(r.lane_changes);
    j["speed_profile"] = r.speed_profile;
    if (r.forecast) {
        const auto& f = *r.forecast;
        j["forecast"] = {{"horizon", f.horizon},
                         {"duration", f.features.duration},
                         {"features", features_to_json(f.features)},
                         {"recent", {{"mean_acceleration", f.recent.mean_acceleration},
                                     {"lateral_velocity", f.recent.lateral_velocity}}},
                         {"future", {{"speed", std::string(to_string(f.future.speed))},
                                     {"lane_change", std::string(to_string(f.future.lane))}}}};
    }
    return j;
}

inline FeatureRecord feature_record_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::SchemaViolation, "feature record must be an object");
    FeatureRecord r;
    r.vehicle_id = j.at("vehicle_id").get<std::string>();
    if (j.contains("label") && !j.at("label").is_null()) r.label = parse_label(j.at("label").get<std::string>());
    r.context = parse_context(j.at("context").get<std::string>());
    r.context_explicit = j.value("context_source", std::string("derived")) == "explicit";
    const auto units = parse_unit_system(j.at("unit_system").get<std::string>());
    r.frame_rate = j.at("frame_rate").get<double>();
    r.features = features_from_json(j.at("features"), j.at("duration").get<double>(), units);
    r.lane_changes = events_from_json(j.at("lane_changes"));
    r.speed_profile = j.at("speed_profile").get<std::vector<double>>();
    if (j.contains("forecast") && !j.at("forecast").is_null()) {
        const auto& fj = j.at("forecast");
        Forecast f;
        f.horizon = fj.at("horizon").get<int>();
        f.features = features_from_json(fj.at("features"), fj.at("duration").get<double>(), units);
        f.recent.mean_acceleration = fj.at("recent").at("mean_acceleration").get<double>();
        f.recent.lateral_velocity = fj.at("recent").at("lateral_velocity").get<double>();
        f.future.speed = parse_outcome(fj.at("future").at("speed").get<std::string>());
        f.future.lane = parse_outcome(fj.at("future").at("lane_change").get<std::string>());
        r.forecast = f;
    }
    return r;
}

inline std::vector<FeatureRecord> read_feature_records(std::istream& in) {
    std::vector<FeatureRecord> out;
    for_each_jsonl(in, [&](const nlohmann::json& j, std::size_t) { out.push_back(feature_record_from_json(j)); });
    return out;
}

inline std::vector<FeatureRecord> read_feature_records(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_feature_records(in);
}

inline void write_feature_records(std::ostream& out, std::span<const FeatureRecord> records) {
    for (const auto& r : records) out << feature_record_to_json(r).dump() << '\n';
}

}  // namespace svbrd
