#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. They deliberately share no code with the library paths they check:
// kinematics are recomputed with explicit loops and divisions, rule fixtures
// are plain data evaluated here directly (the library sees them only as DSL
// text), and metrics are counted pair by pair.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace oracle {

// ---------------------------------------------------------------------------
// Kinematics

struct Series {
    std::vector<double> v, a, j;
};

/// Central differences written out longhand: v_t = |p_{t+1} - p_{t-1}| / (2 dt).
inline Series kinematics(const std::vector<double>& x, const std::vector<double>& y, double frame_rate,
                         double unit_scale) {
    Series s;
    const double dt = 1.0 / frame_rate;
    for (std::size_t t = 1; t + 1 < x.size(); ++t) {
        const double dx = x[t + 1] - x[t - 1];
        const double dy = y[t + 1] - y[t - 1];
        s.v.push_back(unit_scale * std::sqrt(dx * dx + dy * dy) / (2.0 * dt));
    }
    for (std::size_t t = 1; t + 1 < s.v.size(); ++t) s.a.push_back((s.v[t + 1] - s.v[t - 1]) / (2.0 * dt));
    for (std::size_t t = 1; t + 1 < s.a.size(); ++t) s.j.push_back((s.a[t + 1] - s.a[t - 1]) / (2.0 * dt));
    return s;
}

// ---------------------------------------------------------------------------
// Rule fixtures

/// One clause over a named atom: kind 0 "<", 1 ">", 2 "IN lo..hi".
struct Clause {
    std::string atom;
    int kind = 0;
    double lo = 0.0, hi = 0.0;

    bool holds(double v) const {
        if (kind == 0) return v < lo;
        if (kind == 1) return v > lo;
        return v >= lo && v <= hi;
    }
    std::string text() const {
        char buf[160];
        if (kind == 2) {
            std::snprintf(buf, sizeof buf, "%s IN %.17g..%.17g", atom.c_str(), lo, hi);
        } else {
            std::snprintf(buf, sizeof buf, "%s %s %.17g", atom.c_str(), kind == 0 ? "<" : ">", lo);
        }
        return buf;
    }
};

/// Conjunction (all_of) or disjunction of clauses.
struct FixtureRule {
    std::string id;
    std::vector<Clause> clauses;
    bool disjunction = false;
    bool free_flow = true, congested = true;
    bool av_indicative = true;
    double weight = 1.0;

    std::string condition() const {
        std::string s;
        for (std::size_t i = 0; i < clauses.size(); ++i) {
            if (i) s += disjunction ? " OR " : " AND ";
            s += clauses[i].text();
        }
        return s;
    }

    /// nullopt when the context is excluded or an atom is missing.
    std::optional<bool> evaluate(const std::map<std::string, double>& f, bool congested_ctx) const {
        if (congested_ctx ? !congested : !free_flow) return std::nullopt;
        bool any = false, all = true;
        for (const auto& c : clauses) {
            auto it = f.find(c.atom);
            if (it == f.end()) return std::nullopt;
            const bool h = c.holds(it->second);
            any = any || h;
            all = all && h;
        }
        return disjunction ? any : all;
    }
};

inline const std::vector<std::string>& fixture_atoms() {
    static const std::vector<std::string> atoms{"mean_speed", "std_speed", "std_accel", "std_jerk", "max_decel",
                                                "speed_fluctuation_rate", "pre_lane_change_decel"};
    return atoms;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

inline FixtureRule random_rule(std::mt19937_64& rng, const std::string& id) {
    FixtureRule r;
    r.id = id;
    const auto& atoms = fixture_atoms();
    const int n = 1 + static_cast<int>(rng() % 3);
    for (int i = 0; i < n; ++i) {
        Clause c;
        c.atom = atoms[rng() % atoms.size()];
        c.kind = static_cast<int>(rng() % 3);
        c.lo = uniform(rng, 0.0, 1.0);
        c.hi = c.lo + uniform(rng, 0.0, 1.0);
        r.clauses.push_back(c);
    }
    r.disjunction = rng() % 2 == 0;
    const auto ctx = rng() % 4;
    r.free_flow = ctx != 1;
    r.congested = ctx != 2;
    r.av_indicative = rng() % 5 != 0;
    r.weight = uniform(rng, 0.05, 1.0);
    return r;
}

/// Feature map over the fixture atoms; the extended atoms are dropped at
/// random to exercise the not-applicable path.
inline std::map<std::string, double> random_features(std::mt19937_64& rng) {
    std::map<std::string, double> f;
    for (const auto& a : fixture_atoms()) {
        const bool extended = a == "max_decel" || a == "speed_fluctuation_rate" || a == "pre_lane_change_decel";
        if (extended && rng() % 4 == 0) continue;
        f[a] = uniform(rng, -0.2, 2.0);
    }
    return f;
}

/// Weighted matching score over AV-indicative rules, summed in rule order.
/// nullopt when no rule applies.
inline std::optional<double> matching_score(const std::vector<FixtureRule>& rules,
                                            const std::map<std::string, double>& f, bool congested_ctx) {
    double num = 0.0, den = 0.0;
    for (const auto& r : rules) {
        if (!r.av_indicative) continue;
        const auto v = r.evaluate(f, congested_ctx);
        if (!v) continue;
        den += r.weight;
        if (*v) num += r.weight;
    }
    if (!(den > 0.0)) return std::nullopt;
    return num / den;
}

/// Correct label predictions over applicable samples. AV-indicative rules
/// predict AV when matched and HDV otherwise; HDV-indicative the reverse.
struct Recount {
    std::size_t applicable = 0, correct = 0;
    double confidence = 0.0;
};

inline Recount confidence(const FixtureRule& r, const std::vector<std::map<std::string, double>>& features,
                          const std::vector<bool>& congested, const std::vector<bool>& is_av) {
    Recount c;
    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto v = r.evaluate(features[i], congested[i]);
        if (!v) continue;
        ++c.applicable;
        const bool says_av = r.av_indicative ? *v : !*v;
        if (says_av == is_av[i]) ++c.correct;
    }
    c.confidence = c.applicable ? static_cast<double>(c.correct) / static_cast<double>(c.applicable) : 0.0;
    return c;
}

// ---------------------------------------------------------------------------
// Metrics

struct Binary {
    double accuracy, precision, recall, f1;
};

inline Binary binary_metrics(const std::vector<bool>& pred_pos, const std::vector<bool>& true_pos) {
    double tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < pred_pos.size(); ++i) {
        if (pred_pos[i] && true_pos[i]) tp += 1;
        if (pred_pos[i] && !true_pos[i]) fp += 1;
        if (!pred_pos[i] && true_pos[i]) fn += 1;
        if (!pred_pos[i] && !true_pos[i]) tn += 1;
    }
    Binary b{};
    b.accuracy = (tp + tn) / (tp + fp + fn + tn);
    b.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    b.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    b.f1 = b.precision + b.recall > 0 ? 2 * b.precision * b.recall / (b.precision + b.recall) : 0.0;
    return b;
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. O(n^2).
inline double auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
    double wins = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!positive[i]) continue;
        for (std::size_t k = 0; k < scores.size(); ++k) {
            if (positive[k]) continue;
            pairs += 1.0;
            if (scores[i] > scores[k]) wins += 1.0;
            if (scores[i] == scores[k]) wins += 0.5;
        }
    }
    return wins / pairs;
}

}  // namespace oracle
