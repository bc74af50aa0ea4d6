#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "svbrd/classification.hpp"
#include "svbrd/metrics.hpp"
#include "svbrd/seed_library.hpp"

using namespace svbrd;

namespace {

Rule verified(const std::string& id, std::string_view text, double confidence) {
    Rule r;
    r.id = id;
    r.predicate = parse_predicate(text);
    r.confidence = confidence;
    r.state = RuleState::verified;
    return r;
}

Rule outcome_rule(const std::string& id, std::string_view text, Outcome o, Task task, double confidence = 1.0) {
    Rule r = verified(id, text, confidence);
    r.outcome = o;
    r.context.tasks = {task};
    return r;
}

FeatureVector features(double jerk, double decel = 0.5) {
    FeatureVector f;
    f.unit_system = UnitSystem::metric;
    f.std_jerk = jerk;
    f.max_decel = decel;
    f.mean_speed = 10.0;
    return f;
}

RuleLibrary two_rule_library() {
    RuleLibrary lib(0.5);
    lib.add(verified("A", "std_jerk < 0.3", 0.9));
    lib.add(verified("B", "max_decel < 0.6", 0.6));
    return lib;
}

Trajectory drift(double lateral_per_frame, std::size_t n = 90) {
    Trajectory t;
    t.vehicle_id = "d";
    for (std::size_t i = 0; i < n; ++i) {
        t.points.push_back({static_cast<std::int64_t>(i), 0.4 * i, lateral_per_frame * i});
    }
    return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// matching score and identification

TEST(Score, AllMatched) {
    EXPECT_EQ(matching_score(features(0.2, 0.5), TrafficContext::free_flow, two_rule_library()).score, 1.0);
}

TEST(Score, NoneMatched) {
    EXPECT_EQ(matching_score(features(0.5, 0.9), TrafficContext::free_flow, two_rule_library()).score, 0.0);
}

TEST(Score, WeightedPartialMatch) {
    const auto rep = matching_score(features(0.2, 0.9), TrafficContext::free_flow, two_rule_library());
    EXPECT_DOUBLE_EQ(rep.score, 0.9 / 1.5);
    EXPECT_DOUBLE_EQ(rep.applicable_weight_sum, 1.5);
    EXPECT_DOUBLE_EQ(rep.matched_weight_sum, 0.9);
    ASSERT_EQ(rep.entries.size(), 2u);
    EXPECT_EQ(rep.entries[0].verdict, Verdict::matched);
    EXPECT_EQ(rep.entries[1].verdict, Verdict::not_matched);
}

TEST(Score, NotApplicableLeavesDenominator) {
    auto f = features(0.2);
    f.max_decel.reset();
    const auto rep = matching_score(f, TrafficContext::free_flow, two_rule_library());
    EXPECT_EQ(rep.score, 1.0);
    EXPECT_DOUBLE_EQ(rep.applicable_weight_sum, 0.9);
    EXPECT_EQ(rep.entries[1].verdict, Verdict::not_applicable);
}

TEST(Score, IgnoresCandidatesHdvRulesAndOtherTasks) {
    auto lib = two_rule_library();
    Rule cand = verified("C", "std_jerk > 0", 0.9);
    cand.state = RuleState::candidate;
    lib.add(cand);
    Rule hdv = verified("H", "std_jerk > 0", 0.9);
    hdv.polarity = Polarity::HDV_indicative;
    lib.add(hdv);
    lib.add(outcome_rule("S", "std_jerk > 0", Outcome::accelerate, Task::speed));
    const auto rep = matching_score(features(0.2, 0.9), TrafficContext::free_flow, lib);
    EXPECT_DOUBLE_EQ(rep.score, 0.6);
    EXPECT_EQ(rep.entries.size(), 2u);
}

TEST(Score, NoApplicableRules) {
    RuleLibrary lib(0.5);
    Rule r = verified("F", "std_jerk < 0.3", 0.9);
    r.context.congested = false;
    lib.add(r);
    try {
        matching_score(features(0.2), TrafficContext::congested, lib);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NoApplicableRules);
    }
    const auto rep = classify_vehicle("v", features(0.2), TrafficContext::congested, lib);
    EXPECT_EQ(rep.decision, Decision::undetermined);
    ASSERT_EQ(rep.entries.size(), 1u);
    EXPECT_EQ(rep.entries[0].verdict, Verdict::not_applicable);
}

TEST(Score, MatchesFixtureOracle) {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<oracle::FixtureRule> fx;
        RuleLibrary lib(0.0);
        for (int k = 0; k < 1 + static_cast<int>(rng() % 6); ++k) {
            fx.push_back(oracle::random_rule(rng, "F" + std::to_string(k)));
            const auto& o = fx.back();
            Rule r = verified(o.id, o.condition(), o.weight);
            r.polarity = o.av_indicative ? Polarity::AV_indicative : Polarity::HDV_indicative;
            r.context.free_flow = o.free_flow;
            r.context.congested = o.congested;
            lib.add(r);
        }
        const auto fmap = oracle::random_features(rng);
        FeatureVector f;
        f.unit_system = UnitSystem::metric;
        for (const auto& [name, v] : fmap) {
            const auto atom = *find_atom(name);
            if (auto* slot = f.extended_slot(atom)) *slot = v;
            else if (atom == FeatureAtom::mean_speed) f.mean_speed = v;
            else if (atom == FeatureAtom::std_speed) f.std_speed = v;
            else if (atom == FeatureAtom::std_accel) f.std_accel = v;
            else if (atom == FeatureAtom::std_jerk) f.std_jerk = v;
        }
        const bool congested = rng() % 2;
        const auto ctx = congested ? TrafficContext::congested : TrafficContext::free_flow;
        const auto want = oracle::matching_score(fx, fmap, congested);
        if (!want) {
            EXPECT_THROW(matching_score(f, ctx, lib), Error);
        } else {
            EXPECT_EQ(matching_score(f, ctx, lib).score, *want);
        }
    }
}

TEST(Identify, Threshold) {
    const auto lib = two_rule_library();
    const auto partial = identify_vehicle(features(0.2, 0.9), TrafficContext::free_flow, lib, 0.5);
    EXPECT_EQ(partial.decision, Decision::AV);
    EXPECT_DOUBLE_EQ(partial.confidence, (0.6 - 0.5) / 0.5);
    EXPECT_EQ(identify_vehicle(features(0.2, 0.9), TrafficContext::free_flow, lib, 0.6).decision, Decision::AV);
    const auto none = identify_vehicle(features(0.5, 0.9), TrafficContext::free_flow, lib, 0.5);
    EXPECT_EQ(none.decision, Decision::HDV);
    EXPECT_EQ(none.confidence, 1.0);
    EXPECT_THROW(identify_vehicle(features(0.2), TrafficContext::free_flow, lib, 1.5), Error);
}

TEST(Identify, ExactBoundaryIsAv) {
    RuleLibrary lib(0.5);
    lib.add(verified("A", "std_jerk < 0.3", 0.5));
    lib.add(verified("B", "max_decel < 0.6", 0.5));
    const auto rep = identify_vehicle(features(0.2, 0.9), TrafficContext::free_flow, lib, 0.5);
    EXPECT_EQ(rep.score, 0.5);
    EXPECT_EQ(rep.decision, Decision::AV);
    EXPECT_EQ(rep.confidence, 0.0);
}

TEST(Identify, DeltaMonotonicity) {
    std::mt19937_64 rng(2);
    const auto lib = seed_library();
    for (int i = 0; i < 300; ++i) {
        auto f = features(oracle::uniform(rng, 0.1, 0.6), oracle::uniform(rng, 0.2, 1.0));
        f.std_accel = oracle::uniform(rng, 0.5, 2.0);
        f.std_speed = oracle::uniform(rng, 0.5, 3.0);
        const double d1 = oracle::uniform(rng, 0, 1), d2 = oracle::uniform(rng, d1, 1);
        const bool av_hi = identify_vehicle(f, TrafficContext::free_flow, lib, d2).decision == Decision::AV;
        const bool av_lo = identify_vehicle(f, TrafficContext::free_flow, lib, d1).decision == Decision::AV;
        EXPECT_TRUE(!av_hi || av_lo);
    }
}

TEST(Context, DerivedFromSpeedUnlessExplicit) {
    auto f = features(0.2);
    f.mean_speed = 1.0;
    EXPECT_EQ(derive_context(f), TrafficContext::congested);
    EXPECT_EQ(derive_context(f, TrafficContext::free_flow), TrafficContext::free_flow);
    f.mean_speed = 8.0;
    EXPECT_EQ(derive_context(f), TrafficContext::free_flow);
}

// ---------------------------------------------------------------------------
// speed and lane-change prediction

TEST(Predict, AcceleratingPriorWithoutRules) {
    const RuleLibrary empty(0.7);
    const auto p = predict_speed_change(features(0.2), {1.0, 0.0}, TrafficContext::free_flow, empty);
    EXPECT_EQ(p.predicted, Outcome::accelerate);
    EXPECT_EQ(p.score(Outcome::accelerate), 1.0);
    EXPECT_EQ(p.horizon, 3);
}

TEST(Predict, SteadySpeed) {
    const RuleLibrary empty(0.7);
    EXPECT_EQ(predict_speed_change(features(0.2), {0.0, 0.0}, TrafficContext::free_flow, empty).predicted,
              Outcome::maintain);
}

TEST(Predict, BlendTieGoesToMaintain) {
    RuleLibrary lib(0.7);
    lib.add(outcome_rule("D", "std_jerk < 0.3", Outcome::decelerate, Task::speed, 1.0));
    const auto p = predict_speed_change(features(0.2), {0.0, 0.0}, TrafficContext::free_flow, lib);
    EXPECT_DOUBLE_EQ(p.score(Outcome::decelerate), 0.5);
    EXPECT_DOUBLE_EQ(p.score(Outcome::maintain), 0.5);
    EXPECT_EQ(p.predicted, Outcome::maintain);
}

TEST(Predict, LaneKeepWithoutDrift) {
    const RuleLibrary empty(0.7);
    EXPECT_EQ(predict_lane_change(features(0.2), {0.0, 0.0}, TrafficContext::free_flow, empty).predicted,
              Outcome::keep_lane);
}

TEST(Predict, LateralDriftSetsDirection) {
    const RuleLibrary empty(0.7);
    for (auto [per_frame, want] : {std::pair{0.02, Outcome::right_lc}, {-0.02, Outcome::left_lc}}) {
        const auto t = drift(per_frame);
        const auto recent = recent_motion(t, compute_kinematics(t));
        EXPECT_NEAR(recent.lateral_velocity, per_frame * 30.0, 1e-9);
        EXPECT_EQ(predict_lane_change(features(0.2), recent, TrafficContext::free_flow, empty).predicted, want);
    }
}

TEST(Predict, CongestionGatesFreeFlowRule) {
    RuleLibrary lib(0.7);
    Rule r = outcome_rule("L", "std_jerk < 0.3", Outcome::left_lc, Task::lane_change, 1.0);
    r.context.congested = false;
    lib.add(r);
    const auto free = predict_lane_change(features(0.2), {0.0, 0.0}, TrafficContext::free_flow, lib);
    EXPECT_DOUBLE_EQ(free.score(Outcome::left_lc), 0.5);
    const auto jam = predict_lane_change(features(0.2), {0.0, 0.0}, TrafficContext::congested, lib);
    EXPECT_EQ(jam.score(Outcome::left_lc), 0.0);
    EXPECT_EQ(jam.predicted, Outcome::keep_lane);
}

TEST(Predict, ScoresFormADistribution) {
    std::mt19937_64 rng(6);
    RuleLibrary lib(0.5);
    lib.add(outcome_rule("a", "std_jerk < 0.3", Outcome::accelerate, Task::speed, 0.8));
    lib.add(outcome_rule("d", "max_decel > 0.5", Outcome::decelerate, Task::speed, 0.6));
    for (int i = 0; i < 100; ++i) {
        const auto p = predict_speed_change(features(oracle::uniform(rng, 0, 0.6), oracle::uniform(rng, 0, 1)),
                                            {oracle::uniform(rng, -1, 1), 0.0}, TrafficContext::free_flow, lib, 2,
                                            oracle::uniform(rng, 0, 1));
        double sum = 0.0;
        for (const auto& [o, s] : p.scores) sum += s;
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(Predict, HorizonBounds) {
    const RuleLibrary empty(0.7);
    for (int h : {1, 5}) {
        try {
            predict_speed_change(features(0.2), {}, TrafficContext::free_flow, empty, h);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::InvalidHorizon);
        }
    }
    EXPECT_NO_THROW(predict_lane_change(features(0.2), {}, TrafficContext::free_flow, empty, 4));
}

TEST(Predict, FutureOutcomesFromTail) {
    const auto t = drift(0.05, 200);  // 1.5 u/s lateral, 4.5 u over 3 s
    const auto kin = compute_kinematics(t);
    EXPECT_EQ(future_outcomes(t, kin, 3, 5.0).lane, Outcome::right_lc);
    EXPECT_EQ(future_outcomes(t, kin, 3, 10.0).lane, Outcome::keep_lane);
    EXPECT_EQ(future_outcomes(t, kin, 3, 5.0).speed, Outcome::maintain);
    EXPECT_EQ(observed_prefix(t, 3).size(), 110u);
    EXPECT_THROW(observed_prefix(drift(0.0, 60), 2), Error);
}

// ---------------------------------------------------------------------------
// metrics

TEST(Metrics, AllCorrect) {
    const std::vector<std::string> y{"AV", "HDV", "AV", "HDV"};
    const auto m = compute_metrics(y, y, {"AV", "HDV"});
    EXPECT_EQ(m.accuracy, 1.0);
    EXPECT_EQ(m.positive().precision, 1.0);
    EXPECT_EQ(m.positive().recall, 1.0);
    EXPECT_EQ(m.positive().f1, 1.0);
}

TEST(Metrics, PublishedPrecisionRecallGiveF1) {
    EXPECT_NEAR(f1_score(0.894, 0.980), 0.935, 5e-4);
}

TEST(Metrics, HandBuiltMatrix) {
    const auto m = metrics_from_matrix(ConfusionMatrix::binary(3, 1, 2, 4));
    EXPECT_DOUBLE_EQ(m.accuracy, 0.7);
    EXPECT_DOUBLE_EQ(m.positive().precision, 0.75);
    EXPECT_DOUBLE_EQ(m.positive().recall, 0.6);
    EXPECT_DOUBLE_EQ(m.positive().f1, 2 * 0.75 * 0.6 / 1.35);
    EXPECT_EQ(m.n_samples, 10u);
}

TEST(Metrics, SameMatrixFromLabels) {
    std::vector<std::string> pred, truth;
    auto push = [&](const char* p, const char* t, int n) {
        for (int i = 0; i < n; ++i) {
            pred.emplace_back(p);
            truth.emplace_back(t);
        }
    };
    push("AV", "AV", 3);
    push("AV", "HDV", 1);
    push("HDV", "AV", 2);
    push("HDV", "HDV", 4);
    EXPECT_EQ(compute_metrics(pred, truth, {"AV", "HDV"}), metrics_from_matrix(ConfusionMatrix::binary(3, 1, 2, 4)));
}

TEST(Metrics, MatchesOracleOnRandomLabels) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> pred, truth;
        std::vector<bool> pp, tp;
        for (int i = 0; i < 200; ++i) {
            pp.push_back(rng() % 3 != 0);
            tp.push_back(rng() % 2 != 0);
            pred.emplace_back(pp.back() ? "AV" : "HDV");
            truth.emplace_back(tp.back() ? "AV" : "HDV");
        }
        const auto m = compute_metrics(pred, truth, {"AV", "HDV"});
        const auto o = oracle::binary_metrics(pp, tp);
        EXPECT_DOUBLE_EQ(m.accuracy, o.accuracy);
        EXPECT_DOUBLE_EQ(m.positive().precision, o.precision);
        EXPECT_DOUBLE_EQ(m.positive().recall, o.recall);
        EXPECT_DOUBLE_EQ(m.positive().f1, o.f1);
    }
}

TEST(Metrics, UndeterminedPolicies) {
    const std::vector<std::string> pred{"AV", "undetermined", "HDV"}, truth{"AV", "AV", "HDV"};
    const auto ex = compute_metrics(pred, truth, {"AV", "HDV"});
    EXPECT_EQ(ex.n_samples, 2u);
    EXPECT_EQ(ex.n_undetermined, 1u);
    EXPECT_EQ(ex.accuracy, 1.0);
    const auto wrong = compute_metrics(pred, truth, {"AV", "HDV"}, UndeterminedPolicy::count_as_wrong);
    EXPECT_EQ(wrong.n_samples, 3u);
    EXPECT_DOUBLE_EQ(wrong.positive().recall, 0.5);
}

TEST(Metrics, ThreeClassMacroAverage) {
    const std::vector<std::string> pred{"accelerate", "maintain", "decelerate", "maintain"};
    const std::vector<std::string> truth{"accelerate", "maintain", "maintain", "decelerate"};
    const auto m = compute_metrics(pred, truth, {"accelerate", "decelerate", "maintain"});
    EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
    EXPECT_DOUBLE_EQ(m.macro_recall, (1.0 + 0.0 + 0.5) / 3.0);
}

TEST(Metrics, Errors) {
    const std::vector<std::string> a{"AV"}, b{"AV", "HDV"}, none;
    auto code = [](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::InvalidArgument;
    };
    EXPECT_EQ(code([&] { compute_metrics(a, b, {"AV", "HDV"}); }), ErrorCode::LengthMismatch);
    EXPECT_EQ(code([&] { compute_metrics(none, none, {"AV", "HDV"}); }), ErrorCode::EmptyInput);
}

TEST(Auc, PerfectSeparation) {
    const std::vector<double> s{0.9, 0.8, 0.3, 0.1};
    EXPECT_EQ(compute_roc_auc(s, {true, true, false, false}), 1.0);
}

TEST(Auc, RandomLabelsNearHalf) {
    std::mt19937_64 rng(1234);
    std::vector<double> s;
    std::vector<bool> y;
    for (int i = 0; i < 1000; ++i) {
        s.push_back(oracle::uniform(rng, 0, 1));
        y.push_back(rng() % 2 == 0);
    }
    EXPECT_NEAR(compute_roc_auc(s, y), 0.5, 0.05);
    EXPECT_NEAR(compute_roc_auc(s, y), oracle::auc(s, y), 1e-12);
}

TEST(Auc, AllTied) {
    const std::vector<double> s(10, 0.4);
    EXPECT_EQ(compute_roc_auc(s, {true, false, true, false, true, false, false, false, true, true}), 0.5);
}

TEST(Auc, TiesMatchPairCount) {
    std::mt19937_64 rng(55);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s;
        std::vector<bool> y{true, false};
        for (int i = 0; i < 60; ++i) {
            s.push_back(static_cast<double>(rng() % 5) / 4.0);
            if (i >= 2) y.push_back(rng() % 2 == 0);
        }
        EXPECT_NEAR(compute_roc_auc(s, y), oracle::auc(s, y), 1e-12);
    }
}

TEST(Auc, DegenerateLabels) {
    const std::vector<double> s{0.1, 0.2};
    try {
        compute_roc_auc(s, {true, true});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateLabels);
    }
}
