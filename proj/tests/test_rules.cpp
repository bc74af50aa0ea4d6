#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "svbrd/library_io.hpp"
#include "svbrd/predicate.hpp"
#include "svbrd/rule.hpp"
#include "svbrd/seed_library.hpp"

using namespace svbrd;

namespace {

FeatureVector metric_features() {
    FeatureVector f;
    f.unit_system = UnitSystem::metric;
    return f;
}

ErrorCode parse_error_code(std::string_view text, std::size_t* position = nullptr) {
    try {
        parse_predicate(text);
    } catch (const ParseError& e) {
        if (position) *position = e.position();
        return e.code();
    }
    ADD_FAILURE() << "no error for: " << text;
    return ErrorCode::InvalidArgument;
}

Rule rule_of(std::string id, std::string_view text) {
    Rule r;
    r.id = std::move(id);
    r.predicate = parse_predicate(text);
    return r;
}

FeatureVector random_vector(std::mt19937_64& rng) {
    auto f = metric_features();
    f.mean_speed = oracle::uniform(rng, 0, 20);
    f.std_speed = oracle::uniform(rng, 0, 3);
    f.std_accel = oracle::uniform(rng, 0, 2);
    f.std_jerk = oracle::uniform(rng, 0, 1);
    if (rng() % 3) f.max_decel = oracle::uniform(rng, 0, 1.5);
    if (rng() % 3) f.speed_fluctuation_rate = oracle::uniform(rng, 0, 5);
    return f;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("svbrd_test_" + name);
}

}  // namespace

// ---------------------------------------------------------------------------
// parse_predicate

TEST(Parse, SingleComparison) {
    const auto p = parse_predicate("std_jerk < 0.3");
    EXPECT_EQ(p, Predicate::compare(FeatureAtom::std_jerk, CompareOp::less, 0.3));
}

TEST(Parse, ConjunctionOfTwo) {
    const auto p = parse_predicate("std_jerk < 0.5 AND mean_speed > 0");
    ASSERT_EQ(p.kind, Predicate::Kind::all_of);
    ASSERT_EQ(p.children.size(), 2u);
    EXPECT_EQ(p.children[0], Predicate::compare(FeatureAtom::std_jerk, CompareOp::less, 0.5));
    EXPECT_EQ(p.children[1], Predicate::compare(FeatureAtom::mean_speed, CompareOp::greater, 0.0));
}

TEST(Parse, DoubleLessThanPointsAtSecondOperator) {
    std::size_t pos = 0;
    EXPECT_EQ(parse_error_code("std_jerk << 0.3", &pos), ErrorCode::SyntaxError);
    EXPECT_EQ(pos, 10u);
}

TEST(Parse, AndBindsTighterThanOr) {
    const auto p = parse_predicate("std_jerk < 0.3 OR max_decel < 0.6 AND mean_speed > 5");
    ASSERT_EQ(p.kind, Predicate::Kind::any_of);
    ASSERT_EQ(p.children.size(), 2u);
    EXPECT_EQ(p.children[1].kind, Predicate::Kind::all_of);
}

TEST(Parse, RangeNotAndKeywordsCaseInsensitive) {
    const auto p = parse_predicate("not pre_lane_change_decel in 0.2..0.3 and std_speed >= 1");
    ASSERT_EQ(p.kind, Predicate::Kind::all_of);
    EXPECT_EQ(p.children[0].kind, Predicate::Kind::negate);
    EXPECT_EQ(p.children[0].children[0], Predicate::range(FeatureAtom::pre_lane_change_decel, 0.2, 0.3));
}

TEST(Parse, Errors) {
    EXPECT_EQ(parse_error_code("jerk_variance < 0.2"), ErrorCode::UnknownAtom);
    EXPECT_EQ(parse_error_code("std_jerk < inf"), ErrorCode::NonFiniteLiteral);
    EXPECT_EQ(parse_error_code("std_jerk < NaN"), ErrorCode::NonFiniteLiteral);
    EXPECT_EQ(parse_error_code("std_jerk < 1e999"), ErrorCode::NonFiniteLiteral);
    EXPECT_EQ(parse_error_code("std_jerk IN 0.5..0.1"), ErrorCode::InvalidRange);
    EXPECT_EQ(parse_error_code(""), ErrorCode::SyntaxError);
    EXPECT_EQ(parse_error_code("std_jerk < 0.3 AND"), ErrorCode::SyntaxError);
    EXPECT_EQ(parse_error_code("(std_jerk < 0.3"), ErrorCode::SyntaxError);
    EXPECT_EQ(parse_error_code("std_jerk 0.3"), ErrorCode::SyntaxError);
}

TEST(Parse, PrintParseFixpoint) {
    const std::vector<std::string> samples{
        "std_jerk < 0.3",
        "std_jerk < 0.5 AND mean_speed > 0",
        "NOT (std_jerk < 0.3 OR max_decel >= 0.6)",
        "(std_jerk < 0.3 OR max_decel < 0.6) AND mean_speed IN 0..2.7778",
        "lane_change_count = 2 OR NOT NOT std_speed <= 1e-3",
        "mean_accel > -0.1 AND (speed_fluctuation_rate > 2.4 OR lane_change_rate < 0.5)",
    };
    for (const auto& s : samples) {
        const auto p = parse_predicate(s);
        const auto printed = to_string(p);
        const auto reparsed = parse_predicate(printed);
        EXPECT_EQ(reparsed, p) << s;
        EXPECT_EQ(to_string(reparsed), printed) << s;
    }
}

TEST(Parse, FixtureTextRoundTripsExactly) {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 300; ++i) {
        const auto fx = oracle::random_rule(rng, "F");
        const auto p = parse_predicate(fx.condition());
        EXPECT_EQ(parse_predicate(to_string(p)), p) << fx.condition();
    }
}

TEST(Property, DeMorgan) {
    std::mt19937_64 rng(99);
    const char* atoms[] = {"mean_speed", "std_speed", "std_accel", "std_jerk", "max_decel", "speed_fluctuation_rate"};
    for (int i = 0; i < 2000; ++i) {
        char a[96], b[96];
        std::snprintf(a, sizeof a, "%s < %.6f", atoms[rng() % 6], oracle::uniform(rng, 0, 3));
        std::snprintf(b, sizeof b, "%s > %.6f", atoms[rng() % 6], oracle::uniform(rng, 0, 3));
        const auto lhs = parse_predicate(std::string("NOT (") + a + " AND " + b + ")");
        const auto rhs = parse_predicate(std::string("NOT ") + a + " OR NOT " + b);
        const auto f = random_vector(rng);
        EXPECT_EQ(evaluate(lhs, f), evaluate(rhs, f));
    }
}

TEST(Property, EvaluationIsDeterministic) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
        const auto fx = oracle::random_rule(rng, "F");
        const auto p = parse_predicate(fx.condition());
        const auto f = random_vector(rng);
        EXPECT_EQ(evaluate(p, f), evaluate(p, f));
    }
}

// ---------------------------------------------------------------------------
// evaluate_rule

TEST(EvaluateRule, JerkRule) {
    const auto r27 = rule_of("R27", "std_jerk < 0.3");
    auto f = metric_features();
    f.std_jerk = 0.28;
    EXPECT_EQ(evaluate_rule(r27, f, TrafficContext::free_flow, UnitSystem::metric), Verdict::matched);
    f.std_jerk = 0.45;
    EXPECT_EQ(evaluate_rule(r27, f, TrafficContext::free_flow, UnitSystem::metric), Verdict::not_matched);
}

TEST(EvaluateRule, ContextExclusion) {
    auto r = rule_of("R15", "std_speed < 2");
    r.context.congested = false;
    auto f = metric_features();
    f.std_speed = 1.0;
    EXPECT_EQ(evaluate_rule(r, f, TrafficContext::congested, UnitSystem::metric), Verdict::not_applicable);
    EXPECT_EQ(evaluate_rule(r, f, TrafficContext::free_flow, UnitSystem::metric), Verdict::matched);
}

TEST(EvaluateRule, MissingAtomIsNotApplicable) {
    const auto r = rule_of("R3", "max_decel < 0.6");
    EXPECT_EQ(evaluate_rule(r, metric_features(), TrafficContext::free_flow, UnitSystem::metric),
              Verdict::not_applicable);
}

TEST(EvaluateRule, UnitMismatch) {
    const auto r = rule_of("R27", "std_jerk < 0.3");
    FeatureVector f;
    f.unit_system = UnitSystem::pixel;
    try {
        evaluate_rule(r, f, TrafficContext::free_flow, UnitSystem::metric);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnitMismatch);
    }
}

TEST(EvaluateRule, PredictedLabelFollowsPolarity) {
    Rule r = rule_of("H", "std_jerk > 0.4");
    r.polarity = Polarity::HDV_indicative;
    EXPECT_EQ(predicted_label(r, Verdict::matched), Label::HDV);
    EXPECT_EQ(predicted_label(r, Verdict::not_matched), Label::AV);
    EXPECT_FALSE(predicted_label(r, Verdict::not_applicable).has_value());
}

TEST(EvaluateRule, AgreesWithFixtureOracle) {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 500; ++i) {
        const auto fx = oracle::random_rule(rng, "F");
        Rule r = rule_of("F", fx.condition());
        r.context.free_flow = fx.free_flow;
        r.context.congested = fx.congested;
        const auto fmap = oracle::random_features(rng);
        auto f = metric_features();
        for (const auto& [name, value] : fmap) {
            const auto atom = *find_atom(name);
            if (auto* slot = f.extended_slot(atom)) {
                *slot = value;
            } else if (atom == FeatureAtom::mean_speed) {
                f.mean_speed = value;
            } else if (atom == FeatureAtom::std_speed) {
                f.std_speed = value;
            } else if (atom == FeatureAtom::std_accel) {
                f.std_accel = value;
            } else if (atom == FeatureAtom::std_jerk) {
                f.std_jerk = value;
            }
        }
        const bool congested = rng() % 2;
        const auto want = fx.evaluate(fmap, congested);
        const auto got = evaluate_rule(r, f, congested ? TrafficContext::congested : TrafficContext::free_flow,
                                       UnitSystem::metric);
        if (!want) {
            EXPECT_EQ(got, Verdict::not_applicable);
        } else {
            EXPECT_EQ(got, *want ? Verdict::matched : Verdict::not_matched);
        }
    }
}

// ---------------------------------------------------------------------------
// seed_library

TEST(Seed, ElevenVerifiedRules) {
    const auto lib = seed_library();
    EXPECT_EQ(lib.rules().size(), 11u);
    for (const auto& r : lib.rules()) {
        EXPECT_EQ(r.state, RuleState::verified);
        EXPECT_EQ(r.confidence, kSeedConfidence);
        EXPECT_EQ(r.polarity, Polarity::AV_indicative);
    }
    EXPECT_EQ(lib.units(), UnitSystem::metric);
    EXPECT_NO_THROW(lib.validate());
}

TEST(Seed, PrintedThresholds) {
    const auto lib = seed_library();
    ASSERT_NE(lib.find("R3"), nullptr);
    EXPECT_EQ(to_string(lib.find("R3")->predicate), "max_decel < 0.6");
    EXPECT_EQ(to_string(lib.find("R30")->predicate), "std_jerk < 0.5");
    EXPECT_EQ(to_string(lib.find("R27")->predicate), "std_jerk < 0.3");
    for (const char* id : {"R2", "R4", "R11", "R12", "R20", "R29", "R7", "R15"}) EXPECT_NE(lib.find(id), nullptr) << id;
}

TEST(Seed, RefinedRulesAreNonCongested) {
    const auto lib = seed_library();
    for (const char* id : {"R7", "R15"}) {
        EXPECT_TRUE(lib.find(id)->context.free_flow);
        EXPECT_FALSE(lib.find(id)->context.congested);
    }
}

// ---------------------------------------------------------------------------
// RuleLibrary

TEST(Library, VersionBumpsOnMutationOnly) {
    RuleLibrary lib(0.7);
    const auto v0 = lib.version();
    lib.add(rule_of("A", "std_jerk < 0.3"));
    EXPECT_GT(lib.version(), v0);
    const auto v1 = lib.version();
    lib.update(*lib.find("A"));
    EXPECT_EQ(lib.version(), v1);
    auto changed = *lib.find("A");
    changed.predicate = parse_predicate("std_jerk < 0.35");
    lib.update(changed);
    EXPECT_GT(lib.version(), v1);
}

TEST(Library, DuplicateAddThrows) {
    RuleLibrary lib(0.7);
    lib.add(rule_of("A", "std_jerk < 0.3"));
    EXPECT_THROW(lib.add(rule_of("A", "std_jerk < 0.4")), Error);
}

TEST(Library, VerifiedBelowThetaFailsValidation) {
    RuleLibrary lib(0.7);
    auto r = rule_of("A", "std_jerk < 0.3");
    r.state = RuleState::verified;
    r.confidence = 0.69;
    lib.add(r);
    EXPECT_THROW(lib.validate(), Error);
}

TEST(LibraryIo, SeedRoundTrip) {
    auto lib = seed_library();
    auto r = *lib.find("R30");
    r.revision = 2;
    lib.update(r);
    lib.log({0, 1, "R30", "refine", "std_jerk < 0.4", "std_jerk < 0.5", "threshold too strict"});
    const auto path = temp_file("roundtrip.json");
    save_library(lib, path);
    EXPECT_EQ(load_library(path), lib);
    EXPECT_EQ(serialize_library(load_library(path)), serialize_library(lib));
    std::filesystem::remove(path);
}

TEST(LibraryIo, TruncatedFileIsCorrupt) {
    const auto text = serialize_library(seed_library());
    try {
        parse_library(text.substr(0, text.size() / 2));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CorruptFile);
    }
}

TEST(LibraryIo, MissingVersion) {
    auto j = library_to_json(seed_library());
    j.erase("version");
    try {
        library_from_json(j);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingVersion);
    }
}

TEST(LibraryIo, DuplicateIdsFailValidation) {
    auto j = library_to_json(seed_library());
    j["rules"].push_back(j["rules"][0]);
    try {
        library_from_json(j);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ValidationFailed);
    }
}

TEST(LibraryIo, UnknownFieldsSurvive) {
    auto j = library_to_json(seed_library());
    j["origin"] = "field study";
    j["rules"][0]["note"] = 3;
    const auto back = library_to_json(library_from_json(j));
    EXPECT_EQ(back["origin"], "field study");
    EXPECT_EQ(back["rules"][0]["note"], 3);
}
