#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "skelmatch/matching.hpp"
#include "support/fixtures.hpp"

using namespace skelmatch;
using namespace skelmatch::testing;

namespace {

MatchOptions exact_options(Strategy strategy, bool inner_norm = false) {
    MatchOptions options;
    options.strategy = strategy;
    options.inner_normalization = inner_norm;
    options.solver.choice = SolverChoice::kExact;
    options.solver.exact_limit = 1 << 20;
    return options;
}

SolverOptions exact_solver() { return exact_options(Strategy::kS).solver; }

double recompute_from_components(const MatchScore& score) {
    double ms = 0, mt = 0, cs = 0, ct = 0;
    int n_ms = 0, n_mt = 0, n_cs = 0, n_ct = 0;
    for (const auto& [term, value] : score.components) {
        if (term.rfind("s(Xs", 0) == 0) { ms += value; ++n_ms; }
        else if (term.rfind("s(Xt", 0) == 0) { mt += value; ++n_mt; }
        else if (term.rfind("s(pool(Xs", 0) == 0) { cs += value; ++n_cs; }
        else if (term.rfind("s(pool(Xt", 0) == 0) { ct += value; ++n_ct; }
    }
    const bool norm = score.inner_normalization;
    auto group = [&](double sum, int n) { return norm && n > 0 ? sum / n : sum; };
    switch (score.strategy) {
        case Strategy::kS: return ms;
        case Strategy::kMs: return group(ms, n_ms);
        case Strategy::kMt: return group(mt, n_mt);
        case Strategy::kCs: return group(cs, n_cs);
        case Strategy::kCt: return group(ct, n_ct);
        case Strategy::kM: return (group(ms, n_ms) + group(mt, n_mt)) / 2.0;
        case Strategy::kMC:
            return (group(ms, n_ms) + group(mt, n_mt) + group(cs, n_cs) +
                    group(ct, n_ct)) / 4.0;
    }
    return 0.0;
}

}  // namespace

TEST_CASE("strategy names round-trip") {
    for (Strategy s : {Strategy::kS, Strategy::kMs, Strategy::kMt, Strategy::kM,
                       Strategy::kCs, Strategy::kCt, Strategy::kMC})
        CHECK(strategy_from_name(strategy_name(s)) == s);
    CHECK_THROWS_AS(strategy_from_name("XXL"), Error);
}

TEST_CASE("identical pyramids with level-coincident pooled features") {
    // every node carries one vector, so pooled features coincide across levels
    const ScalePyramid p = build_pyramid(node_constant_map(4, 25, 8, 17));

    CHECK(multi_spatial(p, p, exact_solver()).total == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(multi_temporal(p, p, exact_solver()).total == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(cross_spatial(p, p, exact_solver()).total == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(cross_temporal(p, p, exact_solver()).total == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(combined(p, p, exact_options(Strategy::kS)).total ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(combined(p, p, exact_options(Strategy::kM)).total ==
          doctest::Approx(3.0).epsilon(1e-12));
    CHECK(combined(p, p, exact_options(Strategy::kMC)).total ==
          doctest::Approx(4.5).epsilon(1e-12));

    SUBCASE("inner normalization rescales the maxima to 1") {
        CHECK(combined(p, p, exact_options(Strategy::kMC, true)).total ==
              doctest::Approx(1.0).epsilon(1e-12));
        CHECK(combined(p, p, exact_options(Strategy::kM, true)).total ==
              doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("orthogonal features score zero under every strategy") {
    FeatureMap a(2, 25, 8), b(2, 25, 8);
    for (int n = 0; n < 25; ++n)
        for (int t = 0; t < 8; ++t) {
            a.at(0, n, t) = 1.0;  // all X vectors along e1
            b.at(1, n, t) = 1.0;  // all Y vectors along e2
        }
    const ScalePyramid pa = build_pyramid(a);
    const ScalePyramid pb = build_pyramid(b);
    for (Strategy s : {Strategy::kS, Strategy::kMs, Strategy::kMt, Strategy::kM,
                       Strategy::kCs, Strategy::kCt, Strategy::kMC})
        CHECK(combined(pa, pb, exact_options(s)).total ==
              doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("aggregates equal per-term oracle sums on random pyramids") {
    const ScalePyramid x = build_pyramid(random_map(4, 25, 4, 71));
    const ScalePyramid y = build_pyramid(random_map(4, 25, 4, 72));
    const SolverOptions solver = exact_solver();

    SUBCASE("multi-scale") {
        double spatial = 0.0;
        for (int level = 1; level <= 3; ++level)
            spatial += relevance_score(NodeSet::from_feature_map(x.spatial(level)),
                                       NodeSet::from_feature_map(y.spatial(level)),
                                       solver)
                           .score;
        CHECK(multi_spatial(x, y, solver).total ==
              doctest::Approx(spatial).epsilon(1e-12));

        double temporal = 0.0;
        for (int level = 1; level <= 3; ++level)
            temporal += relevance_score(NodeSet::from_feature_map(x.temporal(level)),
                                        NodeSet::from_feature_map(y.temporal(level)),
                                        solver)
                            .score;
        CHECK(multi_temporal(x, y, solver).total ==
              doctest::Approx(temporal).epsilon(1e-12));
    }
    SUBCASE("cross-scale via the explicit 6-term loops") {
        double cs = 0.0;
        for (int i = 1; i <= 3; ++i)
            for (int j = 1; j <= 3; ++j) {
                if (i == j) continue;
                cs += relevance_score(pool_over_joints(x.spatial(i)),
                                      pool_over_joints(y.spatial(j)), solver)
                          .score;
            }
        CHECK(cross_spatial(x, y, solver).total == doctest::Approx(cs).epsilon(1e-12));

        double ct = 0.0;
        for (int i = 1; i <= 3; ++i)
            for (int j = 1; j <= 3; ++j) {
                if (i == j) continue;
                ct += relevance_score(pool_over_frames(x.temporal(i)),
                                      pool_over_frames(y.temporal(j)), solver)
                          .score;
            }
        CHECK(cross_temporal(x, y, solver).total == doctest::Approx(ct).epsilon(1e-12));
    }
    SUBCASE("combined strategies assemble from the component ops") {
        const double ms = multi_spatial(x, y, solver).total;
        const double mt = multi_temporal(x, y, solver).total;
        const double cs = cross_spatial(x, y, solver).total;
        const double ct = cross_temporal(x, y, solver).total;
        CHECK(combined(x, y, exact_options(Strategy::kM)).total ==
              doctest::Approx((ms + mt) / 2).epsilon(1e-12));
        CHECK(combined(x, y, exact_options(Strategy::kMC)).total ==
              doctest::Approx((ms + mt + cs + ct) / 4).epsilon(1e-12));
        CHECK(combined(x, y, exact_options(Strategy::kMC, true)).total ==
              doctest::Approx((ms / 3 + mt / 3 + cs / 6 + ct / 6) / 4).epsilon(1e-12));
    }
}

TEST_CASE("totals are recomputable from recorded components") {
    const ScalePyramid x = build_pyramid(random_map(3, 25, 4, 81));
    const ScalePyramid y = build_pyramid(random_map(3, 25, 4, 82));
    for (Strategy s : {Strategy::kS, Strategy::kMs, Strategy::kMt, Strategy::kM,
                       Strategy::kCs, Strategy::kCt, Strategy::kMC})
        for (bool inner : {false, true}) {
            const MatchScore score = combined(x, y, exact_options(s, inner));
            CHECK(score.total ==
                  doctest::Approx(recompute_from_components(score)).epsilon(1e-12));
        }
    SUBCASE("MC records all 18 terms") {
        const MatchScore score = combined(x, y, exact_options(Strategy::kMC));
        CHECK(score.components.size() == 18);
        CHECK(score.component("s(Xs1,Ys1)") == score.component("s(Xt1,Yt1)"));
    }
}

TEST_CASE("every strategy is symmetric") {
    const ScalePyramid x = build_pyramid(random_map(3, 25, 4, 91));
    const ScalePyramid y = build_pyramid(random_map(3, 25, 4, 92));
    for (Strategy s : {Strategy::kS, Strategy::kMs, Strategy::kMt, Strategy::kM,
                       Strategy::kCs, Strategy::kCt, Strategy::kMC})
        CHECK(std::abs(combined(x, y, exact_options(s)).total -
                       combined(y, x, exact_options(s)).total) <= 1e-9);
}

TEST_CASE("shape mismatches name the level") {
    const ScalePyramid x = build_pyramid(random_map(3, 25, 8, 93));
    const ScalePyramid y = build_pyramid(random_map(3, 25, 4, 94));
    CHECK_THROWS_WITH_AS(multi_spatial(x, y, exact_solver()),
                         doctest::Contains("spatial level 1"), Error);
    const ScalePyramid z = build_pyramid(random_map(2, 25, 8, 95));
    CHECK_THROWS_WITH_AS(cross_spatial(x, z, exact_solver()),
                         doctest::Contains("channel"), Error);
}

TEST_CASE("match score JSON carries the component breakdown") {
    const ScalePyramid x = build_pyramid(node_constant_map(3, 25, 4, 5));
    const MatchScore score = combined(x, x, exact_options(Strategy::kMC));
    const auto doc = nlohmann::json::parse(match_score_to_json(score));
    CHECK(doc["strategy"] == "MC");
    CHECK(doc["total"].get<double>() == doctest::Approx(4.5).epsilon(1e-12));
    CHECK(doc["components"].size() == 18);
    CHECK(doc["components"][0].contains("term"));
    CHECK(doc["components"][0].contains("score"));
}
