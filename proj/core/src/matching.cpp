#include "skelmatch/matching.hpp"

#include <array>

#include <nlohmann/json.hpp>

namespace skelmatch {

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::kS: return "S";
        case Strategy::kMs: return "Ms";
        case Strategy::kMt: return "Mt";
        case Strategy::kM: return "M";
        case Strategy::kCs: return "Cs";
        case Strategy::kCt: return "Ct";
        case Strategy::kMC: return "MC";
    }
    return "?";
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "S") return Strategy::kS;
    if (name == "Ms") return Strategy::kMs;
    if (name == "Mt") return Strategy::kMt;
    if (name == "M") return Strategy::kM;
    if (name == "Cs") return Strategy::kCs;
    if (name == "Ct") return Strategy::kCt;
    if (name == "MC") return Strategy::kMC;
    throw validation_error("unknown strategy '" + name +
                           "' (expected S, Ms, Mt, M, Cs, Ct or MC)");
}

double MatchScore::component(const std::string& term) const {
    for (const auto& [name, value] : components)
        if (name == term) return value;
    throw validation_error("no component '" + term + "' in match score");
}

namespace {

void check_level_shapes(const FeatureMap& a, const FeatureMap& b, const char* axis,
                        int level) {
    if (!a.same_shape(b))
        throw validation_error(std::string("shape-mismatch at ") + axis + " level " +
                               std::to_string(level) + ": " + a.shape_string() +
                               " vs " + b.shape_string());
}

void check_channels(const ScalePyramid& x, const ScalePyramid& y) {
    if (x.s1.channels != y.s1.channels)
        throw validation_error("shape-mismatch: channel counts differ (" +
                               std::to_string(x.s1.channels) + " vs " +
                               std::to_string(y.s1.channels) + ")");
}

double term_score(const NodeSet& x, const NodeSet& y, const SolverOptions& solver) {
    return relevance_score(x, y, solver).score;
}

MatchScore multi_scale(const ScalePyramid& x, const ScalePyramid& y,
                       const SolverOptions& solver, bool spatial) {
    const char* axis = spatial ? "spatial" : "temporal";
    const char tag = spatial ? 's' : 't';
    MatchScore score;
    score.strategy = spatial ? Strategy::kMs : Strategy::kMt;
    for (int level = 1; level <= 3; ++level) {
        const FeatureMap& a = spatial ? x.spatial(level) : x.temporal(level);
        const FeatureMap& b = spatial ? y.spatial(level) : y.temporal(level);
        check_level_shapes(a, b, axis, level);
        const double s = term_score(NodeSet::from_feature_map(a),
                                    NodeSet::from_feature_map(b), solver);
        score.components.emplace_back("s(X" + std::string(1, tag) +
                                          std::to_string(level) + ",Y" +
                                          std::string(1, tag) +
                                          std::to_string(level) + ")",
                                      s);
        score.total += s;
    }
    return score;
}

MatchScore cross_scale(const ScalePyramid& x, const ScalePyramid& y,
                       const SolverOptions& solver, bool spatial) {
    check_channels(x, y);
    const char tag = spatial ? 's' : 't';
    std::array<NodeSet, 3> px, py;
    for (int level = 1; level <= 3; ++level) {
        const FeatureMap& a = spatial ? x.spatial(level) : x.temporal(level);
        const FeatureMap& b = spatial ? y.spatial(level) : y.temporal(level);
        // Average away the non-shared axis: joints for cross-spatial
        // (leaving T frame vectors), frames for cross-temporal (N vectors).
        px[level - 1] = spatial ? pool_over_joints(a) : pool_over_frames(a);
        py[level - 1] = spatial ? pool_over_joints(b) : pool_over_frames(b);
    }
    MatchScore score;
    score.strategy = spatial ? Strategy::kCs : Strategy::kCt;
    for (int i = 1; i <= 3; ++i)
        for (int j = 1; j <= 3; ++j) {
            if (i == j) continue;
            const double s = term_score(px[i - 1], py[j - 1], solver);
            score.components.emplace_back(
                "s(pool(X" + std::string(1, tag) + std::to_string(i) + "),pool(Y" +
                    std::string(1, tag) + std::to_string(j) + "))",
                s);
            score.total += s;
        }
    return score;
}

}  // namespace

MatchScore multi_spatial(const ScalePyramid& x, const ScalePyramid& y,
                         const SolverOptions& solver) {
    return multi_scale(x, y, solver, true);
}

MatchScore multi_temporal(const ScalePyramid& x, const ScalePyramid& y,
                          const SolverOptions& solver) {
    return multi_scale(x, y, solver, false);
}

MatchScore cross_spatial(const ScalePyramid& x, const ScalePyramid& y,
                         const SolverOptions& solver) {
    return cross_scale(x, y, solver, true);
}

MatchScore cross_temporal(const ScalePyramid& x, const ScalePyramid& y,
                          const SolverOptions& solver) {
    return cross_scale(x, y, solver, false);
}

MatchScore combined(const ScalePyramid& x, const ScalePyramid& y,
                    const MatchOptions& options) {
    const SolverOptions& solver = options.solver;
    MatchScore score;
    score.strategy = options.strategy;
    score.inner_normalization = options.inner_normalization;

    auto append = [&score](const MatchScore& part) {
        for (const auto& c : part.components) score.components.push_back(c);
        return part.total;
    };
    const double norm3 = options.inner_normalization ? 3.0 : 1.0;
    const double norm6 = options.inner_normalization ? 6.0 : 1.0;

    switch (options.strategy) {
        case Strategy::kS: {
            check_level_shapes(x.s1, y.s1, "spatial", 1);
            const double s = term_score(NodeSet::from_feature_map(x.s1),
                                        NodeSet::from_feature_map(y.s1), solver);
            score.components.emplace_back("s(Xs1,Ys1)", s);
            score.total = s;
            return score;
        }
        case Strategy::kMs:
            score.total = append(multi_spatial(x, y, solver)) / norm3;
            return score;
        case Strategy::kMt:
            score.total = append(multi_temporal(x, y, solver)) / norm3;
            return score;
        case Strategy::kCs:
            score.total = append(cross_spatial(x, y, solver)) / norm6;
            return score;
        case Strategy::kCt:
            score.total = append(cross_temporal(x, y, solver)) / norm6;
            return score;
        case Strategy::kM:
        case Strategy::kMC:
            break;
    }

    // The scale-1 spatial and temporal maps are one object, so the first
    // temporal term equals the first spatial term; evaluate it once.
    const MatchScore ms = multi_spatial(x, y, solver);
    double mt_total = ms.components[0].second;
    MatchScore mt_tail;
    for (int level = 2; level <= 3; ++level) {
        const FeatureMap& a = x.temporal(level);
        const FeatureMap& b = y.temporal(level);
        check_level_shapes(a, b, "temporal", level);
        const double s = term_score(NodeSet::from_feature_map(a),
                                    NodeSet::from_feature_map(b), solver);
        mt_tail.components.emplace_back("s(Xt" + std::to_string(level) + ",Yt" +
                                            std::to_string(level) + ")",
                                        s);
        mt_total += s;
    }

    append(ms);
    score.components.emplace_back("s(Xt1,Yt1)", ms.components[0].second);
    for (const auto& c : mt_tail.components) score.components.push_back(c);

    if (options.strategy == Strategy::kM) {
        score.total = (ms.total / norm3 + mt_total / norm3) / 2.0;
        return score;
    }

    const double cs = append(cross_spatial(x, y, solver));
    const double ct = append(cross_temporal(x, y, solver));
    score.total = (ms.total / norm3 + mt_total / norm3 + cs / norm6 + ct / norm6) / 4.0;
    return score;
}

std::string match_score_to_json(const MatchScore& score, int indent) {
    nlohmann::json doc;
    doc["strategy"] = strategy_name(score.strategy);
    doc["inner_normalization"] = score.inner_normalization;
    doc["total"] = score.total;
    auto components = nlohmann::json::array();
    for (const auto& [term, value] : score.components)
        components.push_back({{"term", term}, {"score", value}});
    doc["components"] = std::move(components);
    return doc.dump(indent);
}

}  // namespace skelmatch
