#pragma once

#include <string>
#include <utility>
#include <vector>

#include "skelmatch/pooling.hpp"
#include "skelmatch/transport.hpp"

namespace skelmatch {

// Matching strategies:
//   S  - single-scale relevance at the original scale
//   Ms - sum of the three same-spatial-scale scores
//   Mt - sum of the three same-temporal-scale scores
//   M  - mean of Ms and Mt
//   Cs - sum over the 6 ordered cross-spatial level pairs (joint-pooled)
//   Ct - sum over the 6 ordered cross-temporal level pairs (frame-pooled)
//   MC - mean of Ms, Mt, Cs, Ct
enum class Strategy { kS, kMs, kMt, kM, kCs, kCt, kMC };

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct MatchOptions {
    Strategy strategy = Strategy::kMC;
    SolverOptions solver;
    // Divide each component sum by its term count (3, 3, 6, 6) before
    // averaging. Off by default; this changes score magnitudes and can change
    // the argmax, so it is surfaced as an explicit flag.
    bool inner_normalization = false;
};

struct MatchScore {
    Strategy strategy = Strategy::kS;
    bool inner_normalization = false;
    double total = 0.0;
    // One entry per evaluated single-scale term, in evaluation order,
    // e.g. {"s(Xs2,Ys2)", 0.93} or {"s(pool(Xt1),pool(Yt3))", 0.81}.
    std::vector<std::pair<std::string, double>> components;

    double component(const std::string& term) const;
};

MatchScore multi_spatial(const ScalePyramid& x, const ScalePyramid& y,
                         const SolverOptions& solver = {});
MatchScore multi_temporal(const ScalePyramid& x, const ScalePyramid& y,
                          const SolverOptions& solver = {});
MatchScore cross_spatial(const ScalePyramid& x, const ScalePyramid& y,
                         const SolverOptions& solver = {});
MatchScore cross_temporal(const ScalePyramid& x, const ScalePyramid& y,
                          const SolverOptions& solver = {});

// Evaluate the requested strategy. The scale-(1,1) term shared by the spatial
// and temporal sums is computed once (the pyramids alias it, so both entries
// are bit-identical by construction).
MatchScore combined(const ScalePyramid& x, const ScalePyramid& y,
                    const MatchOptions& options = {});

std::string match_score_to_json(const MatchScore& score, int indent = -1);

}  // namespace skelmatch
