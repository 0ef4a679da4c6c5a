#pragma once

#include <span>
#include <string>
#include <vector>

#include "skelmatch/feature_map.hpp"

namespace skelmatch {

// A set of equal-dimension feature vectors: the flattened per-node local
// representations of a feature map. Node (n, t) of a C x N x T map becomes
// vector index n*T + t.
struct NodeSet {
    int dim = 0;    // vector dimension C
    int count = 0;  // number of vectors P
    std::vector<double> data;  // vector p occupies [p*dim, (p+1)*dim)

    static NodeSet from_feature_map(const FeatureMap& map);

    std::span<const double> node(int p) const {
        return {data.data() + static_cast<std::size_t>(p) * dim,
                static_cast<std::size_t>(dim)};
    }
};

// Mean over the node axis: one C-vector per frame (T vectors).
NodeSet pool_over_joints(const FeatureMap& map);
// Mean over the frame axis: one C-vector per node (N vectors).
NodeSet pool_over_frames(const FeatureMap& map);

// Dense pairwise transport cost, row-major P x Q.
struct CostMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;

    double at(int i, int j) const {
        return values[static_cast<std::size_t>(i) * cols + j];
    }
};

// Cosine transport cost d_ij = 1 - cos(x_i, y_j), in [0, 2]. A vector with
// norm below 1e-12 is treated as uninformative: its costs are 1.
CostMatrix cost_matrix(const NodeSet& x, const NodeSet& y);

// Per-node supply/demand masses. Raw weight of x_i is the nonnegative part of
// its dot product with the mean vector of the *other* set; a 1e-6 floor is
// added to every entry and each side is normalized to sum 1, so the transport
// problem is always balanced and feasible.
struct NodeWeights {
    std::vector<double> supply;  // r, length P, sums to 1
    std::vector<double> demand;  // c, length Q, sums to 1
};
NodeWeights cross_reference_weights(const NodeSet& x, const NodeSet& y);

enum class SolverKind { kExact, kSinkhorn };
enum class SolverChoice { kExact, kSinkhorn, kAuto };

struct SolverOptions {
    SolverChoice choice = SolverChoice::kAuto;
    double epsilon = 0.05;    // Sinkhorn entropic regularization
    double tolerance = 1e-6;  // Sinkhorn marginal tolerance
    int max_iterations = 1000;
    int exact_limit = 4096;   // auto picks the exact solver while P*Q <= limit
};

struct TransportPlan {
    int rows = 0;
    int cols = 0;
    std::vector<double> flow;    // row-major rows x cols, nonnegative
    std::vector<double> supply;  // r
    std::vector<double> demand;  // c
    double cost = 0.0;           // sum_ij d_ij pi_ij
    SolverKind solver = SolverKind::kExact;
    int iterations = 0;          // augmentations (exact) or sweeps (sinkhorn)
    double marginal_violation = 0.0;  // max of |pi 1 - r|inf and |pi^T 1 - c|inf

    double at(int i, int j) const {
        return flow[static_cast<std::size_t>(i) * cols + j];
    }
};

// Exact minimum-cost transport via successive shortest augmenting paths with
// node potentials (Dijkstra on the dense bipartite residual graph). Requires
// |sum r - sum c| <= 1e-12 and rows*cols <= exact_limit. Deterministic:
// equal-distance ties select the lowest node index.
TransportPlan solve_exact(const CostMatrix& cost, std::span<const double> r,
                          std::span<const double> c, int exact_limit = 4096);

// Entropic approximation: log-stabilized diagonal scaling iterations on the
// kernel exp(-d/epsilon), followed by rounding onto the transport polytope
// (row rescale, column rescale, residual redistribution), so the returned
// plan satisfies the marginals to machine precision. Requires strictly
// positive r and c.
TransportPlan solve_sinkhorn(const CostMatrix& cost, std::span<const double> r,
                             std::span<const double> c, double epsilon = 0.05,
                             double tolerance = 1e-6, int max_iterations = 1000);

// Dispatch per `options.choice`; kAuto uses the exact solver while
// rows*cols <= exact_limit and Sinkhorn beyond.
TransportPlan solve_transport(const CostMatrix& cost, std::span<const double> r,
                              std::span<const double> c,
                              const SolverOptions& options = {});

// Semantic relevance between two node sets: cosine costs, cross-reference
// weights, an optimal (or entropic) plan, and s = sum_ij (1 - d_ij) pi_ij.
// With normalized weights, s lies in [-1, 1] and s(X, X) = 1.
struct RelevanceResult {
    double score = 0.0;
    TransportPlan plan;
};
RelevanceResult relevance_score(const NodeSet& x, const NodeSet& y,
                                const SolverOptions& options = {});

// Full plan dump (dims, marginals, flow, cost, diagnostics) for inspection.
std::string plan_to_json(const TransportPlan& plan, int indent = -1);

}  // namespace skelmatch
