#pragma once

// Independent reference implementations used only to check the library.
// Nothing here may call into the solver paths being verified.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "skelmatch/transport.hpp"

namespace skelmatch::testing {

// Minimum transport cost by enumerating every basic feasible solution of the
// balanced transportation polytope: pick P+Q-1 of the P*Q cells, keep the
// selections that form a spanning tree of the bipartite supply/demand graph,
// solve the (triangular) flow system by leaf elimination, and keep the best
// nonnegative solution. Exponential -- tiny instances only.
inline double brute_force_transport_cost(const CostMatrix& d,
                                         std::span<const double> r,
                                         std::span<const double> c) {
    const int p = d.rows;
    const int q = d.cols;
    const int nodes = p + q;
    const int cells = p * q;
    const int basis = nodes - 1;

    std::vector<int> pick(basis);
    std::iota(pick.begin(), pick.end(), 0);
    double best = std::numeric_limits<double>::infinity();

    auto evaluate = [&](const std::vector<int>& chosen) {
        // Spanning check via union-find.
        std::vector<int> root(nodes);
        std::iota(root.begin(), root.end(), 0);
        auto find = [&](int v) {
            while (root[v] != v) v = root[v] = root[root[v]];
            return v;
        };
        for (int cell : chosen) {
            const int a = cell / q;
            const int b = p + cell % q;
            const int ra = find(a), rb = find(b);
            if (ra == rb) return;  // cycle
            root[ra] = rb;
        }

        // Leaf elimination on the tree.
        std::vector<std::vector<int>> incident(nodes);
        for (int k = 0; k < basis; ++k) {
            incident[chosen[k] / q].push_back(k);
            incident[p + chosen[k] % q].push_back(k);
        }
        std::vector<double> need(nodes);
        for (int i = 0; i < p; ++i) need[i] = r[i];
        for (int j = 0; j < q; ++j) need[p + j] = c[j];
        std::vector<int> degree(nodes);
        for (int v = 0; v < nodes; ++v) degree[v] = static_cast<int>(incident[v].size());
        std::vector<char> edge_done(basis, 0);
        std::vector<double> flow(basis, 0.0);

        std::vector<int> stack;
        for (int v = 0; v < nodes; ++v)
            if (degree[v] == 1) stack.push_back(v);
        int processed = 0;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            if (degree[v] != 1) continue;
            int edge = -1;
            for (int k : incident[v])
                if (!edge_done[k]) { edge = k; break; }
            if (edge < 0) continue;
            const int cell = chosen[edge];
            const int a = cell / q;
            const int b = p + cell % q;
            const int other = (v == a) ? b : a;
            flow[edge] = need[v];
            need[other] -= need[v];
            need[v] = 0.0;
            edge_done[edge] = 1;
            --degree[v];
            --degree[other];
            ++processed;
            if (degree[other] == 1) stack.push_back(other);
        }
        if (processed != basis) return;

        double cost = 0.0;
        for (int k = 0; k < basis; ++k) {
            if (flow[k] < -1e-10) return;  // infeasible vertex
            cost += std::max(flow[k], 0.0) * d.values[static_cast<std::size_t>(chosen[k])];
        }
        best = std::min(best, cost);
    };

    // All C(cells, basis) subsets.
    while (true) {
        evaluate(pick);
        int k = basis - 1;
        while (k >= 0 && pick[k] == cells - basis + k) --k;
        if (k < 0) break;
        ++pick[k];
        for (int t = k + 1; t < basis; ++t) pick[t] = pick[t - 1] + 1;
    }
    return best;
}

// Closed-form 2x2 oracle: the feasible set is the segment
// pi00 in [max(0, r0-c1), min(r0, c0)] and the cost is linear in pi00.
inline double line_search_2x2_cost(const CostMatrix& d, std::span<const double> r,
                                   std::span<const double> c) {
    const double lo = std::max(0.0, r[0] - c[1]);
    const double hi = std::min(r[0], c[0]);
    auto cost_at = [&](double pi00) {
        return d.at(0, 0) * pi00 + d.at(0, 1) * (r[0] - pi00) +
               d.at(1, 0) * (c[0] - pi00) + d.at(1, 1) * (c[1] - r[0] + pi00);
    };
    return std::min(cost_at(lo), cost_at(hi));
}

// First-order optimality of a feasible plan: no mass shift around any 2x2
// cycle (i,j) += e, (i,l) -= e, (k,j) -= e, (k,l) += e with positive donors
// may reduce the cost.
inline bool plan_is_first_order_optimal(const CostMatrix& d, const TransportPlan& plan,
                                        double tol = 1e-9) {
    for (int i = 0; i < plan.rows; ++i)
        for (int k = 0; k < plan.rows; ++k) {
            if (i == k) continue;
            for (int j = 0; j < plan.cols; ++j)
                for (int l = 0; l < plan.cols; ++l) {
                    if (j == l) continue;
                    if (plan.at(i, l) <= 0.0 || plan.at(k, j) <= 0.0) continue;
                    const double delta =
                        d.at(i, j) - d.at(i, l) - d.at(k, j) + d.at(k, l);
                    if (delta < -tol) return false;
                }
        }
    return true;
}

}  // namespace skelmatch::testing
