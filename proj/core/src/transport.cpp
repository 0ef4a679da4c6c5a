#include "skelmatch/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace skelmatch {

namespace {

using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using ConstMapRowMatrix = Eigen::Map<const RowMatrix>;
using MapRowMatrix = Eigen::Map<RowMatrix>;
using ConstMapVector = Eigen::Map<const Vector>;

constexpr double kNormEps = 1e-12;    // below this a vector counts as zero
constexpr double kWeightFloor = 1e-6;
constexpr double kBalanceTol = 1e-12;

void check_weights(std::span<const double> r, std::span<const double> c) {
    double sum_r = 0.0, sum_c = 0.0;
    for (double v : r) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw validation_error("transport: negative or non-finite supply");
        sum_r += v;
    }
    for (double v : c) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw validation_error("transport: negative or non-finite demand");
        sum_c += v;
    }
    if (std::abs(sum_r - sum_c) > kBalanceTol)
        throw solver_error("infeasible-marginals: supply sums to " +
                           std::to_string(sum_r) + ", demand to " +
                           std::to_string(sum_c));
    if (sum_r <= 0.0) throw solver_error("infeasible-marginals: zero total mass");
}

double plan_cost(const CostMatrix& cost, const std::vector<double>& flow) {
    double total = 0.0;
    for (std::size_t k = 0; k < flow.size(); ++k) total += cost.values[k] * flow[k];
    return total;
}

double marginal_violation(const std::vector<double>& flow, int rows, int cols,
                          std::span<const double> r, std::span<const double> c) {
    double worst = 0.0;
    std::vector<double> col_sums(static_cast<std::size_t>(cols), 0.0);
    for (int i = 0; i < rows; ++i) {
        const double* row = flow.data() + static_cast<std::size_t>(i) * cols;
        double s = 0.0;
        for (int j = 0; j < cols; ++j) {
            s += row[j];
            col_sums[static_cast<std::size_t>(j)] += row[j];
        }
        worst = std::max(worst, std::abs(s - r[i]));
    }
    for (int j = 0; j < cols; ++j)
        worst = std::max(worst, std::abs(col_sums[static_cast<std::size_t>(j)] - c[j]));
    return worst;
}

}  // namespace

NodeSet NodeSet::from_feature_map(const FeatureMap& map) {
    NodeSet set;
    set.dim = map.channels;
    set.count = map.joints * map.frames;
    set.data.resize(static_cast<std::size_t>(set.dim) * set.count);
    for (int n = 0; n < map.joints; ++n)
        for (int t = 0; t < map.frames; ++t) {
            const std::size_t p = static_cast<std::size_t>(n) * map.frames + t;
            for (int c = 0; c < map.channels; ++c)
                set.data[p * set.dim + c] = map.at(c, n, t);
        }
    return set;
}

NodeSet pool_over_joints(const FeatureMap& map) {
    NodeSet set;
    set.dim = map.channels;
    set.count = map.frames;
    set.data.resize(static_cast<std::size_t>(set.dim) * set.count);
    const double inv = 1.0 / static_cast<double>(map.joints);
    for (int t = 0; t < map.frames; ++t)
        for (int c = 0; c < map.channels; ++c) {
            double sum = 0.0;
            for (int n = 0; n < map.joints; ++n) sum += map.at(c, n, t);
            set.data[static_cast<std::size_t>(t) * set.dim + c] = sum * inv;
        }
    return set;
}

NodeSet pool_over_frames(const FeatureMap& map) {
    NodeSet set;
    set.dim = map.channels;
    set.count = map.joints;
    set.data.resize(static_cast<std::size_t>(set.dim) * set.count);
    const double inv = 1.0 / static_cast<double>(map.frames);
    for (int n = 0; n < map.joints; ++n)
        for (int c = 0; c < map.channels; ++c) {
            double sum = 0.0;
            for (int t = 0; t < map.frames; ++t) sum += map.at(c, n, t);
            set.data[static_cast<std::size_t>(n) * set.dim + c] = sum * inv;
        }
    return set;
}

CostMatrix cost_matrix(const NodeSet& x, const NodeSet& y) {
    if (x.dim != y.dim)
        throw validation_error("cost_matrix: dimension-mismatch (" +
                               std::to_string(x.dim) + " vs " +
                               std::to_string(y.dim) + ")");
    if (x.count < 1 || y.count < 1)
        throw validation_error("cost_matrix: empty node set");

    // Columns are nodes: X is C x P, Y is C x Q. Normalizing the columns up
    // front turns the cosine grid into one gemm.
    Eigen::Map<const Matrix> xm(x.data.data(), x.dim, x.count);
    Eigen::Map<const Matrix> ym(y.data.data(), y.dim, y.count);
    Matrix xn = xm;
    Matrix yn = ym;
    std::vector<int> x_zero, y_zero;
    for (int i = 0; i < x.count; ++i) {
        const double norm = xn.col(i).norm();
        if (norm < kNormEps) x_zero.push_back(i);
        else xn.col(i) /= norm;
    }
    for (int j = 0; j < y.count; ++j) {
        const double norm = yn.col(j).norm();
        if (norm < kNormEps) y_zero.push_back(j);
        else yn.col(j) /= norm;
    }

    CostMatrix cost;
    cost.rows = x.count;
    cost.cols = y.count;
    cost.values.resize(static_cast<std::size_t>(x.count) * y.count);
    MapRowMatrix dm(cost.values.data(), x.count, y.count);
    dm.noalias() = xn.transpose() * yn;
    // d = 1 - cosine, clamped against rounding outside [-1, 1]
    dm.array() = (1.0 - dm.array()).max(0.0).min(2.0);
    for (int i : x_zero) dm.row(i).setConstant(1.0);
    for (int j : y_zero) dm.col(j).setConstant(1.0);
    return cost;
}

NodeWeights cross_reference_weights(const NodeSet& x, const NodeSet& y) {
    if (x.dim != y.dim)
        throw validation_error("cross_reference_weights: dimension-mismatch");

    Eigen::Map<const Matrix> xm(x.data.data(), x.dim, x.count);
    Eigen::Map<const Matrix> ym(y.data.data(), y.dim, y.count);
    const Vector mean_x = xm.rowwise().mean();
    const Vector mean_y = ym.rowwise().mean();

    auto side = [](const Eigen::Map<const Matrix>& nodes, const Vector& other_mean) {
        Vector raw = (nodes.transpose() * other_mean).cwiseMax(0.0);
        // Scale the clamped weights to unit sum before flooring: the floor
        // then guarantees positivity without breaking the invariance of the
        // final weights under positive rescaling of the features.
        const double raw_total = raw.sum();
        if (raw_total > 0.0) raw /= raw_total;
        std::vector<double> w(static_cast<std::size_t>(nodes.cols()));
        double total = 0.0;
        for (Eigen::Index i = 0; i < raw.size(); ++i) {
            const double v = raw[i] + kWeightFloor;
            w[static_cast<std::size_t>(i)] = v;
            total += v;
        }
        for (double& v : w) v /= total;
        return w;
    };

    NodeWeights weights;
    weights.supply = side(xm, mean_y);
    weights.demand = side(ym, mean_x);
    return weights;
}

// ---------------------------------------------------------------------------
// Exact solver: successive shortest paths with node potentials.
//
// Suppliers 0..P-1 and demanders 0..Q-1 form a dense bipartite graph; forward
// arcs i->j are uncapacitated with cost d_ij, backward arcs j->i exist while
// pi_ij > 0 with cost -d_ij. Potentials keep reduced costs nonnegative so
// plain Dijkstra applies. Every augmentation saturates the path bottleneck
// exactly (supplies, demands and emptied arcs are snapped to zero), so the
// loop terminates without epsilon thresholds.
// ---------------------------------------------------------------------------
TransportPlan solve_exact(const CostMatrix& cost, std::span<const double> r,
                          std::span<const double> c, int exact_limit) {
    const int p = cost.rows;
    const int q = cost.cols;
    if (static_cast<int>(r.size()) != p || static_cast<int>(c.size()) != q)
        throw validation_error("solve_exact: marginal lengths do not match the cost matrix");
    if (static_cast<long long>(p) * q > exact_limit)
        throw validation_error("size-limit-exceeded: " + std::to_string(p) + "x" +
                               std::to_string(q) + " > limit " +
                               std::to_string(exact_limit));
    for (double v : cost.values)
        if (!std::isfinite(v)) throw validation_error("solve_exact: non-finite cost");
    check_weights(r, c);

    const int nodes = p + q;  // suppliers first, then demanders
    constexpr double kInf = std::numeric_limits<double>::infinity();

    std::vector<double> flow(static_cast<std::size_t>(p) * q, 0.0);
    std::vector<double> rem_r(r.begin(), r.end());
    std::vector<double> rem_c(c.begin(), c.end());
    std::vector<double> potential(nodes, 0.0);

    std::vector<double> dist(nodes);
    std::vector<int> parent(nodes);  // preceding node on the shortest path
    std::vector<char> done(nodes);

    auto flow_at = [&](int i, int j) -> double& {
        return flow[static_cast<std::size_t>(i) * q + j];
    };

    int augmentations = 0;
    const long long max_augmentations =
        4LL * (static_cast<long long>(nodes) * nodes + nodes);

    double total_supply = 0.0;
    for (double v : r) total_supply += v;
    // Saturated quantities are snapped to exact zero, but the last grains of
    // supply and demand can disagree by accumulated rounding; mass below this
    // is treated as already shipped (it shows up in marginal_violation).
    const double residue_tol = 1e-13 * std::max(total_supply, 1.0);

    while (true) {
        double remaining = 0.0;
        for (int i = 0; i < p; ++i) remaining += rem_r[i];
        if (remaining <= residue_tol) break;
        if (++augmentations > max_augmentations)
            throw solver_error("solve_exact: augmentation limit exceeded");

        // Multi-source Dijkstra from every supplier with remaining supply.
        std::fill(dist.begin(), dist.end(), kInf);
        std::fill(parent.begin(), parent.end(), -1);
        std::fill(done.begin(), done.end(), 0);
        for (int i = 0; i < p; ++i)
            if (rem_r[i] > 0.0) dist[i] = 0.0;

        int target = -1;
        while (true) {
            int u = -1;
            double best = kInf;
            for (int v = 0; v < nodes; ++v)
                if (!done[v] && dist[v] < best) { best = dist[v]; u = v; }
            if (u < 0) break;  // residual graph exhausted
            done[u] = 1;
            if (u >= p && rem_c[u - p] > 0.0) { target = u - p; break; }

            if (u < p) {
                // forward arcs u -> every demander
                const double* row = cost.values.data() + static_cast<std::size_t>(u) * q;
                for (int j = 0; j < q; ++j) {
                    const int v = p + j;
                    if (done[v]) continue;
                    const double reduced =
                        std::max(row[j] + potential[u] - potential[v], 0.0);
                    const double candidate = dist[u] + reduced;
                    if (candidate < dist[v]) {
                        dist[v] = candidate;
                        parent[v] = u;
                    }
                }
            } else {
                // backward arcs (u-p) -> suppliers currently shipping to it
                const int j = u - p;
                for (int i = 0; i < p; ++i) {
                    if (done[i] || flow_at(i, j) <= 0.0) continue;
                    const double reduced = std::max(
                        -cost.at(i, j) + potential[u] - potential[i], 0.0);
                    const double candidate = dist[u] + reduced;
                    if (candidate < dist[i]) {
                        dist[i] = candidate;
                        parent[i] = u;
                    }
                }
            }
        }

        if (target < 0) {
            // Demand exhausted while a rounding-sized supply residue is left.
            if (remaining <= 1e-9 * std::max(total_supply, 1.0)) break;
            throw solver_error("solve_exact: no augmenting path (marginals infeasible)");
        }

        const double dist_target = dist[p + target];
        for (int v = 0; v < nodes; ++v)
            potential[v] += std::min(dist[v], dist_target);

        // Trace the path and find the bottleneck.
        double delta = rem_c[target];
        int root = -1;
        for (int v = p + target; v >= 0;) {
            const int prev = parent[v];
            if (prev < 0) {
                root = v;
                break;
            }
            if (v >= p) {
                // arrived via forward arc prev -> demander v
            } else {
                // arrived via backward arc (prev is a demander): bounded by flow
                delta = std::min(delta, flow_at(v, prev - p));
            }
            v = prev;
        }
        delta = std::min(delta, rem_r[root]);

        // Apply the augmentation; snap saturated quantities to exact zero.
        for (int v = p + target; parent[v] >= 0; v = parent[v]) {
            const int prev = parent[v];
            if (v >= p) {
                flow_at(prev, v - p) += delta;
            } else {
                double& f = flow_at(v, prev - p);
                f = (delta >= f) ? 0.0 : f - delta;
            }
        }
        rem_r[root] = (delta >= rem_r[root]) ? 0.0 : rem_r[root] - delta;
        rem_c[target] = (delta >= rem_c[target]) ? 0.0 : rem_c[target] - delta;
    }

    TransportPlan plan;
    plan.rows = p;
    plan.cols = q;
    plan.flow = std::move(flow);
    plan.supply.assign(r.begin(), r.end());
    plan.demand.assign(c.begin(), c.end());
    plan.solver = SolverKind::kExact;
    plan.iterations = augmentations;
    plan.cost = plan_cost(cost, plan.flow);
    plan.marginal_violation = marginal_violation(plan.flow, p, q, r, c);
    return plan;
}

// ---------------------------------------------------------------------------
// Sinkhorn: diagonal scaling on K = exp(-d/eps), with the log potentials
// absorbed into the kernel whenever the scaling vectors leave a safe range,
// then rounding onto the transport polytope.
// ---------------------------------------------------------------------------
TransportPlan solve_sinkhorn(const CostMatrix& cost, std::span<const double> r,
                             std::span<const double> c, double epsilon,
                             double tolerance, int max_iterations) {
    const int p = cost.rows;
    const int q = cost.cols;
    if (static_cast<int>(r.size()) != p || static_cast<int>(c.size()) != q)
        throw validation_error("solve_sinkhorn: marginal lengths do not match the cost matrix");
    if (!(epsilon > 0.0)) throw validation_error("solve_sinkhorn: epsilon must be > 0");
    if (!(tolerance > 0.0)) throw validation_error("solve_sinkhorn: tolerance must be > 0");
    if (max_iterations < 1) throw validation_error("solve_sinkhorn: max_iterations must be >= 1");
    for (double v : cost.values)
        if (!std::isfinite(v)) throw validation_error("solve_sinkhorn: non-finite cost");
    check_weights(r, c);
    for (double v : r)
        if (v <= 0.0) throw validation_error("solve_sinkhorn: supplies must be positive");
    for (double v : c)
        if (v <= 0.0) throw validation_error("solve_sinkhorn: demands must be positive");

    ConstMapRowMatrix d(cost.values.data(), p, q);
    ConstMapVector rv(r.data(), p);
    ConstMapVector cv(c.data(), q);

    const double inv_eps = 1.0 / epsilon;
    Vector phi = Vector::Zero(p);  // absorbed log scaling, rows
    Vector psi = Vector::Zero(q);  // absorbed log scaling, cols
    // Per-thread scratch: the kernel never escapes, and recycling the buffer
    // avoids one large allocation per solve on hot evaluation paths.
    thread_local std::vector<double> kernel_storage;
    kernel_storage.resize(static_cast<std::size_t>(p) * q);
    MapRowMatrix kernel(kernel_storage.data(), p, q);
    auto rebuild_kernel = [&]() {
        for (int i = 0; i < p; ++i)
            kernel.row(i).array() =
                (phi[i] + (psi.transpose().array() - d.row(i).array() * inv_eps)).exp();
        if (!kernel.allFinite())
            throw solver_error("no-convergence: kernel overflow during stabilization");
    };
    rebuild_kernel();

    Vector u = Vector::Ones(p);
    Vector v = Vector::Ones(q);
    Vector kv = kernel * v;

    constexpr double kAbsorbLimit = 1e100;
    auto absorb = [&]() {
        phi += u.array().log().matrix();
        psi += v.array().log().matrix();
        rebuild_kernel();
        u.setOnes();
        v.setOnes();
        kv = kernel * v;
    };

    int iterations = 0;
    double err = std::numeric_limits<double>::infinity();
    while (iterations < max_iterations) {
        ++iterations;
        if ((kv.array() <= 0.0).any() || !kv.allFinite()) {
            absorb();
            if ((kv.array() <= 0.0).any())
                throw solver_error("no-convergence: kernel column collapsed to zero");
        }
        u = rv.array() / kv.array();
        Vector ktu = kernel.transpose() * u;
        if ((ktu.array() <= 0.0).any() || !ktu.allFinite()) {
            absorb();
            continue;
        }
        v = cv.array() / ktu.array();
        kv = kernel * v;

        // After the v-update the column marginals hold exactly; the row
        // residual is the convergence measure.
        err = ((u.array() * kv.array()) - rv.array()).abs().maxCoeff();
        if (err <= tolerance) break;

        const double umax = u.array().abs().maxCoeff();
        const double vmax = v.array().abs().maxCoeff();
        if (umax > kAbsorbLimit || vmax > kAbsorbLimit ||
            u.array().abs().minCoeff() < 1.0 / kAbsorbLimit ||
            v.array().abs().minCoeff() < 1.0 / kAbsorbLimit)
            absorb();
    }

    TransportPlan plan;
    plan.rows = p;
    plan.cols = q;
    plan.flow.resize(static_cast<std::size_t>(p) * q);
    plan.supply.assign(r.begin(), r.end());
    plan.demand.assign(c.begin(), c.end());
    plan.solver = SolverKind::kSinkhorn;
    plan.iterations = iterations;
    MapRowMatrix pm(plan.flow.data(), p, q);

    // Materialize the plan and round it onto the polytope: shrink overfull
    // rows, then overfull columns, then spread the remaining deficit as a
    // rank-one correction. The row-major sweeps keep each pass sequential.
    Vector col_sums = Vector::Zero(q);
    for (int i = 0; i < p; ++i) {
        auto row = pm.row(i).array();
        row = kernel.row(i).array() * (u[i] * v.transpose().array());
        const double row_sum = row.sum();
        if (row_sum > r[i] && row_sum > 0.0) row *= r[i] / row_sum;
        col_sums.transpose().array() += row;
    }
    Vector col_factor = Vector::Ones(q);
    for (int j = 0; j < q; ++j)
        if (col_sums[j] > c[j] && col_sums[j] > 0.0) col_factor[j] = c[j] / col_sums[j];

    Vector row_deficit(p);
    col_sums.setZero();
    for (int i = 0; i < p; ++i) {
        auto row = pm.row(i).array();
        row *= col_factor.transpose().array();
        row_deficit[i] = std::max(r[i] - row.sum(), 0.0);
        col_sums.transpose().array() += row;
    }
    Vector col_deficit = (cv - col_sums).cwiseMax(0.0);
    const double total_deficit = col_deficit.sum();
    const bool redistribute = total_deficit > 0.0 && row_deficit.sum() > 0.0;
    if (redistribute) col_deficit /= total_deficit;

    // Final sweep: apply the correction and gather cost and marginals.
    double cost_total = 0.0;
    double worst = 0.0;
    col_sums.setZero();
    for (int i = 0; i < p; ++i) {
        auto row = pm.row(i).array();
        if (redistribute && row_deficit[i] > 0.0)
            row += row_deficit[i] * col_deficit.transpose().array();
        cost_total += (row * d.row(i).array()).sum();
        worst = std::max(worst, std::abs(row.sum() - r[i]));
        col_sums.transpose().array() += row;
    }
    for (int j = 0; j < q; ++j) worst = std::max(worst, std::abs(col_sums[j] - c[j]));

    plan.cost = cost_total;
    plan.marginal_violation = worst;
    if (plan.marginal_violation > 10.0 * tolerance)
        throw solver_error("no-convergence: marginal violation " +
                           std::to_string(plan.marginal_violation) + " after " +
                           std::to_string(iterations) + " iterations");
    return plan;
}

TransportPlan solve_transport(const CostMatrix& cost, std::span<const double> r,
                              std::span<const double> c,
                              const SolverOptions& options) {
    switch (options.choice) {
        case SolverChoice::kExact:
            return solve_exact(cost, r, c, options.exact_limit);
        case SolverChoice::kSinkhorn:
            return solve_sinkhorn(cost, r, c, options.epsilon, options.tolerance,
                                  options.max_iterations);
        case SolverChoice::kAuto:
        default:
            if (static_cast<long long>(cost.rows) * cost.cols <= options.exact_limit)
                return solve_exact(cost, r, c, options.exact_limit);
            return solve_sinkhorn(cost, r, c, options.epsilon, options.tolerance,
                                  options.max_iterations);
    }
}

RelevanceResult relevance_score(const NodeSet& x, const NodeSet& y,
                                const SolverOptions& options) {
    const CostMatrix cost = cost_matrix(x, y);
    const NodeWeights weights = cross_reference_weights(x, y);
    TransportPlan plan = solve_transport(cost, weights.supply, weights.demand, options);

    double score = 0.0;
    for (std::size_t k = 0; k < plan.flow.size(); ++k)
        score += (1.0 - cost.values[k]) * plan.flow[k];

    RelevanceResult result;
    result.score = score;
    result.plan = std::move(plan);
    return result;
}

std::string plan_to_json(const TransportPlan& plan, int indent) {
    nlohmann::json doc;
    doc["rows"] = plan.rows;
    doc["cols"] = plan.cols;
    doc["supply"] = plan.supply;
    doc["demand"] = plan.demand;
    doc["cost"] = plan.cost;
    doc["solver"] = plan.solver == SolverKind::kExact ? "exact" : "sinkhorn";
    doc["iterations"] = plan.iterations;
    doc["marginal_violation"] = plan.marginal_violation;
    auto rows = nlohmann::json::array();
    for (int i = 0; i < plan.rows; ++i) {
        auto row = nlohmann::json::array();
        for (int j = 0; j < plan.cols; ++j) row.push_back(plan.at(i, j));
        rows.push_back(std::move(row));
    }
    doc["flow"] = std::move(rows);
    return doc.dump(indent);
}

}  // namespace skelmatch
