#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "rmfc/common.hpp"

namespace rmfc {

// Exact transportation problem
//     min sum_ij x_ij cost[i*n+j]   s.t.  sum_j x_ij = supply_i,
//                                         sum_i x_ij = demand_j,  x >= 0,
// solved by successive shortest augmenting paths with node potentials
// (Dijkstra on the bipartite residual graph). Dense O(V^2) Dijkstra; the
// instances here have at most a few dozen support points per marginal.
inline double transport_cost(const std::vector<double>& supply, const std::vector<double>& demand,
                             const std::vector<double>& cost) {
    const int m = static_cast<int>(supply.size());
    const int n = static_cast<int>(demand.size());
    if (cost.size() != static_cast<std::size_t>(m) * static_cast<std::size_t>(n))
        throw DimensionError("transport_cost: cost table shape mismatch");
    for (double v : supply)
        if (!(v >= 0.0)) throw ValidationError("transport_cost: negative supply");
    for (double v : demand)
        if (!(v >= 0.0)) throw ValidationError("transport_cost: negative demand");

    double total_a = 0.0, total_b = 0.0;
    for (double v : supply) total_a += v;
    for (double v : demand) total_b += v;
    if (std::abs(total_a - total_b) > 1e-9 * std::max({1.0, total_a, total_b}))
        throw ValidationError("transport_cost: marginal masses differ");
    if (total_a <= 0.0) return 0.0;

    std::vector<double> res_a = supply;
    std::vector<double> res_b = demand;
    // Balance fp drift between the two marginals so the flow can clear both.
    const double scale = total_a / total_b;
    for (double& v : res_b) v *= scale;

    const int V = m + n;
    std::vector<double> flow(static_cast<std::size_t>(m) * n, 0.0);
    std::vector<double> pot(V, 0.0);
    std::vector<double> dist(V);
    std::vector<int> parent(V);
    std::vector<char> done(V);
    const double inf = std::numeric_limits<double>::infinity();
    const double done_tol = 1e-13 * total_a;

    double remaining = total_a;
    const int max_rounds = 2 * V * V + 64;
    int rounds = 0;
    while (remaining > done_tol) {
        if (++rounds > max_rounds)
            throw std::runtime_error("transport_cost: augmentation limit exceeded");
        std::fill(dist.begin(), dist.end(), inf);
        std::fill(parent.begin(), parent.end(), -1);
        std::fill(done.begin(), done.end(), 0);
        for (int i = 0; i < m; ++i)
            if (res_a[static_cast<std::size_t>(i)] > 0.0) dist[static_cast<std::size_t>(i)] = 0.0;

        int sink = -1;
        for (;;) {
            int u = -1;
            double best = inf;
            for (int v = 0; v < V; ++v)
                if (!done[static_cast<std::size_t>(v)] && dist[static_cast<std::size_t>(v)] < best) {
                    best = dist[static_cast<std::size_t>(v)];
                    u = v;
                }
            if (u < 0) break;
            done[static_cast<std::size_t>(u)] = 1;
            if (u >= m && res_b[static_cast<std::size_t>(u - m)] > 0.0) {
                sink = u;
                break;
            }
            if (u < m) {
                // forward arcs i -> j, unlimited capacity
                for (int j = 0; j < n; ++j) {
                    const int v = m + j;
                    if (done[static_cast<std::size_t>(v)]) continue;
                    const double rc = cost[static_cast<std::size_t>(u) * n + j] + pot[static_cast<std::size_t>(u)] - pot[static_cast<std::size_t>(v)];
                    const double nd = dist[static_cast<std::size_t>(u)] + rc;
                    if (nd < dist[static_cast<std::size_t>(v)]) {
                        dist[static_cast<std::size_t>(v)] = nd;
                        parent[static_cast<std::size_t>(v)] = u;
                    }
                }
            } else {
                // backward arcs j -> i, capacity = current flow
                const int j = u - m;
                for (int i = 0; i < m; ++i) {
                    if (done[static_cast<std::size_t>(i)]) continue;
                    if (flow[static_cast<std::size_t>(i) * n + j] <= 0.0) continue;
                    const double rc = -cost[static_cast<std::size_t>(i) * n + j] + pot[static_cast<std::size_t>(u)] - pot[static_cast<std::size_t>(i)];
                    const double nd = dist[static_cast<std::size_t>(u)] + rc;
                    if (nd < dist[static_cast<std::size_t>(i)]) {
                        dist[static_cast<std::size_t>(i)] = nd;
                        parent[static_cast<std::size_t>(i)] = u;
                    }
                }
            }
        }
        if (sink < 0) throw std::runtime_error("transport_cost: no augmenting path (unbalanced?)");

        // bottleneck along the path
        double delta = res_b[static_cast<std::size_t>(sink - m)];
        int src = sink;
        for (int v = sink; parent[static_cast<std::size_t>(v)] >= 0; v = parent[static_cast<std::size_t>(v)]) {
            const int p = parent[static_cast<std::size_t>(v)];
            if (p >= m)  // backward arc (demand p-m) -> (supply v)
                delta = std::min(delta, flow[static_cast<std::size_t>(v) * n + (p - m)]);
            src = p;
        }
        delta = std::min(delta, res_a[static_cast<std::size_t>(src)]);
        if (!(delta > 0.0)) throw std::runtime_error("transport_cost: zero augmentation");

        for (int v = sink; parent[static_cast<std::size_t>(v)] >= 0; v = parent[static_cast<std::size_t>(v)]) {
            const int p = parent[static_cast<std::size_t>(v)];
            if (p < m)
                flow[static_cast<std::size_t>(p) * n + (v - m)] += delta;
            else
                flow[static_cast<std::size_t>(v) * n + (p - m)] -= delta;
        }
        res_a[static_cast<std::size_t>(src)] -= delta;
        res_b[static_cast<std::size_t>(sink - m)] -= delta;
        res_a[static_cast<std::size_t>(src)] = std::max(res_a[static_cast<std::size_t>(src)], 0.0);
        res_b[static_cast<std::size_t>(sink - m)] = std::max(res_b[static_cast<std::size_t>(sink - m)], 0.0);
        remaining -= delta;

        const double reach = dist[static_cast<std::size_t>(sink)];
        for (int v = 0; v < V; ++v)
            pot[static_cast<std::size_t>(v)] += std::min(dist[static_cast<std::size_t>(v)], reach);
    }

    double value = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            value += flow[static_cast<std::size_t>(i) * n + j] * cost[static_cast<std::size_t>(i) * n + j];
    return value;
}

/// W1 on a line: sum over coordinate-sorted gaps of |cumulative mass difference|.
/// Exact for metrics of the form |c_i - c_j|; used as the fast path for grid
/// projection and as an independent oracle in tests.
inline double w1_line_sorted(const std::vector<double>& mu, const std::vector<double>& nu,
                             const std::vector<int>& order, const std::vector<double>& coords) {
    double acc = 0.0, cum = 0.0;
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        const int i = order[k];
        cum += mu[static_cast<std::size_t>(i)] - nu[static_cast<std::size_t>(i)];
        acc += std::abs(cum) * (coords[static_cast<std::size_t>(order[k + 1])] - coords[static_cast<std::size_t>(i)]);
    }
    return acc;
}

}  // namespace rmfc
