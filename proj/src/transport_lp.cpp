#include "mbot/transport_lp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace mbot {

namespace {

struct Arc {
    std::size_t row, col;
    double flow = 0.0;
};

// Solves the flows on a spanning basis exactly by leaf elimination.
// Returns false if the basis does not span (should not happen).
bool solve_basis_flows(std::vector<Arc>& basis, std::vector<double> supply,
                       std::vector<double> demand) {
    const std::size_t m = supply.size();
    const std::size_t n = demand.size();
    const std::size_t nodes = m + n;
    std::vector<int> degree(nodes, 0);
    std::vector<std::vector<std::size_t>> inc(nodes);
    for (std::size_t e = 0; e < basis.size(); ++e) {
        const std::size_t rn = basis[e].row;
        const std::size_t cn = m + basis[e].col;
        ++degree[rn];
        ++degree[cn];
        inc[rn].push_back(e);
        inc[cn].push_back(e);
    }
    std::vector<bool> arc_done(basis.size(), false);
    std::deque<std::size_t> leaves;
    for (std::size_t v = 0; v < nodes; ++v) {
        if (degree[v] == 1) leaves.push_back(v);
    }
    std::size_t solved = 0;
    while (!leaves.empty()) {
        const std::size_t v = leaves.front();
        leaves.pop_front();
        if (degree[v] != 1) continue;
        std::size_t eid = basis.size();
        for (std::size_t e : inc[v]) {
            if (!arc_done[e]) {
                eid = e;
                break;
            }
        }
        if (eid == basis.size()) continue;
        Arc& arc = basis[eid];
        const std::size_t other = (v < m) ? m + arc.col : arc.row;
        const double amount = (v < m) ? supply[v] : demand[v - m];
        arc.flow = amount;
        if (v < m) {
            supply[v] = 0.0;
            demand[arc.col] -= amount;
        } else {
            demand[v - m] = 0.0;
            supply[arc.row] -= amount;
        }
        arc_done[eid] = true;
        ++solved;
        --degree[v];
        if (--degree[other] == 1) leaves.push_back(other);
    }
    return solved == basis.size();
}

}  // namespace

LpResult transport_lp(const DenseMatrix& cost, const Marginal& a, const Marginal& b) {
    const std::size_t m = a.size();
    const std::size_t n = b.size();
    if (cost.rows != m || cost.cols != n) throw ShapeError("transport_lp: cost shape mismatch");
    for (double w : cost.v) {
        if (!std::isfinite(w)) throw DomainError("transport_lp: non-finite cost");
    }
    const double total = a.total();
    if (std::fabs(total - b.total()) > 1e-9 * std::max(1.0, total)) {
        throw MassMismatchError("transport_lp: marginal totals differ");
    }

    // Row-indexed perturbation keeps every basic flow strictly positive.
    const double eps = total * 1e-9 / static_cast<double>(m + n);
    std::vector<double> pa(a.values()), pb(b.values());
    for (std::size_t j = 0; j < m; ++j) pa[j] += eps * static_cast<double>(j + 1);
    pb[n - 1] += eps * static_cast<double>(m * (m + 1) / 2);

    // North-west corner start.
    std::vector<Arc> basis;
    basis.reserve(m + n - 1);
    {
        std::vector<double> ra = pa, rb = pb;
        std::size_t j = 0, k = 0;
        while (j < m && k < n) {
            const double t = std::min(ra[j], rb[k]);
            basis.push_back({j, k, t});
            ra[j] -= t;
            rb[k] -= t;
            if (basis.size() == m + n - 1) break;
            if (ra[j] <= rb[k]) {
                ++j;
            } else {
                ++k;
            }
        }
        if (basis.size() != m + n - 1) {
            throw NumericalError("transport_lp: north-west start produced " +
                                 std::to_string(basis.size()) + " arcs");
        }
    }

    const std::size_t nodes = m + n;
    std::vector<double> u(m), v(n);
    std::vector<std::vector<std::size_t>> inc(nodes);
    std::vector<int> parent_edge(nodes);
    std::vector<std::size_t> parent_node(nodes);
    std::vector<int> order(nodes);

    const double cost_scale = 1.0 + storage_max_abs(MatrixStorage(cost));
    const double rc_tol = 1e-11 * cost_scale;
    const long max_pivots = static_cast<long>(20 * m * n + 200);
    int pivots = 0;

    for (long it = 0;; ++it) {
        if (it > max_pivots) {
            throw NumericalError("transport_lp: pivot cap exceeded (m=" + std::to_string(m) +
                                 ", n=" + std::to_string(n) +
                                 ", pivots=" + std::to_string(pivots) + ")");
        }
        // Duals from the basis tree, rooted at row 0 with u_0 = 0.
        for (auto& lst : inc) lst.clear();
        for (std::size_t e = 0; e < basis.size(); ++e) {
            inc[basis[e].row].push_back(e);
            inc[m + basis[e].col].push_back(e);
        }
        std::fill(order.begin(), order.end(), -1);
        std::deque<std::size_t> queue{0};
        u[0] = 0.0;
        order[0] = 0;
        parent_edge[0] = -1;
        while (!queue.empty()) {
            const std::size_t x = queue.front();
            queue.pop_front();
            for (std::size_t e : inc[x]) {
                const Arc& arc = basis[e];
                const std::size_t y = (x < m) ? m + arc.col : arc.row;
                if (order[y] >= 0) continue;
                order[y] = 1;
                parent_edge[y] = static_cast<int>(e);
                parent_node[y] = x;
                if (y < m) {
                    u[y] = cost.at(y, arc.col) - v[arc.col];
                } else {
                    v[y - m] = cost.at(arc.row, y - m) - u[arc.row];
                }
                queue.push_back(y);
            }
        }
        for (std::size_t x = 0; x < nodes; ++x) {
            if (order[x] < 0) throw NumericalError("transport_lp: basis lost connectivity");
        }

        // Pricing: most negative reduced cost.
        double best = -rc_tol;
        std::size_t ej = 0, ek = 0;
        bool found = false;
        for (std::size_t j = 0; j < m; ++j) {
            const double* wj = cost.row(j);
            for (std::size_t k = 0; k < n; ++k) {
                const double rc = wj[k] - u[j] - v[k];
                if (rc < best) {
                    best = rc;
                    ej = j;
                    ek = k;
                    found = true;
                }
            }
        }
        if (!found) break;

        // The unique cycle: tree path from row ej to col ek, plus the entering arc.
        // Walk both endpoints to the root collecting ancestor chains.
        std::vector<std::size_t> path_edges;
        {
            std::vector<int> mark(nodes, -1);
            std::size_t x = ej;
            int step = 0;
            while (true) {
                mark[x] = step++;
                if (parent_edge[x] < 0) break;
                x = parent_node[x];
            }
            std::size_t y = m + ek;
            std::vector<std::size_t> from_col;
            while (mark[y] < 0) {
                from_col.push_back(static_cast<std::size_t>(parent_edge[y]));
                y = parent_node[y];
            }
            // y is the meeting node; climb from ej up to it.
            x = ej;
            while (x != y) {
                path_edges.push_back(static_cast<std::size_t>(parent_edge[x]));
                x = parent_node[x];
            }
            path_edges.insert(path_edges.end(), from_col.rbegin(), from_col.rend());
        }

        // Alternate signs around the cycle starting at the entering arc (+).
        // Orientation: follow the path from row ej to col ek; arcs traversed
        // row→col get −, col→row get +.
        double theta = std::numeric_limits<double>::infinity();
        std::size_t leave = basis.size();
        {
            std::size_t at = ej;  // current node while walking towards col ek
            for (std::size_t e : path_edges) {
                const Arc& arc = basis[e];
                const bool row_to_col = (at < m);
                if (row_to_col) {
                    if (arc.flow < theta) {
                        theta = arc.flow;
                        leave = e;
                    }
                    at = m + arc.col;
                } else {
                    at = arc.row;
                }
            }
        }
        if (leave == basis.size()) {
            throw NumericalError("transport_lp: no leaving arc found (cycle degenerate)");
        }

        {
            std::size_t at = ej;
            for (std::size_t e : path_edges) {
                Arc& arc = basis[e];
                if (at < m) {
                    arc.flow -= theta;
                    at = m + arc.col;
                } else {
                    arc.flow += theta;
                    at = arc.row;
                }
            }
        }
        basis[leave] = {ej, ek, theta};
        ++pivots;
    }

    // Exact flows for the unperturbed marginals on the optimal basis.
    if (!solve_basis_flows(basis, a.values(), b.values())) {
        throw NumericalError("transport_lp: basis flow resolve failed");
    }
    double value = 0.0;
    const double clamp_tol = -1e-9 * std::max(1.0, total);
    std::vector<Arc> kept;
    kept.reserve(basis.size());
    for (const Arc& arc : basis) {
        double f = arc.flow;
        if (f < 0.0) {
            if (f < clamp_tol) {
                throw NumericalError("transport_lp: negative basic flow " + std::to_string(f));
            }
            f = 0.0;
        }
        if (f > 0.0) {
            value += cost.at(arc.row, arc.col) * f;
            kept.push_back({arc.row, arc.col, f});
        }
    }
    std::sort(kept.begin(), kept.end(), [](const Arc& x, const Arc& y) {
        return x.row != y.row ? x.row < y.row : x.col < y.col;
    });
    SparseBuilder builder(m, n);
    for (const Arc& arc : kept) builder.push(arc.row, arc.col, arc.flow);
    LpResult res{Plan(builder.take(), a, b), value, pivots};
    return res;
}

}  // namespace mbot
