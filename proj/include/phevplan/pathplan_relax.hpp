#ifndef PHEVPLAN_PATHPLAN_RELAX_HPP
#define PHEVPLAN_PATHPLAN_RELAX_HPP

#include <optional>
#include <vector>

#include "phevplan/pathplan.hpp"
#include "phevplan/qp.hpp"

// Convex relaxation of the integrated path-planning problem: fractional
// edge-selection variables with flow conservation, per-edge relaxed trip
// dynamics, and McCormick boxes replacing the products of edge selection
// with boundary fuel/SoC. The relaxed fuel chain keeps an inequality with
// the convex fuel curve replaced by supporting tangents, so the program is
// a QP and its value remains a lower bound on the true plan cost.

namespace phevplan {

struct CppdmResult {
    QpStatus status = QpStatus::max_iterations;
    double lower_bound = 0.0;
    double feas_residual = 0.0;
    double gap_estimate = 0.0;
    std::vector<double> y;  // fractional edge selection
    std::optional<TripPlan> plan;
};

namespace cppdm_detail {

constexpr int kFuelTangents = 9;

struct Layout {
    int slots_off = 0;  // 8 vars per slot, cDMOP order
    int b0_off = 0;
    int g_off = 0;  // horizon+1 fuel levels
    int y_off = 0;
    int lam0_off = 0, lam_off = 0, mu0_off = 0, mu_off = 0;
};

}  // namespace cppdm_detail

inline QpProblem build_cppdm_program(const RoadNetwork& net, std::vector<cppdm_detail::Layout>& layouts) {
    net.validate();
    const int n_edges = static_cast<int>(net.edges.size());
    layouts.assign(static_cast<std::size_t>(n_edges), {});

    int n_vars = 0;
    for (int ei = 0; ei < n_edges; ++ei) {
        const int t_end = net.edges[static_cast<std::size_t>(ei)].horizon;
        auto& lay = layouts[static_cast<std::size_t>(ei)];
        lay.slots_off = n_vars;
        n_vars += 8 * t_end;
        lay.b0_off = n_vars++;
        lay.g_off = n_vars;
        n_vars += t_end + 1;
        lay.y_off = n_vars++;
        lay.lam0_off = n_vars++;
        lay.lam_off = n_vars++;
        lay.mu0_off = n_vars++;
        lay.mu_off = n_vars++;
    }

    QpProblem qp(n_vars);
    const double g_cap = net.tank_cap;

    for (int ei = 0; ei < n_edges; ++ei) {
        const RoadEdge& e = net.edges[static_cast<std::size_t>(ei)];
        const auto& lay = layouts[static_cast<std::size_t>(ei)];
        const int t_end = e.horizon;
        auto xi = [&](int t, Mode m) {
            int off = 0;
            switch (m) {
                case Mode::EV: off = 0; break;
                case Mode::CE: off = 1; break;
                case Mode::CS: off = 2; break;
                case Mode::AP: off = 3; break;
            }
            return lay.slots_off + 8 * t + off;
        };
        auto ri = [&](int t) { return lay.slots_off + 8 * t + 4; };
        auto si = [&](int t) { return lay.slots_off + 8 * t + 5; };
        auto ui = [&](int t) { return lay.slots_off + 8 * t + 6; };
        auto bi = [&](int t) { return lay.slots_off + 8 * t + 7; };
        auto gi = [&](int t) { return lay.g_off + t; };  // t in [0, t_end]

        {
            const int row = qp.add_row(net.b_lo, net.b_hi);
            qp.set_a(row, lay.b0_off, 1.0);
        }
        for (int t = 0; t < t_end; ++t) {
            const auto ts = static_cast<std::size_t>(t);
            const double pp = e.p_plus[ts];
            const double pm = e.p_minus[ts];
            const SlotCoeffs& k = e.coeffs[ts];

            for (Mode m : kModePriority) {
                const int row = qp.add_row(0.0, net.modes.has(m) ? 1.0 : 0.0);
                qp.set_a(row, xi(t, m), 1.0);
            }
            {
                const int row = qp.add_row(0.0, pm);
                qp.set_a(row, ri(t), 1.0);
            }
            {
                const int row = qp.add_row(0.0, pp);
                qp.set_a(row, si(t), 1.0);
            }
            {
                const int row = qp.add_row(0.0, k.engine_charge_cap_w);
                qp.set_a(row, ui(t), 1.0);
            }
            {
                const int row = qp.add_row(net.b_lo, net.b_hi);
                qp.set_a(row, bi(t), 1.0);
            }
            {
                const int row = qp.add_row(0.0, 0.0);  // SoC chain
                qp.set_a(row, bi(t), 1.0);
                qp.set_a(row, t == 0 ? lay.b0_off : bi(t - 1), -1.0);
                qp.set_a(row, ri(t), -k.eta_r);
                qp.set_a(row, ui(t), -k.eta_e);
                qp.set_a(row, si(t), k.eta_d);
            }
            {
                const int row = qp.add_row(1.0, 1.0);
                for (Mode m : kModePriority) qp.set_a(row, xi(t, m), 1.0);
            }
            {
                const int row = qp.add_row(0.0, kInf);  // s >= x_ev P+
                qp.set_a(row, si(t), 1.0);
                qp.set_a(row, xi(t, Mode::EV), -pp);
            }
            {
                const int row = qp.add_row(-kInf, 0.0);  // s <= x_ev P+ + x_ap beta P+
                qp.set_a(row, si(t), 1.0);
                qp.set_a(row, xi(t, Mode::EV), -pp);
                qp.set_a(row, xi(t, Mode::AP), -k.ap_split * pp);
            }
            {
                const int row = qp.add_row(-kInf, 0.0);  // u <= x_cs C
                qp.set_a(row, ui(t), 1.0);
                qp.set_a(row, xi(t, Mode::CS), -k.engine_charge_cap_w);
            }

            // relaxed fuel chain: G_t <= G_{t-1} - F(Q), F under-approximated
            // by tangents at evenly spaced outputs
            const double q_hi = pp + k.engine_charge_cap_w;
            for (int c = 0; c < cppdm_detail::kFuelTangents; ++c) {
                const double q_hat = q_hi * static_cast<double>(c) /
                                     static_cast<double>(cppdm_detail::kFuelTangents - 1);
                const double slope = 2.0 * net.curve.gamma2 * q_hat + net.curve.gamma1;
                const double f_hat = net.curve.gamma2 * q_hat * q_hat + net.curve.gamma1 * q_hat;
                // G_t - G_{t-1} + slope*(pp - s + u) <= slope*q_hat - f_hat
                const int row = qp.add_row(-kInf, slope * q_hat - f_hat - slope * pp);
                qp.set_a(row, gi(t + 1), 1.0);
                qp.set_a(row, gi(t), -1.0);
                qp.set_a(row, si(t), -slope);
                qp.set_a(row, ui(t), slope);
                if (q_hi <= 0.0) break;  // idle slot, one cut is enough
            }
        }

        // McCormick envelopes tying lambda/mu to y * (boundary fuel / SoC)
        const int y = lay.y_off;
        {
            const int row = qp.add_row(0.0, 1.0);
            qp.set_a(row, y, 1.0);
        }
        auto mccormick = [&](int prod, int raw, double vlo, double vhi) {
            {
                const int row = qp.add_row(0.0, kInf);  // prod >= vlo*y
                qp.set_a(row, prod, 1.0);
                qp.set_a(row, y, -vlo);
            }
            {
                const int row = qp.add_row(-kInf, 0.0);  // prod <= vhi*y
                qp.set_a(row, prod, 1.0);
                qp.set_a(row, y, -vhi);
            }
            {
                const int row = qp.add_row(-kInf, -vlo);  // prod <= raw - vlo*(1-y)
                qp.set_a(row, prod, 1.0);
                qp.set_a(row, raw, -1.0);
                qp.set_a(row, y, -vlo);
            }
            {
                const int row = qp.add_row(-vhi, kInf);  // prod >= raw - vhi*(1-y)
                qp.set_a(row, prod, 1.0);
                qp.set_a(row, raw, -1.0);
                qp.set_a(row, y, -vhi);
            }
        };
        mccormick(lay.lam0_off, gi(0), 0.0, g_cap);
        mccormick(lay.lam_off, gi(t_end), 0.0, g_cap);
        mccormick(lay.mu0_off, lay.b0_off, net.b_lo, net.b_hi);
        mccormick(lay.mu_off, bi(t_end - 1), net.b_lo, net.b_hi);
    }

    // flow conservation and charge caps per node; the initial fuel/SoC enter
    // as a virtual selected edge into the source
    const int n_nodes = static_cast<int>(net.nodes.size());
    for (int u = 0; u < n_nodes; ++u) {
        const double rhs = (u == net.source ? 1.0 : 0.0) - (u == net.dest ? 1.0 : 0.0);
        const int row = qp.add_row(rhs, rhs);
        for (int ei = 0; ei < n_edges; ++ei) {
            const RoadEdge& e = net.edges[static_cast<std::size_t>(ei)];
            if (e.from == u) qp.set_a(row, layouts[static_cast<std::size_t>(ei)].y_off, 1.0);
            if (e.to == u) qp.set_a(row, layouts[static_cast<std::size_t>(ei)].y_off, -1.0);
        }
    }
    for (int u = 0; u < n_nodes; ++u) {
        const StationNode& nd = net.nodes[static_cast<std::size_t>(u)];
        double cap = nd.charge_cap;
        if (u == net.source) cap += net.b0;
        const int row = qp.add_row(-kInf, cap);
        bool any = false;
        for (int ei = 0; ei < n_edges; ++ei) {
            const RoadEdge& e = net.edges[static_cast<std::size_t>(ei)];
            if (e.from == u) {
                qp.set_a(row, layouts[static_cast<std::size_t>(ei)].mu0_off, 1.0);
                any = true;
            }
            if (e.to == u) {
                qp.set_a(row, layouts[static_cast<std::size_t>(ei)].mu_off, -1.0);
                any = true;
            }
        }
        if (!any) qp.lower.back() = cap;  // degenerate empty row, keep it trivially tight
    }

    // objective: purchases priced at the tail node of each edge
    for (int ei = 0; ei < n_edges; ++ei) {
        const RoadEdge& e = net.edges[static_cast<std::size_t>(ei)];
        const auto& lay = layouts[static_cast<std::size_t>(ei)];
        const StationNode& tail = net.nodes[static_cast<std::size_t>(e.from)];
        const StationNode& head = net.nodes[static_cast<std::size_t>(e.to)];
        qp.q(lay.lam0_off) += tail.fuel_price;
        qp.q(lay.lam_off) -= head.fuel_price;
        qp.q(lay.mu0_off) += tail.charge_price;
        qp.q(lay.mu_off) -= head.charge_price;
    }
    const StationNode& src = net.nodes[static_cast<std::size_t>(net.source)];
    qp.objective_const -= src.fuel_price * net.g0 + src.charge_price * net.b0;
    return qp;
}

namespace cppdm_detail {

/// Cheapest s-t node path under weights (1 - y_e) clipped to [eps, 1].
inline std::optional<std::vector<int>> round_path(const RoadNetwork& net, const std::vector<double>& y) {
    const int n = static_cast<int>(net.nodes.size());
    std::vector<double> dist(static_cast<std::size_t>(n), kInf);
    std::vector<int> par_edge(static_cast<std::size_t>(n), -1);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[static_cast<std::size_t>(net.source)] = 0.0;
    pq.emplace(0.0, net.source);
    while (!pq.empty()) {
        auto [d, v] = pq.top();
        pq.pop();
        if (d > dist[static_cast<std::size_t>(v)] + 1e-15) continue;
        for (std::size_t ei = 0; ei < net.edges.size(); ++ei) {
            const RoadEdge& e = net.edges[ei];
            if (e.from != v) continue;
            const double w = std::min(1.0, std::max(1e-6, 1.0 - y[ei]));
            if (d + w < dist[static_cast<std::size_t>(e.to)] - 1e-15) {
                dist[static_cast<std::size_t>(e.to)] = d + w;
                par_edge[static_cast<std::size_t>(e.to)] = static_cast<int>(ei);
                pq.emplace(d + w, e.to);
            }
        }
    }
    if (!(dist[static_cast<std::size_t>(net.dest)] < kInf)) return std::nullopt;
    std::vector<int> edges;
    for (int v = net.dest; v != net.source;) {
        const int ei = par_edge[static_cast<std::size_t>(v)];
        edges.push_back(ei);
        v = net.edges[static_cast<std::size_t>(ei)].from;
    }
    std::reverse(edges.begin(), edges.end());
    return edges;
}

}  // namespace cppdm_detail

/// Solve the relaxation, then restore a concrete plan: shortest path under
/// (1 - y) edge weights, per-edge schedules from cDMOP rounding aimed at the
/// relaxation's boundary SoC, and greedy fuel pricing along the path.
inline CppdmResult solve_cppdm(const RoadNetwork& net, const SocGrid& grid, QpSettings settings = {}) {
    std::vector<cppdm_detail::Layout> layouts;
    QpProblem qp = build_cppdm_program(net, layouts);
    QpSolver solver(qp, settings);
    QpResult qr = solver.solve();

    CppdmResult res;
    res.status = qr.status;
    res.lower_bound = qr.objective;
    res.feas_residual = qr.feas_residual;
    res.gap_estimate = qr.gap_estimate;
    if (qr.status == QpStatus::primal_infeasible || qr.x.size() == 0) return res;

    res.y.resize(net.edges.size());
    for (std::size_t ei = 0; ei < net.edges.size(); ++ei)
        res.y[ei] = qr.x(layouts[ei].y_off);

    auto path = cppdm_detail::round_path(net, res.y);
    if (!path) return res;

    // per-edge schedules along the rounded path
    TripPlan plan;
    plan.node_seq.push_back(net.source);
    int cur_level = grid.nearest(net.b0);
    std::vector<double> charges(path->size(), 0.0);
    std::vector<int> charge_from_level(path->size(), 0);
    for (std::size_t pi = 0; pi < path->size(); ++pi) {
        const int ei = (*path)[pi];
        const RoadEdge& e = net.edges[static_cast<std::size_t>(ei)];
        const auto& lay = layouts[static_cast<std::size_t>(ei)];

        // charge toward the relaxation's suggested entry SoC, within the cap
        charge_from_level[pi] = cur_level;
        const double cap = net.nodes[static_cast<std::size_t>(e.from)].charge_cap;
        int want = grid.nearest(qr.x(lay.b0_off));
        int charged = cur_level;
        while (charged < want && charged + 1 < grid.size &&
               grid.level(charged + 1) <= grid.level(cur_level) + cap + 1e-12)
            ++charged;
        charges[pi] = grid.level(charged) - grid.level(cur_level);
        cur_level = charged;

        const double b_exit = qr.x(lay.slots_off + 8 * (e.horizon - 1) + 7);
        TripInstance inst = net.edge_instance(ei, grid.level(cur_level), grid.level(grid.nearest(b_exit)));
        auto prog = build_cdmop(inst);
        auto frac = solve_convex(prog, settings);
        std::optional<ModeSchedule> sched;
        if (frac.solved()) sched = round_modes(frac, inst);
        if (!sched) {
            inst.terminal_soc.reset();
            prog = build_cdmop(inst);
            frac = solve_convex(prog, settings);
            if (frac.solved()) sched = round_modes(frac, inst);
        }
        if (!sched) return res;  // no feasible traversal of a rounded edge

        PlanEdge pe;
        pe.road_edge = ei;
        pe.b_start_level = cur_level;
        pe.fuel = sched->total_fuel;
        // grid boundaries stay pessimistic: round the realized SoC down
        int exit_level = grid.nearest(sched->final_soc);
        if (grid.level(exit_level) > sched->final_soc + 1e-12 && exit_level > 0) --exit_level;
        pe.b_end_level = exit_level;
        pe.schedule = std::move(*sched);
        plan.edges.push_back(std::move(pe));
        plan.node_seq.push_back(e.to);
        cur_level = exit_level;
    }

    // greedy fuel pricing: buy just enough to reach the first cheaper
    // station in tank range, otherwise fill up
    const std::size_t n_legs = plan.edges.size();
    double fuel = net.g0;
    double cost = 0.0;
    std::vector<double> buys(n_legs, 0.0), arrivals(n_legs, 0.0);
    for (std::size_t i = 0; i < n_legs; ++i) {
        arrivals[i] = fuel;
        const int node = plan.node_seq[i];
        const double price = net.nodes[static_cast<std::size_t>(node)].fuel_price;
        double ahead = 0.0;
        double target = -1.0;
        bool cheaper_found = false;
        for (std::size_t j = i; j < n_legs; ++j) {
            ahead += plan.edges[j].fuel;
            if (ahead > net.tank_cap + 1e-9) break;
            if (j + 1 < n_legs &&
                net.nodes[static_cast<std::size_t>(plan.node_seq[j + 1])].fuel_price < price) {
                target = ahead;
                cheaper_found = true;
                break;
            }
            if (j + 1 == n_legs) target = ahead;  // destination within reach
        }
        if (target < 0.0 && !cheaper_found) target = net.tank_cap;
        const double buy = std::max(0.0, std::min(target, net.tank_cap) - fuel);
        buys[i] = buy;
        cost += buy * price;
        fuel += buy;
        if (fuel + 1e-9 < plan.edges[i].fuel) return res;  // tank cannot cover the next edge
        fuel -= plan.edges[i].fuel;
    }

    for (std::size_t i = 0; i < n_legs; ++i) {
        const int node = plan.node_seq[i];
        const double h = net.nodes[static_cast<std::size_t>(node)].charge_price;
        cost += charges[i] * h;
        if (buys[i] > 0.0 || charges[i] > 0.0) {
            StopAction st;
            st.node = node;
            st.arrival_fuel = arrivals[i];
            st.refill = buys[i];
            st.charge = charges[i];
            st.soc_before = grid.level(charge_from_level[i]);
            st.soc_after = st.soc_before + charges[i];
            plan.stops.push_back(st);
        }
    }
    plan.stop_count = static_cast<int>(plan.stops.size());
    plan.total_cost = cost;
    if (plan.stop_count > net.effective_stop_budget()) return res;
    res.plan = std::move(plan);
    return res;
}

}  // namespace phevplan

#endif  // PHEVPLAN_PATHPLAN_RELAX_HPP
