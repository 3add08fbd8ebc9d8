#ifndef PHEVPLAN_PATHPLAN_HPP
#define PHEVPLAN_PATHPLAN_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "phevplan/dmop.hpp"
#include "phevplan/relax.hpp"

// Integrated path planning with drive-mode decisions: a (node x SoC-level)
// augmented graph whose edge weights are per-edge trip optima, a shortest
// path for the uniform-price case, a gas-station style dynamic program for
// heterogeneous prices, a convex relaxation with path rounding, and an
// enumeration oracle for small networks.

namespace phevplan {

struct StationNode {
    std::string id;
    double fuel_price = 1.0;   // cost per fuel unit
    double charge_price = 0.0; // cost per SoC unit
    double charge_cap = 0.0;   // max SoC units purchasable per stop
};

struct RoadEdge {
    int from = -1;
    int to = -1;
    int horizon = 0;
    std::vector<double> p_plus;
    std::vector<double> p_minus;
    std::vector<SlotCoeffs> coeffs;
};

struct RoadNetwork {
    std::vector<StationNode> nodes;
    std::vector<RoadEdge> edges;
    int source = -1;
    int dest = -1;
    double tank_cap = 0.0;  // fuel tank capacity
    int stop_budget = 0;    // max refueling stops; <= 0 means one per node
    double g0 = 0.0;
    double b0 = 0.0;
    double b_lo = 0.0;
    double b_hi = 0.0;
    FuelCurve curve;
    ModeSet modes;

    int effective_stop_budget() const {
        return stop_budget > 0 ? stop_budget : static_cast<int>(nodes.size());
    }

    void validate() const {
        if (nodes.empty() || edges.empty()) throw std::invalid_argument("RoadNetwork: empty graph");
        const int n = static_cast<int>(nodes.size());
        if (source < 0 || source >= n || dest < 0 || dest >= n)
            throw std::invalid_argument("RoadNetwork: bad source/dest");
        for (const auto& nd : nodes)
            if (nd.fuel_price < 0.0 || nd.charge_price < 0.0 || nd.charge_cap < 0.0)
                throw std::invalid_argument("RoadNetwork: node " + nd.id + " has a negative price or cap");
        for (const auto& e : edges) {
            if (e.from < 0 || e.from >= n || e.to < 0 || e.to >= n)
                throw std::invalid_argument("RoadNetwork: edge endpoint out of range");
            if (e.horizon < 1 || e.p_plus.size() != static_cast<std::size_t>(e.horizon) ||
                e.p_minus.size() != static_cast<std::size_t>(e.horizon) ||
                e.coeffs.size() != static_cast<std::size_t>(e.horizon))
                throw std::invalid_argument("RoadNetwork: edge arrays must match its horizon");
        }
        if (!(tank_cap > 0.0)) throw std::invalid_argument("RoadNetwork: tank_cap must be > 0");
        if (g0 < 0.0 || g0 > tank_cap) throw std::invalid_argument("RoadNetwork: g0 outside [0, tank_cap]");
        if (!(b_lo <= b0 && b0 <= b_hi)) throw std::invalid_argument("RoadNetwork: need b_lo <= b0 <= b_hi");
        curve.validate();
        modes.validate();
    }

    TripInstance edge_instance(int edge_idx, double b0_edge,
                               std::optional<double> terminal = std::nullopt) const {
        const RoadEdge& e = edges[static_cast<std::size_t>(edge_idx)];
        TripInstance inst;
        inst.horizon = e.horizon;
        inst.p_plus = e.p_plus;
        inst.p_minus = e.p_minus;
        inst.coeffs = e.coeffs;
        inst.curve = curve;
        inst.b_lo = b_lo;
        inst.b_hi = b_hi;
        inst.b0 = b0_edge;
        inst.g0 = kInf;
        inst.modes = modes;
        inst.terminal_soc = terminal;
        return inst;
    }
};

/// Minimum fuel to traverse one road edge between every pair of SoC grid
/// levels; +inf where no schedule exists.
struct EdgeCostTable {
    std::vector<std::vector<double>> cost;  // [start level][end level]

    double at(int b_from, int b_to) const {
        return cost[static_cast<std::size_t>(b_from)][static_cast<std::size_t>(b_to)];
    }
};

inline EdgeCostTable edge_cost_table(const RoadNetwork& net, int edge_idx, const SocGrid& grid) {
    EdgeCostTable tab;
    tab.cost.resize(static_cast<std::size_t>(grid.size));
    TripInstance inst = net.edge_instance(edge_idx, net.b_lo);
    for (int i = 0; i < grid.size; ++i)
        tab.cost[static_cast<std::size_t>(i)] = dmop_final_level_costs(inst, grid, grid.level(i));
    return tab;
}

/// (road node x SoC level) expansion plus virtual terminals. A road edge
/// (u, v) traversed from level B to level B' may additionally bank up to
/// E_u of charge on arrival, landing at B''; the no-charging subgraph keeps
/// only B'' = B'. Weights above the tank capacity are dropped.
struct AugmentedGraph {
    struct Arc {
        int to = -1;
        double w = 0.0;
        int road_edge = -1;  // -1 for virtual arcs
        int b_from = -1;
        int b_end = -1;     // traversal end level, before arrival charging
        int b_arrive = -1;  // level after arrival charging
    };

    SocGrid grid;
    int num_road_nodes = 0;
    int s_id = -1;
    int t_id = -1;
    std::vector<std::vector<Arc>> adj;     // charging arcs included
    std::vector<std::vector<Arc>> adj_g0;  // charging stripped

    int aug_id(int node, int level) const { return node * grid.size + level; }
    int node_of(int aug) const { return aug / grid.size; }
    int level_of(int aug) const { return aug % grid.size; }
    int size() const { return num_road_nodes * grid.size + 2; }
};

inline AugmentedGraph build_augmented_graph(const RoadNetwork& net, const SocGrid& grid,
                                            const std::vector<EdgeCostTable>& tables) {
    net.validate();
    AugmentedGraph g;
    g.grid = grid;
    g.num_road_nodes = static_cast<int>(net.nodes.size());
    g.s_id = g.num_road_nodes * grid.size;
    g.t_id = g.s_id + 1;
    g.adj.assign(static_cast<std::size_t>(g.size()), {});
    g.adj_g0.assign(static_cast<std::size_t>(g.size()), {});

    const double tol = 1e-12;
    for (std::size_t ei = 0; ei < net.edges.size(); ++ei) {
        const RoadEdge& e = net.edges[ei];
        const StationNode& tail = net.nodes[static_cast<std::size_t>(e.from)];
        const EdgeCostTable& tab = tables[ei];
        for (int i = 0; i < grid.size; ++i) {
            const int from = g.aug_id(e.from, i);
            for (int j = 0; j < grid.size; ++j) {
                const double w = tab.at(i, j);
                if (!(w <= net.tank_cap)) continue;
                g.adj_g0[static_cast<std::size_t>(from)].push_back(
                    {g.aug_id(e.to, j), w, static_cast<int>(ei), i, j, j});
                if (tail.charge_price == 0.0 && tail.charge_cap > 0.0) {
                    // free charging: one compressed arc to the highest level
                    int k = j;
                    while (k + 1 < grid.size && grid.level(k + 1) <= grid.level(j) + tail.charge_cap + tol) ++k;
                    g.adj[static_cast<std::size_t>(from)].push_back(
                        {g.aug_id(e.to, k), w, static_cast<int>(ei), i, j, k});
                } else {
                    for (int k = j; k < grid.size; ++k) {
                        if (grid.level(k) > grid.level(j) + tail.charge_cap + tol) break;
                        g.adj[static_cast<std::size_t>(from)].push_back(
                            {g.aug_id(e.to, k), w, static_cast<int>(ei), i, j, k});
                    }
                }
            }
        }
    }

    // source: tank tops up virtually (weight tank_cap - g0), SoC may take any
    // level the source's charger can reach
    const int b0_level = grid.nearest(net.b0);
    const double src_cap = net.nodes[static_cast<std::size_t>(net.source)].charge_cap;
    for (int k = b0_level; k < grid.size; ++k) {
        if (grid.level(k) > grid.level(b0_level) + src_cap + tol) break;
        g.adj[static_cast<std::size_t>(g.s_id)].push_back(
            {g.aug_id(net.source, k), net.tank_cap - net.g0, -1, -1, b0_level, k});
    }
    g.adj_g0[static_cast<std::size_t>(g.s_id)].push_back(
        {g.aug_id(net.source, b0_level), net.tank_cap - net.g0, -1, -1, b0_level, b0_level});

    for (int j = 0; j < grid.size; ++j) {
        g.adj[static_cast<std::size_t>(g.aug_id(net.dest, j))].push_back({g.t_id, 0.0, -1, j, j, j});
        g.adj_g0[static_cast<std::size_t>(g.aug_id(net.dest, j))].push_back({g.t_id, 0.0, -1, j, j, j});
    }
    return g;
}

namespace detail {

struct ShortestPaths {
    std::vector<double> dist;
    std::vector<int> parent;      // predecessor augmented node
    std::vector<int> parent_arc;  // index into adj[parent]
};

inline ShortestPaths dijkstra(const std::vector<std::vector<AugmentedGraph::Arc>>& adj, int src) {
    const int n = static_cast<int>(adj.size());
    ShortestPaths sp;
    sp.dist.assign(static_cast<std::size_t>(n), kInf);
    sp.parent.assign(static_cast<std::size_t>(n), -1);
    sp.parent_arc.assign(static_cast<std::size_t>(n), -1);
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    sp.dist[static_cast<std::size_t>(src)] = 0.0;
    pq.emplace(0.0, src);
    while (!pq.empty()) {
        auto [d, v] = pq.top();
        pq.pop();
        if (d > sp.dist[static_cast<std::size_t>(v)] + 1e-15) continue;
        const auto& arcs = adj[static_cast<std::size_t>(v)];
        for (std::size_t ai = 0; ai < arcs.size(); ++ai) {
            const auto& arc = arcs[ai];
            const double nd = d + arc.w;
            if (nd < sp.dist[static_cast<std::size_t>(arc.to)] - 1e-15) {
                sp.dist[static_cast<std::size_t>(arc.to)] = nd;
                sp.parent[static_cast<std::size_t>(arc.to)] = v;
                sp.parent_arc[static_cast<std::size_t>(arc.to)] = static_cast<int>(ai);
                pq.emplace(nd, arc.to);
            }
        }
    }
    return sp;
}

}  // namespace detail

/// One refueling/recharging stop of a plan.
struct StopAction {
    int node = -1;
    double arrival_fuel = 0.0;
    double refill = 0.0;
    double charge = 0.0;         // SoC units bought
    double soc_before = 0.0;
    double soc_after = 0.0;
};

struct PlanEdge {
    int road_edge = -1;
    int b_start_level = -1;
    int b_end_level = -1;
    double fuel = 0.0;
    ModeSchedule schedule;
};

struct TripPlan {
    std::vector<int> node_seq;
    std::vector<StopAction> stops;
    std::vector<PlanEdge> edges;
    double total_cost = 0.0;
    int stop_count = 0;
};

namespace detail {

inline ModeSchedule edge_schedule(const RoadNetwork& net, int edge_idx, const SocGrid& grid,
                                  int b_from, int b_to) {
    TripInstance inst = net.edge_instance(edge_idx, grid.level(b_from), grid.level(b_to));
    auto sched = solve_dmop_dp(inst, grid);
    if (!sched) throw std::logic_error("edge_schedule: table admitted an unreachable level pair");
    return *sched;
}

}  // namespace detail

/// Uniform-price case (every fuel unit costs 1, charging is free): the
/// optimum is a plain shortest path through the augmented graph. The
/// reported cost includes the virtual initial fill (tank_cap - g0).
inline std::optional<TripPlan> solve_uppdm(const RoadNetwork& net, const SocGrid& grid) {
    net.validate();
    for (const auto& nd : net.nodes)
        if (nd.fuel_price != 1.0 || nd.charge_price != 0.0)
            throw std::invalid_argument("solve_uppdm: requires fuel_price == 1 and charge_price == 0");

    std::vector<EdgeCostTable> tables;
    tables.reserve(net.edges.size());
    for (std::size_t ei = 0; ei < net.edges.size(); ++ei)
        tables.push_back(edge_cost_table(net, static_cast<int>(ei), grid));
    const AugmentedGraph g = build_augmented_graph(net, grid, tables);

    const auto sp = detail::dijkstra(g.adj, g.s_id);
    if (!(sp.dist[static_cast<std::size_t>(g.t_id)] < kInf)) return std::nullopt;

    // unwind the augmented path
    std::vector<std::pair<int, int>> hops;  // (node, arc index into adj[node])
    for (int v = g.t_id; v != g.s_id;) {
        const int p = sp.parent[static_cast<std::size_t>(v)];
        hops.emplace_back(p, sp.parent_arc[static_cast<std::size_t>(v)]);
        v = p;
    }
    std::reverse(hops.begin(), hops.end());

    TripPlan plan;
    plan.total_cost = sp.dist[static_cast<std::size_t>(g.t_id)];
    plan.node_seq.push_back(net.source);
    for (const auto& [from, ai] : hops) {
        const auto& arc = g.adj[static_cast<std::size_t>(from)][static_cast<std::size_t>(ai)];
        if (arc.road_edge < 0) {
            if (from == g.s_id && arc.b_arrive > arc.b_end) {
                StopAction st;
                st.node = net.source;
                st.charge = g.grid.level(arc.b_arrive) - g.grid.level(arc.b_end);
                st.soc_before = g.grid.level(arc.b_end);
                st.soc_after = g.grid.level(arc.b_arrive);
                plan.stops.push_back(st);
            }
            continue;  // virtual source/terminal arc
        }
        PlanEdge pe;
        pe.road_edge = arc.road_edge;
        pe.b_start_level = arc.b_from;
        pe.b_end_level = arc.b_end;
        pe.fuel = arc.w;
        pe.schedule = detail::edge_schedule(net, arc.road_edge, grid, arc.b_from, arc.b_end);
        plan.edges.push_back(std::move(pe));
        const auto& e = net.edges[static_cast<std::size_t>(arc.road_edge)];
        plan.node_seq.push_back(e.to);
        if (arc.b_arrive > arc.b_end) {
            StopAction st;
            st.node = e.from;  // the tail node's charger banked this energy
            st.charge = g.grid.level(arc.b_arrive) - g.grid.level(arc.b_end);
            st.soc_before = g.grid.level(arc.b_end);
            st.soc_after = g.grid.level(arc.b_arrive);
            plan.stops.push_back(st);
        }
    }
    plan.stop_count = static_cast<int>(plan.stops.size());
    return plan;
}

/// Fuel levels worth considering at an augmented node, per the arrive-empty /
/// fill-up structure: tank capacity minus the no-charging distance from any
/// strictly cheaper station, plus zero. The virtual source counts as a free
/// station.
inline std::vector<double> gas_levels(const AugmentedGraph& g, const RoadNetwork& net, int node, int level,
                                      const std::vector<std::vector<double>>& dist_g0) {
    std::vector<double> out{0.0};
    const double gv = net.nodes[static_cast<std::size_t>(node)].fuel_price;
    const int target = g.aug_id(node, level);
    auto consider = [&](int from_aug, double price) {
        if (!(price < gv)) return;
        const double w = dist_g0[static_cast<std::size_t>(from_aug)][static_cast<std::size_t>(target)];
        if (w < net.tank_cap) out.push_back(net.tank_cap - w);
    };
    for (int u = 0; u < g.num_road_nodes; ++u) {
        if (u == node) continue;
        const double gu = net.nodes[static_cast<std::size_t>(u)].fuel_price;
        for (int b = 0; b < g.grid.size; ++b) consider(g.aug_id(u, b), gu);
    }
    consider(g.s_id, 0.0);

    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }),
              out.end());
    return out;
}

namespace detail {

struct GasChoice {
    enum class Kind : std::uint8_t { none, to_terminal, arrive_empty, fill_up } kind = Kind::none;
    int b_prime = -1;   // charge-to level at the current stop
    int next_node = -1;
    int next_level = -1;
    int next_g_idx = -1;
    double leg_w = 0.0;
};

struct GasState {
    double cost = kInf;
    GasChoice choice{};
};

}  // namespace detail

/// Exact solver for heterogeneous prices: gas-station dynamic program over
/// (stop, stop budget, arrival fuel level) on the augmented graph. The
/// initial SoC snaps to the grid. Returns nothing when the destination is
/// out of reach within the stop budget.
inline std::optional<TripPlan> solve_ppdm_dp(const RoadNetwork& net, const SocGrid& grid) {
    net.validate();
    for (const auto& nd : net.nodes)
        if (!(nd.fuel_price > 0.0))
            throw std::invalid_argument("solve_ppdm_dp: fuel prices must be > 0 (the virtual source is the only free station)");
    std::vector<EdgeCostTable> tables;
    tables.reserve(net.edges.size());
    for (std::size_t ei = 0; ei < net.edges.size(); ++ei)
        tables.push_back(edge_cost_table(net, static_cast<int>(ei), grid));
    const AugmentedGraph g = build_augmented_graph(net, grid, tables);

    const int n_aug = g.size();
    std::vector<std::vector<double>> dist(static_cast<std::size_t>(n_aug));
    std::vector<detail::ShortestPaths> sp_all(static_cast<std::size_t>(n_aug));
    for (int v = 0; v < n_aug; ++v) {
        sp_all[static_cast<std::size_t>(v)] = detail::dijkstra(g.adj_g0, v);
        dist[static_cast<std::size_t>(v)] = sp_all[static_cast<std::size_t>(v)].dist;
    }

    const int n_nodes = g.num_road_nodes;
    const int n_lvl = grid.size;
    const int q_max = net.effective_stop_budget() + 1;  // the virtual source counts as a stop

    // fuel levels per (node, level)
    std::vector<std::vector<std::vector<double>>> glv(static_cast<std::size_t>(n_nodes));
    for (int v = 0; v < n_nodes; ++v) {
        glv[static_cast<std::size_t>(v)].resize(static_cast<std::size_t>(n_lvl));
        for (int b = 0; b < n_lvl; ++b)
            glv[static_cast<std::size_t>(v)][static_cast<std::size_t>(b)] = gas_levels(g, net, v, b, dist);
    }
    auto g_index = [&](int v, int b, double fuel) -> int {
        const auto& levels = glv[static_cast<std::size_t>(v)][static_cast<std::size_t>(b)];
        auto it = std::lower_bound(levels.begin(), levels.end(), fuel - 1e-9);
        if (it == levels.end() || std::abs(*it - fuel) > 1e-9) return -1;
        return static_cast<int>(it - levels.begin());
    };

    // C[v][b][q][gi]
    std::vector<std::vector<std::vector<std::vector<detail::GasState>>>> table(
        static_cast<std::size_t>(n_nodes));
    for (int v = 0; v < n_nodes; ++v) {
        auto& nv = table[static_cast<std::size_t>(v)];
        nv.resize(static_cast<std::size_t>(n_lvl));
        for (int b = 0; b < n_lvl; ++b)
            nv[static_cast<std::size_t>(b)].assign(
                static_cast<std::size_t>(q_max + 1),
                std::vector<detail::GasState>(glv[static_cast<std::size_t>(v)][static_cast<std::size_t>(b)].size()));
    }

    auto charge_levels = [&](int v, int b) {
        std::vector<int> out;
        const double cap = net.nodes[static_cast<std::size_t>(v)].charge_cap;
        for (int bp = b; bp < n_lvl; ++bp) {
            if (grid.level(bp) > grid.level(b) + cap + 1e-12) break;
            out.push_back(bp);
        }
        return out;
    };

    // base case: last stop, then straight to the terminal
    for (int v = 0; v < n_nodes; ++v) {
        const auto& nd = net.nodes[static_cast<std::size_t>(v)];
        for (int b = 0; b < n_lvl; ++b) {
            const auto& gl = glv[static_cast<std::size_t>(v)][static_cast<std::size_t>(b)];
            for (int bp : charge_levels(v, b)) {
                const double w = dist[static_cast<std::size_t>(g.aug_id(v, bp))][static_cast<std::size_t>(g.t_id)];
                if (!(w <= net.tank_cap)) continue;
                const double charge_cost = nd.charge_price * (grid.level(bp) - grid.level(b));
                for (std::size_t gi = 0; gi < gl.size(); ++gi) {
                    const double fuel = gl[gi];
                    if (fuel > w + 1e-9) continue;
                    const double c = (w - fuel) * nd.fuel_price + charge_cost;
                    auto& st = table[static_cast<std::size_t>(v)][static_cast<std::size_t>(b)][1][gi];
                    if (c < st.cost) {
                        st.cost = c;
                        st.choice = {detail::GasChoice::Kind::to_terminal, bp, -1, -1, -1, w};
                    }
                }
            }
        }
    }

    // recurrence on the number of remaining stops
    for (int q = 2; q <= q_max; ++q) {
        for (int u = 0; u < n_nodes; ++u) {
            const auto& nu = net.nodes[static_cast<std::size_t>(u)];
            for (int b = 0; b < n_lvl; ++b) {
                const auto& gl = glv[static_cast<std::size_t>(u)][static_cast<std::size_t>(b)];
                auto& states = table[static_cast<std::size_t>(u)][static_cast<std::size_t>(b)][static_cast<std::size_t>(q)];
                for (int bp : charge_levels(u, b)) {
                    const double charge_cost = nu.charge_price * (grid.level(bp) - grid.level(b));
                    const auto& drow = dist[static_cast<std::size_t>(g.aug_id(u, bp))];
                    for (int v = 0; v < n_nodes; ++v) {
                        const auto& nv = net.nodes[static_cast<std::size_t>(v)];
                        for (int b2 = 0; b2 < n_lvl; ++b2) {
                            const double w = drow[static_cast<std::size_t>(g.aug_id(v, b2))];
                            if (!(w <= net.tank_cap)) continue;
                            if (nv.fuel_price <= nu.fuel_price) {
                                // buy exactly enough, arrive empty
                                const int gi_next = g_index(v, b2, 0.0);
                                if (gi_next < 0) continue;
                                const double tail =
                                    table[static_cast<std::size_t>(v)][static_cast<std::size_t>(b2)]
                                         [static_cast<std::size_t>(q - 1)][static_cast<std::size_t>(gi_next)].cost;
                                if (!(tail < kInf)) continue;
                                for (std::size_t gi = 0; gi < gl.size(); ++gi) {
                                    if (gl[gi] > w + 1e-9) continue;
                                    const double c = tail + (w - gl[gi]) * nu.fuel_price + charge_cost;
                                    auto& st = states[gi];
                                    if (c < st.cost) {
                                        st.cost = c;
                                        st.choice = {detail::GasChoice::Kind::arrive_empty, bp, v, b2, gi_next, w};
                                    }
                                }
                            } else {
                                // fill the tank, arrive with tank_cap - w
                                const int gi_next = g_index(v, b2, net.tank_cap - w);
                                if (gi_next < 0) continue;
                                const double tail =
                                    table[static_cast<std::size_t>(v)][static_cast<std::size_t>(b2)]
                                         [static_cast<std::size_t>(q - 1)][static_cast<std::size_t>(gi_next)].cost;
                                if (!(tail < kInf)) continue;
                                for (std::size_t gi = 0; gi < gl.size(); ++gi) {
                                    const double c = tail + (net.tank_cap - gl[gi]) * nu.fuel_price + charge_cost;
                                    auto& st = states[gi];
                                    if (c < st.cost) {
                                        st.cost = c;
                                        st.choice = {detail::GasChoice::Kind::fill_up, bp, v, b2, gi_next, w};
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    // the virtual source: free full tank, charging handled by stopping at the
    // source station itself
    const auto& s_dist = dist[static_cast<std::size_t>(g.s_id)];
    double best = kInf;
    detail::GasChoice best_choice{};
    int best_q = 0;
    if (s_dist[static_cast<std::size_t>(g.t_id)] <= net.tank_cap)
        best = 0.0;  // no stops at all: initial fuel covers the trip

    for (int q = 2; q <= q_max; ++q) {
        for (int v = 0; v < n_nodes && best > 0.0; ++v) {
            for (int b2 = 0; b2 < n_lvl; ++b2) {
                const double w = s_dist[static_cast<std::size_t>(g.aug_id(v, b2))];
                if (!(w <= net.tank_cap)) continue;
                const int gi_next = g_index(v, b2, net.tank_cap - w);
                if (gi_next < 0) continue;
                const double tail = table[static_cast<std::size_t>(v)][static_cast<std::size_t>(b2)]
                                         [static_cast<std::size_t>(q - 1)][static_cast<std::size_t>(gi_next)].cost;
                if (tail < best) {
                    best = tail;
                    best_choice = {detail::GasChoice::Kind::fill_up, -1, v, b2, gi_next, w};
                    best_q = q;
                }
            }
        }
    }
    if (!(best < kInf)) return std::nullopt;

    // reconstruct: walk the stop chain, then expand each leg through the
    // no-charging shortest-path parents
    TripPlan plan;
    plan.total_cost = best;

    struct Hop {
        int from_aug;
        int to_aug;
        double fuel_at_from_after_fill;
    };

    auto append_leg = [&](int from_aug, int to_aug) {
        // collect the aug-node chain from from_aug to to_aug in adj_g0
        const auto& sp = sp_all[static_cast<std::size_t>(from_aug)];
        std::vector<std::pair<int, int>> rev;
        for (int v = to_aug; v != from_aug;) {
            const int p = sp.parent[static_cast<std::size_t>(v)];
            rev.emplace_back(p, sp.parent_arc[static_cast<std::size_t>(v)]);
            v = p;
        }
        std::reverse(rev.begin(), rev.end());
        for (const auto& [node, ai] : rev) {
            const auto& arc = g.adj_g0[static_cast<std::size_t>(node)][static_cast<std::size_t>(ai)];
            if (arc.road_edge < 0) {
                if (node == g.s_id) plan.node_seq.push_back(net.source);
                continue;  // virtual arc
            }
            PlanEdge pe;
            pe.road_edge = arc.road_edge;
            pe.b_start_level = arc.b_from;
            pe.b_end_level = arc.b_end;
            pe.fuel = arc.w;
            pe.schedule = detail::edge_schedule(net, arc.road_edge, grid, arc.b_from, arc.b_end);
            plan.edges.push_back(std::move(pe));
            plan.node_seq.push_back(net.edges[static_cast<std::size_t>(arc.road_edge)].to);
        }
    };

    if (best == 0.0 && best_q == 0) {
        append_leg(g.s_id, g.t_id);
        plan.stop_count = 0;
        return plan;
    }

    int cur_node = -1, cur_level = -1, cur_gi = -1, cur_q = best_q;
    {
        // first hop from the virtual source
        append_leg(g.s_id, g.aug_id(best_choice.next_node, best_choice.next_level));
        cur_node = best_choice.next_node;
        cur_level = best_choice.next_level;
        cur_gi = best_choice.next_g_idx;
        cur_q = best_q - 1;
    }
    while (true) {
        const auto& st = table[static_cast<std::size_t>(cur_node)][static_cast<std::size_t>(cur_level)]
                              [static_cast<std::size_t>(cur_q)][static_cast<std::size_t>(cur_gi)];
        const auto& nd = net.nodes[static_cast<std::size_t>(cur_node)];
        const double fuel_here = glv[static_cast<std::size_t>(cur_node)][static_cast<std::size_t>(cur_level)]
                                    [static_cast<std::size_t>(cur_gi)];
        StopAction act;
        act.node = cur_node;
        act.arrival_fuel = fuel_here;
        act.soc_before = grid.level(cur_level);
        act.soc_after = grid.level(st.choice.b_prime);
        act.charge = act.soc_after - act.soc_before;
        if (st.choice.kind == detail::GasChoice::Kind::to_terminal) {
            act.refill = st.choice.leg_w - fuel_here;
            plan.stops.push_back(act);
            append_leg(g.aug_id(cur_node, st.choice.b_prime), g.t_id);
            break;
        }
        if (st.choice.kind == detail::GasChoice::Kind::arrive_empty)
            act.refill = st.choice.leg_w - fuel_here;
        else
            act.refill = net.tank_cap - fuel_here;
        plan.stops.push_back(act);
        append_leg(g.aug_id(cur_node, st.choice.b_prime),
                   g.aug_id(st.choice.next_node, st.choice.next_level));
        cur_node = st.choice.next_node;
        cur_level = st.choice.next_level;
        cur_gi = st.choice.next_g_idx;
        --cur_q;
    }
    plan.stop_count = static_cast<int>(plan.stops.size());
    return plan;
}

}  // namespace phevplan

#endif  // PHEVPLAN_PATHPLAN_HPP
