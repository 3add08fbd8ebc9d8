#ifndef PHEVPLAN_PATHPLAN_ORACLE_HPP
#define PHEVPLAN_PATHPLAN_ORACLE_HPP

#include <algorithm>
#include <map>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "phevplan/pathplan.hpp"

// Exhaustive reference solver for small networks: enumerates simple paths,
// stop placements, per-stop charge levels and the arrive-empty / fill-up
// purchase structure, with per-leg fuel minimized over intermediate SoC
// levels by min-plus composition of the per-edge cost tables.

namespace phevplan {

/// All simple source-to-destination paths as edge-index sequences. Throws
/// once more than `max_paths` exist.
inline std::vector<std::vector<int>> enumerate_simple_paths(const RoadNetwork& net, std::size_t max_paths) {
    std::vector<std::vector<int>> paths;
    std::vector<int> cur;
    std::vector<bool> visited(net.nodes.size(), false);

    auto dfs = [&](auto&& self, int node) -> void {
        if (node == net.dest) {
            if (paths.size() >= max_paths)
                throw std::invalid_argument("enumerate_simple_paths: more than " +
                                            std::to_string(max_paths) + " simple paths");
            paths.push_back(cur);
            return;
        }
        visited[static_cast<std::size_t>(node)] = true;
        for (std::size_t ei = 0; ei < net.edges.size(); ++ei) {
            const RoadEdge& e = net.edges[ei];
            if (e.from != node || visited[static_cast<std::size_t>(e.to)]) continue;
            cur.push_back(static_cast<int>(ei));
            self(self, e.to);
            cur.pop_back();
        }
        visited[static_cast<std::size_t>(node)] = false;
    };
    dfs(dfs, net.source);
    return paths;
}

namespace oracle_detail {

/// fuel[a][b] = min fuel from level a at path position p1 to level b at
/// position p2, by min-plus composition of the edge tables along the path.
inline std::vector<std::vector<double>> leg_costs(const std::vector<int>& path_edges,
                                                  const std::vector<EdgeCostTable>& tables, int levels,
                                                  std::size_t p1, std::size_t p2) {
    std::vector<std::vector<double>> acc(static_cast<std::size_t>(levels),
                                         std::vector<double>(static_cast<std::size_t>(levels), kInf));
    for (int a = 0; a < levels; ++a) acc[static_cast<std::size_t>(a)][static_cast<std::size_t>(a)] = 0.0;
    for (std::size_t p = p1; p < p2; ++p) {
        const auto& tab = tables[static_cast<std::size_t>(path_edges[p])];
        std::vector<std::vector<double>> next(static_cast<std::size_t>(levels),
                                              std::vector<double>(static_cast<std::size_t>(levels), kInf));
        for (int a = 0; a < levels; ++a)
            for (int mid = 0; mid < levels; ++mid) {
                const double base = acc[static_cast<std::size_t>(a)][static_cast<std::size_t>(mid)];
                if (!(base < kInf)) continue;
                for (int b = 0; b < levels; ++b) {
                    const double w = tab.at(mid, b);
                    if (base + w < next[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)])
                        next[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = base + w;
                }
            }
        acc = std::move(next);
    }
    return acc;
}

}  // namespace oracle_detail

struct PpdmOracleResult {
    double cost = kInf;
    std::vector<int> path_edges;
    bool feasible() const { return cost < kInf; }
};

/// Exact minimum plan cost by enumeration. Enforced limits keep it an
/// oracle: at most 10 simple paths, 5 grid levels and a stop budget of 4.
inline PpdmOracleResult brute_force_ppdm(const RoadNetwork& net, const SocGrid& grid) {
    net.validate();
    if (grid.size > 5) throw std::invalid_argument("brute_force_ppdm: more than 5 grid levels");
    if (net.effective_stop_budget() > 4)
        throw std::invalid_argument("brute_force_ppdm: stop budget above 4");
    const auto paths = enumerate_simple_paths(net, 10);

    std::vector<EdgeCostTable> tables;
    tables.reserve(net.edges.size());
    for (std::size_t ei = 0; ei < net.edges.size(); ++ei)
        tables.push_back(edge_cost_table(net, static_cast<int>(ei), grid));

    const int levels = grid.size;
    const int b0_level = grid.nearest(net.b0);
    PpdmOracleResult best;

    for (const auto& pe : paths) {
        const std::size_t n_pos = pe.size() + 1;  // node positions along the path
        std::vector<int> path_nodes(n_pos);
        path_nodes[0] = net.source;
        for (std::size_t i = 0; i < pe.size(); ++i)
            path_nodes[i + 1] = net.edges[static_cast<std::size_t>(pe[i])].to;

        // legs[a][b] for every position pair
        std::vector<std::vector<std::vector<std::vector<double>>>> legs(n_pos);
        for (std::size_t p1 = 0; p1 < n_pos; ++p1) {
            legs[p1].resize(n_pos);
            for (std::size_t p2 = p1; p2 < n_pos; ++p2)
                legs[p1][p2] = oracle_detail::leg_costs(pe, tables, levels, p1, p2);
        }

        auto price = [&](std::size_t pos) {
            return net.nodes[static_cast<std::size_t>(path_nodes[pos])].fuel_price;
        };
        auto hprice = [&](std::size_t pos) {
            return net.nodes[static_cast<std::size_t>(path_nodes[pos])].charge_price;
        };
        auto ecap = [&](std::size_t pos) {
            return net.nodes[static_cast<std::size_t>(path_nodes[pos])].charge_cap;
        };

        double path_best = kInf;

        auto min_to_end = [&](std::size_t pos, int lvl) {
            double need = kInf;
            for (int b = 0; b < levels; ++b)
                need = std::min(need, legs[pos][n_pos - 1][static_cast<std::size_t>(lvl)]
                                          [static_cast<std::size_t>(b)]);
            return need;
        };

        // cost to finish from a stop at `pos`, memoized on the discrete state
        std::map<std::tuple<std::size_t, int, int, long long>, double> memo;
        auto stop_here = [&](auto&& self, std::size_t pos, int lvl, double fuel, int stops_left) -> double {
            if (stops_left <= 0) return kInf;
            const auto key = std::make_tuple(pos, lvl, stops_left, std::llround(fuel * 1e9));
            if (auto it = memo.find(key); it != memo.end()) return it->second;

            double best_here = kInf;
            for (int c = lvl; c < levels; ++c) {
                if (grid.level(c) > grid.level(lvl) + ecap(pos) + 1e-12) break;
                const double charge_cost = hprice(pos) * (grid.level(c) - grid.level(lvl));

                // final leg: buy exactly enough to finish empty
                const double need = min_to_end(pos, c);
                if (need <= net.tank_cap + 1e-9 && fuel <= need + 1e-9)
                    best_here = std::min(best_here, charge_cost + (need - fuel) * price(pos));

                // continue to a further stop
                for (std::size_t ns = pos + 1; ns + 1 < n_pos; ++ns) {
                    for (int l2 = 0; l2 < levels; ++l2) {
                        const double w = legs[pos][ns][static_cast<std::size_t>(c)][static_cast<std::size_t>(l2)];
                        if (!(w <= net.tank_cap + 1e-9)) continue;
                        double cont;
                        double here;
                        if (price(ns) <= price(pos)) {
                            if (fuel > w + 1e-9) continue;  // would arrive with leftovers
                            here = (w - fuel) * price(pos);
                            cont = self(self, ns, l2, 0.0, stops_left - 1);
                        } else {
                            here = (net.tank_cap - fuel) * price(pos);
                            cont = self(self, ns, l2, net.tank_cap - w, stops_left - 1);
                        }
                        if (cont < kInf) best_here = std::min(best_here, charge_cost + here + cont);
                    }
                }
            }
            memo[key] = best_here;
            return best_here;
        };

        // no stops at all
        if (min_to_end(0, b0_level) <= net.g0 + 1e-9) path_best = 0.0;
        // choose the first stop (possibly the source itself)
        for (std::size_t fs = 0; fs + 1 < n_pos; ++fs) {
            for (int l2 = 0; l2 < levels; ++l2) {
                const double w = legs[0][fs][static_cast<std::size_t>(b0_level)][static_cast<std::size_t>(l2)];
                if (!(w <= net.g0 + 1e-9)) continue;
                path_best = std::min(path_best,
                                     stop_here(stop_here, fs, l2, net.g0 - w, net.effective_stop_budget()));
            }
        }

        if (path_best < best.cost) {
            best.cost = path_best;
            best.path_edges = pe;
        }
    }
    return best;
}

}  // namespace phevplan

#endif  // PHEVPLAN_PATHPLAN_ORACLE_HPP
