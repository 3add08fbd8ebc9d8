#ifndef PHEVPLAN_TESTS_GENERATORS_HPP
#define PHEVPLAN_TESTS_GENERATORS_HPP

#include <random>

#include "phevplan/dmop.hpp"
#include "phevplan/pathplan.hpp"

// Deterministic random fixtures shared by the unit and acceptance suites.

namespace phevplan::testgen {

struct TripOptions {
    int t_min = 2;
    int t_max = 6;
    bool allow_regen = true;
    ModeSet modes{};
    double gamma0 = 0.0;
    bool ample_fuel = true;
};

inline TripInstance random_trip(std::mt19937& rng, const TripOptions& opt = {}) {
    std::uniform_int_distribution<int> t_d(opt.t_min, opt.t_max);
    std::uniform_real_distribution<double> load_d(opt.allow_regen ? -3.0 : 0.0, 4.0);
    std::uniform_real_distribution<double> eta_r_d(0.8, 1.0), eta_d_d(1.0, 1.3), eta_e_d(0.7, 1.0);
    std::uniform_real_distribution<double> cap_d(0.0, 2.5), beta_d(0.0, 1.0);
    std::uniform_real_distribution<double> g2_d(0.005, 0.05), g1_d(0.05, 0.5);
    std::uniform_real_distribution<double> bhi_d(2.0, 6.0), frac_d(0.0, 1.0);

    TripInstance inst;
    inst.horizon = t_d(rng);
    inst.b_lo = 0.0;
    inst.b_hi = bhi_d(rng);
    inst.b0 = inst.b_lo + frac_d(rng) * (inst.b_hi - inst.b_lo);
    inst.g0 = opt.ample_fuel ? 1e9 : 5.0;
    inst.curve = FuelCurve{g2_d(rng), g1_d(rng), opt.gamma0};
    inst.modes = opt.modes;
    for (int t = 0; t < inst.horizon; ++t) {
        const double raw = load_d(rng);
        inst.p_plus.push_back(std::max(raw, 0.0));
        inst.p_minus.push_back(std::max(-raw, 0.0));
        inst.coeffs.push_back(SlotCoeffs{eta_r_d(rng), eta_d_d(rng), eta_e_d(rng), cap_d(rng), beta_d(rng)});
    }
    return inst;
}

/// Instance family for the competitive-ratio setting: no regeneration,
/// start empty, must end full, and the engine-charge caps are large enough
/// that charge-sustaining slots can saturate the battery exactly.
inline TripInstance random_online_trip(std::mt19937& rng, bool series_hybrid) {
    std::uniform_int_distribution<int> t_d(2, 6);
    std::uniform_real_distribution<double> load_d(0.0, 3.0);
    std::uniform_real_distribution<double> eta_d_d(1.0, 1.25), eta_e_d(0.7, 1.0);
    std::uniform_real_distribution<double> g2_d(0.005, 0.08), g1_d(0.1, 0.6);
    std::uniform_real_distribution<double> bhi_d(1.0, 3.0), beta_d(0.0, 1.0);

    TripInstance inst;
    inst.horizon = t_d(rng);
    inst.b_lo = 0.0;
    inst.b_hi = bhi_d(rng);
    inst.b0 = 0.0;
    inst.g0 = 1e9;
    inst.terminal_soc = inst.b_hi;
    inst.curve = FuelCurve{g2_d(rng), g1_d(rng), 0.0};
    if (series_hybrid) {
        inst.modes = ModeSet{true, false, true, false};
    } else {
        inst.modes = ModeSet{true, true, true, true};
    }
    for (int t = 0; t < inst.horizon; ++t) {
        inst.p_plus.push_back(load_d(rng));
        inst.p_minus.push_back(0.0);
        const double eta_e = eta_e_d(rng);
        // saturating engine-charge cap: a CS slot can always top the battery up
        inst.coeffs.push_back(SlotCoeffs{1.0, eta_d_d(rng), eta_e, inst.b_hi / eta_e + 0.5, beta_d(rng)});
    }
    return inst;
}

struct NetworkOptions {
    int max_nodes = 5;
    int grid_levels = 5;
    bool uniform_prices = false;
    bool allow_charging = true;
};

/// Small random layered DAG between source and destination, with short edge
/// profiles. Edge loads are scaled so every edge is traversable on a full
/// tank (combustion-only if need be).
inline RoadNetwork random_network(std::mt19937& rng, const NetworkOptions& opt = {}) {
    std::uniform_int_distribution<int> nodes_d(3, opt.max_nodes);
    std::uniform_real_distribution<double> price_d(1.0, 4.0), hprice_d(0.0, 0.3);
    std::uniform_real_distribution<double> load_d(0.0, 2.0), eta_e_d(0.7, 1.0);
    std::uniform_real_distribution<double> cap_d(0.0, 2.0), frac_d(0.0, 1.0);
    std::uniform_int_distribution<int> t_d(1, 2);

    RoadNetwork net;
    const int n = nodes_d(rng);
    for (int i = 0; i < n; ++i) {
        StationNode nd;
        nd.id = std::string(1, static_cast<char>('A' + i));
        nd.fuel_price = opt.uniform_prices ? 1.0 : price_d(rng);
        nd.charge_price = opt.uniform_prices ? 0.0 : hprice_d(rng);
        nd.charge_cap = opt.allow_charging && frac_d(rng) < 0.5 ? cap_d(rng) : 0.0;
        net.nodes.push_back(nd);
    }
    net.source = 0;
    net.dest = n - 1;
    net.b_lo = 0.0;
    net.b_hi = 2.0;
    net.b0 = frac_d(rng) * net.b_hi;
    net.tank_cap = 12.0;
    net.g0 = frac_d(rng) * 4.0;
    net.stop_budget = 4;
    net.curve = FuelCurve{0.02, 0.3, 0.0};
    net.modes = ModeSet{true, true, true, false};

    auto add_edge = [&](int a, int b) {
        RoadEdge e;
        e.from = a;
        e.to = b;
        e.horizon = t_d(rng);
        for (int t = 0; t < e.horizon; ++t) {
            e.p_plus.push_back(load_d(rng));
            e.p_minus.push_back(0.0);
            const double eta_e = eta_e_d(rng);
            e.coeffs.push_back(SlotCoeffs{1.0, 1.0 + 0.2 * frac_d(rng), eta_e, cap_d(rng), 0.0});
        }
        net.edges.push_back(std::move(e));
    };

    // forward chain keeps the destination reachable, extra forward edges add
    // alternative routes while keeping the graph acyclic
    for (int i = 0; i + 1 < n; ++i) add_edge(i, i + 1);
    for (int a = 0; a < n; ++a)
        for (int b = a + 2; b < n; ++b)
            if (frac_d(rng) < 0.4) add_edge(a, b);
    return net;
}

}  // namespace phevplan::testgen

#endif  // PHEVPLAN_TESTS_GENERATORS_HPP
