#ifndef PHEVPLAN_DMOP_HPP
#define PHEVPLAN_DMOP_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "phevplan/model.hpp"

// Drive-mode optimization over a whole trip: per-step subproblem solve,
// dynamic programming over a discretized SoC grid, and an exhaustive
// enumeration oracle for small horizons.

namespace phevplan {

/// A complete trip: per-slot loads and coefficients plus battery/fuel limits.
struct TripInstance {
    int horizon = 0;
    std::vector<double> p_plus;   // per-slot positive load
    std::vector<double> p_minus;  // per-slot regenerable power
    std::vector<SlotCoeffs> coeffs;
    FuelCurve curve;
    double b_lo = 0.0;
    double b_hi = 0.0;
    double b0 = 0.0;
    double g0 = 0.0;
    ModeSet modes;
    std::optional<double> terminal_soc;  // required final SoC, if any

    void validate() const {
        if (horizon < 1) throw std::invalid_argument("TripInstance: horizon must be >= 1");
        const auto n = static_cast<std::size_t>(horizon);
        if (p_plus.size() != n || p_minus.size() != n || coeffs.size() != n)
            throw std::invalid_argument("TripInstance: per-slot arrays must match horizon");
        if (!(b_lo <= b0 && b0 <= b_hi)) throw std::invalid_argument("TripInstance: need b_lo <= b0 <= b_hi");
        if (g0 < 0.0) throw std::invalid_argument("TripInstance: g0 must be >= 0");
        for (double v : p_plus)
            if (v < 0.0) throw std::invalid_argument("TripInstance: p_plus entries must be >= 0");
        for (double v : p_minus)
            if (v < 0.0) throw std::invalid_argument("TripInstance: p_minus entries must be >= 0");
        for (const auto& k : coeffs) k.validate();
        curve.validate();
        modes.validate();
        if (terminal_soc && (*terminal_soc < b_lo || *terminal_soc > b_hi))
            throw std::invalid_argument("TripInstance: terminal_soc outside [b_lo, b_hi]");
    }

    /// Build per-slot loads from a speed/grade profile and road-load parameters.
    static TripInstance from_profile(const std::vector<ProfileStep>& steps, const VehicleParams& params) {
        params.validate();
        TripInstance inst;
        inst.horizon = static_cast<int>(steps.size());
        inst.p_plus.reserve(steps.size());
        inst.p_minus.reserve(steps.size());
        for (const auto& st : steps) {
            const auto p = drivetrain_power(st, params);
            inst.p_plus.push_back(p.positive);
            inst.p_minus.push_back(p.negative);
        }
        return inst;
    }

    /// Largest engine output any slot can demand (load plus charge cap).
    double max_engine_output() const {
        double q = 0.0;
        for (int t = 0; t < horizon; ++t)
            q = std::max(q, p_plus[static_cast<std::size_t>(t)] +
                                coeffs[static_cast<std::size_t>(t)].engine_charge_cap_w);
        return q;
    }
};

/// Uniform discretization of [b_lo, b_hi] into `size` levels.
struct SocGrid {
    double b_lo = 0.0;
    double b_hi = 0.0;
    int size = 0;

    SocGrid() = default;
    SocGrid(double lo, double hi, int n) : b_lo(lo), b_hi(hi), size(n) {
        if (n < 2) throw std::invalid_argument("SocGrid: need at least 2 levels");
        if (!(hi >= lo)) throw std::invalid_argument("SocGrid: b_hi must be >= b_lo");
    }

    double spacing() const { return (b_hi - b_lo) / static_cast<double>(size - 1); }

    double level(int i) const {
        if (i == 0) return b_lo;
        if (i == size - 1) return b_hi;  // endpoints exact
        return b_lo + spacing() * static_cast<double>(i);
    }

    int nearest(double soc) const {
        const double d = spacing();
        if (d <= 0.0) return 0;
        int i = static_cast<int>(std::lround((soc - b_lo) / d));
        return std::clamp(i, 0, size - 1);
    }

    /// Snap tolerance: a transition is admitted onto a level only if the
    /// deterministic next SoC lands within half a grid spacing of it.
    bool snaps_to(double soc, int i) const {
        return std::abs(soc - level(i)) <= 0.5 * spacing() + 1e-12;
    }
};

/// Per-slot record of a realized schedule.
struct ScheduledSlot {
    double soc_start = 0.0;
    Transition transition{};
};

/// A feasible drive-mode schedule with realized controls and fuel cost.
struct ModeSchedule {
    std::vector<ScheduledSlot> slots;
    double total_fuel = 0.0;
    double final_soc = 0.0;

    std::vector<Mode> mode_sequence() const {
        std::vector<Mode> m;
        m.reserve(slots.size());
        for (const auto& s : slots) m.push_back(s.transition.mode);
        return m;
    }

    /// Fraction of slots spent in each mode, indexed by Mode.
    std::array<double, 4> mode_ratios() const {
        std::array<double, 4> c{0.0, 0.0, 0.0, 0.0};
        if (slots.empty()) return c;
        for (const auto& s : slots) c[static_cast<std::size_t>(s.transition.mode)] += 1.0;
        for (auto& v : c) v /= static_cast<double>(slots.size());
        return c;
    }
};

struct StepInputs {
    double p_plus = 0.0;
    double p_minus = 0.0;
    SlotCoeffs coeffs{};
};

struct StepChoice {
    Mode mode = Mode::EV;
    double engine_output = 0.0;
    Transition transition{};
};

/// One-slot subproblem: among the available modes whose deterministic next
/// SoC lands within snap tolerance of the target level, pick the cheapest.
/// Ties go to the battery-favoring priority order.
inline std::optional<StepChoice> solve_step(double b_prev, double b_target, const StepInputs& in,
                                            const ModeSet& modes, double b_lo, double b_hi,
                                            const FuelCurve& curve, double snap_tol) {
    std::optional<StepChoice> best;
    VehicleState st{b_prev, kInf};
    for (Mode m : kModePriority) {
        if (!modes.has(m)) continue;
        auto out = step_mode(st, m, in.p_plus, in.p_minus, in.coeffs, b_lo, b_hi, curve);
        if (!out.ok()) continue;
        if (std::abs(out.transition.next_soc - b_target) > snap_tol) continue;
        if (!best || out.transition.fuel_used < best->transition.fuel_used) {
            best = StepChoice{m, out.transition.engine_output, out.transition};
        }
    }
    return best;
}

namespace detail {

struct DpLabel {
    double cost = kInf;
    int prev_level = -1;
    Transition transition{};
    double soc_start = 0.0;
};

/// Forward label table: cost[t][level] = cheapest fuel to sit at `level`
/// after t slots. Returns the full table plus parents for reconstruction.
struct DpTable {
    int horizon = 0;
    int levels = 0;
    std::vector<DpLabel> labels;  // (horizon+1) x levels, row-major

    DpLabel& at(int t, int i) { return labels[static_cast<std::size_t>(t) * levels + i]; }
    const DpLabel& at(int t, int i) const { return labels[static_cast<std::size_t>(t) * levels + i]; }
};

inline DpTable run_dmop_dp(const TripInstance& inst, const SocGrid& grid) {
    DpTable tab;
    tab.horizon = inst.horizon;
    tab.levels = grid.size;
    tab.labels.assign(static_cast<std::size_t>(inst.horizon + 1) * grid.size, DpLabel{});

    const double snap_tol = 0.5 * grid.spacing() + 1e-12;

    // Slot 1 expands from the exact initial SoC; later slots from grid levels.
    auto expand = [&](int t, double soc_from, double cost_from, int from_level) {
        const auto ts = static_cast<std::size_t>(t - 1);
        VehicleState st{soc_from, kInf};
        for (Mode m : kModePriority) {
            if (!inst.modes.has(m)) continue;
            auto out = step_mode(st, m, inst.p_plus[ts], inst.p_minus[ts], inst.coeffs[ts],
                                 inst.b_lo, inst.b_hi, inst.curve);
            if (!out.ok()) continue;
            const int j = grid.nearest(out.transition.next_soc);
            if (std::abs(out.transition.next_soc - grid.level(j)) > snap_tol) continue;
            const double c = cost_from + out.transition.fuel_used;
            DpLabel& lab = tab.at(t, j);
            if (c < lab.cost) {
                lab.cost = c;
                lab.prev_level = from_level;
                lab.transition = out.transition;
                lab.soc_start = soc_from;
            }
        }
    };

    expand(1, inst.b0, 0.0, -1);
    for (int t = 2; t <= inst.horizon; ++t) {
        for (int i = 0; i < grid.size; ++i) {
            const DpLabel& lab = tab.at(t - 1, i);
            if (!(lab.cost < kInf)) continue;
            expand(t, grid.level(i), lab.cost, i);
        }
    }
    return tab;
}

inline ModeSchedule reconstruct(const DpTable& tab, int final_level) {
    ModeSchedule sched;
    sched.slots.resize(static_cast<std::size_t>(tab.horizon));
    int lvl = final_level;
    for (int t = tab.horizon; t >= 1; --t) {
        const DpLabel& lab = tab.at(t, lvl);
        sched.slots[static_cast<std::size_t>(t - 1)] = ScheduledSlot{lab.soc_start, lab.transition};
        lvl = lab.prev_level;
    }
    sched.total_fuel = tab.at(tab.horizon, final_level).cost;
    sched.final_soc = sched.slots.back().transition.next_soc;
    return sched;
}

}  // namespace detail

/// Exact (up to grid quantization) minimum-fuel schedule. Free final SoC
/// minimizes over every reachable final level; a terminal requirement pins
/// the final level to the nearest grid point. Returns nothing when no
/// schedule exists or the optimum needs more fuel than g0.
inline std::optional<ModeSchedule> solve_dmop_dp(const TripInstance& inst, const SocGrid& grid) {
    inst.validate();
    auto tab = detail::run_dmop_dp(inst, grid);

    int best_level = -1;
    double best_cost = kInf;
    if (inst.terminal_soc) {
        const int j = grid.nearest(*inst.terminal_soc);
        if (grid.snaps_to(*inst.terminal_soc, j) && tab.at(inst.horizon, j).cost < kInf) {
            best_level = j;
            best_cost = tab.at(inst.horizon, j).cost;
        }
    } else {
        for (int j = 0; j < grid.size; ++j) {
            const double c = tab.at(inst.horizon, j).cost;
            if (c < best_cost) {
                best_cost = c;
                best_level = j;
            }
        }
    }
    if (best_level < 0 || best_cost > inst.g0) return std::nullopt;
    return detail::reconstruct(tab, best_level);
}

/// Cheapest fuel to every final grid level, starting the trip at `b0`.
/// Fuel feasibility is not applied; entries are +inf where unreachable.
inline std::vector<double> dmop_final_level_costs(TripInstance inst, const SocGrid& grid, double b0) {
    inst.b0 = b0;
    inst.g0 = kInf;
    inst.terminal_soc.reset();
    inst.validate();
    auto tab = detail::run_dmop_dp(inst, grid);
    std::vector<double> out(static_cast<std::size_t>(grid.size), kInf);
    for (int j = 0; j < grid.size; ++j) out[static_cast<std::size_t>(j)] = tab.at(inst.horizon, j).cost;
    return out;
}

constexpr int kBruteForceMaxHorizon = 10;

/// Exhaustive oracle: tries every available-mode sequence with exact
/// (undiscretized) dynamics. Terminal requirements are matched within
/// `terminal_tol`. Horizons above kBruteForceMaxHorizon are rejected.
inline std::optional<ModeSchedule> brute_force_dmop(const TripInstance& inst, double terminal_tol = 1e-9) {
    inst.validate();
    if (inst.horizon > kBruteForceMaxHorizon)
        throw std::invalid_argument("brute_force_dmop: horizon too large (max 10)");

    std::vector<Mode> avail;
    for (Mode m : kModePriority)
        if (inst.modes.has(m)) avail.push_back(m);

    const int t_end = inst.horizon;
    std::optional<ModeSchedule> best;
    std::vector<ScheduledSlot> cur(static_cast<std::size_t>(t_end));

    auto recurse = [&](auto&& self, int t, double soc, double fuel_spent) -> void {
        if (t == t_end) {
            if (fuel_spent > inst.g0) return;
            if (inst.terminal_soc && std::abs(soc - *inst.terminal_soc) > terminal_tol) return;
            if (!best || fuel_spent < best->total_fuel) {
                ModeSchedule s;
                s.slots = cur;
                s.total_fuel = fuel_spent;
                s.final_soc = soc;
                best = std::move(s);
            }
            return;
        }
        const auto ts = static_cast<std::size_t>(t);
        VehicleState st{soc, inst.g0 - fuel_spent};
        for (Mode m : avail) {
            auto out = step_mode(st, m, inst.p_plus[ts], inst.p_minus[ts], inst.coeffs[ts],
                                 inst.b_lo, inst.b_hi, inst.curve);
            if (!out.ok()) continue;
            cur[ts] = ScheduledSlot{soc, out.transition};
            self(self, t + 1, out.transition.next_soc, fuel_spent + out.transition.fuel_used);
        }
    };
    recurse(recurse, 0, inst.b0, 0.0);
    return best;
}

}  // namespace phevplan

#endif  // PHEVPLAN_DMOP_HPP
