#ifndef PHEVPLAN_RELAX_HPP
#define PHEVPLAN_RELAX_HPP

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "phevplan/dmop.hpp"
#include "phevplan/qp.hpp"

// Convexified trip relaxation: fractional mode shares with the mode-coupled
// control bounds, solved as a sparse QP, plus the argmax rounding that turns
// a fractional point back into a concrete feasible schedule.
//
// The engine output keeps the gated-linear form Q_t = P+_t - s_t + u_t,
// which coincides with the per-mode expressions at every integral mode
// assignment and stays linear for fractional ones. The curve's constant
// term is left out of the relaxed objective (it only applies when the
// engine is on, which is not a convex condition), so the relaxation value
// is a valid lower bound on any true schedule cost.

namespace phevplan {

/// cDMOP as a sparse QP plus the variable layout needed to read it back.
/// Per-slot variables: x_ev, x_ce, x_cs, x_ap, r, s, u, B.
struct ConvexProgram {
    static constexpr int kVarsPerSlot = 8;

    QpProblem qp;
    int horizon = 0;

    int x_idx(int t, Mode m) const {
        switch (m) {
            case Mode::EV: return t * kVarsPerSlot + 0;
            case Mode::CE: return t * kVarsPerSlot + 1;
            case Mode::CS: return t * kVarsPerSlot + 2;
            case Mode::AP: return t * kVarsPerSlot + 3;
        }
        return -1;
    }
    int r_idx(int t) const { return t * kVarsPerSlot + 4; }
    int s_idx(int t) const { return t * kVarsPerSlot + 5; }
    int u_idx(int t) const { return t * kVarsPerSlot + 6; }
    int b_idx(int t) const { return t * kVarsPerSlot + 7; }
};

struct FractionalSolution {
    QpStatus status = QpStatus::max_iterations;
    std::vector<std::array<double, 4>> x;  // per slot, indexed by Mode
    std::vector<double> r, s, u, b;
    double objective = 0.0;
    double feas_residual = 0.0;
    double gap_estimate = 0.0;
    int iterations = 0;

    bool solved() const { return status == QpStatus::solved; }
};

inline ConvexProgram build_cdmop(const TripInstance& inst) {
    inst.validate();
    const int t_end = inst.horizon;
    ConvexProgram prog;
    prog.horizon = t_end;
    prog.qp = QpProblem(t_end * ConvexProgram::kVarsPerSlot);
    QpProblem& qp = prog.qp;

    for (int t = 0; t < t_end; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        const double pp = inst.p_plus[ts];
        const double pm = inst.p_minus[ts];
        const SlotCoeffs& k = inst.coeffs[ts];

        // variable boxes
        for (Mode m : kModePriority) {
            const int row = qp.add_row(0.0, inst.modes.has(m) ? 1.0 : 0.0);
            qp.set_a(row, prog.x_idx(t, m), 1.0);
        }
        {
            const int row = qp.add_row(0.0, pm);
            qp.set_a(row, prog.r_idx(t), 1.0);
        }
        {
            const int row = qp.add_row(0.0, pp);
            qp.set_a(row, prog.s_idx(t), 1.0);
        }
        {
            const int row = qp.add_row(0.0, k.engine_charge_cap_w);
            qp.set_a(row, prog.u_idx(t), 1.0);
        }
        {
            double lo = inst.b_lo, hi = inst.b_hi;
            if (t == t_end - 1 && inst.terminal_soc) lo = hi = *inst.terminal_soc;
            const int row = qp.add_row(lo, hi);
            qp.set_a(row, prog.b_idx(t), 1.0);
        }

        // SoC chain: B_t - B_{t-1} = eta_r r + eta_e u - eta_d s
        {
            const double rhs = (t == 0) ? inst.b0 : 0.0;
            const int row = qp.add_row(rhs, rhs);
            qp.set_a(row, prog.b_idx(t), 1.0);
            if (t > 0) qp.set_a(row, prog.b_idx(t - 1), -1.0);
            qp.set_a(row, prog.r_idx(t), -k.eta_r);
            qp.set_a(row, prog.u_idx(t), -k.eta_e);
            qp.set_a(row, prog.s_idx(t), k.eta_d);
        }
        // mode shares form a simplex
        {
            const int row = qp.add_row(1.0, 1.0);
            for (Mode m : kModePriority) qp.set_a(row, prog.x_idx(t, m), 1.0);
        }
        // EV load coverage: s >= x_ev P+
        {
            const int row = qp.add_row(0.0, kInf);
            qp.set_a(row, prog.s_idx(t), 1.0);
            qp.set_a(row, prog.x_idx(t, Mode::EV), -pp);
        }
        // motor share cap: s <= x_ev P+ + x_ap beta P+
        {
            const int row = qp.add_row(-kInf, 0.0);
            qp.set_a(row, prog.s_idx(t), 1.0);
            qp.set_a(row, prog.x_idx(t, Mode::EV), -pp);
            qp.set_a(row, prog.x_idx(t, Mode::AP), -k.ap_split * pp);
        }
        // engine-charge gate: u <= x_cs C
        {
            const int row = qp.add_row(-kInf, 0.0);
            qp.set_a(row, prog.u_idx(t), 1.0);
            qp.set_a(row, prog.x_idx(t, Mode::CS), -k.engine_charge_cap_w);
        }

        // fuel objective on Q = P+ - s + u
        qp.add_affine_quadratic({{prog.s_idx(t), -1.0}, {prog.u_idx(t), 1.0}}, pp,
                                inst.curve.gamma2, inst.curve.gamma1);
    }
    return prog;
}

inline FractionalSolution solve_convex(const ConvexProgram& prog, QpSettings settings = {}) {
    QpSolver solver(prog.qp, settings);
    QpResult qr = solver.solve();

    FractionalSolution sol;
    sol.status = qr.status;
    sol.objective = qr.objective;
    sol.feas_residual = qr.feas_residual;
    sol.gap_estimate = qr.gap_estimate;
    sol.iterations = qr.iterations;
    if (qr.x.size() == 0) return sol;

    const int t_end = prog.horizon;
    sol.x.resize(static_cast<std::size_t>(t_end));
    sol.r.resize(static_cast<std::size_t>(t_end));
    sol.s.resize(static_cast<std::size_t>(t_end));
    sol.u.resize(static_cast<std::size_t>(t_end));
    sol.b.resize(static_cast<std::size_t>(t_end));
    for (int t = 0; t < t_end; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        for (Mode m : kModePriority)
            sol.x[ts][static_cast<std::size_t>(m)] = qr.x(prog.x_idx(t, m));
        sol.r[ts] = qr.x(prog.r_idx(t));
        sol.s[ts] = qr.x(prog.s_idx(t));
        sol.u[ts] = qr.x(prog.u_idx(t));
        sol.b[ts] = qr.x(prog.b_idx(t));
    }
    return sol;
}

/// Round each slot to the largest fractional mode share, falling back to the
/// next-largest (then to the battery-favoring priority) when the chosen mode
/// is infeasible at the simulated SoC, and re-simulate forward so the result
/// is a genuinely feasible schedule.
inline std::optional<ModeSchedule> round_modes(const FractionalSolution& frac, const TripInstance& inst) {
    if (frac.x.size() != static_cast<std::size_t>(inst.horizon)) return std::nullopt;

    ModeSchedule sched;
    sched.slots.reserve(frac.x.size());
    double soc = inst.b0;
    double fuel_left = inst.g0;

    for (int t = 0; t < inst.horizon; ++t) {
        const auto ts = static_cast<std::size_t>(t);

        // quantize the shares so solver noise cannot override the
        // battery-favoring priority between near-equal candidates
        std::array<Mode, 4> order = kModePriority;
        auto key = [&](Mode m) {
            return std::llround(frac.x[ts][static_cast<std::size_t>(m)] * 1e5);
        };
        std::stable_sort(order.begin(), order.end(), [&](Mode a, Mode b) { return key(a) > key(b); });

        bool placed = false;
        VehicleState st{soc, fuel_left};
        for (Mode m : order) {
            if (!inst.modes.has(m)) continue;
            auto out = step_mode(st, m, inst.p_plus[ts], inst.p_minus[ts], inst.coeffs[ts],
                                 inst.b_lo, inst.b_hi, inst.curve);
            if (!out.ok()) continue;
            sched.slots.push_back(ScheduledSlot{soc, out.transition});
            soc = out.transition.next_soc;
            fuel_left -= out.transition.fuel_used;
            sched.total_fuel += out.transition.fuel_used;
            placed = true;
            break;
        }
        if (!placed) return std::nullopt;
    }
    sched.final_soc = soc;
    return sched;
}

}  // namespace phevplan

#endif  // PHEVPLAN_RELAX_HPP
