#ifndef PHEVPLAN_ONLINE_HPP
#define PHEVPLAN_ONLINE_HPP

#include <cmath>
#include <optional>
#include <stdexcept>

#include "phevplan/dmop.hpp"
#include "phevplan/model.hpp"

// Threshold-based online drive-mode selection. Decisions depend only on the
// current state and the current slot's inputs; thresholds either come from
// known per-unit-cost bounds or from a running estimate of them.

namespace phevplan {

struct Thresholds {
    double theta_ap = 0.0;
    double theta_cs = 0.0;
    double competitive_ratio = 0.0;
};

/// Threshold pair minimizing the worst-case ratio against the offline
/// optimum, given per-unit fuel-cost bounds and efficiency extremes:
///   kappa    = max(1, 1/(eta_e_max * eta_d_min))
///   theta_cs = sqrt(f_max f_min / (kappa eta_d_min eta_e_max))
///   theta_ap = theta_cs * eta_d_min * eta_e_min
///   CR       = sqrt(kappa f_max eta_e_max / (f_min eta_d_min)) / eta_e_min
inline Thresholds compute_thresholds(double f_min, double f_max, double eta_d_min, double eta_e_min,
                                     double eta_e_max) {
    if (!(f_min > 0.0) || !(f_max >= f_min))
        throw std::domain_error("compute_thresholds: need 0 < f_min <= f_max");
    if (!(eta_d_min >= 1.0) || !(eta_e_min > 0.0) || !(eta_e_max >= eta_e_min) || eta_e_max > 1.0)
        throw std::domain_error("compute_thresholds: efficiency bounds out of range");

    const double kappa = std::max(1.0, 1.0 / (eta_e_max * eta_d_min));
    Thresholds th;
    th.theta_cs = std::sqrt(f_max * f_min / (kappa * eta_d_min * eta_e_max));
    th.theta_ap = th.theta_cs * eta_d_min * eta_e_min;
    th.competitive_ratio = std::sqrt(kappa * f_max * eta_e_max / (f_min * eta_d_min)) / eta_e_min;
    return th;
}

/// Running estimate of the per-unit-cost range, fed with every observed
/// positive engine output. The first sample initializes both ends.
struct BoundEstimate {
    double f_min_hat = kInf;
    double f_max_hat = -kInf;
    int samples = 0;

    bool empty() const { return samples == 0; }
};

inline BoundEstimate update_bounds(BoundEstimate est, double q, const FuelCurve& curve) {
    if (q <= 0.0) return est;  // engine-off slots carry no price information
    const double f = curve.per_unit(q);
    if (est.empty()) {
        est.f_min_hat = f;
        est.f_max_hat = f;
    } else {
        est.f_min_hat = std::min(est.f_min_hat, f);
        est.f_max_hat = std::max(est.f_max_hat, f);
    }
    ++est.samples;
    return est;
}

namespace detail {
/// Fuel spent per unit of usefully delivered power; 0 when the engine is
/// off, +inf when fuel would buy nothing.
inline double normalized_cost(const FuelCurve& curve, double q, double delivered) {
    if (q <= 0.0) return 0.0;
    if (delivered <= 0.0) return kInf;
    return curve.fuel_at(q) / delivered;
}
}  // namespace detail

/// One decision of the online policy. Follows the priority EV -> AP -> CS ->
/// CE: EV whenever the usable charge covers the load; AP when its normalized
/// cost clears theta_ap (or both CS and CE are absent); CS when its
/// normalized cost clears theta_cs (or CE is absent); CE otherwise.
/// The returned transition realizes the chosen mode's greedy controls.
inline StepOutcome online_step(const VehicleState& state, double p_plus, double p_minus,
                               const SlotCoeffs& k, double b_lo, double b_hi, const FuelCurve& curve,
                               const Thresholds& th, const ModeSet& modes,
                               Mode* chosen = nullptr) {
    const double discharge_avail = std::max(0.0, (state.soc - b_lo) / k.eta_d);
    const double regen = std::min(p_minus, std::max(0.0, (b_hi - state.soc) / k.eta_r));
    const double s_cand = std::min(k.ap_split * p_plus, discharge_avail);
    const double u_cand = std::min(k.engine_charge_cap_w,
                                   std::max(0.0, (b_hi - state.soc - k.eta_r * regen) / k.eta_e));

    auto realize = [&](Mode m) {
        if (chosen) *chosen = m;
        return step_mode(state, m, p_plus, p_minus, k, b_lo, b_hi, curve);
    };

    if (modes.ev && p_plus <= discharge_avail) return realize(Mode::EV);

    if (modes.ap) {
        const double cost_ap = detail::normalized_cost(curve, p_plus - s_cand, p_plus - s_cand);
        if (cost_ap <= th.theta_ap || !(modes.cs && modes.ce)) return realize(Mode::AP);
    }
    if (modes.cs) {
        const double cost_cs = detail::normalized_cost(curve, p_plus + u_cand, p_plus + k.eta_e * u_cand);
        if (cost_cs <= th.theta_cs || !modes.ce) return realize(Mode::CS);
    }
    if (modes.ce) return realize(Mode::CE);

    StepOutcome out;
    out.error = StepError::ev_infeasible;  // no mode could take the slot
    return out;
}

/// Streaming controller: holds the SoC/fuel state and, when no fixed
/// thresholds are supplied, derives them each slot from the running
/// per-unit-cost estimate and the efficiency extremes seen so far.
class OnlineController {
  public:
    OnlineController(double b0, double g0, double b_lo, double b_hi, FuelCurve curve, ModeSet modes,
                     std::optional<Thresholds> fixed = std::nullopt)
        : state_{b0, g0}, b_lo_(b_lo), b_hi_(b_hi), curve_(curve), modes_(modes), fixed_(fixed) {}

    StepOutcome step(double p_plus, double p_minus, const SlotCoeffs& k) {
        eta_d_min_ = std::min(eta_d_min_, k.eta_d);
        eta_e_min_ = std::min(eta_e_min_, k.eta_e);
        eta_e_max_ = std::max(eta_e_max_, k.eta_e);

        Thresholds th;
        if (fixed_) {
            th = *fixed_;
        } else {
            if (est_.empty() && p_plus > 0.0) est_ = update_bounds(est_, p_plus, curve_);
            if (est_.empty()) {
                th.theta_ap = th.theta_cs = kInf;  // nothing priced yet, prefer battery modes
            } else {
                th = compute_thresholds(est_.f_min_hat, est_.f_max_hat, eta_d_min_, eta_e_min_, eta_e_max_);
            }
        }

        Mode m = Mode::EV;
        auto out = online_step(state_, p_plus, p_minus, k, b_lo_, b_hi_, curve_, th, modes_, &m);
        if (out.ok()) {
            state_.soc = out.transition.next_soc;
            state_.fuel -= out.transition.fuel_used;
            if (!fixed_) est_ = update_bounds(est_, out.transition.engine_output, curve_);
        }
        return out;
    }

    const VehicleState& state() const { return state_; }
    const BoundEstimate& estimate() const { return est_; }

  private:
    VehicleState state_;
    double b_lo_, b_hi_;
    FuelCurve curve_;
    ModeSet modes_;
    std::optional<Thresholds> fixed_;
    BoundEstimate est_{};
    double eta_d_min_ = kInf;
    double eta_e_min_ = kInf;
    double eta_e_max_ = -kInf;
};

/// Run the online policy over a whole instance with fixed thresholds.
/// Returns the realized schedule, or nothing once a slot has no feasible
/// mode or the tank runs dry.
inline std::optional<ModeSchedule> run_online(const TripInstance& inst, const Thresholds& th) {
    inst.validate();
    ModeSchedule sched;
    sched.slots.reserve(static_cast<std::size_t>(inst.horizon));
    VehicleState st{inst.b0, inst.g0};
    for (int t = 0; t < inst.horizon; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        auto out = online_step(st, inst.p_plus[ts], inst.p_minus[ts], inst.coeffs[ts], inst.b_lo,
                               inst.b_hi, inst.curve, th, inst.modes);
        if (!out.ok()) return std::nullopt;
        sched.slots.push_back(ScheduledSlot{st.soc, out.transition});
        sched.total_fuel += out.transition.fuel_used;
        st.soc = out.transition.next_soc;
        st.fuel -= out.transition.fuel_used;
    }
    sched.final_soc = st.soc;
    return sched;
}

/// Extremes needed by compute_thresholds, taken over a whole instance:
/// efficiency extremes across slots and the per-unit-cost range over the
/// attainable engine-output interval (0, max_engine_output].
struct InstanceExtrema {
    double f_min = 0.0;
    double f_max = 0.0;
    double eta_d_min = 0.0;
    double eta_e_min = 0.0;
    double eta_e_max = 0.0;
};

inline InstanceExtrema instance_extrema(const TripInstance& inst) {
    InstanceExtrema ex;
    ex.eta_d_min = kInf;
    ex.eta_e_min = kInf;
    ex.eta_e_max = -kInf;
    for (const auto& k : inst.coeffs) {
        ex.eta_d_min = std::min(ex.eta_d_min, k.eta_d);
        ex.eta_e_min = std::min(ex.eta_e_min, k.eta_e);
        ex.eta_e_max = std::max(ex.eta_e_max, k.eta_e);
    }
    const double q_max = inst.max_engine_output();
    if (q_max <= 0.0) throw std::domain_error("instance_extrema: no positive engine output attainable");
    // f(Q) = gamma2 Q + gamma1 + gamma0/Q on (0, q_max]
    const FuelCurve& c = inst.curve;
    if (c.gamma0 > 0.0) {
        const double q_star = c.gamma2 > 0.0 ? std::sqrt(c.gamma0 / c.gamma2) : q_max;
        const double q_lo = std::min(q_star, q_max);
        ex.f_min = c.per_unit(q_lo);
        ex.f_max = kInf;  // per-unit cost blows up as Q -> 0+
    } else {
        ex.f_min = c.gamma1;  // infimum as Q -> 0+
        ex.f_max = c.per_unit(q_max);
    }
    return ex;
}

}  // namespace phevplan

#endif  // PHEVPLAN_ONLINE_HPP
