#ifndef PHEVPLAN_MODEL_HPP
#define PHEVPLAN_MODEL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

#include "phevplan/common.hpp"

// Vehicle load model, fuel curve and the one-slot transition of the four
// generic drive modes (EV, CE, CS, AP). One time slot is one unit of time,
// so power and per-slot energy are numerically identical throughout.

namespace phevplan {

/// Road-load parameters of the longitudinal vehicle model.
struct VehicleParams {
    double mass_kg = 0.0;
    double gravity_m_s2 = 9.81;
    double air_density_kg_m3 = 1.226;
    double frontal_area_m2 = 0.0;
    double drag_coeff = 0.0;     // aerodynamic drag coefficient
    double rolling_coeff = 0.0;  // rolling friction coefficient
    double base_load_w = 0.0;    // constant auxiliary load (A/C etc.)

    void validate() const {
        if (!(mass_kg > 0.0)) throw std::invalid_argument("VehicleParams: mass_kg must be > 0");
        if (gravity_m_s2 < 0.0 || air_density_kg_m3 < 0.0 || frontal_area_m2 < 0.0 ||
            drag_coeff < 0.0 || rolling_coeff < 0.0 || base_load_w < 0.0)
            throw std::invalid_argument("VehicleParams: negative parameter");
    }
};

/// One step of a driving profile. Acceleration is speed_m_s - prev_speed_m_s.
struct ProfileStep {
    double speed_m_s = 0.0;
    double grade_rad = 0.0;
    double prev_speed_m_s = 0.0;
};

/// Per-slot efficiency and capability coefficients.
///   eta_r  <= 1  regenerative charging efficiency
///   eta_d  >= 1  battery discharging factor (battery energy per unit of load)
///   eta_e  <= 1  engine-to-battery charging efficiency
///   engine_charge_cap_w >= 0  max engine power available to charge the battery
///   ap_split in [0,1]         max share of load the electric motor carries in AP mode
struct SlotCoeffs {
    double eta_r = 1.0;
    double eta_d = 1.0;
    double eta_e = 1.0;
    double engine_charge_cap_w = 0.0;
    double ap_split = 0.0;

    void validate() const {
        if (!(eta_r > 0.0 && eta_r <= 1.0)) throw std::invalid_argument("SlotCoeffs: eta_r must be in (0,1]");
        if (!(eta_d >= 1.0)) throw std::invalid_argument("SlotCoeffs: eta_d must be >= 1");
        if (!(eta_e > 0.0 && eta_e <= 1.0)) throw std::invalid_argument("SlotCoeffs: eta_e must be in (0,1]");
        if (engine_charge_cap_w < 0.0) throw std::invalid_argument("SlotCoeffs: engine_charge_cap_w < 0");
        if (ap_split < 0.0 || ap_split > 1.0) throw std::invalid_argument("SlotCoeffs: ap_split outside [0,1]");
    }
};

/// Quadratic fuel-consumption curve. For engine output Q > 0,
///   F(Q) = gamma2*Q^2 + gamma1*Q + gamma0,
/// and F(0) = 0 (engine off burns nothing). Requires gamma2, gamma1 >= 0 so
/// that F is increasing and convex on Q >= 0.
struct FuelCurve {
    double gamma2 = 0.0;  // quadratic coefficient
    double gamma1 = 0.0;  // linear coefficient
    double gamma0 = 0.0;  // constant offset, applies only when the engine runs

    void validate() const {
        if (gamma2 < 0.0 || gamma1 < 0.0)
            throw std::invalid_argument("FuelCurve: gamma2 and gamma1 must be >= 0");
    }

    double operator()(double q) const { return fuel_at(q); }

    double fuel_at(double q) const {
        if (q <= 0.0) return 0.0;
        return gamma2 * q * q + gamma1 * q + gamma0;
    }

    /// Per-unit cost F(Q)/Q. Undefined at Q = 0.
    double per_unit(double q) const {
        if (q <= 0.0) throw std::domain_error("FuelCurve::per_unit: Q must be > 0");
        return fuel_at(q) / q;
    }

    /// Slope of F at q (one-sided from the right at 0).
    double slope_at(double q) const { return 2.0 * gamma2 * std::max(q, 0.0) + gamma1; }
};

/// Battery state of charge plus remaining fuel.
struct VehicleState {
    double soc = 0.0;
    double fuel = 0.0;
};

enum class Mode : int { EV = 0, AP = 1, CS = 2, CE = 3 };

inline const char* mode_name(Mode m) {
    switch (m) {
        case Mode::EV: return "EV";
        case Mode::AP: return "AP";
        case Mode::CS: return "CS";
        case Mode::CE: return "CE";
    }
    return "?";
}

inline Mode mode_from_name(const std::string& s) {
    if (s == "EV" || s == "ev") return Mode::EV;
    if (s == "AP" || s == "ap") return Mode::AP;
    if (s == "CS" || s == "cs") return Mode::CS;
    if (s == "CE" || s == "ce") return Mode::CE;
    throw std::invalid_argument("unknown drive mode: " + s);
}

/// Preference order used to break cost ties: battery-favoring modes first.
constexpr std::array<Mode, 4> kModePriority = {Mode::EV, Mode::AP, Mode::CS, Mode::CE};

/// Which of the four generic modes the vehicle exposes.
struct ModeSet {
    bool ev = true;
    bool ce = true;
    bool cs = true;
    bool ap = true;

    bool has(Mode m) const {
        switch (m) {
            case Mode::EV: return ev;
            case Mode::AP: return ap;
            case Mode::CS: return cs;
            case Mode::CE: return ce;
        }
        return false;
    }

    void validate() const {
        if (!(ev || ce || cs || ap)) throw std::invalid_argument("ModeSet: at least one mode required");
    }
};

/// Signed drivetrain load and its positive/negative split.
struct DrivetrainPower {
    double total = 0.0;
    double positive = 0.0;  // load the powertrain must supply
    double negative = 0.0;  // braking power available to regeneration
};

/// Road-load equation: aerodynamic drag + grade + rolling resistance +
/// inertia + constant base load. Negative totals (deceleration, downhill)
/// show up as regenerable power.
inline DrivetrainPower drivetrain_power(const ProfileStep& step, const VehicleParams& p) {
    if (step.speed_m_s < 0.0 || step.prev_speed_m_s < 0.0)
        throw std::invalid_argument("ProfileStep: speeds must be >= 0");
    const double v = step.speed_m_s;
    const double a = step.speed_m_s - step.prev_speed_m_s;
    double total = 0.5 * p.air_density_kg_m3 * p.drag_coeff * p.frontal_area_m2 * v * v * v
                 + p.mass_kg * p.gravity_m_s2 * std::sin(step.grade_rad) * v
                 + p.mass_kg * p.gravity_m_s2 * p.rolling_coeff * v
                 + p.mass_kg * v * a
                 + p.base_load_w;
    DrivetrainPower out;
    out.total = total;
    out.positive = std::max(total, 0.0);
    out.negative = -std::min(total, 0.0);
    return out;
}

/// Result of applying one drive mode for one slot.
struct Transition {
    Mode mode = Mode::EV;
    double r = 0.0;            // regenerated power into the battery
    double s = 0.0;            // battery power to the electric motor
    double u = 0.0;            // engine power charging the battery
    double engine_output = 0.0;
    double fuel_used = 0.0;
    double next_soc = 0.0;
};

enum class StepError : int {
    none = 0,
    ev_infeasible,   // EV selected with insufficient usable charge
    fuel_exhausted,  // required fuel exceeds the remaining tank level
};

inline const char* step_error_name(StepError e) {
    switch (e) {
        case StepError::none: return "none";
        case StepError::ev_infeasible: return "ev_infeasible";
        case StepError::fuel_exhausted: return "fuel_exhausted";
    }
    return "?";
}

struct StepOutcome {
    Transition transition{};
    StepError error = StepError::none;
    bool ok() const { return error == StepError::none; }
};

namespace detail {
inline double clamp_soc(double soc, double b_lo, double b_hi) {
    // absorb last-bit float noise only; genuine violations are caller bugs
    constexpr double eps = 1e-9;
    if (soc < b_lo && soc > b_lo - eps) return b_lo;
    if (soc > b_hi && soc < b_hi + eps) return b_hi;
    return soc;
}
}  // namespace detail

/// Deterministic one-slot transition. Controls follow the greedy settings of
/// each mode: regeneration fills to the SoC cap, CS charges as hard as the
/// slot allows, AP shifts the largest feasible share onto the motor.
///
/// EV requires the whole load to fit into the usable charge,
/// p_plus <= (soc - b_lo)/eta_d; otherwise StepError::ev_infeasible.
inline StepOutcome step_mode(const VehicleState& state, Mode mode, double p_plus, double p_minus,
                             const SlotCoeffs& k, double b_lo, double b_hi, const FuelCurve& curve) {
    StepOutcome out;
    Transition& tr = out.transition;
    tr.mode = mode;

    const double soc = state.soc;
    const double regen_room = std::max(0.0, (b_hi - soc) / k.eta_r);
    const double discharge_avail = std::max(0.0, (soc - b_lo) / k.eta_d);
    tr.r = std::min(p_minus, regen_room);

    switch (mode) {
        case Mode::EV: {
            if (p_plus > discharge_avail) {
                out.error = StepError::ev_infeasible;
                return out;
            }
            tr.s = p_plus;
            tr.engine_output = 0.0;
            break;
        }
        case Mode::CE: {
            tr.engine_output = p_plus;
            break;
        }
        case Mode::CS: {
            const double room_after_regen = std::max(0.0, (b_hi - soc - k.eta_r * tr.r) / k.eta_e);
            tr.u = std::min(k.engine_charge_cap_w, room_after_regen);
            tr.engine_output = p_plus + tr.u;
            break;
        }
        case Mode::AP: {
            tr.s = std::min(k.ap_split * p_plus, discharge_avail);
            tr.engine_output = p_plus - tr.s;
            break;
        }
    }

    tr.fuel_used = curve.fuel_at(tr.engine_output);
    tr.next_soc = detail::clamp_soc(soc + k.eta_r * tr.r + k.eta_e * tr.u - k.eta_d * tr.s, b_lo, b_hi);
    if (tr.fuel_used > state.fuel) {
        out.error = StepError::fuel_exhausted;
        return out;
    }
    return out;
}

}  // namespace phevplan

#endif  // PHEVPLAN_MODEL_HPP
