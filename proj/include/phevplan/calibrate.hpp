#ifndef PHEVPLAN_CALIBRATE_HPP
#define PHEVPLAN_CALIBRATE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "phevplan/model.hpp"

// Least-squares calibration of the per-slot efficiency coefficients and the
// fuel curve from OBD-style measured traces.

namespace phevplan {

/// One OBD record. batt_power_w is signed: positive while discharging,
/// negative while the battery is being charged.
struct ObdRecord {
    double timestamp = 0.0;
    double speed_m_s = 0.0;
    double batt_power_w = 0.0;
    double engine_charge_power_w = 0.0;
    double engine_output_w = 0.0;
    double fuel_rate = 0.0;
};

struct ObdTrace {
    std::vector<ObdRecord> records;
};

inline constexpr const char* kTraceHeader = "t,speed,batt_power,engine_charge_power,engine_output,fuel_rate";

/// Parse a trace from CSV. The exact header line above is required; rows
/// must keep timestamps strictly increasing and speeds nonnegative.
inline ObdTrace load_trace(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_trace: empty trace");
    // tolerate UTF-8 BOM and trailing CR
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line != kTraceHeader)
        throw std::runtime_error("load_trace: bad header, expected '" + std::string(kTraceHeader) + "'");

    ObdTrace trace;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::array<double, 6> vals{};
        for (int c = 0; c < 6; ++c) {
            if (!std::getline(ss, cell, ','))
                throw std::runtime_error("load_trace: line " + std::to_string(lineno) + ": expected 6 columns");
            try {
                std::size_t pos = 0;
                vals[static_cast<std::size_t>(c)] = std::stod(cell, &pos);
                while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
                if (pos != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw std::runtime_error("load_trace: line " + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
        }
        if (std::getline(ss, cell, ','))
            throw std::runtime_error("load_trace: line " + std::to_string(lineno) + ": too many columns");
        ObdRecord rec{vals[0], vals[1], vals[2], vals[3], vals[4], vals[5]};
        if (rec.speed_m_s < 0.0)
            throw std::runtime_error("load_trace: line " + std::to_string(lineno) + ": negative speed");
        if (!trace.records.empty() && !(rec.timestamp > trace.records.back().timestamp))
            throw std::runtime_error("load_trace: line " + std::to_string(lineno) +
                                     ": timestamps must be strictly increasing");
        trace.records.push_back(rec);
    }
    if (trace.records.empty()) throw std::runtime_error("load_trace: empty trace");
    return trace;
}

inline ObdTrace load_trace_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_trace: cannot open " + path);
    return load_trace(in);
}

enum class EffTarget { discharge, regen, engine_charge };

/// Seven-coefficient linear model of a per-slot efficiency over the features
/// [v^2, v, a+^2, a+, a-^2, a-, 1], where a+ / a- are the positive and
/// negative parts of the speed delta.
struct EffRegression {
    std::array<double, 7> coeffs{};
    int rows_used = 0;
    int rows_clamped = 0;
    double residual_rms = 0.0;

    static std::array<double, 7> features(double v, double prev_v) {
        const double ap = std::max(v - prev_v, 0.0);
        const double am = std::max(prev_v - v, 0.0);
        return {v * v, v, ap * ap, ap, am * am, am, 1.0};
    }

    double predict(double v, double prev_v) const {
        const auto f = features(v, prev_v);
        double y = 0.0;
        for (int i = 0; i < 7; ++i) y += coeffs[static_cast<std::size_t>(i)] * f[static_cast<std::size_t>(i)];
        return y;
    }
};

namespace detail {

/// Normal-equations least squares with a tiny ridge fallback when the Gram
/// matrix is numerically singular. Rank deficiency of the design matrix is
/// reported as an error instead of being papered over.
inline Eigen::VectorXd solve_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                                           const std::string& what) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-10);
    if (qr.rank() < a.cols())
        throw std::runtime_error(what + ": rank-deficient design matrix; provide more varied data");
    const Eigen::MatrixXd gram = a.transpose() * a;
    const Eigen::VectorXd rhs = a.transpose() * y;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() == Eigen::Success) {
        Eigen::VectorXd x = ldlt.solve(rhs);
        if ((gram * x - rhs).norm() <= 1e-8 * (1.0 + rhs.norm())) return x;
    }
    Eigen::MatrixXd ridged = gram;
    ridged.diagonal().array() += 1e-10;
    return ridged.ldlt().solve(rhs);
}

}  // namespace detail

/// Fit one of the three efficiency regressions. Loads are derived from the
/// recorded speeds through the road-load equation, so the vehicle parameters
/// must be supplied. Raw per-slot ratios outside the physical range of the
/// target coefficient are clamped and counted in rows_clamped.
inline EffRegression fit_efficiency(const ObdTrace& trace, EffTarget target, const VehicleParams& params) {
    params.validate();
    std::vector<std::array<double, 7>> rows;
    std::vector<double> targets;
    int clamped = 0;

    for (std::size_t i = 1; i < trace.records.size(); ++i) {
        const auto& rec = trace.records[i];
        const auto& prev = trace.records[i - 1];
        const auto load = drivetrain_power(ProfileStep{rec.speed_m_s, 0.0, prev.speed_m_s}, params);

        double ratio = 0.0;
        bool usable = false;
        switch (target) {
            case EffTarget::discharge:
                if (load.positive > 0.0 && rec.batt_power_w > 0.0) {
                    ratio = rec.batt_power_w / load.positive;
                    if (ratio < 1.0) { ratio = 1.0; ++clamped; }
                    usable = true;
                }
                break;
            case EffTarget::regen:
                if (load.negative > 0.0 && rec.batt_power_w < 0.0) {
                    ratio = -rec.batt_power_w / load.negative;
                    if (ratio > 1.0) { ratio = 1.0; ++clamped; }
                    if (ratio < 0.0) { ratio = 0.0; ++clamped; }
                    usable = true;
                }
                break;
            case EffTarget::engine_charge: {
                const double u = rec.engine_output_w - load.positive;
                if (u > 0.0 && rec.engine_charge_power_w > 0.0) {
                    ratio = rec.engine_charge_power_w / u;
                    if (ratio > 1.0) { ratio = 1.0; ++clamped; }
                    usable = true;
                }
                break;
            }
        }
        if (!usable) continue;
        rows.push_back(EffRegression::features(rec.speed_m_s, prev.speed_m_s));
        targets.push_back(ratio);
    }

    if (rows.size() < 7)
        throw std::runtime_error("fit_efficiency: need at least 7 usable rows, got " + std::to_string(rows.size()));

    Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), 7);
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int j = 0; j < 7; ++j) a(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
        y(static_cast<Eigen::Index>(i)) = targets[i];
    }

    // features that never fire for this target (braking rows have no positive
    // acceleration, for instance) are unidentifiable; fit without them
    std::vector<int> active;
    for (int j = 0; j < 7; ++j)
        if (a.col(j).cwiseAbs().maxCoeff() > 1e-12) active.push_back(j);
    Eigen::MatrixXd a_act(a.rows(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t j = 0; j < active.size(); ++j) a_act.col(static_cast<Eigen::Index>(j)) = a.col(active[j]);

    const Eigen::VectorXd x_act = detail::solve_least_squares(a_act, y, "fit_efficiency");

    EffRegression out;
    for (std::size_t j = 0; j < active.size(); ++j)
        out.coeffs[static_cast<std::size_t>(active[j])] = x_act(static_cast<Eigen::Index>(j));
    out.rows_used = static_cast<int>(rows.size());
    out.rows_clamped = clamped;
    out.residual_rms = std::sqrt((a_act * x_act - y).squaredNorm() / static_cast<double>(rows.size()));
    return out;
}

/// Fit the quadratic fuel curve from (engine output, fuel used) samples.
/// The fit is rejected if it is non-convex or decreasing anywhere on the
/// observed output range.
inline FuelCurve fit_fuel(const std::vector<std::pair<double, double>>& samples) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& s : samples)
        if (s.first > 0.0) pts.push_back(s);
    {
        std::vector<double> qs;
        for (const auto& p : pts) qs.push_back(p.first);
        std::sort(qs.begin(), qs.end());
        qs.erase(std::unique(qs.begin(), qs.end(),
                             [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                 qs.end());
        if (qs.size() < 3)
            throw std::runtime_error("fit_fuel: need at least 3 samples with distinct Q > 0");
    }

    Eigen::MatrixXd a(static_cast<Eigen::Index>(pts.size()), 3);
    Eigen::VectorXd y(static_cast<Eigen::Index>(pts.size()));
    double q_min = kInf, q_max = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double q = pts[i].first;
        a(static_cast<Eigen::Index>(i), 0) = q * q;
        a(static_cast<Eigen::Index>(i), 1) = q;
        a(static_cast<Eigen::Index>(i), 2) = 1.0;
        y(static_cast<Eigen::Index>(i)) = pts[i].second;
        q_min = std::min(q_min, q);
        q_max = std::max(q_max, q);
    }
    const Eigen::VectorXd x = detail::solve_least_squares(a, y, "fit_fuel");

    FuelCurve curve{x(0), x(1), x(2)};
    constexpr double tol = 1e-9;
    if (curve.gamma2 < -tol)
        throw std::runtime_error("fit_fuel: fitted curve is non-convex on the observed range");
    if (2.0 * curve.gamma2 * q_min + curve.gamma1 < -tol)
        throw std::runtime_error("fit_fuel: fitted curve is decreasing on the observed range");
    curve.gamma2 = std::max(curve.gamma2, 0.0);
    curve.gamma1 = std::max(curve.gamma1, 0.0);
    return curve;
}

/// (Q, fuel) samples of the slots where the engine ran, ready for fit_fuel.
inline std::vector<std::pair<double, double>> fuel_samples(const ObdTrace& trace) {
    std::vector<std::pair<double, double>> out;
    for (const auto& rec : trace.records)
        if (rec.engine_output_w > 0.0) out.emplace_back(rec.engine_output_w, rec.fuel_rate);
    return out;
}

}  // namespace phevplan

#endif  // PHEVPLAN_CALIBRATE_HPP
