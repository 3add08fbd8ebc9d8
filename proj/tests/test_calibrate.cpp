#include <catch2/catch_amalgamated.hpp>

#include "phevplan/calibrate.hpp"

#include <random>
#include <sstream>

using namespace phevplan;

namespace {

VehicleParams volt_params() {
    VehicleParams p;
    p.mass_kg = 1721.0;
    p.frontal_area_m2 = 2.202;
    p.drag_coeff = 0.28;
    p.rolling_coeff = 0.01;
    return p;
}

// coefficient sets whose predictions stay inside the physical ranges over
// urban speeds, so clamping never kicks in on clean data
constexpr std::array<double, 7> kLambdaDischarge = {1e-5, 2e-4, 1e-4, 5e-3, 2e-4, 4e-3, 1.12};
// braking rows never see positive acceleration, so those two terms stay zero
constexpr std::array<double, 7> kLambdaRegen = {-1e-5, 3e-4, 0.0, 0.0, 1e-4, 3e-3, 0.82};
constexpr std::array<double, 7> kMuEngine = {-2e-5, 4e-4, 1e-4, 3e-3, 2e-4, 2e-3, 0.78};

double eval_model(const std::array<double, 7>& c, double v, double prev_v) {
    const auto f = EffRegression::features(v, prev_v);
    double y = 0.0;
    for (std::size_t i = 0; i < 7; ++i) y += c[i] * f[i];
    return y;
}

/// Synthetic urban trace with known efficiency models and fuel curve.
/// sigma adds Gaussian noise to the measured powers.
ObdTrace synth_trace(int n, unsigned seed, double sigma = 0.0) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dv(-2.0, 2.0);
    std::normal_distribution<double> noise(0.0, sigma);
    const VehicleParams params = volt_params();
    const FuelCurve curve{2e-9, 1e-4, 0.05};

    ObdTrace trace;
    double v = 10.0;
    double prev = v;
    for (int i = 0; i < n; ++i) {
        ObdRecord rec;
        rec.timestamp = i;
        rec.speed_m_s = v;
        const auto load = drivetrain_power(ProfileStep{v, 0.0, prev}, params);
        if (load.positive > 0.0) {
            const double eta_d = eval_model(kLambdaDischarge, v, prev);
            rec.batt_power_w = load.positive * eta_d * (1.0 + noise(rng));
            // engine charges on top of propulsion in a CS-style phase
            const double u = 2000.0 + 500.0 * std::sin(0.1 * i);
            const double eta_e = eval_model(kMuEngine, v, prev);
            rec.engine_output_w = load.positive + u;
            rec.engine_charge_power_w = u * eta_e * (1.0 + noise(rng));
            rec.fuel_rate = curve.fuel_at(rec.engine_output_w);
        } else {
            const double eta_r = eval_model(kLambdaRegen, v, prev);
            rec.batt_power_w = -load.negative * eta_r * (1.0 + noise(rng));
            rec.engine_output_w = 0.0;
            rec.engine_charge_power_w = 0.0;
            rec.fuel_rate = 0.0;
        }
        trace.records.push_back(rec);
        prev = v;
        v = std::max(0.0, std::min(30.0, v + dv(rng)));
    }
    return trace;
}

std::string trace_csv(const ObdTrace& trace) {
    std::ostringstream os;
    os.precision(17);
    os << kTraceHeader << "\n";
    for (const auto& r : trace.records)
        os << r.timestamp << ',' << r.speed_m_s << ',' << r.batt_power_w << ',' << r.engine_charge_power_w
           << ',' << r.engine_output_w << ',' << r.fuel_rate << "\n";
    return os.str();
}

}  // namespace

TEST_CASE("load_trace: well-formed CSV round trip") {
    std::istringstream in(
        "t,speed,batt_power,engine_charge_power,engine_output,fuel_rate\n"
        "0,10.0,500,0,0,0\n"
        "1,11.0,550,0,0,0\n"
        "2,12.0,600,0,0,0\n");
    const auto trace = load_trace(in);
    REQUIRE(trace.records.size() == 3);
    CHECK(trace.records[1].speed_m_s == 11.0);
    CHECK(trace.records[2].batt_power_w == 600.0);
}

TEST_CASE("load_trace: rejects negative speed with the line number") {
    std::istringstream in(
        "t,speed,batt_power,engine_charge_power,engine_output,fuel_rate\n"
        "0,10.0,500,0,0,0\n"
        "1,-1,550,0,0,0\n");
    CHECK_THROWS_WITH(load_trace(in), Catch::Matchers::ContainsSubstring("line 3"));
}

TEST_CASE("load_trace: rejects an empty file") {
    std::istringstream empty("");
    CHECK_THROWS_WITH(load_trace(empty), Catch::Matchers::ContainsSubstring("empty trace"));
    std::istringstream only_header("t,speed,batt_power,engine_charge_power,engine_output,fuel_rate\n");
    CHECK_THROWS_WITH(load_trace(only_header), Catch::Matchers::ContainsSubstring("empty trace"));
}

TEST_CASE("load_trace: rejects non-increasing timestamps and bad numbers") {
    std::istringstream bad_t(
        "t,speed,batt_power,engine_charge_power,engine_output,fuel_rate\n"
        "0,10.0,500,0,0,0\n"
        "0,11.0,550,0,0,0\n");
    CHECK_THROWS_WITH(load_trace(bad_t), Catch::Matchers::ContainsSubstring("strictly increasing"));
    std::istringstream bad_n(
        "t,speed,batt_power,engine_charge_power,engine_output,fuel_rate\n"
        "0,abc,500,0,0,0\n");
    CHECK_THROWS_WITH(load_trace(bad_n), Catch::Matchers::ContainsSubstring("bad number"));
}

TEST_CASE("fit_efficiency: noiseless recovery of all three targets") {
    const ObdTrace trace = synth_trace(400, 101);
    std::istringstream round(trace_csv(trace));
    const ObdTrace reparsed = load_trace(round);

    struct Case {
        EffTarget target;
        std::array<double, 7> truth;
    };
    for (const auto& c : {Case{EffTarget::discharge, kLambdaDischarge}, Case{EffTarget::regen, kLambdaRegen},
                          Case{EffTarget::engine_charge, kMuEngine}}) {
        const auto fit = fit_efficiency(reparsed, c.target, volt_params());
        CHECK(fit.rows_clamped == 0);
        for (std::size_t i = 0; i < 7; ++i) {
            CHECK(std::abs(fit.coeffs[i] - c.truth[i]) <= 1e-6 * std::max(1.0, std::abs(c.truth[i])));
        }
    }
}

TEST_CASE("fit_efficiency: constant-speed trace is rank deficient") {
    ObdTrace trace;
    for (int i = 0; i < 50; ++i) {
        ObdRecord rec;
        rec.timestamp = i;
        rec.speed_m_s = 15.0;
        rec.batt_power_w = 5000.0;
        trace.records.push_back(rec);
    }
    CHECK_THROWS_WITH(fit_efficiency(trace, EffTarget::discharge, volt_params()),
                      Catch::Matchers::ContainsSubstring("rank-deficient"));
}

TEST_CASE("fit_efficiency: too few usable rows") {
    ObdTrace trace = synth_trace(5, 7);
    CHECK_THROWS_WITH(fit_efficiency(trace, EffTarget::discharge, volt_params()),
                      Catch::Matchers::ContainsSubstring("usable rows"));
}

TEST_CASE("fit_efficiency: noisy fit keeps residuals near the noise floor") {
    const double sigma = 0.01;
    const ObdTrace trace = synth_trace(2000, 103, sigma);
    const auto fit = fit_efficiency(trace, EffTarget::discharge, volt_params());
    CHECK(fit.residual_rms <= 3.0 * sigma);
    CHECK(fit.rows_used > 500);
}

TEST_CASE("fit_efficiency: cumulative prediction error shrinks with trace length") {
    const double sigma = 0.02;
    const VehicleParams params = volt_params();
    auto rel_cum_error = [&](int n, unsigned seed) {
        const ObdTrace trace = synth_trace(n, seed, sigma);
        const auto fit = fit_efficiency(trace, EffTarget::discharge, params);
        double measured = 0.0, predicted = 0.0;
        for (std::size_t i = 1; i < trace.records.size(); ++i) {
            const auto& rec = trace.records[i];
            const auto& prev = trace.records[i - 1];
            const auto load = drivetrain_power(ProfileStep{rec.speed_m_s, 0.0, prev.speed_m_s}, params);
            if (load.positive <= 0.0 || rec.batt_power_w <= 0.0) continue;
            measured += rec.batt_power_w;
            predicted += load.positive * fit.predict(rec.speed_m_s, prev.speed_m_s);
        }
        return std::abs(predicted - measured) / measured;
    };
    const double short_err = rel_cum_error(150, 211);
    const double long_err = rel_cum_error(6000, 211);
    CHECK(long_err < short_err);
}

TEST_CASE("fit_fuel: exact recovery of a quadratic curve") {
    FuelCurve truth{0.01, 0.1, 0.05};
    std::vector<std::pair<double, double>> pts;
    for (double q = 1.0; q <= 10.0; q += 1.0) pts.emplace_back(q, truth.fuel_at(q));
    const FuelCurve fit = fit_fuel(pts);
    CHECK(std::abs(fit.gamma2 - truth.gamma2) <= 1e-9);
    CHECK(std::abs(fit.gamma1 - truth.gamma1) <= 1e-9);
    CHECK(std::abs(fit.gamma0 - truth.gamma0) <= 1e-9);
}

TEST_CASE("fit_fuel: needs three distinct positive outputs") {
    CHECK_THROWS_WITH(fit_fuel({{1.0, 1.0}, {2.0, 2.0}}), Catch::Matchers::ContainsSubstring("at least 3"));
    CHECK_THROWS_WITH(fit_fuel({{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}, {2.0, 2.0}}),
                      Catch::Matchers::ContainsSubstring("at least 3"));
}

TEST_CASE("fit_fuel: rejects a decreasing curve") {
    std::vector<std::pair<double, double>> pts{{1.0, 5.0}, {2.0, 3.0}, {3.0, 1.5}, {4.0, 1.0}};
    CHECK_THROWS_WITH(fit_fuel(pts), Catch::Matchers::ContainsSubstring("decreasing"));
}

TEST_CASE("fuel_samples feed fit_fuel from a trace") {
    const ObdTrace trace = synth_trace(300, 109);
    const auto samples = fuel_samples(trace);
    REQUIRE(samples.size() >= 3);
    const FuelCurve fit = fit_fuel(samples);
    CHECK(std::abs(fit.gamma2 - 2e-9) <= 1e-12);
    CHECK(std::abs(fit.gamma1 - 1e-4) <= 1e-8);
    CHECK(std::abs(fit.gamma0 - 0.05) <= 1e-5);
}
