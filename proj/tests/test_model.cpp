#include <catch2/catch_amalgamated.hpp>

#include "phevplan/model.hpp"

#include <random>

using namespace phevplan;

namespace {
VehicleParams table_params() {
    VehicleParams p;
    p.mass_kg = 1721.0;
    p.gravity_m_s2 = 9.81;
    p.air_density_kg_m3 = 1.226;
    p.frontal_area_m2 = 2.202;
    p.drag_coeff = 0.28;
    p.rolling_coeff = 0.01;
    p.base_load_w = 0.0;
    return p;
}
}  // namespace

TEST_CASE("drivetrain power: standstill leaves only the base load") {
    VehicleParams p = table_params();
    p.base_load_w = 500.0;
    const auto out = drivetrain_power(ProfileStep{0.0, 0.0, 0.0}, p);
    CHECK(out.total == Catch::Approx(500.0));
    CHECK(out.positive == Catch::Approx(500.0));
    CHECK(out.negative == 0.0);
}

TEST_CASE("drivetrain power: cruise at 20 m/s") {
    // hand evaluation: aero 3023.61 W + rolling 3376.60 W
    const auto out = drivetrain_power(ProfileStep{20.0, 0.0, 20.0}, table_params());
    CHECK(out.total == Catch::Approx(6400.2).margin(0.1));
    CHECK(out.positive == Catch::Approx(out.total));
}

TEST_CASE("drivetrain power: deceleration turns the load negative") {
    const auto out = drivetrain_power(ProfileStep{10.0, 0.0, 12.0}, table_params());
    CHECK(out.total == Catch::Approx(-32353.7).margin(0.1));
    CHECK(out.negative == Catch::Approx(32353.7).margin(0.1));
    CHECK(out.positive == 0.0);
}

TEST_CASE("drivetrain power: split is consistent") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> v(0.0, 35.0), g(-0.08, 0.08);
    const VehicleParams p = table_params();
    for (int i = 0; i < 200; ++i) {
        const auto out = drivetrain_power(ProfileStep{v(rng), g(rng), v(rng)}, p);
        CHECK(out.positive * out.negative == 0.0);
        CHECK(out.positive - out.negative == Catch::Approx(out.total));
    }
}

TEST_CASE("fuel curve: engine off burns nothing, otherwise quadratic") {
    FuelCurve c{0.01, 0.1, 0.05};
    CHECK(c.fuel_at(0.0) == 0.0);
    CHECK(c.fuel_at(7.0) == Catch::Approx(1.24));
    CHECK(c.per_unit(7.0) == Catch::Approx(1.24 / 7.0));
    CHECK_THROWS_AS(c.per_unit(0.0), std::domain_error);
}

TEST_CASE("fuel curve: strictly increasing, per-unit nondecreasing without offset") {
    FuelCurve c{0.02, 0.3, 0.0};
    double prev_f = 0.0, prev_pu = 0.0;
    for (double q = 0.5; q < 20.0; q += 0.5) {
        const double f = c.fuel_at(q);
        CHECK(f > prev_f);
        const double pu = c.per_unit(q);
        CHECK(pu >= prev_pu);
        prev_f = f;
        prev_pu = pu;
    }
}

TEST_CASE("step EV: discharges exactly the load") {
    SlotCoeffs k{1.0, 1.25, 1.0, 0.0, 0.0};
    const auto out = step_mode(VehicleState{4.0, 100.0}, Mode::EV, 1.0, 0.0, k, 2.0, 10.0, FuelCurve{});
    REQUIRE(out.ok());
    CHECK(out.transition.s == Catch::Approx(1.0));
    CHECK(out.transition.next_soc == Catch::Approx(2.75));
    CHECK(out.transition.fuel_used == 0.0);
    CHECK(out.transition.engine_output == 0.0);
}

TEST_CASE("step EV: insufficient charge is rejected") {
    SlotCoeffs k{1.0, 1.25, 1.0, 0.0, 0.0};
    const auto out = step_mode(VehicleState{4.0, 100.0}, Mode::EV, 2.0, 0.0, k, 2.0, 10.0, FuelCurve{});
    CHECK_FALSE(out.ok());
    CHECK(out.error == StepError::ev_infeasible);
}

TEST_CASE("step CS: charges up to the slot cap") {
    SlotCoeffs k{1.0, 1.0, 0.8, 3.0, 0.0};
    FuelCurve c{0.01, 0.1, 0.05};
    const auto out = step_mode(VehicleState{2.0, 100.0}, Mode::CS, 4.0, 0.0, k, 0.0, 10.0, c);
    REQUIRE(out.ok());
    CHECK(out.transition.u == Catch::Approx(3.0));
    CHECK(out.transition.engine_output == Catch::Approx(7.0));
    CHECK(out.transition.next_soc == Catch::Approx(4.4));
    CHECK(out.transition.fuel_used == Catch::Approx(1.24));
}

TEST_CASE("step CS: headroom caps the charge ahead of the slot cap") {
    SlotCoeffs k{1.0, 1.0, 0.5, 10.0, 0.0};
    const auto out = step_mode(VehicleState{9.0, 100.0}, Mode::CS, 1.0, 0.0, k, 0.0, 10.0, FuelCurve{0, 1, 0});
    REQUIRE(out.ok());
    CHECK(out.transition.u == Catch::Approx(2.0));  // (10-9)/0.5
    CHECK(out.transition.next_soc == Catch::Approx(10.0));
}

TEST_CASE("step AP: motor takes its share, engine the rest") {
    SlotCoeffs k{1.0, 1.0, 1.0, 0.0, 0.25};
    FuelCurve c{0.0, 1.0, 0.0};
    const auto out = step_mode(VehicleState{5.0, 100.0}, Mode::AP, 4.0, 0.0, k, 0.0, 10.0, c);
    REQUIRE(out.ok());
    CHECK(out.transition.s == Catch::Approx(1.0));
    CHECK(out.transition.engine_output == Catch::Approx(3.0));
    CHECK(out.transition.next_soc == Catch::Approx(4.0));
}

TEST_CASE("step: regeneration respects the SoC cap in every mode") {
    SlotCoeffs k{0.9, 1.0, 1.0, 2.0, 0.5};
    FuelCurve c{0.01, 0.1, 0.0};
    for (Mode m : {Mode::EV, Mode::CE, Mode::CS, Mode::AP}) {
        const auto out = step_mode(VehicleState{9.5, 100.0}, m, 0.0, 50.0, k, 0.0, 10.0, c);
        REQUIRE(out.ok());
        CHECK(out.transition.next_soc <= 10.0 + 1e-12);
        CHECK(out.transition.r <= 50.0);
        CHECK(out.transition.fuel_used >= 0.0);
    }
}

TEST_CASE("step: fuel exhaustion is reported") {
    SlotCoeffs k{1.0, 1.0, 1.0, 0.0, 0.0};
    FuelCurve c{0.0, 1.0, 0.0};
    const auto out = step_mode(VehicleState{0.0, 0.5}, Mode::CE, 1.0, 0.0, k, 0.0, 10.0, c);
    CHECK_FALSE(out.ok());
    CHECK(out.error == StepError::fuel_exhausted);
}

TEST_CASE("step: fuel use is nondecreasing in the positive load") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> soc_d(0.0, 10.0), load(0.0, 8.0);
    SlotCoeffs k{0.9, 1.1, 0.8, 2.0, 0.4};
    FuelCurve c{0.01, 0.2, 0.0};
    for (Mode m : {Mode::CE, Mode::CS, Mode::AP}) {
        for (int i = 0; i < 100; ++i) {
            const double soc = soc_d(rng);
            double p1 = load(rng), p2 = load(rng);
            if (p1 > p2) std::swap(p1, p2);
            const auto lo = step_mode(VehicleState{soc, kInf}, m, p1, 0.0, k, 0.0, 10.0, c);
            const auto hi = step_mode(VehicleState{soc, kInf}, m, p2, 0.0, k, 0.0, 10.0, c);
            REQUIRE(lo.ok());
            REQUIRE(hi.ok());
            CHECK(lo.transition.fuel_used <= hi.transition.fuel_used + 1e-12);
        }
    }
}

TEST_CASE("step: greedy controls satisfy the per-mode constraint forms") {
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> soc_d(0.0, 10.0), loads(-6.0, 8.0), eff(0.6, 1.0), cap(0.0, 4.0);
    FuelCurve c{0.01, 0.2, 0.0};
    for (int i = 0; i < 500; ++i) {
        const double raw = loads(rng);
        const double pp = std::max(raw, 0.0), pm = std::max(-raw, 0.0);
        SlotCoeffs k{eff(rng), 1.0 + cap(rng) / 10.0, eff(rng), cap(rng), eff(rng)};
        const double soc = soc_d(rng);
        for (Mode m : {Mode::EV, Mode::CE, Mode::CS, Mode::AP}) {
            const auto out = step_mode(VehicleState{soc, kInf}, m, pp, pm, k, 0.0, 10.0, c);
            if (!out.ok()) {
                CHECK(m == Mode::EV);
                continue;
            }
            const Transition& tr = out.transition;
            CHECK(tr.r == Catch::Approx(std::min(pm, (10.0 - soc) / k.eta_r)));
            switch (m) {
                case Mode::EV:
                    CHECK(tr.s == Catch::Approx(pp));
                    CHECK(tr.engine_output == 0.0);
                    break;
                case Mode::CE:
                    CHECK(tr.s == 0.0);
                    CHECK(tr.u == 0.0);
                    CHECK(tr.engine_output == Catch::Approx(pp));
                    break;
                case Mode::CS:
                    CHECK(tr.u == Catch::Approx(std::min(k.engine_charge_cap_w,
                                                         std::max(0.0, (10.0 - soc - k.eta_r * tr.r) / k.eta_e)))
                                      .margin(1e-12));
                    CHECK(tr.engine_output == Catch::Approx(pp + tr.u));
                    break;
                case Mode::AP:
                    CHECK(tr.s == Catch::Approx(std::min(k.ap_split * pp, soc / k.eta_d)));
                    CHECK(tr.engine_output == Catch::Approx(pp - tr.s));
                    break;
            }
            CHECK(tr.next_soc == Catch::Approx(soc + k.eta_r * tr.r + k.eta_e * tr.u - k.eta_d * tr.s).margin(1e-9));
            CHECK(tr.next_soc >= -1e-9);
            CHECK(tr.next_soc <= 10.0 + 1e-9);
            CHECK(tr.fuel_used == Catch::Approx(c.fuel_at(tr.engine_output)));
        }
    }
}
