#include <catch2/catch_amalgamated.hpp>

#include "phevplan/dmop.hpp"
#include <map>

#include "support/generators.hpp"
#include "support/schedule_check.hpp"

using namespace phevplan;

namespace {

TripInstance idle_instance(int t_end) {
    TripInstance inst;
    inst.horizon = t_end;
    inst.p_plus.assign(static_cast<std::size_t>(t_end), 0.0);
    inst.p_minus.assign(static_cast<std::size_t>(t_end), 0.0);
    inst.coeffs.assign(static_cast<std::size_t>(t_end), SlotCoeffs{1.0, 1.0, 1.0, 0.0, 0.0});
    inst.curve = FuelCurve{0.01, 0.1, 0.0};
    inst.b_lo = 0.0;
    inst.b_hi = 4.0;
    inst.b0 = 2.0;
    inst.g0 = 100.0;
    return inst;
}

}  // namespace

TEST_CASE("grid: endpoints exact, nearest snapping") {
    SocGrid grid(1.0, 3.0, 5);
    CHECK(grid.spacing() == Catch::Approx(0.5));
    CHECK(grid.level(0) == 1.0);
    CHECK(grid.level(4) == 3.0);
    CHECK(grid.nearest(1.74) == 1);
    CHECK(grid.nearest(1.76) == 2);
    CHECK(grid.nearest(-5.0) == 0);
    CHECK(grid.nearest(9.0) == 4);
    CHECK_THROWS_AS(SocGrid(0.0, 1.0, 1), std::invalid_argument);
}

TEST_CASE("solve_step: only EV lands on the discharged target") {
    StepInputs in;
    in.p_plus = 1.0;
    in.coeffs = SlotCoeffs{1.0, 1.25, 1.0, 0.0, 0.0};
    ModeSet all;
    const auto got = solve_step(4.0, 2.75, in, all, 2.0, 10.0, FuelCurve{0.01, 0.1, 0.05}, 0.05);
    REQUIRE(got.has_value());
    CHECK(got->mode == Mode::EV);
    CHECK(got->engine_output == 0.0);
}

TEST_CASE("solve_step: idle slot stays put in EV at zero cost") {
    StepInputs in;  // zero loads
    in.coeffs = SlotCoeffs{1.0, 1.0, 1.0, 0.0, 0.0};
    ModeSet all;
    const auto got = solve_step(3.0, 3.0, in, all, 0.0, 10.0, FuelCurve{0.01, 0.1, 0.05}, 0.01);
    REQUIRE(got.has_value());
    CHECK(got->mode == Mode::EV);
    CHECK(got->transition.fuel_used == 0.0);
    CHECK(got->transition.s == 0.0);
}

TEST_CASE("solve_step: no charging source makes a climb infeasible") {
    StepInputs in;  // zero loads, no cap
    in.coeffs = SlotCoeffs{1.0, 1.0, 1.0, 0.0, 0.0};
    ModeSet all;
    const auto got = solve_step(0.0, 10.0, in, all, 0.0, 10.0, FuelCurve{0.01, 0.1, 0.05}, 0.01);
    CHECK_FALSE(got.has_value());
}

TEST_CASE("dp: idle trip costs nothing and prefers EV") {
    const TripInstance inst = idle_instance(1);
    const auto sched = solve_dmop_dp(inst, SocGrid(inst.b_lo, inst.b_hi, 41));
    REQUIRE(sched.has_value());
    CHECK(sched->total_fuel == 0.0);
    CHECK(sched->slots[0].transition.mode == Mode::EV);
}

TEST_CASE("dp: infeasible when the tank is empty and the battery cannot cover the load") {
    TripInstance inst = idle_instance(2);
    inst.g0 = 0.0;
    inst.b0 = 0.0;
    inst.p_plus = {5.0, 5.0};  // far beyond the battery range
    CHECK_FALSE(solve_dmop_dp(inst, SocGrid(inst.b_lo, inst.b_hi, 41)).has_value());
}

TEST_CASE("dp: honors a terminal SoC requirement") {
    TripInstance inst = idle_instance(2);
    inst.b0 = 0.0;
    inst.coeffs.assign(2, SlotCoeffs{1.0, 1.0, 0.8, 10.0, 0.0});
    inst.terminal_soc = inst.b_hi;
    const auto sched = solve_dmop_dp(inst, SocGrid(inst.b_lo, inst.b_hi, 41));
    REQUIRE(sched.has_value());
    CHECK(sched->final_soc == Catch::Approx(inst.b_hi));
    CHECK(sched->total_fuel > 0.0);
}

TEST_CASE("brute force: rejects long horizons") {
    CHECK_THROWS_AS(brute_force_dmop(idle_instance(11)), std::invalid_argument);
}

TEST_CASE("brute force: single-slot optimum agrees with the per-step minimum") {
    std::mt19937 rng(23);
    for (int i = 0; i < 30; ++i) {
        testgen::TripOptions opt;
        opt.t_min = opt.t_max = 1;
        TripInstance inst = testgen::random_trip(rng, opt);
        const auto bf = brute_force_dmop(inst);
        REQUIRE(bf.has_value());
        double best = kInf;
        for (Mode m : kModePriority) {
            if (!inst.modes.has(m)) continue;
            auto out = step_mode(VehicleState{inst.b0, kInf}, m, inst.p_plus[0], inst.p_minus[0],
                                 inst.coeffs[0], inst.b_lo, inst.b_hi, inst.curve);
            if (out.ok()) best = std::min(best, out.transition.fuel_used);
        }
        CHECK(bf->total_fuel == Catch::Approx(best).margin(1e-12));
    }
}

TEST_CASE("brute force: series-hybrid enumeration stays within its two modes") {
    std::mt19937 rng(29);
    testgen::TripOptions opt;
    opt.t_min = opt.t_max = 4;
    opt.modes = ModeSet{true, false, true, false};
    int produced = 0;
    for (int i = 0; i < 20; ++i) {
        TripInstance inst = testgen::random_trip(rng, opt);
        const auto bf = brute_force_dmop(inst);
        if (!bf) continue;  // EV+CS only can genuinely be stuck
        const auto res = testcheck::check_schedule(*bf, inst);
        INFO(res.what);
        CHECK(res.ok);
        for (const auto& s : bf->slots) {
            const Mode m = s.transition.mode;
            CHECK((m == Mode::EV || m == Mode::CS));
        }
        ++produced;
    }
    CHECK(produced > 5);
}

TEST_CASE("dp vs brute force: gap bounded per instance and shrinking on average") {
    std::mt19937 rng(31);
    const int runs = 60;
    std::map<int, double> mean_gap{{11, 0.0}, {101, 0.0}, {1001, 0.0}};
    for (int i = 0; i < runs; ++i) {
        TripInstance inst = testgen::random_trip(rng);
        const auto bf = brute_force_dmop(inst);
        REQUIRE(bf.has_value());  // CE is available and fuel is ample

        double eta_e_min = 1.0;
        for (const auto& k : inst.coeffs) eta_e_min = std::min(eta_e_min, k.eta_e);
        const double slope = inst.curve.slope_at(inst.max_engine_output());

        for (int n : {11, 101, 1001}) {
            SocGrid grid(inst.b_lo, inst.b_hi, n);
            const auto dp = solve_dmop_dp(inst, grid);
            REQUIRE(dp.has_value());
            mean_gap[n] += std::abs(dp->total_fuel - bf->total_fuel) / runs;

            // each snapped step can shift the usable SoC by up to a spacing
            // (snap plus the regen-headroom side), worth at most slope/eta_e
            const double slack =
                grid.spacing() * slope / eta_e_min * static_cast<double>(inst.horizon) + 1e-9;
            CHECK(bf->total_fuel <= dp->total_fuel + slack);
            CHECK(dp->total_fuel <= bf->total_fuel + slack);

            const auto res = testcheck::check_schedule_snapped(*dp, inst, 0.5 * grid.spacing() + 1e-12);
            INFO(res.what);
            CHECK(res.ok);
        }
    }
    CHECK(mean_gap[101] <= mean_gap[11] + 1e-9);
    CHECK(mean_gap[1001] <= mean_gap[101] + 1e-9);
}

TEST_CASE("dp: optimal cost is nonincreasing in the initial charge, up to grid wobble") {
    std::mt19937 rng(37);
    for (int i = 0; i < 10; ++i) {
        TripInstance inst = testgen::random_trip(rng);
        SocGrid grid(inst.b_lo, inst.b_hi, 201);
        const double wobble = 2.0 * grid.spacing() * inst.curve.slope_at(inst.max_engine_output());
        double prev = kInf;
        for (int k = 0; k <= 6; ++k) {
            inst.b0 = std::min(inst.b_hi, inst.b_lo + (inst.b_hi - inst.b_lo) * k / 6.0);
            const auto dp = solve_dmop_dp(inst, grid);
            REQUIRE(dp.has_value());
            CHECK(dp->total_fuel <= prev + wobble);
            prev = dp->total_fuel;
        }
    }
}

TEST_CASE("dp: disabling a mode never helps") {
    std::mt19937 rng(41);
    for (int i = 0; i < 20; ++i) {
        TripInstance inst = testgen::random_trip(rng);
        SocGrid grid(inst.b_lo, inst.b_hi, 201);
        const auto full = solve_dmop_dp(inst, grid);
        REQUIRE(full.has_value());

        TripInstance no_ap = inst;
        no_ap.modes.ap = false;
        const auto rest = solve_dmop_dp(no_ap, grid);
        REQUIRE(rest.has_value());
        CHECK(full->total_fuel <= rest->total_fuel + 1e-12);
    }
}

TEST_CASE("dp: final-level cost table matches terminal-constrained solves") {
    std::mt19937 rng(43);
    TripInstance inst = testgen::random_trip(rng);
    SocGrid grid(inst.b_lo, inst.b_hi, 21);
    const auto costs = dmop_final_level_costs(inst, grid, inst.b0);
    for (int j = 0; j < grid.size; ++j) {
        TripInstance with_term = inst;
        with_term.terminal_soc = grid.level(j);
        with_term.g0 = 1e9;
        const auto dp = solve_dmop_dp(with_term, grid);
        if (costs[static_cast<std::size_t>(j)] < kInf) {
            REQUIRE(dp.has_value());
            CHECK(dp->total_fuel == Catch::Approx(costs[static_cast<std::size_t>(j)]).margin(1e-9));
        } else {
            CHECK_FALSE(dp.has_value());
        }
    }
}
