// Command-line front end: instance/network ingestion, solver dispatch,
// streaming online decisions and plot-ready sweep output.
//
// Exit codes: 0 success, 1 input error, 2 infeasible.

#include <CLI11.hpp>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "phevplan/phevplan.hpp"

namespace {

using namespace phevplan;

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitInfeasible = 2;

struct CommonOpts {
    std::string input;
    std::string output;
    std::string format = "json";
    int grid = 0;
    double tol = 1e-6;
    int delta = 0;
    double terminal_soc = std::numeric_limits<double>::quiet_NaN();
};

void write_output(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open output file " + path);
    out << text;
}

QpSettings qp_settings(const CommonOpts& opts) {
    QpSettings s;
    s.feas_tol = opts.tol;
    return s;
}

TripInstance load_instance(const CommonOpts& opts) {
    TripInstance inst = load_trip_instance(opts.input);
    if (!std::isnan(opts.terminal_soc)) inst.terminal_soc = opts.terminal_soc;
    return inst;
}

void summarize_schedule(const ModeSchedule& sched, const std::string& label) {
    const auto ratios = sched.mode_ratios();
    std::ostringstream os;
    os << label << ": total fuel " << format_double(sched.total_fuel) << ", final SoC "
       << format_double(sched.final_soc) << ", mode shares ev=" << ratios[0] << " ap=" << ratios[1]
       << " cs=" << ratios[2] << " ce=" << ratios[3] << "\n";
    std::cerr << os.str();
}

int emit_schedule(const ModeSchedule& sched, const CommonOpts& opts, json extra = {}) {
    if (opts.format == "csv") {
        std::ostringstream os;
        schedule_to_csv(sched, os);
        write_output(opts.output, os.str());
    } else {
        json j = schedule_to_json(sched);
        for (auto& [k, v] : extra.items()) j[k] = v;
        write_output(opts.output, j.dump(2));
    }
    return kExitOk;
}

int cmd_optimize(const CommonOpts& opts) {
    TripInstance inst = load_instance(opts);
    const SocGrid grid(inst.b_lo, inst.b_hi, opts.grid > 0 ? opts.grid : 201);
    const auto sched = solve_dmop_dp(inst, grid);
    if (!sched) {
        std::cerr << "INFEASIBLE: no schedule fits the battery and fuel limits\n";
        write_output(opts.output, json{{"status", "INFEASIBLE"}}.dump(2));
        return kExitInfeasible;
    }
    summarize_schedule(*sched, "optimize");
    return emit_schedule(*sched, opts);
}

int cmd_simulate(const CommonOpts& opts, const std::string& mode_name_arg, const std::string& modes_file) {
    TripInstance inst = load_instance(opts);
    std::vector<Mode> modes;
    if (!modes_file.empty()) {
        std::ifstream in(modes_file);
        if (!in) throw std::runtime_error("cannot open modes file " + modes_file);
        std::string line;
        while (std::getline(in, line)) {
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
            if (!line.empty()) modes.push_back(mode_from_name(line));
        }
        if (static_cast<int>(modes.size()) != inst.horizon)
            throw std::runtime_error("modes file must list exactly one mode per slot");
    } else {
        modes.assign(static_cast<std::size_t>(inst.horizon), mode_from_name(mode_name_arg));
    }

    ModeSchedule sched;
    VehicleState st{inst.b0, inst.g0};
    for (int t = 0; t < inst.horizon; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        auto out = step_mode(st, modes[ts], inst.p_plus[ts], inst.p_minus[ts], inst.coeffs[ts],
                             inst.b_lo, inst.b_hi, inst.curve);
        if (!out.ok()) {
            std::cerr << "INFEASIBLE at slot " << t << ": " << step_error_name(out.error) << "\n";
            write_output(opts.output, json{{"status", "INFEASIBLE"},
                                           {"slot", t},
                                           {"reason", step_error_name(out.error)}}
                                          .dump(2));
            return kExitInfeasible;
        }
        sched.slots.push_back(ScheduledSlot{st.soc, out.transition});
        sched.total_fuel += out.transition.fuel_used;
        st.soc = out.transition.next_soc;
        st.fuel -= out.transition.fuel_used;
    }
    sched.final_soc = st.soc;
    summarize_schedule(sched, "simulate");
    return emit_schedule(sched, opts);
}

int cmd_approx(const CommonOpts& opts) {
    TripInstance inst = load_instance(opts);
    const auto prog = build_cdmop(inst);
    const auto frac = solve_convex(prog, qp_settings(opts));
    if (frac.status == QpStatus::primal_infeasible) {
        std::cerr << "INFEASIBLE: the relaxed program has no feasible point\n";
        write_output(opts.output, json{{"status", "INFEASIBLE"}}.dump(2));
        return kExitInfeasible;
    }
    if (!frac.solved()) {
        std::cerr << "solver stopped at iteration limit (feasibility " << frac.feas_residual << ")\n";
        write_output(opts.output, json{{"status", "ITERATION_LIMIT"},
                                       {"feas_residual", frac.feas_residual},
                                       {"gap_estimate", frac.gap_estimate}}
                                      .dump(2));
        return kExitInfeasible;
    }
    const auto sched = round_modes(frac, inst);
    if (!sched) {
        std::cerr << "INFEASIBLE: rounding found no feasible mode at some slot\n";
        write_output(opts.output, json{{"status", "INFEASIBLE"}}.dump(2));
        return kExitInfeasible;
    }
    summarize_schedule(*sched, "approx");
    std::cerr << "relaxation lower bound " << format_double(frac.objective) << "\n";
    return emit_schedule(*sched, opts, json{{"lower_bound", frac.objective}});
}

int cmd_online(const std::string& config_path, const std::string& in_path, const std::string& out_path) {
    std::ifstream cfg_in(config_path);
    if (!cfg_in) throw std::runtime_error("cannot open config file " + config_path);
    json cfg_json;
    cfg_in >> cfg_json;
    const OnlineStreamConfig cfg = parse_online_config(cfg_json);

    std::ifstream fin;
    std::istream* in = &std::cin;
    if (!in_path.empty()) {
        fin.open(in_path);
        if (!fin) throw std::runtime_error("cannot open input file " + in_path);
        in = &fin;
    }
    std::ofstream fout;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        fout.open(out_path);
        if (!fout) throw std::runtime_error("cannot open output file " + out_path);
        out = &fout;
    }
    return run_online_stream(cfg, *in, *out);
}

int cmd_plan(const CommonOpts& opts, bool uniform) {
    RoadNetwork net = load_road_network(opts.input);
    if (opts.delta > 0) net.stop_budget = opts.delta;
    const SocGrid grid(net.b_lo, net.b_hi, opts.grid > 0 ? opts.grid : 21);
    const auto plan = uniform ? solve_uppdm(net, grid) : solve_ppdm_dp(net, grid);
    if (!plan) {
        std::cerr << "INFEASIBLE: destination unreachable within tank and stop budget\n";
        write_output(opts.output, json{{"status", "INFEASIBLE"}}.dump(2));
        return kExitInfeasible;
    }
    std::ostringstream os;
    os << (uniform ? "plan" : "plan-exact") << ": cost " << format_double(plan->total_cost) << ", route";
    for (int v : plan->node_seq) os << ' ' << net.nodes[static_cast<std::size_t>(v)].id;
    os << ", stops " << plan->stop_count << "\n";
    std::cerr << os.str();
    write_output(opts.output, plan_to_json(*plan, net).dump(2));
    return kExitOk;
}

int cmd_plan_approx(const CommonOpts& opts) {
    RoadNetwork net = load_road_network(opts.input);
    if (opts.delta > 0) net.stop_budget = opts.delta;
    const SocGrid grid(net.b_lo, net.b_hi, opts.grid > 0 ? opts.grid : 21);
    const auto res = solve_cppdm(net, grid, qp_settings(opts));
    if (res.status == QpStatus::primal_infeasible || !res.plan) {
        std::cerr << "INFEASIBLE: relaxation or rounding failed\n";
        write_output(opts.output,
                     json{{"status", "INFEASIBLE"}, {"solver_status", qp_status_name(res.status)}}.dump(2));
        return kExitInfeasible;
    }
    std::ostringstream os;
    os << "plan-approx: cost " << format_double(res.plan->total_cost) << " (lower bound "
       << format_double(res.lower_bound) << "), route";
    for (int v : res.plan->node_seq) os << ' ' << net.nodes[static_cast<std::size_t>(v)].id;
    os << "\n";
    std::cerr << os.str();
    json j = plan_to_json(*res.plan, net);
    j["lower_bound"] = res.lower_bound;
    write_output(opts.output, j.dump(2));
    return kExitOk;
}

int cmd_calibrate(const CommonOpts& opts, const std::string& params_path) {
    std::ifstream pin(params_path);
    if (!pin) throw std::runtime_error("cannot open params file " + params_path);
    json pj;
    pin >> pj;
    VehicleParams params;
    params.mass_kg = pj.at("mass_kg").get<double>();
    params.gravity_m_s2 = pj.value("gravity_m_s2", 9.81);
    params.air_density_kg_m3 = pj.value("air_density_kg_m3", 1.226);
    params.frontal_area_m2 = pj.at("frontal_area_m2").get<double>();
    params.drag_coeff = pj.at("drag_coeff").get<double>();
    params.rolling_coeff = pj.at("rolling_coeff").get<double>();
    params.base_load_w = pj.value("base_load_w", 0.0);
    params.validate();

    const ObdTrace trace = load_trace_file(opts.input);
    json out;
    auto fit_one = [&](EffTarget target, const char* key) {
        try {
            const auto fit = fit_efficiency(trace, target, params);
            json cj = json::array();
            for (double c : fit.coeffs) cj.push_back(c);
            out[key] = json{{"coeffs", cj},
                            {"rows_used", fit.rows_used},
                            {"rows_clamped", fit.rows_clamped},
                            {"residual_rms", fit.residual_rms}};
            if (fit.rows_clamped > 0)
                std::cerr << "calibrate: " << key << ": clamped " << fit.rows_clamped
                          << " out-of-range per-slot ratios\n";
        } catch (const std::exception& e) {
            out[key] = json{{"error", e.what()}};
            std::cerr << "calibrate: " << key << ": " << e.what() << "\n";
        }
    };
    fit_one(EffTarget::discharge, "eta_d");
    fit_one(EffTarget::regen, "eta_r");
    fit_one(EffTarget::engine_charge, "eta_e");
    try {
        const FuelCurve curve = fit_fuel(fuel_samples(trace));
        out["curve"] = json{{"gamma2", curve.gamma2}, {"gamma1", curve.gamma1}, {"gamma0", curve.gamma0}};
    } catch (const std::exception& e) {
        out["curve"] = json{{"error", e.what()}};
        std::cerr << "calibrate: fuel curve: " << e.what() << "\n";
    }
    write_output(opts.output, out.dump(2));
    return kExitOk;
}

int sweep_threads() {
    if (const char* env = std::getenv("PHEVPLAN_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

int cmd_sweep(const CommonOpts& opts, double b0_from, double b0_to, int b0_steps,
              const std::string& solvers_csv) {
    TripInstance base = load_instance(opts);
    std::vector<std::string> solvers;
    {
        std::stringstream ss(solvers_csv);
        std::string item;
        while (std::getline(ss, item, ',')) solvers.push_back(item);
    }
    if (solvers.empty()) throw std::runtime_error("no solvers given");
    if (b0_steps < 1) throw std::runtime_error("--b0-steps must be >= 1");
    const SocGrid grid(base.b_lo, base.b_hi, opts.grid > 0 ? opts.grid : 201);

    struct Row {
        double b0 = 0.0;
        std::string solver;
        std::string status;
        double fuel = 0.0;
        std::array<double, 4> ratios{};
    };
    std::vector<Row> rows(static_cast<std::size_t>(b0_steps) * solvers.size());

    auto run_cell = [&](std::size_t idx) {
        const auto step_i = static_cast<int>(idx / solvers.size());
        const std::string& solver = solvers[idx % solvers.size()];
        TripInstance inst = base;
        const double frac = b0_steps == 1 ? 0.0 : static_cast<double>(step_i) / (b0_steps - 1);
        inst.b0 = std::min(inst.b_hi, std::max(inst.b_lo, b0_from + (b0_to - b0_from) * frac));
        Row& row = rows[idx];
        row.b0 = inst.b0;
        row.solver = solver;

        std::optional<ModeSchedule> sched;
        try {
            if (solver == "opt") {
                sched = solve_dmop_dp(inst, grid);
            } else if (solver == "cs") {
                ModeSchedule bench;
                VehicleState st{inst.b0, inst.g0};
                bool ok = true;
                for (int t = 0; t < inst.horizon && ok; ++t) {
                    const auto ts = static_cast<std::size_t>(t);
                    auto out = step_mode(st, Mode::CS, inst.p_plus[ts], inst.p_minus[ts], inst.coeffs[ts],
                                         inst.b_lo, inst.b_hi, inst.curve);
                    if (!out.ok()) {
                        ok = false;
                        break;
                    }
                    bench.slots.push_back(ScheduledSlot{st.soc, out.transition});
                    bench.total_fuel += out.transition.fuel_used;
                    st.soc = out.transition.next_soc;
                    st.fuel -= out.transition.fuel_used;
                }
                bench.final_soc = st.soc;
                if (ok) sched = std::move(bench);
            } else if (solver == "online") {
                const auto ex = instance_extrema(inst);
                const auto th =
                    compute_thresholds(ex.f_min, ex.f_max, ex.eta_d_min, ex.eta_e_min, ex.eta_e_max);
                sched = run_online(inst, th);
            } else if (solver == "approx") {
                const auto frac_sol = solve_convex(build_cdmop(inst), qp_settings(opts));
                if (frac_sol.solved()) sched = round_modes(frac_sol, inst);
            } else {
                throw std::runtime_error("unknown solver '" + solver + "'");
            }
        } catch (const std::exception& e) {
            row.status = std::string("error: ") + e.what();
            return;
        }
        if (!sched) {
            row.status = "INFEASIBLE";
            return;
        }
        row.status = "ok";
        row.fuel = sched->total_fuel;
        row.ratios = sched->mode_ratios();
    };

    const int threads = std::min<int>(sweep_threads(), static_cast<int>(rows.size()));
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (std::size_t idx = next.fetch_add(1); idx < rows.size(); idx = next.fetch_add(1))
                run_cell(idx);
        });
    for (auto& th : pool) th.join();

    std::ostringstream os;
    os << "B0,solver,status,fuel,ratio_ev,ratio_ap,ratio_cs,ratio_ce\n";
    for (const auto& row : rows) {
        os << format_double(row.b0) << ',' << row.solver << ',' << row.status << ','
           << format_double(row.fuel) << ',' << format_double(row.ratios[0]) << ','
           << format_double(row.ratios[1]) << ',' << format_double(row.ratios[2]) << ','
           << format_double(row.ratios[3]) << '\n';
    }
    write_output(opts.output, os.str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Drive-mode schedule and refuel-route planning for plug-in hybrids"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string sim_mode = "cs", modes_file;
    std::string online_config, online_in, online_out;
    std::string params_path;
    double b0_from = 0.0, b0_to = 0.0;
    int b0_steps = 1;
    std::string solvers = "opt,cs";

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--in", opts.input, "input file")->required();
        cmd->add_option("--out", opts.output, "output path (default stdout)");
        cmd->add_option("--format", opts.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
        cmd->add_option("--grid", opts.grid, "SoC grid levels")->check(CLI::PositiveNumber);
        cmd->add_option("--tol", opts.tol, "solver feasibility tolerance");
        cmd->add_option("--delta", opts.delta, "stop budget override");
        cmd->add_option("--terminal-soc", opts.terminal_soc, "required final SoC");
    };

    auto* c_opt = app.add_subcommand("optimize", "exact minimum-fuel schedule");
    add_common(c_opt);
    auto* c_sim = app.add_subcommand("simulate", "simulate a fixed mode policy");
    add_common(c_sim);
    c_sim->add_option("--mode", sim_mode, "mode for every slot (ev|ce|cs|ap)");
    c_sim->add_option("--modes-file", modes_file, "file with one mode per slot");
    auto* c_apx = app.add_subcommand("approx", "convex relaxation plus rounding");
    add_common(c_apx);
    auto* c_onl = app.add_subcommand("online", "streaming threshold policy");
    c_onl->add_option("--config", online_config, "vehicle/threshold config JSON")->required();
    c_onl->add_option("--in", online_in, "slot records CSV (default stdin)");
    c_onl->add_option("--out", online_out, "decision CSV (default stdout)");
    auto* c_plan = app.add_subcommand("plan", "uniform-price route planning");
    add_common(c_plan);
    auto* c_pex = app.add_subcommand("plan-exact", "exact priced route planning");
    add_common(c_pex);
    auto* c_papx = app.add_subcommand("plan-approx", "relaxed route planning with rounding");
    add_common(c_papx);
    auto* c_cal = app.add_subcommand("calibrate", "fit efficiency and fuel models from a trace");
    add_common(c_cal);
    c_cal->add_option("--params", params_path, "road-load parameter JSON")->required();
    auto* c_swp = app.add_subcommand("sweep", "fuel vs initial SoC table");
    add_common(c_swp);
    c_swp->add_option("--b0-from", b0_from, "sweep start")->required();
    c_swp->add_option("--b0-to", b0_to, "sweep end")->required();
    c_swp->add_option("--b0-steps", b0_steps, "number of rows")->required();
    c_swp->add_option("--solvers", solvers, "comma list: opt,cs,online,approx");

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_opt->parsed()) return cmd_optimize(opts);
        if (c_sim->parsed()) return cmd_simulate(opts, sim_mode, modes_file);
        if (c_apx->parsed()) return cmd_approx(opts);
        if (c_onl->parsed()) return cmd_online(online_config, online_in, online_out);
        if (c_plan->parsed()) return cmd_plan(opts, true);
        if (c_pex->parsed()) return cmd_plan(opts, false);
        if (c_papx->parsed()) return cmd_plan_approx(opts);
        if (c_cal->parsed()) return cmd_calibrate(opts, params_path);
        if (c_swp->parsed()) return cmd_sweep(opts, b0_from, b0_to, b0_steps, solvers);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    }
    return kExitInputError;
}
