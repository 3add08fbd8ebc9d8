#ifndef PHEVPLAN_IO_HPP
#define PHEVPLAN_IO_HPP

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "phevplan/dmop.hpp"
#include "phevplan/online.hpp"
#include "phevplan/pathplan.hpp"

// JSON instance/network ingestion and result emission for the command-line
// front end. Numbers are printed with enough digits to reparse bit-exactly.

namespace phevplan {

using nlohmann::json;

namespace io_detail {

inline double require_number(const json& j, const std::string& key) {
    if (!j.contains(key)) throw std::runtime_error("missing field '" + key + "'");
    if (!j[key].is_number()) throw std::runtime_error("field '" + key + "' must be a number");
    return j[key].get<double>();
}

inline std::vector<double> number_array(const json& j, const std::string& key, int expected) {
    if (!j.contains(key)) throw std::runtime_error("missing field '" + key + "'");
    const json& v = j[key];
    if (v.is_number()) return std::vector<double>(static_cast<std::size_t>(expected), v.get<double>());
    if (!v.is_array() || static_cast<int>(v.size()) != expected)
        throw std::runtime_error("field '" + key + "' must be a number or an array of length " +
                                 std::to_string(expected));
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& x : v) {
        if (!x.is_number()) throw std::runtime_error("field '" + key + "' has a non-numeric entry");
        out.push_back(x.get<double>());
    }
    return out;
}

inline FuelCurve parse_curve(const json& j) {
    if (!j.contains("curve")) throw std::runtime_error("missing field 'curve'");
    const json& c = j["curve"];
    FuelCurve curve{require_number(c, "gamma2"), require_number(c, "gamma1"),
                    c.contains("gamma0") ? require_number(c, "gamma0") : 0.0};
    curve.validate();
    return curve;
}

inline ModeSet parse_modes(const json& j) {
    ModeSet m;
    if (j.contains("modes")) {
        const json& v = j["modes"];
        m.ev = v.value("ev", false);
        m.ce = v.value("ce", false);
        m.cs = v.value("cs", false);
        m.ap = v.value("ap", false);
    }
    m.validate();
    return m;
}

inline std::vector<SlotCoeffs> parse_coeffs(const json& j, int t_end) {
    const auto eta_r = number_array(j, "eta_r", t_end);
    const auto eta_d = number_array(j, "eta_d", t_end);
    const auto eta_e = number_array(j, "eta_e", t_end);
    const auto cap = number_array(j, "C", t_end);
    const auto beta = number_array(j, "beta", t_end);
    std::vector<SlotCoeffs> out(static_cast<std::size_t>(t_end));
    for (int t = 0; t < t_end; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        out[ts] = SlotCoeffs{eta_r[ts], eta_d[ts], eta_e[ts], cap[ts], beta[ts]};
        out[ts].validate();
    }
    return out;
}

inline void parse_loads(const json& j, int t_end, std::vector<double>& p_plus, std::vector<double>& p_minus) {
    if (j.contains("P_plus") || j.contains("P_minus")) {
        p_plus = number_array(j, "P_plus", t_end);
        p_minus = number_array(j, "P_minus", t_end);
        return;
    }
    if (!j.contains("speed"))
        throw std::runtime_error("instance needs either 'P_plus'/'P_minus' or 'speed' (+ 'params')");
    const auto speed = number_array(j, "speed", t_end);
    const auto grade = j.contains("grade") ? number_array(j, "grade", t_end)
                                           : std::vector<double>(static_cast<std::size_t>(t_end), 0.0);
    if (!j.contains("params")) throw std::runtime_error("speed profile requires 'params'");
    const json& p = j["params"];
    VehicleParams params;
    params.mass_kg = require_number(p, "mass_kg");
    params.gravity_m_s2 = p.value("gravity_m_s2", 9.81);
    params.air_density_kg_m3 = p.value("air_density_kg_m3", 1.226);
    params.frontal_area_m2 = require_number(p, "frontal_area_m2");
    params.drag_coeff = require_number(p, "drag_coeff");
    params.rolling_coeff = require_number(p, "rolling_coeff");
    params.base_load_w = p.value("base_load_w", 0.0);
    params.validate();

    double prev = j.contains("v0") ? require_number(j, "v0") : speed.front();
    p_plus.clear();
    p_minus.clear();
    for (int t = 0; t < t_end; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        const auto dp = drivetrain_power(ProfileStep{speed[ts], grade[ts], prev}, params);
        p_plus.push_back(dp.positive);
        p_minus.push_back(dp.negative);
        prev = speed[ts];
    }
}

}  // namespace io_detail

inline TripInstance parse_trip_instance(const json& j) {
    TripInstance inst;
    const double t_raw = io_detail::require_number(j, "T");
    inst.horizon = static_cast<int>(t_raw);
    if (inst.horizon < 1 || static_cast<double>(inst.horizon) != t_raw)
        throw std::runtime_error("field 'T' must be a positive integer");
    io_detail::parse_loads(j, inst.horizon, inst.p_plus, inst.p_minus);
    inst.coeffs = io_detail::parse_coeffs(j, inst.horizon);
    inst.curve = io_detail::parse_curve(j);
    inst.b0 = io_detail::require_number(j, "B0");
    inst.g0 = io_detail::require_number(j, "G0");
    inst.b_lo = io_detail::require_number(j, "B_lo");
    inst.b_hi = io_detail::require_number(j, "B_hi");
    inst.modes = io_detail::parse_modes(j);
    if (j.contains("B_terminal")) inst.terminal_soc = io_detail::require_number(j, "B_terminal");
    inst.validate();
    return inst;
}

inline TripInstance load_trip_instance(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open instance file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    return parse_trip_instance(j);
}

inline RoadNetwork parse_road_network(const json& j) {
    RoadNetwork net;
    if (!j.contains("nodes") || !j["nodes"].is_array()) throw std::runtime_error("missing 'nodes' array");
    if (!j.contains("edges") || !j["edges"].is_array()) throw std::runtime_error("missing 'edges' array");

    std::map<std::string, int> by_id;
    for (const auto& nj : j["nodes"]) {
        StationNode nd;
        if (!nj.contains("id")) throw std::runtime_error("node without 'id'");
        nd.id = nj["id"].get<std::string>();
        nd.fuel_price = nj.value("g", 1.0);
        nd.charge_price = nj.value("h", 0.0);
        nd.charge_cap = nj.value("E", 0.0);
        if (by_id.count(nd.id)) throw std::runtime_error("duplicate node id '" + nd.id + "'");
        by_id[nd.id] = static_cast<int>(net.nodes.size());
        net.nodes.push_back(nd);
    }
    auto node_ref = [&](const json& v, const std::string& what) {
        const std::string id = v.get<std::string>();
        auto it = by_id.find(id);
        if (it == by_id.end()) throw std::runtime_error(what + " references unknown node '" + id + "'");
        return it->second;
    };
    for (const auto& ej : j["edges"]) {
        RoadEdge e;
        if (!ej.contains("from") || !ej.contains("to")) throw std::runtime_error("edge without 'from'/'to'");
        e.from = node_ref(ej["from"], "edge");
        e.to = node_ref(ej["to"], "edge");
        const double t_raw = io_detail::require_number(ej, "T");
        e.horizon = static_cast<int>(t_raw);
        if (e.horizon < 1) throw std::runtime_error("edge 'T' must be >= 1");
        io_detail::parse_loads(ej, e.horizon, e.p_plus, e.p_minus);
        e.coeffs = io_detail::parse_coeffs(ej, e.horizon);
        net.edges.push_back(std::move(e));
    }
    if (!j.contains("source") || !j.contains("dest")) throw std::runtime_error("missing 'source'/'dest'");
    net.source = node_ref(j["source"], "source");
    net.dest = node_ref(j["dest"], "dest");
    net.tank_cap = io_detail::require_number(j, "G_cap");
    net.stop_budget = j.contains("delta") ? static_cast<int>(io_detail::require_number(j, "delta")) : 0;
    net.g0 = io_detail::require_number(j, "G0");
    net.b0 = io_detail::require_number(j, "B0");
    net.b_lo = io_detail::require_number(j, "B_lo");
    net.b_hi = io_detail::require_number(j, "B_hi");
    net.curve = io_detail::parse_curve(j);
    net.modes = io_detail::parse_modes(j);
    net.validate();
    return net;
}

inline RoadNetwork load_road_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open network file " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    return parse_road_network(j);
}

// ---- result emission ------------------------------------------------------

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline json schedule_to_json(const ModeSchedule& sched) {
    json slots = json::array();
    int t = 0;
    for (const auto& s : sched.slots) {
        const Transition& tr = s.transition;
        slots.push_back(json{{"t", t++},
                             {"mode", mode_name(tr.mode)},
                             {"r", tr.r},
                             {"s", tr.s},
                             {"u", tr.u},
                             {"Q", tr.engine_output},
                             {"fuel", tr.fuel_used},
                             {"soc_start", s.soc_start},
                             {"soc_end", tr.next_soc}});
    }
    const auto ratios = sched.mode_ratios();
    return json{{"status", "ok"},
                {"total_fuel", sched.total_fuel},
                {"final_soc", sched.final_soc},
                {"mode_ratios",
                 json{{"ev", ratios[static_cast<std::size_t>(Mode::EV)]},
                      {"ap", ratios[static_cast<std::size_t>(Mode::AP)]},
                      {"cs", ratios[static_cast<std::size_t>(Mode::CS)]},
                      {"ce", ratios[static_cast<std::size_t>(Mode::CE)]}}},
                {"slots", slots}};
}

inline void schedule_to_csv(const ModeSchedule& sched, std::ostream& os) {
    os << "t,mode,r,s,u,Q,fuel,soc_start,soc_end\n";
    int t = 0;
    for (const auto& s : sched.slots) {
        const Transition& tr = s.transition;
        os << t++ << ',' << mode_name(tr.mode) << ',' << format_double(tr.r) << ','
           << format_double(tr.s) << ',' << format_double(tr.u) << ',' << format_double(tr.engine_output)
           << ',' << format_double(tr.fuel_used) << ',' << format_double(s.soc_start) << ','
           << format_double(tr.next_soc) << '\n';
    }
}

inline json plan_to_json(const TripPlan& plan, const RoadNetwork& net) {
    json route = json::array();
    for (int v : plan.node_seq) route.push_back(net.nodes[static_cast<std::size_t>(v)].id);
    json stops = json::array();
    for (const auto& st : plan.stops)
        stops.push_back(json{{"node", st.node >= 0 ? net.nodes[static_cast<std::size_t>(st.node)].id : "?"},
                             {"arrival_fuel", st.arrival_fuel},
                             {"refill", st.refill},
                             {"charge", st.charge},
                             {"soc_before", st.soc_before},
                             {"soc_after", st.soc_after}});
    json edges = json::array();
    for (const auto& pe : plan.edges) {
        const RoadEdge& e = net.edges[static_cast<std::size_t>(pe.road_edge)];
        json ej = schedule_to_json(pe.schedule);
        ej["from"] = net.nodes[static_cast<std::size_t>(e.from)].id;
        ej["to"] = net.nodes[static_cast<std::size_t>(e.to)].id;
        ej["fuel"] = pe.fuel;
        edges.push_back(std::move(ej));
    }
    return json{{"status", "ok"},
                {"cost", plan.total_cost},
                {"route", route},
                {"stop_count", plan.stop_count},
                {"stops", stops},
                {"edges", edges}};
}

// ---- streaming online mode -------------------------------------------------

struct OnlineStreamConfig {
    double b0 = 0.0;
    double g0 = 0.0;
    double b_lo = 0.0;
    double b_hi = 0.0;
    FuelCurve curve;
    ModeSet modes;
    std::optional<Thresholds> thresholds;
};

inline OnlineStreamConfig parse_online_config(const json& j) {
    OnlineStreamConfig cfg;
    cfg.b0 = io_detail::require_number(j, "B0");
    cfg.g0 = io_detail::require_number(j, "G0");
    cfg.b_lo = io_detail::require_number(j, "B_lo");
    cfg.b_hi = io_detail::require_number(j, "B_hi");
    cfg.curve = io_detail::parse_curve(j);
    cfg.modes = io_detail::parse_modes(j);
    if (j.contains("theta_ap") || j.contains("theta_cs")) {
        Thresholds th;
        th.theta_ap = io_detail::require_number(j, "theta_ap");
        th.theta_cs = io_detail::require_number(j, "theta_cs");
        cfg.thresholds = th;
    }
    return cfg;
}

inline constexpr const char* kOnlineStreamHeader = "p_plus,p_minus,eta_r,eta_d,eta_e,C,beta";

/// Read slot records line by line, write one decision per line. Returns 0 on
/// success, 2 when a slot had no feasible mode.
inline int run_online_stream(const OnlineStreamConfig& cfg, std::istream& in, std::ostream& out) {
    OnlineController ctl(cfg.b0, cfg.g0, cfg.b_lo, cfg.b_hi, cfg.curve, cfg.modes, cfg.thresholds);
    out << "t,mode,r,s,u,Q,fuel,soc\n";
    std::string line;
    int t = 0;
    bool header_checked = false;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) continue;
        if (!header_checked) {
            header_checked = true;
            if (line == kOnlineStreamHeader) continue;  // optional header row
        }
        std::stringstream ss(line);
        std::string cell;
        double vals[7];
        for (int c = 0; c < 7; ++c) {
            if (!std::getline(ss, cell, ','))
                throw std::runtime_error("online stream record " + std::to_string(t) + ": expected 7 columns");
            try {
                vals[c] = std::stod(cell);
            } catch (const std::exception&) {
                throw std::runtime_error("online stream record " + std::to_string(t) + ": bad number '" + cell + "'");
            }
        }
        SlotCoeffs k{vals[2], vals[3], vals[4], vals[5], vals[6]};
        k.validate();
        auto res = ctl.step(vals[0], vals[1], k);
        if (!res.ok()) {
            out << t << ",INFEASIBLE,,,,,,\n";
            return 2;
        }
        const Transition& tr = res.transition;
        out << t << ',' << mode_name(tr.mode) << ',' << format_double(tr.r) << ',' << format_double(tr.s)
            << ',' << format_double(tr.u) << ',' << format_double(tr.engine_output) << ','
            << format_double(tr.fuel_used) << ',' << format_double(tr.next_soc) << '\n';
        out.flush();
        ++t;
    }
    return 0;
}

}  // namespace phevplan

#endif  // PHEVPLAN_IO_HPP
