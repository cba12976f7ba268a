// lorentz-endo: command-line front end for the rod, coil, design, workspace and teleop models.
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lorentz/config.hpp"
#include "lorentz/csv.hpp"
#include "lorentz/design.hpp"
#include "lorentz/equilibrium.hpp"
#include "lorentz/errors.hpp"
#include "lorentz/json_util.hpp"
#include "lorentz/phantom.hpp"
#include "lorentz/protocol.hpp"
#include "lorentz/scenario.hpp"
#include "lorentz/server.hpp"
#include "lorentz/steering.hpp"
#include "lorentz/workspace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace lorentz;

namespace {

enum Exit : int {
    kOk = 0,
    kFailure = 1,
    kBadInput = 2,
    kDivergence = 3,
    kNoConvergence = 4,
    kInfeasible = 5,
    kPortBusy = 6,
};

constexpr double kDeg = std::numbers::pi / 180.0;

struct RunConfig {
    std::string config_path;
    std::string out_dir;
    std::string format = "csv";
    std::uint64_t seed = 0;
    int verbosity = 0;
};

// Writes named artifacts into the output directory, or to stdout when none is given.
class Output {
public:
    explicit Output(const RunConfig& rc) : rc_(rc)
    {
        if (!rc.out_dir.empty()) {
            fs::create_directories(rc.out_dir);
        }
    }

    bool to_files() const { return !rc_.out_dir.empty(); }
    bool json_format() const { return rc_.format == "json"; }

    void file(const std::string& name, const std::string& content) const
    {
        std::ofstream out(fs::path(rc_.out_dir) / name, std::ios::binary);
        out << content;
        if (!out) {
            throw std::runtime_error("cannot write " + (fs::path(rc_.out_dir) / name).string());
        }
    }

    // Table + summary. Files: <stem>.csv and <stem>.json. Stdout: one of them per --format.
    void emit(const std::string& stem, const std::string& csv, const json& summary) const
    {
        if (to_files()) {
            file(stem + ".csv", csv);
            file(stem + ".json", summary.dump(2) + "\n");
        } else if (json_format()) {
            std::cout << summary.dump(2) << "\n";
        } else {
            std::cout << csv;
        }
    }

private:
    const RunConfig& rc_;
};

std::vector<double> parse_list(const std::string& text, double scale)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw InvalidParameter("not a number: '" + item + "'");
        }
        if (item.find_first_not_of(" \t", used) != std::string::npos || !std::isfinite(v)) {
            throw InvalidParameter("not a number: '" + item + "'");
        }
        out.push_back(v * scale);
    }
    return out;
}

json currents_json(std::span<const CoilSpec> coils, std::span<const double> currents)
{
    json j = json::object();
    for (std::size_t k = 0; k < coils.size(); ++k) {
        j[coils[k].name] = currents[k];
    }
    return j;
}

json pose_json(const FramePose& f)
{
    Eigen::Quaterniond q(f.rotation);
    if (q.w() < 0.0) {
        q.coeffs() = -q.coeffs();
    }
    return {{"position", json_util::to_json(f.origin)}, {"quaternion", {q.w(), q.x(), q.y(), q.z()}}};
}

void diag(const RunConfig& rc, int level, const std::string& msg)
{
    if (rc.verbosity >= level) {
        std::cerr << msg << "\n";
    }
}

int cmd_fk(const RunConfig& rc, const std::string& currents_text)
{
    const SystemConfig cfg = load_config(rc.config_path);
    const std::vector<CoilSpec> coils = cfg.steering_coils;
    std::vector<double> I(coils.size(), 0.0);
    if (!currents_text.empty()) {
        I = parse_list(currents_text, 1.0);
        if (I.size() != coils.size()) {
            throw InvalidParameter("--currents needs " + std::to_string(coils.size()) + " values (" + coils[0].name +
                                   ", ...)");
        }
    }
    ActuationCommand{I, 0.0}.validate(coils);
    const EquilibriumResult eq = solve_equilibrium(cfg.rod, cfg.base, coils, I, cfg.env);

    std::ostringstream csv;
    write_rod_state_csv(csv, eq.rod_state);
    const json tip = {{"schema", "lorentz-fk/1"},
                      {"seed", rc.seed},
                      {"currents", currents_json(coils, I)},
                      {"power", total_power(I, coils)},
                      {"tip", pose_json(eq.rod_state.tip_frame())},
                      {"bend_deg", tip_bend_angle(eq.rod_state) / kDeg},
                      {"tip_moment", json_util::to_json(eq.rod_state.tip().m)},
                      {"coil_torque", json_util::to_json(eq.coil_torque)},
                      {"residual", eq.residual},
                      {"converged", eq.converged},
                      {"escaped_unstable", eq.escaped_unstable}};
    const Output out(rc);
    if (out.to_files()) {
        out.file("rod_state.csv", csv.str());
        out.file("tip.json", tip.dump(2) + "\n");
    } else if (out.json_format()) {
        std::cout << tip.dump(2) << "\n";
    } else {
        std::cout << csv.str();
    }
    diag(rc, 1, "tip bend " + format_number(tip_bend_angle(eq.rod_state) / kDeg) + " deg");
    if (!eq.converged) {
        std::cerr << "equilibrium did not converge (residual " << format_number(eq.residual) << " N m)\n";
        return kNoConvergence;
    }
    return kOk;
}

int cmd_ik(const RunConfig& rc, double bend_deg, double azimuth_deg)
{
    const SystemConfig cfg = load_config(rc.config_path);
    const std::vector<CoilSpec> coils = cfg.capped_steering_coils();
    SteerOptions so;
    so.power_cap = cfg.safety.power_cap;
    const SteerResult r = steer_to({bend_deg * kDeg, azimuth_deg * kDeg}, cfg.rod, cfg.base, coils, cfg.env, so);
    const PowerReport pr = joule_power({r.allocation.currents, 0.0}, coils);
    const bool ok = r.consistent && r.ik.converged;

    std::ostringstream csv;
    write_csv_header(csv, "lorentz ik-allocation v1 (current A, resistance Ohm, power W)",
                     {"coil", "current", "resistance", "power"});
    for (std::size_t k = 0; k < coils.size(); ++k) {
        csv << coils[k].name << ",";
        write_csv_row(csv, {r.allocation.currents[k], coil_resistance(coils[k]), pr.per_coil[k]});
    }
    const json summary = {{"schema", "lorentz-ik/1"},
                          {"seed", rc.seed},
                          {"target", {{"bend_deg", bend_deg}, {"azimuth_deg", azimuth_deg}}},
                          {"currents", currents_json(coils, r.allocation.currents)},
                          {"total_power", r.allocation.total_power},
                          {"power_cap", cfg.safety.power_cap},
                          {"tip_torque", json_util::to_json(r.ik.tip_torque)},
                          {"achieved_torque", json_util::to_json(r.allocation.achieved_torque)},
                          {"unrealizable_torque", r.allocation.unrealizable_torque},
                          {"torque_mismatch", r.torque_mismatch},
                          {"achieved_bend_deg", tip_bend_angle(r.ik.rod_state) / kDeg},
                          {"orientation_error", r.ik.orientation_error},
                          {"residual_norm", r.ik.residual_norm},
                          {"ik_iterations", r.ik.iterations},
                          {"rounds", r.rounds},
                          {"converged", ok},
                          {"saturated", r.saturated},
                          {"warning", r.warning}};
    Output(rc).emit("ik", csv.str(), summary);
    if (!ok) {
        std::cerr << "steering did not converge: " << r.warning << "\n";
        return kNoConvergence;
    }
    diag(rc, 1, "total power " + format_number(r.allocation.total_power) + " W");
    return kOk;
}

int cmd_design_curve(const RunConfig& rc, const std::string& ratios_text, double total_mm, double target_deg)
{
    const SystemConfig cfg = load_config(rc.config_path);
    DesignOptions opts;
    opts.base = cfg.base;
    opts.ratios = ratios_text.empty() ? cfg.design.ratios : parse_list(ratios_text, 1.0);
    const double total = total_mm > 0.0 ? total_mm * 1e-3 : cfg.design.total_length;
    const double target = target_deg > 0.0 ? target_deg * kDeg : cfg.design.target_angle;
    const DesignSweep sweep = design_curve(total, target, cfg.steering_coils, cfg.rod, cfg.env, opts);

    std::vector<std::string> columns = {"ratio", "coil_length", "free_length", "axial_turns", "axial_resistance"};
    for (const CoilSpec& c : cfg.steering_coils) {
        columns.push_back("current_" + c.name);
    }
    columns.push_back("power");
    columns.push_back("feasible");
    std::ostringstream csv;
    write_csv_header(csv, "lorentz design-curve v1 (lengths m, resistance Ohm, currents A, power W)", columns);
    json infeasible = json::array();
    for (const DesignPoint& p : sweep.points) {
        std::vector<double> row = {p.ratio, p.coil_length, p.free_length, static_cast<double>(p.axial_turns),
                                   p.axial_resistance};
        for (std::size_t k = 0; k < cfg.steering_coils.size(); ++k) {
            row.push_back(k < p.currents.size() ? p.currents[k] : std::nan(""));
        }
        row.push_back(p.power);
        row.push_back(p.feasible ? 1.0 : 0.0);
        write_csv_row(csv, row);
        if (!p.feasible) {
            infeasible.push_back({{"ratio", p.ratio}, {"reason", p.note}});
            std::cerr << "infeasible ratio " << format_number(p.ratio) << ": " << p.note << "\n";
        }
    }
    json summary = {{"schema", "lorentz-design-curve/1"},
                    {"seed", rc.seed},
                    {"total_length", total},
                    {"target_angle_deg", target / kDeg},
                    {"has_optimum", sweep.has_optimum},
                    {"infeasible", infeasible},
                    {"reference_optimum_ratio", 0.33}};
    if (sweep.has_optimum) {
        summary["optimum_ratio"] = sweep.optimum_ratio;
        summary["optimum_power"] = sweep.optimum_power;
        const double lo = sweep.points.front().ratio;
        const double hi = sweep.points.back().ratio;
        summary["interior_optimum"] = sweep.optimum_ratio > lo && sweep.optimum_ratio < hi;
    }
    Output(rc).emit("design_curve", csv.str(), summary);
    if (!sweep.has_optimum) {
        std::cerr << "no feasible ratio in the sweep\n";
        return kInfeasible;
    }
    diag(rc, 1, "optimum ratio " + format_number(sweep.optimum_ratio));
    return kOk;
}

int cmd_workspace(const RunConfig& rc, int grid, double current_cap, double power_cap, double insertion_mm,
                  double grid_span)
{
    const SystemConfig cfg = load_config(rc.config_path);
    const double Icap = current_cap >= 0.0 ? current_cap : cfg.safety.current_cap;
    const double Pcap = power_cap >= 0.0 ? power_cap : cfg.safety.power_cap;
    InsertionState ins{insertion_mm > 0.0 ? insertion_mm * 1e-3 : cfg.max_insertion, cfg.max_insertion};
    WorkspaceOptions wo;
    wo.grid_span = grid_span;
    const Workspace ws = compute_workspace(cfg.rod, cfg.base, cfg.steering_coils, cfg.env, ins, Icap, Pcap, grid, wo);

    std::vector<std::string> columns;
    for (const CoilSpec& c : cfg.steering_coils) {
        columns.push_back("current_" + c.name);
    }
    for (const char* c : {"branch", "tip_x", "tip_y", "tip_z", "axial_offset", "lateral_offset", "bend", "power"}) {
        columns.emplace_back(c);
    }
    std::ostringstream csv;
    write_csv_header(csv, "lorentz workspace v1 (currents A, positions m, bend rad, power W)", columns);
    for (const WorkspaceSample& s : ws.samples) {
        std::vector<double> row = s.currents;
        row.insert(row.end(), {static_cast<double>(s.branch), s.tip.x(), s.tip.y(), s.tip.z(), s.planar.x(),
                               s.planar.y(), s.bend, s.power});
        write_csv_row(csv, row);
    }
    json hull = json::array();
    for (const Vec2& p : ws.boundary) {
        hull.push_back(json_util::to_json(p));
    }
    const json summary = {{"schema", "lorentz-workspace/1"},
                          {"seed", rc.seed},
                          {"current_cap", Icap},
                          {"power_cap", Pcap},
                          {"grid", grid},
                          {"inserted_length", ins.inserted_length},
                          {"samples", ws.samples.size()},
                          {"rejected", ws.rejected},
                          {"unconverged", ws.unconverged},
                          {"max_bend_deg", ws.max_bend / kDeg},
                          {"boundary", hull},
                          {"diagnostic", ws.diagnostic}};
    Output(rc).emit("workspace", csv.str(), summary);
    if (ws.empty()) {
        std::cerr << ws.diagnostic << "\n";
        return kInfeasible;
    }
    diag(rc, 1, "max bend " + format_number(ws.max_bend / kDeg) + " deg");
    return kOk;
}

int cmd_grasper(const RunConfig& rc, const std::string& currents_text)
{
    const SystemConfig cfg = load_config(rc.config_path);
    const GrasperModel& g = cfg.grasper;
    std::vector<double> currents;
    if (currents_text.empty()) {
        for (int k = 0; k <= 10; ++k) {
            currents.push_back(g.coil.current_limit * k / 10.0);
        }
    } else {
        currents = parse_list(currents_text, 1.0);
    }
    const double R = coil_resistance(g.coil);
    std::ostringstream csv;
    write_csv_header(csv, "lorentz grasper v1 (current A, force N, power W)", {"current", "force", "power"});
    for (double i : currents) {
        write_csv_row(csv, {i, blocking_force(g, i, cfg.env), i * i * R});
    }
    const double imax = g.coil.current_limit;
    const double fmax = blocking_force(g, imax, cfg.env);
    const json summary = {{"schema", "lorentz-grasper/1"},
                          {"seed", rc.seed},
                          {"resistance", R},
                          {"moment_area", coil_moment_area(g.coil)},
                          {"lever_arm", g.lever_arm},
                          {"rest_angle_deg", g.rest_angle_to_B0 / kDeg},
                          {"calibration_factor", g.calibration_factor},
                          {"force_at_limit", fmax},
                          {"current_limit", imax},
                          {"measured_max_force", 0.031},
                          {"implied_calibration", fmax > 0.0 ? 0.031 / (fmax / g.calibration_factor) : 0.0}};
    Output(rc).emit("grasper", csv.str(), summary);
    return kOk;
}

int cmd_ablation(const RunConfig& rc, double resistance, const std::string& currents_ma)
{
    const std::vector<double> currents = parse_list(currents_ma, 1e-3);
    const std::vector<AblationRow> rows = ablation_table(resistance, currents);
    std::ostringstream csv;
    write_csv_header(csv, "lorentz ablation v1 (current A, power W, capable 0/1)", {"current", "power", "capable"});
    json table = json::array();
    for (const AblationRow& r : rows) {
        write_csv_row(csv, {r.current, r.power, r.ablation_capable ? 1.0 : 0.0});
        table.push_back({{"current", r.current}, {"power", r.power}, {"ablation_capable", r.ablation_capable}});
    }
    const json summary = {{"schema", "lorentz-ablation/1"},
                          {"seed", rc.seed},
                          {"resistance", resistance},
                          {"threshold", kAblationThreshold},
                          {"rows", table}};
    Output(rc).emit("ablation", csv.str(), summary);
    return kOk;
}

struct ServeArgs {
    std::string bind = "127.0.0.1";
    int port = 7878;
    int ws_port = -1;
    std::string phantom;
    std::string scenario;
    std::string event_log;
    std::string telemetry;
    std::uint64_t max_ticks = 0;
};

SessionSettings session_settings(const SystemConfig& cfg, const std::string& phantom_override)
{
    const fs::path phantom_path = !phantom_override.empty() ? fs::path(phantom_override) : cfg.phantom_path;
    if (phantom_path.empty()) {
        throw SchemaError("no phantom map: set config.phantom or pass --phantom");
    }
    return {cfg, load_phantom(phantom_path)};
}

int cmd_serve(const RunConfig& rc, const ServeArgs& a)
{
    const SystemConfig cfg = load_config(rc.config_path);
    if (!a.scenario.empty()) {
        const Scenario sc = load_scenario(find_scenario(a.scenario));
        SessionSettings settings = session_settings(cfg, a.phantom.empty() && !sc.phantom.empty() ? sc.phantom.string()
                                                                                                   : a.phantom);
        fs::path telemetry_path = a.telemetry;
        if (telemetry_path.empty() && !rc.out_dir.empty()) {
            fs::create_directories(rc.out_dir);
            telemetry_path = fs::path(rc.out_dir) / "telemetry.jsonl";
        }
        std::ofstream stream;
        if (!telemetry_path.empty()) {
            stream.open(telemetry_path, std::ios::binary);
            if (!stream) {
                throw std::runtime_error("cannot write " + telemetry_path.string());
            }
        }
        const ReplayResult r = replay(sc, std::move(settings), telemetry_path.empty() ? nullptr : &stream);
        json summary = r.summary(sc);
        summary["seed"] = rc.seed;
        std::cout << summary.dump(2) << "\n";
        if (!a.event_log.empty()) {
            std::ofstream log(a.event_log, std::ios::binary);
            for (const Event& e : r.events) {
                log << protocol::dump_line(protocol::to_json(e)) << '\n';
            }
        }
        for (const CheckResult& c : r.checks) {
            if (!c.passed) {
                std::cerr << "checkpoint tick " << c.tick << " " << c.field << ": " << c.detail << "\n";
            }
        }
        return r.passed ? kOk : kFailure;
    }

    SessionSettings settings = session_settings(cfg, a.phantom);
    if (a.port < 0 || a.port > 65535 || a.ws_port > 65535) {
        throw InvalidParameter("port out of range");
    }
    ServerOptions so;
    so.bind_address = a.bind;
    so.port = static_cast<unsigned short>(a.port);
    if (a.ws_port >= 0) {
        so.ws_port = static_cast<unsigned short>(a.ws_port);
    }
    so.event_log = a.event_log;
    if (a.max_ticks > 0) {
        so.max_ticks = a.max_ticks;
    }
    so.handle_signals = true;
    TeleopServer server(std::move(settings), so);
    std::cerr << "teleop/1 listening on " << a.bind << ": tcp " << server.tcp_port() << ", websocket "
              << server.ws_port() << "\n";
    server.run();
    std::cerr << "stopped after " << server.ticks() << " ticks\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Lorentz-force MRI endoscope: rod kinematics, coil allocation, design and teleoperation"};
    app.require_subcommand(1);
    app.fallthrough();
    RunConfig rc;
    const char* env_config = std::getenv("LORENTZ_ENDO_CONFIG");
    app.add_option("-c,--config", rc.config_path, "config JSON (default $LORENTZ_ENDO_CONFIG or bundled table1.json)");
    app.add_option("-o,--out-dir", rc.out_dir, "write artifacts into this directory instead of stdout");
    app.add_option("-f,--format", rc.format, "stdout format")->check(CLI::IsMember({"csv", "json"}));
    app.add_option("--seed", rc.seed, "seed recorded in outputs (all commands are deterministic)");
    app.add_flag("-v,--verbose", rc.verbosity, "diagnostics on stderr (repeatable)");

    std::string fk_currents;
    auto* fk = app.add_subcommand("fk", "static shape under fixed coil currents");
    fk->add_option("--currents", fk_currents, "comma-separated currents [A], one per steering coil");

    double bend_deg = 90.0;
    double azimuth_deg = 0.0;
    auto* ik = app.add_subcommand("ik", "inverse kinematics and power-optimal currents for a bend target");
    ik->add_option("--bend-deg", bend_deg, "tip bend [deg]");
    ik->add_option("--azimuth-deg", azimuth_deg, "bend plane azimuth about the base tangent [deg]");

    std::string ratios;
    double total_mm = 0.0;
    double target_deg = 0.0;
    auto* dc = app.add_subcommand("design-curve", "power at the target bend versus coil/endoscope length ratio");
    dc->add_option("--ratios", ratios, "comma-separated ratios in (0, 1)");
    dc->add_option("--total-length-mm", total_mm, "endoscope section length [mm]");
    dc->add_option("--target-deg", target_deg, "target bend [deg]");

    int grid = 21;
    double current_cap = -1.0;
    double power_cap = -1.0;
    double insertion_mm = 0.0;
    double grid_span = -1.0;
    auto* wsc = app.add_subcommand("workspace", "reachable tip workspace under current and power caps");
    wsc->add_option("--grid", grid, "samples per current axis (>= 8)");
    wsc->add_option("--current-cap", current_cap, "per-coil current cap [A]");
    wsc->add_option("--power-cap", power_cap, "power cap [W]");
    wsc->add_option("--insertion-mm", insertion_mm, "inserted length [mm]");
    wsc->add_option("--grid-span", grid_span, "half-range of the current grid [A] (default: current cap)");

    std::string grasper_currents;
    auto* gr = app.add_subcommand("grasper", "grasper blocking force versus current");
    gr->add_option("--currents", grasper_currents, "comma-separated currents [A]");

    double resistance = 11.0;
    std::string ablation_ma = "50,100,200,250";
    auto* ab = app.add_subcommand("ablation", "Joule power table for ablation settings");
    ab->add_option("--resistance", resistance, "coil resistance [Ohm]");
    ab->add_option("--currents-ma", ablation_ma, "comma-separated currents [mA]");

    ServeArgs sa;
    auto* serve = app.add_subcommand("serve", "teleop/1 service, or a scripted scenario replay");
    serve->add_option("--bind", sa.bind, "bind address");
    serve->add_option("--port", sa.port, "line-JSON TCP port (0: any free port)");
    serve->add_option("--ws-port", sa.ws_port, "WebSocket port (default: port + 1)");
    serve->add_option("--phantom", sa.phantom, "phantom/1 map (default: from config)");
    serve->add_option("--scenario", sa.scenario, "replay a bundled scenario name or scenario file, then exit");
    serve->add_option("--event-log", sa.event_log, "write the event log (JSON lines) here on exit");
    serve->add_option("--telemetry", sa.telemetry, "scenario telemetry stream (default: <out-dir>/telemetry.jsonl)");
    serve->add_option("--max-ticks", sa.max_ticks, "stop the service after this many ticks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kBadInput;
    }
    if (rc.config_path.empty()) {
        rc.config_path = (env_config && *env_config) ? std::string(env_config) : default_config_path().string();
    }

    try {
        if (*fk) {
            return cmd_fk(rc, fk_currents);
        }
        if (*ik) {
            return cmd_ik(rc, bend_deg, azimuth_deg);
        }
        if (*dc) {
            return cmd_design_curve(rc, ratios, total_mm, target_deg);
        }
        if (*wsc) {
            return cmd_workspace(rc, grid, current_cap, power_cap, insertion_mm, grid_span);
        }
        if (*gr) {
            return cmd_grasper(rc, grasper_currents);
        }
        if (*ab) {
            return cmd_ablation(rc, resistance, ablation_ma);
        }
        if (*serve) {
            return cmd_serve(rc, sa);
        }
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kBadInput;
    } catch (const InvalidParameter& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kBadInput;
    } catch (const GeometryError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kBadInput;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kDivergence;
    } catch (const PortBusyError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kPortBusy;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kFailure;
}
