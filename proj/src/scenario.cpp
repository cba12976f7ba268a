#include "lorentz/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "lorentz/errors.hpp"
#include "lorentz/json_util.hpp"
#include "lorentz/protocol.hpp"

namespace lorentz {

namespace {

constexpr const char* kSchema = "scenario/1";

bool non_negative_integer(const nlohmann::json& v)
{
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

std::uint64_t tick_field(const nlohmann::json& j, const std::string& where)
{
    if (!j.is_object() || !j.contains("tick") || !non_negative_integer(j["tick"])) {
        throw SchemaError(where + ".tick: expected a non-negative integer");
    }
    return j["tick"].get<std::uint64_t>();
}

CheckResult check_value(std::uint64_t tick, const std::string& key, const nlohmann::json& expected,
                        const nlohmann::json& telemetry)
{
    CheckResult r{tick, key, false, {}};
    const nlohmann::json::json_pointer ptr(key.front() == '/' ? key : "/" + key);
    if (!telemetry.contains(ptr)) {
        r.detail = "telemetry has no field " + key;
        return r;
    }
    const nlohmann::json& actual = telemetry.at(ptr);
    if (expected.is_boolean() || expected.is_string()) {
        r.passed = actual == expected;
        r.detail = "expected " + expected.dump() + ", got " + actual.dump();
        return r;
    }
    if (!actual.is_number()) {
        r.detail = "field " + key + " is not numeric";
        return r;
    }
    const double v = actual.get<double>();
    if (expected.contains("value")) {
        const double want = expected["value"].get<double>();
        const double tol = expected.value("tol", 0.0);
        r.passed = std::abs(v - want) <= tol;
        r.detail = "expected " + expected["value"].dump() + " +/- " + nlohmann::json(tol).dump() + ", got " +
                   actual.dump();
    } else {
        const double lo = expected.value("min", -INFINITY);
        const double hi = expected.value("max", INFINITY);
        r.passed = v >= lo && v <= hi;
        r.detail = "expected within [" + nlohmann::json(lo).dump() + ", " + nlohmann::json(hi).dump() + "], got " +
                   actual.dump();
    }
    return r;
}

void validate_expectation(const nlohmann::json& e, const std::string& where)
{
    if (e.is_boolean() || e.is_string()) {
        return;
    }
    if (e.is_object() && e.contains("value") && e["value"].is_number() &&
        (!e.contains("tol") || e["tol"].is_number())) {
        return;
    }
    if (e.is_object() && (e.contains("min") || e.contains("max")) && (!e.contains("min") || e["min"].is_number()) &&
        (!e.contains("max") || e["max"].is_number())) {
        return;
    }
    throw SchemaError(where + ": expected a boolean, string, {value, tol} or {min, max}");
}

}  // namespace

Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir)
{
    using namespace json_util;
    if (!j.is_object()) {
        throw SchemaError("scenario: expected an object");
    }
    if (string(j, "schema", "scenario") != kSchema) {
        throw SchemaError(std::string("scenario.schema: expected \"") + kSchema + "\"");
    }
    reject_unknown(j, {"schema", "name", "description", "ticks", "initial_insertion_mm", "phantom", "commands",
                       "checkpoints", "expect_final"},
                   "scenario");
    Scenario s;
    s.name = string(j, "name", "scenario");
    s.description = j.contains("description") ? string(j, "description", "scenario") : "";
    if (!j.contains("ticks") || !non_negative_integer(j["ticks"])) {
        throw SchemaError("scenario.ticks: expected a non-negative integer");
    }
    s.ticks = j["ticks"].get<std::uint64_t>();
    if (j.contains("initial_insertion_mm")) {
        s.initial_insertion = 1e-3 * number(j, "initial_insertion_mm", "scenario");
    }
    if (j.contains("phantom")) {
        const std::filesystem::path p = string(j, "phantom", "scenario");
        s.phantom = p.is_absolute() ? p : base_dir / p;
    }
    if (j.contains("commands")) {
        if (!j["commands"].is_array()) {
            throw SchemaError("scenario.commands: expected an array");
        }
        std::uint64_t seq = 0;
        for (std::size_t k = 0; k < j["commands"].size(); ++k) {
            const auto& c = j["commands"][k];
            const std::string where = "scenario.commands[" + std::to_string(k) + "]";
            ScenarioCommand sc;
            sc.tick = tick_field(c, where);
            nlohmann::json cmd = c.contains("cmd") ? c["cmd"] : nlohmann::json::object();
            if (!cmd.is_object()) {
                throw SchemaError(where + ".cmd: expected an object");
            }
            cmd["type"] = "cmd";
            if (!cmd.contains("seq")) {
                cmd["seq"] = ++seq;
            }
            if (!cmd.contains("client_id")) {
                cmd["client_id"] = "scenario";
            }
            try {
                sc.command = std::get<Command>(protocol::parse_client_message(cmd.dump()));
            } catch (const SchemaError& e) {
                throw SchemaError(where + ": " + e.what());
            }
            if (k > 0 && sc.tick < s.commands.back().tick) {
                throw SchemaError(where + ".tick: commands must be ordered by tick");
            }
            s.commands.push_back(sc);
        }
    }
    if (j.contains("checkpoints")) {
        if (!j["checkpoints"].is_array()) {
            throw SchemaError("scenario.checkpoints: expected an array");
        }
        for (std::size_t k = 0; k < j["checkpoints"].size(); ++k) {
            const auto& c = j["checkpoints"][k];
            const std::string where = "scenario.checkpoints[" + std::to_string(k) + "]";
            Checkpoint cp;
            cp.tick = tick_field(c, where);
            if (cp.tick > s.ticks) {
                throw SchemaError(where + ".tick: beyond the scenario length");
            }
            if (!c.contains("expect") || !c["expect"].is_object()) {
                throw SchemaError(where + ".expect: expected an object");
            }
            for (const auto& [key, value] : c["expect"].items()) {
                validate_expectation(value, where + ".expect." + key);
            }
            cp.expect = c["expect"];
            s.checkpoints.push_back(cp);
        }
    }
    if (j.contains("expect_final")) {
        const auto& f = j["expect_final"];
        if (!f.is_object()) {
            throw SchemaError("scenario.expect_final: expected an object");
        }
        reject_unknown(f, {"tumor_reached", "no_collision"}, "scenario.expect_final");
        for (const char* key : {"tumor_reached", "no_collision"}) {
            if (f.contains(key) && !f[key].is_boolean()) {
                throw SchemaError(std::string("scenario.expect_final.") + key + ": expected a boolean");
            }
        }
        s.expect_tumor_reached = f.value("tumor_reached", false);
        s.expect_no_collision = f.value("no_collision", true);
    }
    return s;
}

Scenario load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw SchemaError("cannot open scenario file " + path.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("scenario " + path.string() + ": invalid JSON: " + e.what());
    }
    return scenario_from_json(j, path.parent_path());
}

std::filesystem::path find_scenario(const std::string& name_or_path)
{
    const std::filesystem::path direct(name_or_path);
    if (direct.extension() == ".json" && std::filesystem::exists(direct)) {
        return direct;
    }
    const std::filesystem::path bundled = data_dir() / "scenarios" / (name_or_path + ".json");
    if (std::filesystem::exists(bundled)) {
        return bundled;
    }
    throw InvalidParameter("unknown scenario: " + name_or_path);
}

nlohmann::json ReplayResult::summary(const Scenario& scenario) const
{
    nlohmann::json failed = nlohmann::json::array();
    for (const CheckResult& c : checks) {
        if (!c.passed) {
            failed.push_back({{"tick", c.tick}, {"field", c.field}, {"detail", c.detail}});
        }
    }
    return {{"scenario", scenario.name},
            {"ticks", final.tick},
            {"sim_time", final.sim_time},
            {"tumor_reached", final.tumor_reached},
            {"tumor_reached_at_any_tick", ever_reached},
            {"collision_ticks", collision_ticks},
            {"solver_warning_ticks", solver_warning_ticks},
            {"max_power", max_power},
            {"power_cap", final.power_cap},
            {"checkpoints_passed", checks.size() - failed.size()},
            {"checkpoints_total", checks.size()},
            {"failed_checks", failed},
            {"events", events.size()},
            {"passed", passed}};
}

ReplayResult replay(const Scenario& scenario, SessionSettings settings, std::ostream* stream)
{
    if (scenario.initial_insertion) {
        settings.config.teleop.initial_insertion = *scenario.initial_insertion;
    }
    SimSession session(std::move(settings));
    const auto decimation = static_cast<std::uint64_t>(
        std::max(1.0, std::round(session.config().teleop.tick_rate / session.config().teleop.publish_rate)));

    ReplayResult out;
    auto observe = [&](const Telemetry& t) {
        const nlohmann::json tj = protocol::to_json(t);
        out.max_power = std::max(out.max_power, t.total_power);
        out.collision_ticks += t.collision ? 1 : 0;
        out.solver_warning_ticks += t.solver_warning ? 1 : 0;
        out.ever_reached = out.ever_reached || t.tumor_reached;
        for (const Checkpoint& cp : scenario.checkpoints) {
            if (cp.tick == t.tick) {
                for (const auto& [key, value] : cp.expect.items()) {
                    out.checks.push_back(check_value(t.tick, key, value, tj));
                }
            }
        }
        if (stream) {
            for (const Event& e : session.take_events()) {
                *stream << protocol::dump_line(protocol::to_json(e)) << '\n';
            }
            if (t.tick % decimation == 0 || t.tick == scenario.ticks) {
                *stream << protocol::dump_line(tj) << '\n';
            }
        }
    };

    observe(session.latest());
    std::size_t next = 0;
    for (std::uint64_t tick = 0; tick < scenario.ticks; ++tick) {
        while (next < scenario.commands.size() && scenario.commands[next].tick == tick) {
            const Ack ack = session.handle_command(scenario.commands[next].command);
            if (stream) {
                *stream << protocol::dump_line(protocol::to_json(ack)) << '\n';
            }
            ++next;
        }
        observe(session.step());
    }
    out.final = session.latest();
    out.events = session.events();
    const bool checks_ok = std::all_of(out.checks.begin(), out.checks.end(), [](const CheckResult& c) { return c.passed; });
    out.passed = checks_ok && out.max_power <= out.final.power_cap &&
                 (!scenario.expect_tumor_reached || out.final.tumor_reached) &&
                 (!scenario.expect_no_collision || out.collision_ticks == 0);
    return out;
}

}  // namespace lorentz
