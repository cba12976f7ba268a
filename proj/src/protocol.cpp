#include "lorentz/protocol.hpp"

#include <Eigen/Geometry>

#include "lorentz/errors.hpp"
#include "lorentz/json_util.hpp"
#include "lorentz/steering.hpp"

namespace lorentz::protocol {

namespace {

using nlohmann::json;

json point(const Vec2& p)
{
    return json::array({p.x(), p.y()});
}

std::optional<double> optional_field(const json& j, const char* key)
{
    return json_util::optional_number(j, key, "cmd");
}

}  // namespace

ClientMessage parse_client_message(const std::string& line)
{
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("message is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw SchemaError("message: expected a JSON object");
    }
    const std::string type = json_util::string(j, "type", "message");
    if (type == "hello") {
        json_util::reject_unknown(j, {"type", "schema", "role", "client_id"}, "hello");
        Hello h;
        if (j.contains("schema") && json_util::string(j, "schema", "hello") != kSchema) {
            throw SchemaError(std::string("hello.schema: expected \"") + kSchema + "\"");
        }
        const std::string role = j.contains("role") ? json_util::string(j, "role", "hello") : "observer";
        if (role == "operator") {
            h.role = Role::operator_role;
        } else if (role == "observer") {
            h.role = Role::observer;
        } else {
            throw SchemaError("hello.role: expected \"operator\" or \"observer\"");
        }
        h.client_id = json_util::string(j, "client_id", "hello");
        if (h.client_id.empty()) {
            throw SchemaError("hello.client_id: must not be empty");
        }
        return h;
    }
    if (type == "cmd") {
        json_util::reject_unknown(j, {"type", "client_id", "seq", "insert_velocity", "target_bend", "bend_azimuth",
                                      "coils_enabled", "grasper_current"},
                                  "cmd");
        Command c;
        if (j.contains("client_id")) {
            c.client_id = json_util::string(j, "client_id", "cmd");
        }
        if (!j.contains("seq") || !j["seq"].is_number_unsigned()) {
            throw SchemaError("cmd.seq: expected a non-negative integer");
        }
        c.sequence = j["seq"].get<std::uint64_t>();
        c.insert_velocity = optional_field(j, "insert_velocity");
        c.target_bend = optional_field(j, "target_bend");
        c.bend_azimuth = optional_field(j, "bend_azimuth");
        c.grasper_current = optional_field(j, "grasper_current");
        if (j.contains("coils_enabled")) {
            if (!j["coils_enabled"].is_boolean()) {
                throw SchemaError("cmd.coils_enabled: expected a boolean");
            }
            c.coils_enabled = j["coils_enabled"].get<bool>();
        }
        return c;
    }
    throw SchemaError("message.type: unknown message type \"" + type + "\"");
}

nlohmann::json hello_ack(const Hello& hello, const SimSession& session)
{
    const SystemConfig& cfg = session.config();
    json caps = json::object();
    for (const CoilSpec& c : session.steering_coils()) {
        caps[c.name] = c.current_limit;
    }
    return {{"type", "ack"},
            {"ack", "hello"},
            {"schema", kSchema},
            {"client_id", hello.client_id},
            {"role", hello.role == Role::operator_role ? "operator" : "observer"},
            {"config",
             {{"power_cap", cfg.safety.power_cap},
              {"current_caps", caps},
              {"grasper_current_max", session.max_grasper_current()},
              {"tick_rate", cfg.teleop.tick_rate},
              {"publish_rate", cfg.teleop.publish_rate},
              {"max_bend", kMaxBend},
              {"max_insert_speed", cfg.teleop.max_insert_speed},
              {"max_insertion_mm", 1e3 * cfg.max_insertion},
              {"phantom", phantom_to_json(session.phantom())}}}};
}

nlohmann::json to_json(const Ack& ack)
{
    json j = {{"type", "ack"},
              {"ack", "cmd"},
              {"client_id", ack.client_id},
              {"seq", ack.sequence},
              {"status", to_string(ack.status)}};
    if (!ack.reason.empty()) {
        j["reason"] = ack.reason;
    }
    json applied = json::object();
    for (const auto& [k, v] : ack.applied) {
        applied[k] = v;
    }
    if (ack.coils_enabled) {
        applied["coils_enabled"] = *ack.coils_enabled;
    }
    j["applied"] = applied;
    j["clamped"] = ack.clamped;
    return j;
}

nlohmann::json to_json(const Event& e)
{
    return {{"type", "event"}, {"tick", e.tick}, {"sim_time", e.sim_time}, {"kind", e.kind}, {"message", e.message}};
}

nlohmann::json to_json(const Telemetry& t)
{
    json polyline = json::array();
    for (const Vec2& p : t.polyline) {
        polyline.push_back(point(p));
    }
    Eigen::Quaterniond q(t.tip_rotation);
    if (q.w() < 0.0) {
        q.coeffs() = -q.coeffs();
    }
    return {{"type", "telemetry"},
            {"schema", kSchema},
            {"tick", t.tick},
            {"sim_time", t.sim_time},
            {"mode", to_string(t.mode)},
            {"inserted_length_mm", t.inserted_length},
            {"flexible_length_mm", t.flexible_length},
            {"commanded_bend", t.commanded_bend},
            {"commanded_azimuth", t.commanded_azimuth},
            {"bend", t.bend},
            {"polyline", polyline},
            {"shaft", json::array({point(t.shaft_start), point(t.shaft_end)})},
            {"tip",
             {{"position", point(t.tip)},
              {"direction", point(t.tip_direction)},
              {"world", json_util::to_json(t.tip_position)},
              {"quaternion", json::array({q.w(), q.x(), q.y(), q.z()})}}},
            {"coils", t.coil_names},
            {"currents", t.currents},
            {"grasper_current", t.grasper_current},
            {"steering_power", t.steering_power},
            {"total_power", t.total_power},
            {"power_cap", t.power_cap},
            {"imaging_distorted", t.imaging_distorted},
            {"collision", t.collision},
            {"collision_point", t.collision ? point(t.collision_point) : json(nullptr)},
            {"tumor_reached", t.tumor_reached},
            {"tumor_distance_mm", t.tumor_distance},
            {"grasper_force", t.grasper_force},
            {"saturated", t.saturated},
            {"solver_warning", t.solver_warning},
            {"warnings", t.warnings}};
}

nlohmann::json to_json(const Command& c)
{
    json j = {{"type", "cmd"}, {"seq", c.sequence}};
    if (!c.client_id.empty()) {
        j["client_id"] = c.client_id;
    }
    if (c.insert_velocity) {
        j["insert_velocity"] = *c.insert_velocity;
    }
    if (c.target_bend) {
        j["target_bend"] = *c.target_bend;
    }
    if (c.bend_azimuth) {
        j["bend_azimuth"] = *c.bend_azimuth;
    }
    if (c.coils_enabled) {
        j["coils_enabled"] = *c.coils_enabled;
    }
    if (c.grasper_current) {
        j["grasper_current"] = *c.grasper_current;
    }
    return j;
}

nlohmann::json error_message(const std::string& message)
{
    return {{"type", "error"}, {"message", message}};
}

std::string dump_line(const nlohmann::json& j)
{
    return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace lorentz::protocol
