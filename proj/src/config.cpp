#include "lorentz/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "lorentz/errors.hpp"
#include "lorentz/json_util.hpp"

namespace lorentz {

namespace {

constexpr const char* kSchema = "lorentz-config/1";

void require_object(const nlohmann::json& j, const std::string& where)
{
    if (!j.is_object()) {
        throw SchemaError(where + ": expected an object");
    }
}

}  // namespace

std::vector<CoilSpec> SystemConfig::capped_steering_coils() const
{
    std::vector<CoilSpec> out = steering_coils;
    for (CoilSpec& c : out) {
        c.current_limit = std::min(c.current_limit, safety.current_cap);
    }
    return out;
}

void SystemConfig::validate() const
{
    rod.validate();
    env.validate();
    grasper.validate();
    if (steering_coils.empty()) {
        throw InvalidParameter("at least one steering coil is required");
    }
    for (const CoilSpec& c : steering_coils) {
        c.validate();
    }
    if (!is_rotation(base.rotation)) {
        throw InvalidParameter("base rotation is not orthonormal");
    }
    if (!(safety.power_cap > 0.0) || !(safety.current_cap >= 0.0)) {
        throw InvalidParameter("safety caps: power cap must be positive, current cap non-negative");
    }
    if (!(design.total_length > 0.0) || !(design.target_angle > 0.0)) {
        throw InvalidParameter("design total length and target angle must be positive");
    }
    if (!(teleop.tick_rate > 0.0) || !(teleop.publish_rate > 0.0) || teleop.publish_rate > teleop.tick_rate) {
        throw InvalidParameter("teleop rates must be positive with publish_rate <= tick_rate");
    }
    if (!(teleop.slew_rate > 0.0) || !(teleop.max_insert_speed >= 0.0)) {
        throw InvalidParameter("teleop slew rate must be positive");
    }
    if (!(teleop.min_flexible_length > 0.0) || teleop.min_flexible_length > rod.free_length) {
        throw InvalidParameter("teleop min_flexible_length must lie in (0, free_length]");
    }
    if (!(max_insertion > 0.0) || teleop.initial_insertion < 0.0 || teleop.initial_insertion > max_insertion) {
        throw InvalidParameter("insertion lengths must satisfy 0 <= initial <= max, max > 0");
    }
}

FramePose frame_from_json(const nlohmann::json& j, const std::string& where)
{
    using namespace json_util;
    require_object(j, where);
    json_util::reject_unknown(j, {"origin", "tangent", "normal"}, where);
    FramePose f;
    f.label = FrameLabel::control;
    if (j.contains("origin")) {
        f.origin = vec3(j, "origin", where);
    }
    const Vec3 t = j.contains("tangent") ? vec3(j, "tangent", where) : Vec3::UnitZ();
    const Vec3 n = j.contains("normal") ? vec3(j, "normal", where) : Vec3::UnitX();
    if (t.norm() == 0.0) {
        throw SchemaError(where + ".tangent: must be non-zero");
    }
    const Vec3 z = t.normalized();
    const Vec3 x_raw = n - n.dot(z) * z;
    if (x_raw.norm() < 1e-9 * std::max(1.0, n.norm())) {
        throw SchemaError(where + ".normal: must not be parallel to the tangent");
    }
    const Vec3 x = x_raw.normalized();
    f.rotation.col(0) = x;
    f.rotation.col(1) = z.cross(x);
    f.rotation.col(2) = z;
    return f;
}

SystemConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir)
{
    using namespace json_util;
    require_object(j, "config");
    json_util::reject_unknown(j,
                   {"schema", "description", "rod", "base", "environment", "coils", "grasper", "safety", "design",
                    "teleop", "max_insertion", "phantom"},
                   "config");
    if (string(j, "schema", "config") != kSchema) {
        throw SchemaError(std::string("config.schema: expected \"") + kSchema + "\"");
    }

    SystemConfig c;
    if (j.contains("rod")) {
        c.rod = rod_params_from_json(j["rod"]);
    }
    if (j.contains("base")) {
        c.base = frame_from_json(j["base"], "config.base");
    }
    if (j.contains("environment")) {
        require_object(j["environment"], "config.environment");
        c.env = environment_from_json(j["environment"]);
    }
    if (j.contains("coils")) {
        const auto& coils = j["coils"];
        if (!coils.is_array() || coils.empty()) {
            throw SchemaError("config.coils: expected a non-empty array");
        }
        c.steering_coils.clear();
        for (std::size_t k = 0; k < coils.size(); ++k) {
            CoilSpec coil = coil_from_json(coils[k], "config.coils[" + std::to_string(k) + "]");
            if (coil.kind == CoilKind::grasper) {
                throw SchemaError("config.coils[" + std::to_string(k) + "]: grasper coils belong in config.grasper");
            }
            c.steering_coils.push_back(std::move(coil));
        }
    }
    if (j.contains("grasper")) {
        const auto& g = j["grasper"];
        require_object(g, "config.grasper");
        json_util::reject_unknown(g, {"coil", "lever_arm", "rest_angle", "rest_angle_deg", "calibration_factor"},
                       "config.grasper");
        if (g.contains("coil")) {
            c.grasper.coil = coil_from_json(g["coil"], "config.grasper.coil");
            if (c.grasper.coil.kind != CoilKind::grasper) {
                throw SchemaError("config.grasper.coil.kind: expected grasper");
            }
            c.grasper.lever_arm = std::get<GrasperGeometry>(c.grasper.coil.geometry).length;
        }
        c.grasper.lever_arm = optional_number(g, "lever_arm", "config.grasper").value_or(c.grasper.lever_arm);
        c.grasper.rest_angle_to_B0 =
            optional_angle(g, "rest_angle", "config.grasper").value_or(c.grasper.rest_angle_to_B0);
        c.grasper.calibration_factor =
            optional_number(g, "calibration_factor", "config.grasper").value_or(c.grasper.calibration_factor);
    }
    if (j.contains("safety")) {
        const auto& s = j["safety"];
        require_object(s, "config.safety");
        json_util::reject_unknown(s, {"power_cap", "current_cap"}, "config.safety");
        c.safety.power_cap = optional_number(s, "power_cap", "config.safety").value_or(c.safety.power_cap);
        c.safety.current_cap = optional_number(s, "current_cap", "config.safety").value_or(c.safety.current_cap);
    }
    if (j.contains("design")) {
        const auto& d = j["design"];
        require_object(d, "config.design");
        json_util::reject_unknown(d, {"total_length", "target_angle", "target_angle_deg", "ratios"}, "config.design");
        c.design.total_length = optional_number(d, "total_length", "config.design").value_or(c.design.total_length);
        c.design.target_angle =
            optional_angle(d, "target_angle", "config.design").value_or(c.design.target_angle);
        if (d.contains("ratios")) {
            if (!d["ratios"].is_array()) {
                throw SchemaError("config.design.ratios: expected an array of numbers");
            }
            for (std::size_t k = 0; k < d["ratios"].size(); ++k) {
                if (!d["ratios"][k].is_number()) {
                    throw SchemaError("config.design.ratios[" + std::to_string(k) + "]: expected a number");
                }
                c.design.ratios.push_back(d["ratios"][k].get<double>());
            }
        }
    }
    if (j.contains("teleop")) {
        const auto& t = j["teleop"];
        const std::string w = "config.teleop";
        require_object(t, w);
        json_util::reject_unknown(t,
                       {"tick_rate", "publish_rate", "slew_rate", "slew_rate_deg", "max_insert_speed",
                        "min_flexible_length", "initial_insertion"},
                       w);
        TeleopSettings& s = c.teleop;
        s.tick_rate = optional_number(t, "tick_rate", w).value_or(s.tick_rate);
        s.publish_rate = optional_number(t, "publish_rate", w).value_or(s.publish_rate);
        s.slew_rate = optional_angle(t, "slew_rate", w).value_or(s.slew_rate);
        s.max_insert_speed = optional_number(t, "max_insert_speed", w).value_or(s.max_insert_speed);
        s.min_flexible_length = optional_number(t, "min_flexible_length", w).value_or(s.min_flexible_length);
        s.initial_insertion = optional_number(t, "initial_insertion", w).value_or(s.initial_insertion);
    }
    c.max_insertion = optional_number(j, "max_insertion", "config").value_or(c.max_insertion);
    if (j.contains("phantom")) {
        const std::filesystem::path p = string(j, "phantom", "config");
        c.phantom_path = p.is_absolute() ? p : base_dir / p;
    }
    try {
        c.validate();
    } catch (const InvalidParameter& e) {
        throw SchemaError(std::string("config: ") + e.what());
    }
    return c;
}

nlohmann::json config_to_json(const SystemConfig& c)
{
    using json_util::to_json;
    nlohmann::json coils = nlohmann::json::array();
    for (const CoilSpec& coil : c.steering_coils) {
        coils.push_back(coil_to_json(coil));
    }
    nlohmann::json out = {
        {"schema", kSchema},
        {"rod", rod_params_to_json(c.rod)},
        {"base", {{"origin", to_json(c.base.origin)},
                  {"tangent", to_json(Vec3(c.base.rotation.col(2)))},
                  {"normal", to_json(Vec3(c.base.rotation.col(0)))}}},
        {"environment", {{"B0", to_json(c.env.B0)}}},
        {"coils", coils},
        {"grasper", {{"coil", coil_to_json(c.grasper.coil)},
                     {"lever_arm", c.grasper.lever_arm},
                     {"rest_angle", c.grasper.rest_angle_to_B0},
                     {"calibration_factor", c.grasper.calibration_factor}}},
        {"safety", {{"power_cap", c.safety.power_cap}, {"current_cap", c.safety.current_cap}}},
        {"design", {{"total_length", c.design.total_length}, {"target_angle", c.design.target_angle},
                    {"ratios", c.design.ratios}}},
        {"teleop", {{"tick_rate", c.teleop.tick_rate},
                    {"publish_rate", c.teleop.publish_rate},
                    {"slew_rate", c.teleop.slew_rate},
                    {"max_insert_speed", c.teleop.max_insert_speed},
                    {"min_flexible_length", c.teleop.min_flexible_length},
                    {"initial_insertion", c.teleop.initial_insertion}}},
        {"max_insertion", c.max_insertion},
    };
    if (!c.phantom_path.empty()) {
        out["phantom"] = c.phantom_path.string();
    }
    return out;
}

SystemConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw SchemaError("cannot open config file " + path.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("config " + path.string() + ": invalid JSON: " + e.what());
    }
    return config_from_json(j, path.parent_path());
}

std::filesystem::path data_dir()
{
    if (const char* env = std::getenv("LORENTZ_ENDO_DATA")) {
        return env;
    }
    return LORENTZ_DATA_DIR;
}

std::filesystem::path default_config_path()
{
    if (const char* env = std::getenv("LORENTZ_ENDO_CONFIG"); env && *env) {
        return env;
    }
    return data_dir() / "table1.json";
}

}  // namespace lorentz
