#include "lorentz/actuation.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <nlohmann/json.hpp>

#include "lorentz/errors.hpp"
#include "lorentz/json_util.hpp"

namespace lorentz {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_positive(double v, const std::string& what)
{
    if (!(v > 0.0) || !std::isfinite(v)) {
        throw InvalidParameter(what + " must be positive");
    }
}

int grasper_turns_per_layer(const GrasperGeometry& g, double pitch)
{
    const int fit = static_cast<int>(std::floor(g.core_width / pitch + 1e-9));
    return fit < 1 ? 1 : fit;
}

// Inset of turn k from the outer outline of a grasper coil.
double grasper_inset(const GrasperGeometry& g, double pitch, int k)
{
    const int j = k % grasper_turns_per_layer(g, pitch);
    return 2.0 * j * pitch;
}

double grasper_pitch(const CoilSpec& coil, const GrasperGeometry& g)
{
    return (coil.wire.shape == WireShape::flat ? coil.wire.width : coil.wire.diameter) + g.gap;
}

}  // namespace

void MagneticEnvironment::validate() const
{
    if (!B0.allFinite() || !(B0.norm() > 0.0)) {
        throw InvalidParameter("B0 must be a finite non-zero vector");
    }
}

void WireSpec::validate() const
{
    if (shape == WireShape::flat) {
        require_positive(width, "wire width");
        require_positive(thickness, "wire thickness");
    } else {
        require_positive(diameter, "wire diameter");
    }
    if (!(gap >= 0.0)) {
        throw InvalidParameter("wire gap must be non-negative");
    }
    require_positive(resistivity, "wire resistivity");
}

double WireSpec::cross_section() const
{
    return shape == WireShape::flat ? width * thickness : std::numbers::pi * 0.25 * diameter * diameter;
}

double WireSpec::pitch() const
{
    return (shape == WireShape::flat ? width : diameter) + gap;
}

void CoilSpec::validate() const
{
    if (turns < 1) {
        throw InvalidParameter("coil " + name + ": turns must be >= 1");
    }
    if (std::abs(moment_axis.norm() - 1.0) > 1e-9) {
        throw InvalidParameter("coil " + name + ": moment axis must be a unit vector");
    }
    if (!(current_limit >= 0.0)) {
        throw InvalidParameter("coil " + name + ": current limit must be non-negative");
    }
    if (resistance_override) {
        require_positive(*resistance_override, "coil " + name + " resistance");
    }
    wire.validate();
    std::visit(overloaded{
                   [&](const AxialGeometry& g) {
                       require_positive(g.diameter, "coil " + name + " diameter");
                       require_positive(g.length, "coil " + name + " length");
                       if (g.layers < 1) {
                           throw InvalidParameter("coil " + name + ": layers must be >= 1");
                       }
                   },
                   [&](const SaddleGeometry& g) {
                       require_positive(g.diameter, "coil " + name + " diameter");
                       require_positive(g.length, "coil " + name + " length");
                       require_positive(g.arc_angle, "coil " + name + " arc angle");
                   },
                   [&](const GrasperGeometry& g) {
                       require_positive(g.width, "coil " + name + " width");
                       require_positive(g.length, "coil " + name + " length");
                   },
               },
               geometry);
}

void ActuationCommand::validate(std::span<const CoilSpec> coils) const
{
    if (currents.size() != coils.size()) {
        throw InvalidParameter("command has " + std::to_string(currents.size()) + " currents for " +
                               std::to_string(coils.size()) + " coils");
    }
    for (std::size_t j = 0; j < coils.size(); ++j) {
        if (!std::isfinite(currents[j]) || std::abs(currents[j]) > coils[j].current_limit) {
            throw InvalidParameter("current for coil " + coils[j].name + " exceeds its limit");
        }
    }
}

Vec3 wire_lorentz_force(double current, const Vec3& wire_vector, const MagneticEnvironment& env)
{
    return current * wire_vector.cross(env.B0);
}

double coil_moment_area(const CoilSpec& coil)
{
    return std::visit(
        overloaded{
            [&](const AxialGeometry& g) {
                const double r = 0.5 * g.diameter;
                return coil.turns * std::numbers::pi * r * r;
            },
            [&](const SaddleGeometry& g) {
                return coil.turns * g.diameter * std::sin(0.5 * g.arc_angle) * g.length;
            },
            [&](const GrasperGeometry& g) {
                const double p = grasper_pitch(coil, g);
                double sum = 0.0;
                for (int k = 0; k < coil.turns; ++k) {
                    const double inset = grasper_inset(g, p, k);
                    const double w = g.width - inset;
                    const double l = g.length - inset;
                    if (w <= 0.0 || l <= 0.0) {
                        throw GeometryError("coil " + coil.name + ": turn " + std::to_string(k) +
                                                " has non-positive inner dimension",
                                            k);
                    }
                    sum += w * l;
                }
                return sum;
            },
        },
        coil.geometry);
}

Vec3 coil_moment(const CoilSpec& coil, double current)
{
    return coil_moment_area(coil) * current * coil.moment_axis;
}

Vec3 lorentz_torque(std::span<const Vec3> moments, const Mat3& tip_R, const MagneticEnvironment& env)
{
    Vec3 total = Vec3::Zero();
    for (const Vec3& m : moments) {
        total += m;
    }
    return (tip_R * total).cross(env.B0);
}

Vec3 coil_torque(std::span<const CoilSpec> coils, std::span<const double> currents, const Mat3& tip_R,
                 const MagneticEnvironment& env)
{
    Vec3 total = Vec3::Zero();
    for (std::size_t j = 0; j < coils.size(); ++j) {
        total += coil_moment(coils[j], currents[j]);
    }
    return lorentz_torque(std::span<const Vec3>(&total, 1), tip_R, env);
}

double coil_wire_length(const CoilSpec& coil)
{
    return std::visit(overloaded{
                          [&](const AxialGeometry& g) { return coil.turns * std::numbers::pi * g.diameter; },
                          [&](const SaddleGeometry& g) {
                              return coil.turns * (2.0 * g.length + g.arc_angle * g.diameter);
                          },
                          [&](const GrasperGeometry& g) {
                              const double p = grasper_pitch(coil, g);
                              double sum = 0.0;
                              for (int k = 0; k < coil.turns; ++k) {
                                  const double inset = grasper_inset(g, p, k);
                                  sum += 2.0 * (g.width - inset) + 2.0 * (g.length - inset);
                              }
                              return sum;
                          },
                      },
                      coil.geometry);
}

double coil_resistance(const CoilSpec& coil)
{
    if (coil.resistance_override) {
        return *coil.resistance_override;
    }
    const double a = coil.wire.cross_section();
    if (!(a > 0.0)) {
        throw InvalidParameter("coil " + coil.name + ": zero wire cross-section");
    }
    return coil.wire.resistivity * coil_wire_length(coil) / a;
}

PowerReport joule_power(const ActuationCommand& cmd, std::span<const CoilSpec> coils)
{
    PowerReport report;
    report.per_coil.resize(coils.size(), 0.0);
    for (std::size_t j = 0; j < coils.size() && j < cmd.currents.size(); ++j) {
        const double I = cmd.currents[j];
        report.per_coil[j] = I * I * coil_resistance(coils[j]);
        report.total += report.per_coil[j];
    }
    return report;
}

double total_power(std::span<const double> currents, std::span<const CoilSpec> coils)
{
    double p = 0.0;
    for (std::size_t j = 0; j < coils.size() && j < currents.size(); ++j) {
        p += currents[j] * currents[j] * coil_resistance(coils[j]);
    }
    return p;
}

CoilSpec table1_axial_coil()
{
    CoilSpec c;
    c.name = "axial";
    c.kind = CoilKind::axial;
    c.turns = 250;
    c.geometry = AxialGeometry{3.5e-3, 10e-3, 3};
    c.wire.shape = WireShape::round;
    c.wire.diameter = 80e-6;
    c.wire.gap = 40e-6;
    c.moment_axis = Vec3::UnitZ();
    c.current_limit = 0.3;
    return c;
}

CoilSpec table1_saddle_coil(const std::string& name, const Vec3& axis)
{
    CoilSpec c;
    c.name = name;
    c.kind = CoilKind::saddle;
    c.turns = 7;
    c.geometry = SaddleGeometry{3.5e-3, 0.76e-3, 10e-3, std::numbers::pi, 150e-6};
    c.wire.shape = WireShape::flat;
    c.wire.width = 40e-6;
    c.wire.thickness = 18e-6;
    c.wire.gap = 40e-6;
    c.moment_axis = axis;
    c.current_limit = 0.3;
    return c;
}

CoilSpec table1_grasper_coil()
{
    CoilSpec c;
    c.name = "grasper";
    c.kind = CoilKind::grasper;
    c.turns = 20;
    c.geometry = GrasperGeometry{3.1e-3, 10e-3, 15e-6, 100e-6};
    c.wire.shape = WireShape::flat;
    c.wire.width = 40e-6;
    c.wire.thickness = 18e-6;
    c.wire.gap = 15e-6;
    c.moment_axis = Vec3::UnitX();
    c.current_limit = 0.5;
    return c;
}

std::vector<CoilSpec> table1_steering_coils()
{
    return {table1_axial_coil(), table1_saddle_coil("saddle_x", Vec3::UnitX()),
            table1_saddle_coil("saddle_y", Vec3::UnitY())};
}

const char* to_string(CoilKind kind)
{
    switch (kind) {
    case CoilKind::axial:
        return "axial";
    case CoilKind::saddle:
        return "saddle";
    case CoilKind::grasper:
        return "grasper";
    }
    return "?";
}

CoilSpec coil_from_json(const nlohmann::json& j, const std::string& where)
{
    using namespace json_util;
    if (!j.is_object()) {
        throw SchemaError(where + ": expected an object");
    }
    reject_unknown(j, {"name", "kind", "turns", "current_limit", "moment_axis", "resistance", "wire", "geometry"}, where);
    CoilSpec c;
    c.name = string(j, "name", where);
    const std::string kind = string(j, "kind", where);
    c.turns = integer(j, "turns", where);
    c.current_limit = number(j, "current_limit", where);
    c.moment_axis = vec3(j, "moment_axis", where);
    if (std::abs(c.moment_axis.norm() - 1.0) > 1e-9) {
        throw SchemaError(where + ".moment_axis: must be a unit vector");
    }
    c.resistance_override = optional_number(j, "resistance", where);

    if (!j.contains("wire") || !j["wire"].is_object()) {
        throw SchemaError(where + ".wire: missing object");
    }
    const auto& w = j["wire"];
    const std::string ww = where + ".wire";
    const std::string shape = string(w, "shape", ww);
    if (shape == "flat") {
        reject_unknown(w, {"shape", "width", "thickness", "gap", "resistivity"}, ww);
        c.wire.shape = WireShape::flat;
        c.wire.width = number(w, "width", ww);
        c.wire.thickness = number(w, "thickness", ww);
    } else if (shape == "round") {
        reject_unknown(w, {"shape", "diameter", "gap", "resistivity"}, ww);
        c.wire.shape = WireShape::round;
        c.wire.diameter = number(w, "diameter", ww);
    } else {
        throw SchemaError(ww + ".shape: expected \"flat\" or \"round\"");
    }
    c.wire.gap = number(w, "gap", ww);
    c.wire.resistivity = optional_number(w, "resistivity", ww).value_or(kCopperResistivity);

    const std::string gw = where + ".geometry";
    if (!j.contains("geometry") || !j["geometry"].is_object()) {
        throw SchemaError(gw + ": missing object");
    }
    const auto& g = j["geometry"];
    if (kind == "axial") {
        c.kind = CoilKind::axial;
        reject_unknown(g, {"diameter", "length", "layers"}, gw);
        AxialGeometry a;
        a.diameter = number(g, "diameter", gw);
        a.length = number(g, "length", gw);
        a.layers = g.contains("layers") ? integer(g, "layers", gw) : 1;
        c.geometry = a;
    } else if (kind == "saddle") {
        c.kind = CoilKind::saddle;
        reject_unknown(g, {"diameter", "width", "length", "arc_angle", "arc_angle_deg", "core_width"}, gw);
        SaddleGeometry s;
        s.diameter = number(g, "diameter", gw);
        s.width = optional_number(g, "width", gw).value_or(0.0);
        s.length = number(g, "length", gw);
        s.arc_angle = optional_angle(g, "arc_angle", gw).value_or(std::numbers::pi);
        s.core_width = optional_number(g, "core_width", gw).value_or(0.0);
        c.geometry = s;
    } else if (kind == "grasper") {
        c.kind = CoilKind::grasper;
        reject_unknown(g, {"width", "length", "gap", "core_width"}, gw);
        GrasperGeometry gr;
        gr.width = number(g, "width", gw);
        gr.length = number(g, "length", gw);
        gr.gap = optional_number(g, "gap", gw).value_or(c.wire.gap);
        gr.core_width = optional_number(g, "core_width", gw).value_or(0.0);
        c.geometry = gr;
    } else {
        throw SchemaError(where + ".kind: expected axial, saddle or grasper");
    }
    try {
        c.validate();
    } catch (const InvalidParameter& e) {
        throw SchemaError(where + ": " + e.what());
    }
    return c;
}

nlohmann::json coil_to_json(const CoilSpec& c)
{
    nlohmann::json wire = {{"shape", c.wire.shape == WireShape::flat ? "flat" : "round"},
                           {"gap", c.wire.gap},
                           {"resistivity", c.wire.resistivity}};
    if (c.wire.shape == WireShape::flat) {
        wire["width"] = c.wire.width;
        wire["thickness"] = c.wire.thickness;
    } else {
        wire["diameter"] = c.wire.diameter;
    }
    nlohmann::json geometry = std::visit(
        overloaded{
            [](const AxialGeometry& g) -> nlohmann::json {
                return {{"diameter", g.diameter}, {"length", g.length}, {"layers", g.layers}};
            },
            [](const SaddleGeometry& g) -> nlohmann::json {
                return {{"diameter", g.diameter}, {"width", g.width}, {"length", g.length},
                        {"arc_angle", g.arc_angle}, {"core_width", g.core_width}};
            },
            [](const GrasperGeometry& g) -> nlohmann::json {
                return {{"width", g.width}, {"length", g.length}, {"gap", g.gap}, {"core_width", g.core_width}};
            },
        },
        c.geometry);
    nlohmann::json out = {{"name", c.name},
                          {"kind", to_string(c.kind)},
                          {"turns", c.turns},
                          {"current_limit", c.current_limit},
                          {"moment_axis", json_util::to_json(c.moment_axis)},
                          {"wire", wire},
                          {"geometry", geometry}};
    if (c.resistance_override) {
        out["resistance"] = *c.resistance_override;
    }
    return out;
}

MagneticEnvironment environment_from_json(const nlohmann::json& j)
{
    MagneticEnvironment env;
    json_util::reject_unknown(j, {"B0"}, "environment");
    if (j.contains("B0")) {
        env.B0 = json_util::vec3(j, "B0", "environment");
    }
    try {
        env.validate();
    } catch (const InvalidParameter& e) {
        throw SchemaError(std::string("environment: ") + e.what());
    }
    return env;
}

}  // namespace lorentz
