#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lorentz/so3.hpp"

namespace lorentz {

inline constexpr double kCopperResistivity = 1.68e-8;  // Ohm m at 20 C

struct MagneticEnvironment {
    Vec3 B0{0.0, 0.0, 7.0};  // [T]

    void validate() const;
    Vec3 direction() const { return B0.normalized(); }
};

enum class WireShape { flat, round };

struct WireSpec {
    WireShape shape = WireShape::flat;
    double width = 40e-6;      // flat: in-plane width [m]
    double thickness = 18e-6;  // flat: thickness [m]
    double diameter = 80e-6;   // round [m]
    double gap = 40e-6;        // spacing between adjacent turns [m]
    double resistivity = kCopperResistivity;

    void validate() const;
    double cross_section() const;
    // Centre-to-centre distance of adjacent turns in one layer.
    double pitch() const;
};

enum class CoilKind { axial, saddle, grasper };

// Solenoid around the tube; `layers` turns share each axial position.
struct AxialGeometry {
    double diameter{};  // D_c
    double length{};    // L_c
    int layers = 1;
};

// Identical saddle loops spanning `arc_angle` of the tube circumference over `length`.
struct SaddleGeometry {
    double diameter{};        // D_c
    double width{};           // W_c (trace band, informational)
    double length{};          // L_c
    double arc_angle{};       // phi
    double core_width{};      // C_cw (informational)
};

// Rectangular grasper coil; turns spiral inward within `core_width`, then stack in layers.
struct GrasperGeometry {
    double width{};       // W_G
    double length{};      // L_G
    double gap{};         // t_G
    double core_width{};  // G_cw
};

using CoilGeometry = std::variant<AxialGeometry, SaddleGeometry, GrasperGeometry>;

struct CoilSpec {
    std::string name;
    CoilKind kind = CoilKind::axial;
    int turns = 1;
    CoilGeometry geometry;
    WireSpec wire;
    Vec3 moment_axis = Vec3::UnitZ();  // unit, tip frame
    std::optional<double> resistance_override;
    double current_limit = 0.3;  // [A]

    void validate() const;
};

struct ActuationCommand {
    std::vector<double> currents;  // [A], one per coil
    double timestamp = 0.0;        // [s]

    // Throws InvalidParameter if a current exceeds its coil's limit.
    void validate(std::span<const CoilSpec> coils) const;
};

struct PowerReport {
    std::vector<double> per_coil;  // [W]
    double total = 0.0;            // [W]
};

// F = i L x B0
Vec3 wire_lorentz_force(double current, const Vec3& wire_vector, const MagneticEnvironment& env);

// Effective area-turns product |m| / I [m^2]. Throws GeometryError when an inner turn vanishes.
double coil_moment_area(const CoilSpec& coil);

// Magnetic moment in the tip frame [A m^2].
Vec3 coil_moment(const CoilSpec& coil, double current);

// T = (tip_R * sum m_j) x B0, inertial frame.
Vec3 lorentz_torque(std::span<const Vec3> moments, const Mat3& tip_R, const MagneticEnvironment& env);

// Torque of the given currents through the given coils at tip orientation tip_R.
Vec3 coil_torque(std::span<const CoilSpec> coils, std::span<const double> currents, const Mat3& tip_R,
                 const MagneticEnvironment& env);

double coil_wire_length(const CoilSpec& coil);
double coil_resistance(const CoilSpec& coil);

PowerReport joule_power(const ActuationCommand& cmd, std::span<const CoilSpec> coils);
double total_power(std::span<const double> currents, std::span<const CoilSpec> coils);

// Parameters of the fabricated tri-coil endoscope and grasper.
CoilSpec table1_axial_coil();
CoilSpec table1_saddle_coil(const std::string& name, const Vec3& axis);
CoilSpec table1_grasper_coil();
std::vector<CoilSpec> table1_steering_coils();

CoilSpec coil_from_json(const nlohmann::json& j, const std::string& where);
nlohmann::json coil_to_json(const CoilSpec& coil);
MagneticEnvironment environment_from_json(const nlohmann::json& j);

const char* to_string(CoilKind kind);

}  // namespace lorentz
