#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lorentz/actuation.hpp"
#include "lorentz/design.hpp"
#include "lorentz/rod.hpp"

namespace lorentz {

struct SafetyLimits {
    double power_cap = 1.2;    // [W], total over steering and grasper coils
    double current_cap = 0.3;  // [A], applied on top of each steering coil's own limit
};

struct DesignSettings {
    double total_length = 0.03;                   // [m]
    double target_angle = 1.5707963267948966;     // [rad]
    std::vector<double> ratios;                   // empty: default grid
};

struct TeleopSettings {
    double tick_rate = 50.0;        // [Hz]
    double publish_rate = 10.0;     // [Hz]
    double slew_rate = 0.5235987755982988;  // [rad/s], 30 deg/s
    double max_insert_speed = 5.0;  // [mm/s]
    double min_flexible_length = 1e-3;  // [m]
    double initial_insertion = 0.0;     // [m]
};

struct SystemConfig {
    RodParams rod = RodParams::defaults();
    FramePose base;  // control frame of the steerable section
    MagneticEnvironment env;
    std::vector<CoilSpec> steering_coils = table1_steering_coils();
    GrasperModel grasper = table1_grasper_model();
    SafetyLimits safety;
    DesignSettings design;
    TeleopSettings teleop;
    double max_insertion = 0.03;       // [m]
    std::filesystem::path phantom_path;  // empty: none

    // Steering coils with current limits reduced to the safety current cap.
    std::vector<CoilSpec> capped_steering_coils() const;
    void validate() const;
};

// Reads a config document. Relative paths inside it resolve against the file's directory.
SystemConfig load_config(const std::filesystem::path& path);
SystemConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json config_to_json(const SystemConfig& config);

// Directory with the bundled data files (table1.json, phantom, scenarios).
std::filesystem::path data_dir();

// $LORENTZ_ENDO_CONFIG if set, else the bundled table1.json.
std::filesystem::path default_config_path();

// Base pose from {origin, tangent, normal}: local z = tangent, local x = normal.
FramePose frame_from_json(const nlohmann::json& j, const std::string& where);

}  // namespace lorentz
