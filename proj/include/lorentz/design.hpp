#pragma once

#include <span>
#include <string>
#include <vector>

#include "lorentz/actuation.hpp"
#include "lorentz/rod.hpp"

namespace lorentz {

// Paper's top ablation setting, 250 mA through 11 Ohm.
inline constexpr double kAblationThreshold = 0.6875;  // [W]

struct DesignPoint {
    double ratio = 0.0;         // coil length / total length
    double coil_length = 0.0;   // [m]
    double free_length = 0.0;   // [m]
    int axial_turns = 0;
    double axial_resistance = 0.0;  // [Ohm]
    std::vector<double> currents;   // [A], one per steering coil
    double power = 0.0;             // [W] at the target bend, current limits ignored
    bool feasible = false;          // target reached within every coil's current limit
    std::string note;
};

struct DesignSweep {
    std::vector<DesignPoint> points;  // sorted by ratio
    double target_angle = 0.0;        // [rad]
    double optimum_ratio = 0.0;       // argmin of power over feasible points
    double optimum_power = 0.0;       // [W]
    bool has_optimum = false;

    std::vector<double> ratio_grid() const;
    std::vector<double> power_at_target() const;
};

struct DesignOptions {
    std::vector<double> ratios;  // empty: 0.05, 0.10, ..., 0.95
    FramePose base;              // rod base used for the bend
};

// Steering coils re-dimensioned for coil length `coil_length`: every coil spans the new
// length and the axial coil keeps its winding pitch, so its turn count scales with length.
std::vector<CoilSpec> coils_for_length(std::span<const CoilSpec> coil_template, double coil_length);

DesignSweep design_curve(double total_length, double target_angle, std::span<const CoilSpec> coil_template,
                         const RodParams& rod, const MagneticEnvironment& env, const DesignOptions& options = {});

struct GrasperModel {
    CoilSpec coil;
    double lever_arm = 10e-3;                // r [m]
    double rest_angle_to_B0 = 1.5707963267948966;  // [rad]
    double calibration_factor = 1.0;

    void validate() const;
};

GrasperModel table1_grasper_model();

// Blocking force at the lever tip [N], signed with the current.
double blocking_force(const GrasperModel& model, double current, const MagneticEnvironment& env);

struct AblationRow {
    double current = 0.0;  // [A]
    double power = 0.0;    // [W]
    bool ablation_capable = false;
};

std::vector<AblationRow> ablation_table(double resistance, std::span<const double> currents);

}  // namespace lorentz
