#pragma once

#include <limits>
#include <numbers>
#include <span>
#include <string>

#include "lorentz/allocation.hpp"
#include "lorentz/ik.hpp"

namespace lorentz {

inline constexpr double kMaxBend = 120.0 * std::numbers::pi / 180.0;

struct SteerTarget {
    double bend = 0.0;     // [rad], tilt of the tip tangent from the base tangent
    double azimuth = 0.0;  // [rad], bend plane about the base tangent, 0 = base x axis
};

struct SteerOptions {
    double power_cap = std::numeric_limits<double>::infinity();  // [W] for the steering coils
    bool enforce_current_limits = true;
    double torque_tolerance = 1e-6;  // coil torque vs IK tip torque [N m]
    int max_rounds = 20;
    int saturation_steps = 12;  // bisection steps on the bend when the limits bind
    Vec3 external_tip_force = Vec3::Zero();
    IkOptions ik;
};

struct SteerResult {
    IkSolution ik;
    AllocationResult allocation;
    double torque_mismatch = 0.0;  // |coil torque at solved tip - IK tip torque| [N m]
    int rounds = 0;
    bool consistent = false;       // mismatch within tolerance
    double bend = 0.0;             // [rad] bend actually held, below the target when saturated
    bool saturated = false;        // the limits bind: the bend is scaled back along the commanded plane
    std::string warning;
};

// Desired tip rotation for a bend target relative to the base frame.
Mat3 target_rotation(const FramePose& base, const SteerTarget& target);

// Alternates IK and current allocation until the coils reproduce the IK tip torque at the
// solved tip orientation. When the limits bind, returns the largest bend along the commanded
// plane that they can hold. Throws InvalidParameter when |bend| exceeds kMaxBend.
SteerResult steer_to(const SteerTarget& target, const RodParams& rod, const FramePose& base,
                     std::span<const CoilSpec> coils, const MagneticEnvironment& env,
                     const SteerOptions& options = {});

}  // namespace lorentz
