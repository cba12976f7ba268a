#pragma once

#include <optional>
#include <span>

#include "lorentz/actuation.hpp"
#include "lorentz/rod.hpp"

namespace lorentz {

struct EquilibriumOptions {
    double tolerance = 1e-10;  // on |m_N - T|, relative to EI/L
    int max_iterations = 60;   // Newton iterations per continuation step
    int ramp_steps = 4;        // currents are ramped from zero in this many steps
    bool check_stability = true;
    int branch = 1;            // +1: leave unstable states toward the local +x side, -1: opposite
    std::optional<Vec3> initial_base_moment;  // warm start; skips the ramp when given
};

struct EquilibriumResult {
    RodState rod_state;
    Vec3 base_force = Vec3::Zero();
    Vec3 base_moment = Vec3::Zero();
    Vec3 coil_torque = Vec3::Zero();  // torque of the coils at the final tip orientation
    double residual = 0.0;            // |m_N - coil_torque| [N m]
    int iterations = 0;
    bool converged = false;
    bool escaped_unstable = false;    // an unstable branch was left along its unstable mode
};

// Static shape of the rod under fixed coil currents: shooting over m0 so that the tip
// moment equals the Lorentz torque at the resulting tip orientation. n0 follows in closed
// form from the tip force and the distributed load.
EquilibriumResult solve_equilibrium(const RodParams& rod, const FramePose& base, std::span<const CoilSpec> coils,
                                    std::span<const double> currents, const MagneticEnvironment& env,
                                    const Vec3& external_tip_force = Vec3::Zero(),
                                    const EquilibriumOptions& options = {});

}  // namespace lorentz
