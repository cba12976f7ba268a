#pragma once

#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "lorentz/actuation.hpp"

namespace lorentz {

struct AllocationResult {
    std::vector<double> currents;         // [A], one per coil
    Vec3 achieved_torque = Vec3::Zero();  // [N m], inertial
    double torque_residual = 0.0;         // |requested - achieved| [N m]
    double unrealizable_torque = 0.0;     // component of the request along B0 [N m]
    double total_power = 0.0;             // [W]
    bool saturated = false;               // limits or power cap scaled the request down
};

struct AllocationLimits {
    double power_cap = std::numeric_limits<double>::infinity();  // [W]
    bool enforce_current_limits = true;
};

// Column j: torque per ampere of coil j at tip orientation tip_R.
Eigen::Matrix3Xd torque_effectiveness(std::span<const CoilSpec> coils, const Mat3& tip_R,
                                      const MagneticEnvironment& env);

// Minimum-Joule-power currents realizing the part of tau_des orthogonal to B0.
//
// Unconstrained, this is the resistance-weighted least-norm solution. When a current limit
// binds, every assignment of coils to {free, +limit, -limit} is tried and the cheapest exact
// solution kept (ties broken by the lexicographically smallest current vector). If nothing
// meets limits and power cap, the request is scaled by the largest feasible factor and
// `saturated` is set.
AllocationResult allocate_currents(const Vec3& tau_des, const Mat3& tip_R, std::span<const CoilSpec> coils,
                                   const MagneticEnvironment& env, const AllocationLimits& limits = {});

}  // namespace lorentz
