#pragma once

#include <span>
#include <string>
#include <vector>

#include "lorentz/actuation.hpp"
#include "lorentz/phantom.hpp"
#include "lorentz/rod.hpp"

namespace lorentz {

struct WorkspaceSample {
    std::vector<double> currents;  // [A], one per steering coil
    int branch = 1;                // equilibrium branch, see EquilibriumOptions::branch
    Vec3 tip = Vec3::Zero();       // [m], inertial
    Vec2 planar = Vec2::Zero();    // [m], (along base tangent, along base x) from the flexible base
    double bend = 0.0;             // [rad], signed toward base +x
    double power = 0.0;            // [W]
};

struct WorkspaceOptions {
    double grid_span = -1.0;  // current half-range of the sample grid [A]; < 0: use the current cap
};

struct Workspace {
    std::vector<WorkspaceSample> samples;
    std::vector<Vec2> boundary;   // fan polygon in the planar coordinates, base point first
    double max_bend = 0.0;        // [rad], largest |bend|
    int rejected = 0;             // grid points outside the caps
    int unconverged = 0;          // grid points whose equilibrium failed
    std::string diagnostic;

    bool empty() const { return samples.empty(); }
};

// Base pose of the flexible section after inserting `inserted` metres from `entry` along
// its tangent: the part beyond the free length is a rigid shaft.
FramePose flexible_base(const FramePose& entry, double inserted, double free_length);

// Sweeps the axial coil and the saddle coil that bends in the base x-z plane over a shared
// grid of `grid` currents per axis, keeps samples inside both caps, and solves the static
// shape for each. Unstable straight states contribute both bifurcation branches.
Workspace compute_workspace(const RodParams& rod, const FramePose& entry, std::span<const CoilSpec> coils,
                            const MagneticEnvironment& env, const InsertionState& insertion, double current_cap,
                            double power_cap, int grid, const WorkspaceOptions& options = {});

}  // namespace lorentz
