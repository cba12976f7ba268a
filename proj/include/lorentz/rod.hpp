#pragma once

#include <iosfwd>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lorentz/so3.hpp"

namespace lorentz {

/// Geometry and material constants of the steerable rod section (SI units).
///
/// Stiffness enters the rod equations through K1 = diag(GA, GA, EA) (shear/extension)
/// and K2 = diag(EI, EI, GJ) (bending/torsion). Gravity is the effective (buoyancy
/// corrected) acceleration and defaults to zero for a neutrally buoyant rod.
struct RodParams {
    double elastic_modulus{};   // E [Pa]
    double shear_modulus{};     // G [Pa]
    double area{};              // A [m^2]
    double area_moment{};       // I_A [m^4]
    double polar_moment{};      // J [m^4]
    double linear_density{};    // rho [kg/m]
    Vec3 gravity = Vec3::Zero();  // [m/s^2]
    double free_length{};       // L [m]
    int segment_count = 100;    // N

    double flexural_rigidity() const { return elastic_modulus * area_moment; }
    Vec3 shear_extension_stiffness() const;  // diagonal of K1
    Vec3 bending_torsion_stiffness() const;  // diagonal of K2

    // Throws InvalidParameter when an invariant is violated.
    void validate() const;

    // Solid circular section of the given diameter whose modulus is chosen so that
    // E * I_A equals `flexural_rigidity`. Shear modulus from Poisson's ratio.
    static RodParams from_rigidity(double flexural_rigidity, double diameter, double free_length,
                                   double poisson_ratio = 0.4, int segment_count = 100);

    // Defaults calibrated to the measured EI = 4.45e-5 N m^2 on a 3 Fr (1 mm) tube.
    static RodParams defaults();
};

struct SegmentState {
    Vec3 p = Vec3::Zero();
    Mat3 R = Mat3::Identity();
    Vec3 n = Vec3::Zero();  // internal force, inertial frame
    Vec3 m = Vec3::Zero();  // internal moment, inertial frame
};

struct SegmentDerivative {
    Vec3 dp;
    Mat3 dR;
    Vec3 dn;
    Vec3 dm;
};

enum class FrameLabel { inertial, control, tip };

struct FramePose {
    Vec3 origin = Vec3::Zero();
    Mat3 rotation = Mat3::Identity();
    FrameLabel label = FrameLabel::control;
};

struct RodState {
    std::vector<SegmentState> segments;  // N + 1 entries, base first
    std::vector<double> arc;             // arc coordinate of each entry, 0 .. L

    const SegmentState& base() const { return segments.front(); }
    const SegmentState& tip() const { return segments.back(); }
    FramePose tip_frame() const { return {tip().p, tip().R, FrameLabel::tip}; }
};

// Right-hand side of the static Cosserat rod equations with the linear constitutive
// closures v = z + K1^-1 R^T n and u = K2^-1 R^T m.
SegmentDerivative rod_rhs(const SegmentState& y, const RodParams& params);

// Classical RK4 from the control frame with initial internal force n0 and moment m0,
// uniform step L/N, re-orthonormalizing R after every step.
RodState integrate_forward(const FramePose& base, const Vec3& n0, const Vec3& m0, const RodParams& params);

// Tip state only; same arithmetic as integrate_forward without storing the profile.
SegmentState integrate_tip(const FramePose& base, const Vec3& n0, const Vec3& m0, const RodParams& params);

// Straight, unloaded rod at the given base.
RodState straight_rod(const FramePose& base, const RodParams& params);

// Angle between base and tip tangents [rad], in [0, pi].
double tip_bend_angle(const RodState& state);

RodParams rod_params_from_json(const nlohmann::json& j);
nlohmann::json rod_params_to_json(const RodParams& p);

// CSV: s,px,py,pz,qw,qx,qy,qz,nx,ny,nz,mx,my,mz (one row per segment, quaternion w >= 0).
void write_rod_state_csv(std::ostream& os, const RodState& state);

}  // namespace lorentz
