#pragma once

#include <optional>

#include <Eigen/Core>

#include "lorentz/rod.hpp"

namespace lorentz {

struct IkWeights {
    double orientation = 1.0;
    double torque = 1.0;
    double tip_force = 1e3;
};

struct IkProblem {
    Mat3 desired_tip_rotation = Mat3::Identity();
    Vec3 external_tip_force = Vec3::Zero();  // [N]
    IkWeights weights;
    RodParams rod;
    FramePose base;

    // Optional extra residual weight * <m_N, penalty_axis>, used to steer the solution away
    // from tip moments the coils cannot produce (the component along B0).
    Vec3 penalty_axis = Vec3::Zero();
    double penalty_weight = 0.0;

    void validate() const;
};

struct IkSolution {
    RodState rod_state;
    Vec3 tip_torque = Vec3::Zero();   // m_N [N m]
    Vec3 base_force = Vec3::Zero();   // n0 [N]
    Vec3 base_moment = Vec3::Zero();  // m0 [N m]
    double residual_norm = 0.0;       // full weighted residual
    double orientation_error = 0.0;   // |log(R_des^T R_tip)| [rad]
    int iterations = 0;
    bool converged = false;
};

struct IkOptions {
    double tolerance = 1e-8;  // on relative change of the residual norm
    int max_iterations = 200;
    double initial_damping = 1e-3;
    double fd_step = 1e-7;    // central-difference step in scaled decision variables
    std::optional<Vec3> initial_base_force;
    std::optional<Vec3> initial_base_moment;
};

using IkVector = Eigen::Matrix<double, 6, 1>;

// Weighted residual at decision variables (n0, m0); 9 entries, 10 with a penalty axis.
Eigen::VectorXd ik_residual(const IkProblem& problem, const Vec3& n0, const Vec3& m0);

// Central-difference Jacobian of ik_residual with respect to (n0, m0) in physical units.
// `step` is relative to the natural scales EI/L^2 (force) and EI/L (moment).
Eigen::MatrixXd ik_jacobian(const IkProblem& problem, const Vec3& n0, const Vec3& m0, double step);

// Shooting + Levenberg-Marquardt over (n0, m0). Always returns the best iterate found.
IkSolution solve_ik(const IkProblem& problem, const IkOptions& options = {});

}  // namespace lorentz
