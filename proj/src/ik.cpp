#include "lorentz/ik.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "lorentz/errors.hpp"

namespace lorentz {

void IkProblem::validate() const
{
    if (!(weights.orientation > 0.0) || !(weights.torque > 0.0) || !(weights.tip_force > 0.0)) {
        throw InvalidParameter("IK weights must be positive");
    }
    if (!(penalty_weight >= 0.0) || !penalty_axis.allFinite()) {
        throw InvalidParameter("IK penalty must be finite and non-negative");
    }
    if (!is_rotation(desired_tip_rotation)) {
        throw InvalidParameter("desired tip rotation is not orthonormal");
    }
    if (!external_tip_force.allFinite()) {
        throw InvalidParameter("external tip force must be finite");
    }
    rod.validate();
}

namespace {

struct Scales {
    double force;
    double moment;
};

Scales natural_scales(const RodParams& rod)
{
    const double EI = rod.flexural_rigidity();
    const double L = rod.free_length;
    return {EI / (L * L), EI / L};
}

bool has_penalty(const IkProblem& p)
{
    return p.penalty_weight > 0.0 && p.penalty_axis.squaredNorm() > 0.0;
}

Eigen::VectorXd residual_from_tip(const IkProblem& p, const SegmentState& tip)
{
    Eigen::VectorXd r(has_penalty(p) ? 10 : 9);
    r.segment<3>(0) = p.weights.orientation * so3_log_distance(p.desired_tip_rotation, tip.R);
    r.segment<3>(3) = p.weights.torque * tip.m;
    r.segment<3>(6) = p.weights.tip_force * (tip.n - p.external_tip_force);
    if (has_penalty(p)) {
        r[9] = p.penalty_weight * tip.m.dot(p.penalty_axis);
    }
    return r;
}

class ScaledProblem {
public:
    explicit ScaledProblem(const IkProblem& p) : p_(p), s_(natural_scales(p.rod)) {}

    Vec3 force(const IkVector& z) const { return s_.force * z.head<3>(); }
    Vec3 moment(const IkVector& z) const { return s_.moment * z.tail<3>(); }

    IkVector scaled(const Vec3& n0, const Vec3& m0) const
    {
        IkVector z;
        z << n0 / s_.force, m0 / s_.moment;
        return z;
    }

    Eigen::VectorXd residual(const IkVector& z) const
    {
        return residual_from_tip(p_, integrate_tip(p_.base, force(z), moment(z), p_.rod));
    }

    Eigen::MatrixXd jacobian(const IkVector& z, double h) const
    {
        Eigen::MatrixXd J;
        for (int k = 0; k < 6; ++k) {
            IkVector zp = z;
            IkVector zm = z;
            zp[k] += h;
            zm[k] -= h;
            const Eigen::VectorXd d = (residual(zp) - residual(zm)) / (2.0 * h);
            if (k == 0) {
                J.resize(d.size(), 6);
            }
            J.col(k) = d;
        }
        return J;
    }

    const Scales& scales() const { return s_; }

private:
    const IkProblem& p_;
    Scales s_;
};

// Constant-curvature arc from the base to the desired orientation.
Vec3 arc_moment_guess(const IkProblem& p)
{
    const Vec3 phi = so3_log_distance(p.base.rotation, p.desired_tip_rotation);
    const Vec3 u = phi / p.rod.free_length;
    return p.base.rotation * p.rod.bending_torsion_stiffness().cwiseProduct(u);
}

}  // namespace

Eigen::VectorXd ik_residual(const IkProblem& problem, const Vec3& n0, const Vec3& m0)
{
    return residual_from_tip(problem, integrate_tip(problem.base, n0, m0, problem.rod));
}

Eigen::MatrixXd ik_jacobian(const IkProblem& problem, const Vec3& n0, const Vec3& m0, double step)
{
    const ScaledProblem sp(problem);
    Eigen::MatrixXd J = sp.jacobian(sp.scaled(n0, m0), step);
    J.leftCols<3>() /= sp.scales().force;
    J.rightCols<3>() /= sp.scales().moment;
    return J;
}

IkSolution solve_ik(const IkProblem& problem, const IkOptions& options)
{
    problem.validate();
    if (!(options.tolerance > 0.0) || options.max_iterations < 1 || !(options.fd_step > 0.0)) {
        throw InvalidParameter("IK options: tolerance, max_iterations and fd_step must be positive");
    }
    const ScaledProblem sp(problem);
    const RodParams& rod = problem.rod;

    const Vec3 n_guess = options.initial_base_force.value_or(
        problem.external_tip_force + rod.linear_density * rod.free_length * rod.gravity);
    const Vec3 m_guess = options.initial_base_moment.value_or(arc_moment_guess(problem));
    IkVector z = sp.scaled(n_guess, m_guess);

    Eigen::VectorXd r = sp.residual(z);
    double cost = 0.5 * r.squaredNorm();
    double mu = options.initial_damping;
    double nu = 2.0;
    bool converged = cost == 0.0;
    int iterations = 0;

    while (!converged && iterations < options.max_iterations) {
        ++iterations;
        const Eigen::MatrixXd J = sp.jacobian(z, options.fd_step);
        const Eigen::Matrix<double, 6, 6> A = J.transpose() * J;
        const IkVector g = J.transpose() * r;
        if (g.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + cost)) {
            converged = true;
            break;
        }
        IkVector D = A.diagonal().cwiseMax(1e-12 * A.diagonal().maxCoeff());

        bool accepted = false;
        while (!accepted && iterations <= options.max_iterations) {
            const Eigen::Matrix<double, 6, 6> M = A + Eigen::Matrix<double, 6, 6>(mu * D.asDiagonal());
            const IkVector delta = -M.ldlt().solve(g);
            const double predicted = 0.5 * delta.dot(mu * D.cwiseProduct(delta) - g);
            Eigen::VectorXd r_new;
            try {
                r_new = sp.residual(z + delta);
            } catch (const DivergenceError&) {
                mu *= nu;
                nu *= 2.0;
                ++iterations;
                continue;
            }
            const double cost_new = 0.5 * r_new.squaredNorm();
            const double rho = predicted > 0.0 ? (cost - cost_new) / predicted : -1.0;
            if (rho > 0.0) {
                const double old_norm = std::sqrt(2.0 * cost);
                const double new_norm = std::sqrt(2.0 * cost_new);
                z += delta;
                r = r_new;
                cost = cost_new;
                mu *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
                nu = 2.0;
                accepted = true;
                const bool small_change = old_norm - new_norm <= options.tolerance * std::max(new_norm, 1e-300);
                const bool small_step = delta.norm() <= options.tolerance * (z.norm() + options.tolerance);
                if (new_norm <= 1e-15 || small_change || small_step) {
                    converged = true;
                }
            } else {
                if (delta.norm() <= 1e-14 * (z.norm() + 1e-14)) {
                    converged = true;  // no further progress representable
                    break;
                }
                mu *= nu;
                nu *= 2.0;
                ++iterations;
            }
        }
    }

    IkSolution out;
    out.base_force = sp.force(z);
    out.base_moment = sp.moment(z);
    out.rod_state = integrate_forward(problem.base, out.base_force, out.base_moment, rod);
    out.tip_torque = out.rod_state.tip().m;
    out.residual_norm = std::sqrt(2.0 * cost);
    out.orientation_error = so3_log_distance(problem.desired_tip_rotation, out.rod_state.tip().R).norm();
    out.iterations = iterations;
    out.converged = converged;
    return out;
}

}  // namespace lorentz
