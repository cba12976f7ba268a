#include "lorentz/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "lorentz/errors.hpp"

namespace lorentz {

namespace {

class Shooter {
public:
    Shooter(const RodParams& rod, const FramePose& base, std::span<const CoilSpec> coils,
            const MagneticEnvironment& env, const Vec3& n0)
        : rod_(rod), base_(base), coils_(coils), env_(env), n0_(n0)
    {
    }

    void set_currents(std::vector<double> currents) { currents_ = std::move(currents); }

    Vec3 mismatch(const Vec3& m0) const
    {
        const SegmentState tip = integrate_tip(base_, n0_, m0, rod_);
        return tip.m - coil_torque(coils_, currents_, tip.R, env_);
    }

    Mat3 jacobian(const Vec3& m0, double h) const
    {
        Mat3 J;
        for (int k = 0; k < 3; ++k) {
            Vec3 dp = m0;
            Vec3 dm = m0;
            dp[k] += h;
            dm[k] -= h;
            J.col(k) = (mismatch(dp) - mismatch(dm)) / (2.0 * h);
        }
        return J;
    }

private:
    const RodParams& rod_;
    const FramePose& base_;
    std::span<const CoilSpec> coils_;
    const MagneticEnvironment& env_;
    Vec3 n0_;
    std::vector<double> currents_;
};

struct NewtonOutcome {
    Vec3 m0;
    double residual;
    int iterations;
    bool converged;
};

NewtonOutcome damped_newton(const Shooter& S, Vec3 m, double tol, double h, int max_iterations)
{
    Vec3 F = S.mismatch(m);
    double mu = 1e-6;
    int it = 0;
    while (F.norm() > tol && it < max_iterations) {
        ++it;
        const Mat3 J = S.jacobian(m, h);
        const Mat3 A = J.transpose() * J;
        const Vec3 g = J.transpose() * F;
        bool improved = false;
        for (int attempt = 0; attempt < 30 && !improved; ++attempt) {
            const Mat3 M = A + mu * Mat3(A.diagonal().cwiseMax(1e-30).asDiagonal());
            const Vec3 step = -M.partialPivLu().solve(g);
            try {
                const Vec3 F_new = S.mismatch(m + step);
                if (F_new.norm() < F.norm()) {
                    m += step;
                    F = F_new;
                    mu = std::max(mu / 3.0, 1e-12);
                    improved = true;
                    continue;
                }
            } catch (const DivergenceError&) {
            }
            mu *= 4.0;
        }
        if (!improved) {
            break;
        }
    }
    return {m, F.norm(), it, F.norm() <= tol};
}

// Escape direction out of an unstable equilibrium, if any eigenvalue of the shooting Jacobian has negative
// real part. Symmetric configurations (axial-only, anti-aligned) have a degenerate unstable eigenspace whose
// eigenvectors are arbitrary, so the preferred bend (toward local +x) is projected onto the whole subspace.
std::optional<Vec3> unstable_direction(const Mat3& J, const Mat3& base_R, int branch)
{
    Eigen::EigenSolver<Mat3> es(J);
    std::vector<Vec3> basis;
    int worst = -1;
    double worst_re = -1e-8;
    auto add = [&](Vec3 v) {
        for (const Vec3& b : basis) {
            v -= b.dot(v) * b;
        }
        if (v.norm() > 1e-9) {
            basis.push_back(v.normalized());
        }
    };
    for (int k = 0; k < 3; ++k) {
        const double re = es.eigenvalues()[k].real();
        if (re < -1e-8) {
            add(es.eigenvectors().col(k).real());
            add(es.eigenvectors().col(k).imag());
        }
        if (re < worst_re) {
            worst_re = re;
            worst = k;
        }
    }
    if (worst < 0) {
        return std::nullopt;
    }
    const Vec3 preferred = base_R.col(1);
    Vec3 v = Vec3::Zero();
    for (const Vec3& b : basis) {
        v += b.dot(preferred) * b;
    }
    if (v.norm() < 1e-6) {
        v = es.eigenvectors().col(worst).real();
        if (v.norm() < 1e-12) {
            v = es.eigenvectors().col(worst).imag();
        }
    }
    v.normalize();
    // Deterministic sign: prefer bending toward the local +x side, then +y.
    const double about_y = v.dot(base_R.col(1));
    const double about_x = v.dot(base_R.col(0));
    if (about_y < -1e-9 || (std::abs(about_y) <= 1e-9 && about_x > 1e-9)) {
        v = -v;
    }
    return branch < 0 ? Vec3(-v) : v;
}

// Gradient-flow style relaxation: converges to stable equilibria and leaves unstable ones.
Vec3 relax(const Shooter& S, Vec3 m, double target)
{
    double alpha = 0.2;
    Vec3 F = S.mismatch(m);
    for (int it = 0; it < 4000 && F.norm() > target; ++it) {
        try {
            const Vec3 m_new = m - alpha * F;
            const Vec3 F_new = S.mismatch(m_new);
            if (F_new.norm() > 4.0 * F.norm()) {
                alpha *= 0.5;
                continue;
            }
            m = m_new;
            F = F_new;
        } catch (const DivergenceError&) {
            alpha *= 0.5;
        }
    }
    return m;
}

}  // namespace

EquilibriumResult solve_equilibrium(const RodParams& rod, const FramePose& base, std::span<const CoilSpec> coils,
                                    std::span<const double> currents, const MagneticEnvironment& env,
                                    const Vec3& external_tip_force, const EquilibriumOptions& options)
{
    rod.validate();
    env.validate();
    if (currents.size() != coils.size()) {
        throw InvalidParameter("one current per coil is required");
    }
    if (options.branch != 1 && options.branch != -1) {
        throw InvalidParameter("equilibrium branch must be +1 or -1");
    }
    if (options.ramp_steps < 1 || options.max_iterations < 1 || !(options.tolerance > 0.0)) {
        throw InvalidParameter("equilibrium options must be positive");
    }
    const double scale = rod.flexural_rigidity() / rod.free_length;
    const double tol = options.tolerance * scale;
    const double h = 1e-7 * scale;
    const Vec3 n0 = external_tip_force + rod.linear_density * rod.free_length * rod.gravity;

    Shooter S(rod, base, coils, env, n0);
    auto scaled = [&](double s) {
        std::vector<double> I(currents.begin(), currents.end());
        for (double& v : I) {
            v *= s;
        }
        return I;
    };

    EquilibriumResult out;
    Vec3 m = options.initial_base_moment.value_or(Vec3::Zero());
    double s = options.initial_base_moment ? 1.0 : 0.0;
    double ds = 1.0 / options.ramp_steps;
    bool ok = true;
    auto settle = [&](double level) {
        S.set_currents(scaled(level));
        NewtonOutcome r = damped_newton(S, m, tol, h, options.max_iterations);
        out.iterations += r.iterations;
        for (int escape = 0; options.check_stability && r.converged && escape < 4; ++escape) {
            const auto v = unstable_direction(S.jacobian(r.m0, h), base.rotation, options.branch);
            if (!v) {
                break;
            }
            out.escaped_unstable = true;
            const Vec3 kicked = relax(S, r.m0 + 0.05 * scale * *v, 1e-4 * scale);
            r = damped_newton(S, kicked, tol, h, options.max_iterations);
            out.iterations += r.iterations;
        }
        return r;
    };

    if (options.initial_base_moment) {
        const NewtonOutcome r = settle(1.0);
        m = r.m0;
        ok = r.converged;
    }
    while (s < 1.0 && ok) {
        const double next = std::min(1.0, s + ds);
        const NewtonOutcome r = settle(next);
        if (r.converged) {
            m = r.m0;
            s = next;
        } else if (ds > 1.0 / 64.0) {
            ds *= 0.5;
        } else {
            m = r.m0;
            ok = false;
        }
    }

    S.set_currents(scaled(1.0));
    out.base_force = n0;
    out.base_moment = m;
    out.rod_state = integrate_forward(base, n0, m, rod);
    out.coil_torque = coil_torque(coils, currents, out.rod_state.tip().R, env);
    out.residual = (out.rod_state.tip().m - out.coil_torque).norm();
    out.converged = ok && out.residual <= tol;
    return out;
}

}  // namespace lorentz
