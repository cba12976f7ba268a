#include "lorentz/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <Eigen/QR>

#include "lorentz/errors.hpp"

namespace lorentz {

namespace {

using Eigen::Matrix2Xd;
using Eigen::VectorXd;

struct Reduced {
    Matrix2Xd A;   // torque per ampere in a basis of the plane orthogonal to B0
    VectorXd R;    // coil resistances
    VectorXd lim;  // current limits
    double cap;
};

// argmin sum R_j x_j^2 subject to A x = rhs (least-squares when rhs is outside range(A)).
VectorXd weighted_least_norm(const Matrix2Xd& A, const VectorXd& R, const Eigen::Vector2d& rhs)
{
    const VectorXd w = R.cwiseSqrt().cwiseInverse();
    const Matrix2Xd Aw = A * w.asDiagonal();
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Aw);
    cod.setThreshold(1e-10);
    const VectorXd y = cod.solve(rhs);
    return w.cwiseProduct(y);
}

double power_of(const VectorXd& x, const VectorXd& R)
{
    return x.cwiseProduct(x).dot(R);
}

bool within(const VectorXd& x, const Reduced& P)
{
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        if (std::abs(x[j]) > P.lim[j] * (1.0 + 1e-12)) {
            return false;
        }
    }
    return power_of(x, P.R) <= P.cap * (1.0 + 1e-12);
}

bool lexicographically_less(const VectorXd& a, const VectorXd& b)
{
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

// Cheapest currents that realize `target` exactly within limits and cap, if any.
std::optional<VectorXd> solve_exact(const Reduced& P, const Eigen::Vector2d& target)
{
    const Eigen::Index n = P.A.cols();
    const double tol = 1e-10 * target.norm() + 1e-16;

    const VectorXd free_solution = weighted_least_norm(P.A, P.R, target);
    if ((P.A * free_solution - target).norm() > tol) {
        return std::nullopt;  // outside the achievable plane even without limits
    }
    if (within(free_solution, P)) {
        return free_solution;
    }

    std::optional<VectorXd> best;
    double best_power = 0.0;
    std::vector<int> state(static_cast<std::size_t>(n), 0);  // 0 free, 1 +limit, 2 -limit
    long patterns = 1;
    for (Eigen::Index j = 0; j < n; ++j) {
        patterns *= 3;
    }
    for (long code = 1; code < patterns; ++code) {
        long c = code;
        for (Eigen::Index j = 0; j < n; ++j) {
            state[j] = static_cast<int>(c % 3);
            c /= 3;
        }
        VectorXd x = VectorXd::Zero(n);
        std::vector<Eigen::Index> free_idx;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (state[j] == 0) {
                free_idx.push_back(j);
            } else {
                x[j] = state[j] == 1 ? P.lim[j] : -P.lim[j];
            }
        }
        const Eigen::Vector2d rhs = target - P.A * x;
        if (free_idx.empty()) {
            if (rhs.norm() > tol) {
                continue;
            }
        } else {
            Matrix2Xd Af(2, static_cast<Eigen::Index>(free_idx.size()));
            VectorXd Rf(static_cast<Eigen::Index>(free_idx.size()));
            for (std::size_t k = 0; k < free_idx.size(); ++k) {
                Af.col(k) = P.A.col(free_idx[k]);
                Rf[k] = P.R[free_idx[k]];
            }
            const VectorXd xf = weighted_least_norm(Af, Rf, rhs);
            if ((Af * xf - rhs).norm() > tol) {
                continue;
            }
            for (std::size_t k = 0; k < free_idx.size(); ++k) {
                x[free_idx[k]] = xf[k];
            }
        }
        if (!within(x, P)) {
            continue;
        }
        const double p = power_of(x, P.R);
        const bool tie = best && std::abs(p - best_power) <= 1e-12 * std::max(p, best_power);
        if (!best || (!tie && p < best_power) || (tie && lexicographically_less(x, *best))) {
            best = x;
            best_power = p;
        }
    }
    return best;
}

std::pair<Vec3, Vec3> orthogonal_basis(const Vec3& b)
{
    const Vec3 trial = std::abs(b.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 e1 = (trial - trial.dot(b) * b).normalized();
    return {e1, b.cross(e1)};
}

}  // namespace

Eigen::Matrix3Xd torque_effectiveness(std::span<const CoilSpec> coils, const Mat3& tip_R,
                                      const MagneticEnvironment& env)
{
    Eigen::Matrix3Xd B(3, static_cast<Eigen::Index>(coils.size()));
    for (std::size_t j = 0; j < coils.size(); ++j) {
        B.col(static_cast<Eigen::Index>(j)) = (tip_R * coil_moment(coils[j], 1.0)).cross(env.B0);
    }
    return B;
}

AllocationResult allocate_currents(const Vec3& tau_des, const Mat3& tip_R, std::span<const CoilSpec> coils,
                                   const MagneticEnvironment& env, const AllocationLimits& limits)
{
    if (coils.empty()) {
        throw InvalidParameter("allocation needs at least one coil");
    }
    if (!(limits.power_cap > 0.0)) {
        throw InvalidParameter("power cap must be positive");
    }
    if (!tau_des.allFinite()) {
        throw InvalidParameter("requested torque must be finite");
    }
    env.validate();

    const Vec3 b = env.direction();
    const auto [e1, e2] = orthogonal_basis(b);
    const Eigen::Matrix3Xd B = torque_effectiveness(coils, tip_R, env);
    const auto n = static_cast<Eigen::Index>(coils.size());

    Reduced P;
    P.A.resize(2, n);
    P.A.row(0) = e1.transpose() * B;
    P.A.row(1) = e2.transpose() * B;
    P.R.resize(n);
    P.lim.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        P.R[j] = coil_resistance(coils[j]);
        P.lim[j] = limits.enforce_current_limits ? coils[j].current_limit
                                                 : std::numeric_limits<double>::infinity();
    }
    P.cap = limits.power_cap;

    // Achievable part of the request: projection onto range(A) of the component orthogonal to B0.
    const Eigen::Vector2d requested(e1.dot(tau_des), e2.dot(tau_des));
    const VectorXd unconstrained = weighted_least_norm(P.A, P.R, requested);
    const Eigen::Vector2d target = P.A * unconstrained;

    VectorXd x;
    bool saturated = false;
    if (within(unconstrained, P)) {
        x = unconstrained;
    } else if (auto exact = solve_exact(P, target)) {
        x = *exact;
    } else {
        saturated = true;
        bool only_power = true;
        for (Eigen::Index j = 0; j < n; ++j) {
            only_power = only_power && std::abs(unconstrained[j]) <= P.lim[j];
        }
        if (only_power) {
            // Power is quadratic in a uniform scale of the least-norm solution.
            x = unconstrained * std::sqrt(P.cap / power_of(unconstrained, P.R));
        } else {
            double lo = 0.0;
            double hi = 1.0;
            VectorXd best = VectorXd::Zero(n);
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (auto s = solve_exact(P, mid * target)) {
                    lo = mid;
                    best = *s;
                } else {
                    hi = mid;
                }
            }
            x = best;
        }
    }

    // Hard feasibility: clip round-off excursions beyond the limits and the cap.
    for (Eigen::Index j = 0; j < n; ++j) {
        x[j] = std::clamp(x[j], -P.lim[j], P.lim[j]);
    }
    for (int guard = 0; guard < 8 && power_of(x, P.R) > P.cap; ++guard) {
        x *= std::sqrt(P.cap / power_of(x, P.R)) * (1.0 - 4e-16);
    }

    AllocationResult out;
    out.currents.assign(x.data(), x.data() + n);
    out.achieved_torque = B * x;
    out.torque_residual = (tau_des - out.achieved_torque).norm();
    out.unrealizable_torque = std::abs(tau_des.dot(b));
    out.total_power = power_of(x, P.R);
    out.saturated = saturated;
    return out;
}

}  // namespace lorentz
