#include <cmath>
#include <limits>
#include <random>

#include <Eigen/SVD>
#include <doctest.h>

#include "lorentz/allocation.hpp"
#include "lorentz/so3.hpp"

using namespace lorentz;

namespace {

struct GridOracle {
    double power = std::numeric_limits<double>::infinity();
    Eigen::Vector3d currents = Eigen::Vector3d::Zero();
};

// Cheapest grid point (per-coil cap `cap`, `n` samples per axis) close enough to the target
// torque, snapped onto the exact constraint by a weighted least-norm correction.
GridOracle grid_minimum(const Eigen::Matrix3d& A, const Eigen::Vector3d& R, const Vec3& tau, double cap, int n)
{
    const Eigen::Matrix3d Wi = R.cwiseInverse().asDiagonal();
    const Eigen::Matrix3d AWA = A * Wi * A.transpose();
    const Eigen::Matrix3d pinv = AWA.completeOrthogonalDecomposition().pseudoInverse();
    const double step = 2.0 * cap / (n - 1);
    const double tol = 0.5 * step * (A.col(0).norm() + A.col(1).norm() + A.col(2).norm());
    GridOracle best;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int k = 0; k < n; ++k) {
                const Eigen::Vector3d I(-cap + i * step, -cap + j * step, -cap + k * step);
                const Eigen::Vector3d miss = tau - A * I;
                if (miss.norm() > tol) {
                    continue;
                }
                const Eigen::Vector3d J = I + Wi * A.transpose() * pinv * miss;
                if (J.cwiseAbs().maxCoeff() > cap + 1e-12) {
                    continue;
                }
                const double p = J.dot(R.cwiseProduct(J));
                if (p < best.power) {
                    best = {p, J};
                }
            }
        }
    }
    return best;
}

Eigen::Vector3d resistances(const std::vector<CoilSpec>& coils)
{
    return {coil_resistance(coils[0]), coil_resistance(coils[1]), coil_resistance(coils[2])};
}

}  // namespace

TEST_SUITE("allocation")
{
    TEST_CASE("unconstrained allocation equals the weighted pseudo-inverse")
    {
        const MagneticEnvironment env;
        const auto coils = table1_steering_coils();
        const Eigen::Vector3d R = resistances(coils);
        std::mt19937 rng(11);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int t = 0; t < 50; ++t) {
            const Mat3 tipR = so3_exp(Vec3(u(rng), u(rng), u(rng)) * 2.0);
            const Eigen::Matrix3d A = torque_effectiveness(coils, tipR, env);
            const Vec3 tau = A * Eigen::Vector3d(u(rng), u(rng), u(rng)) * 0.1;
            // Independent route: SVD pseudo-inverse of A W^-1/2.
            const Eigen::Matrix3d Wih = R.cwiseInverse().cwiseSqrt().asDiagonal();
            Eigen::JacobiSVD<Eigen::Matrix3d> svd(A * Wih, Eigen::ComputeFullU | Eigen::ComputeFullV);
            svd.setThreshold(1e-10);
            const Eigen::Vector3d expected = Wih * svd.solve(tau);
            const AllocationResult r = allocate_currents(tau, tipR, coils, env, {.enforce_current_limits = false});
            for (int j = 0; j < 3; ++j) {
                CHECK(r.currents[j] == doctest::Approx(expected[j]).epsilon(1e-9).scale(1e-3));
            }
            CHECK((r.achieved_torque - tau).norm() < 1e-12);
            CHECK(std::abs(r.achieved_torque.dot(env.direction())) < 1e-15);
            CHECK_FALSE(r.saturated);
        }
    }

    TEST_CASE("component along B0 is reported as unrealizable")
    {
        const MagneticEnvironment env;
        const auto coils = table1_steering_coils();
        const AllocationResult r = allocate_currents(Vec3(1e-4, 0, 2e-3), Mat3::Identity(), coils, env);
        CHECK(r.unrealizable_torque == doctest::Approx(2e-3));
        CHECK((r.achieved_torque - Vec3(1e-4, 0, 0)).norm() < 1e-12);
        CHECK(r.torque_residual == doctest::Approx(2e-3));
    }

    TEST_CASE("active limits match a brute-force grid")
    {
        const MagneticEnvironment env;
        const auto coils = table1_steering_coils();
        const Eigen::Vector3d R = resistances(coils);
        std::mt19937 rng(5);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        int saturated_cases = 0;
        for (int t = 0; t < 12; ++t) {
            const Mat3 tipR = so3_exp(Vec3(u(rng), u(rng), u(rng)) * 1.5);
            const Eigen::Matrix3d A = torque_effectiveness(coils, tipR, env);
            const Vec3 tau = A * Eigen::Vector3d(0.3 * u(rng), 0.3 * u(rng), 0.3 * u(rng));
            const AllocationResult r = allocate_currents(tau, tipR, coils, env);
            const GridOracle g = grid_minimum(A, R, tau, 0.3, 61);
            REQUIRE(std::isfinite(g.power));
            CHECK((r.achieved_torque - tau).norm() < 1e-12);
            CHECK(r.total_power <= g.power * (1.0 + 1e-9));
            for (double I : r.currents) {
                CHECK(std::abs(I) <= 0.3 + 1e-15);
            }
            const AllocationResult free = allocate_currents(tau, tipR, coils, env, {.enforce_current_limits = false});
            if (Eigen::Map<const Eigen::Vector3d>(free.currents.data()).cwiseAbs().maxCoeff() > 0.3) {
                ++saturated_cases;
                CHECK(r.total_power > free.total_power);
            }
        }
        CHECK(saturated_cases > 0);
    }

    TEST_CASE("power cap scales the request and flags saturation")
    {
        const MagneticEnvironment env;
        const auto coils = table1_steering_coils();
        const Eigen::Matrix3d A = torque_effectiveness(coils, Mat3::Identity(), env);
        const Vec3 tau = A * Eigen::Vector3d(0.0, 0.25, -0.25);
        const AllocationResult unc = allocate_currents(tau, Mat3::Identity(), coils, env);
        REQUIRE_FALSE(unc.saturated);
        const double cap = 0.25 * unc.total_power;
        const AllocationResult r = allocate_currents(tau, Mat3::Identity(), coils, env, {.power_cap = cap});
        CHECK(r.saturated);
        CHECK(r.total_power <= cap * (1.0 + 1e-12));
        CHECK(r.total_power == doctest::Approx(cap).epsilon(1e-6));
        // Scaled request keeps its direction.
        CHECK(r.achieved_torque.normalized().dot(tau.normalized()) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(r.achieved_torque.norm() == doctest::Approx(0.5 * tau.norm()).epsilon(1e-6));
    }

    TEST_CASE("unreachable torque under limits saturates within the box")
    {
        const MagneticEnvironment env;
        const auto coils = table1_steering_coils();
        const Eigen::Matrix3d A = torque_effectiveness(coils, Mat3::Identity(), env);
        const Vec3 tau = A * Eigen::Vector3d(0.0, 3.0, 0.0);
        const AllocationResult r = allocate_currents(tau, Mat3::Identity(), coils, env);
        CHECK(r.saturated);
        for (double I : r.currents) {
            CHECK(std::abs(I) <= 0.3 + 1e-15);
        }
        CHECK(r.achieved_torque.norm() < tau.norm());
    }

    TEST_CASE("zero request needs zero current")
    {
        const MagneticEnvironment env;
        const AllocationResult r = allocate_currents(Vec3::Zero(), Mat3::Identity(), table1_steering_coils(), env);
        for (double I : r.currents) {
            CHECK(I == 0.0);
        }
        CHECK(r.total_power == 0.0);
    }
}
