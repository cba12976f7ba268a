#include <cmath>
#include <functional>
#include <numbers>

#include <doctest.h>

#include "lorentz/equilibrium.hpp"
#include "lorentz/errors.hpp"

using namespace lorentz;

namespace {

// Root of f on [lo, hi] by bisection (f(lo), f(hi) of opposite sign).
double bisect(const std::function<double(double)>& f, double lo, double hi)
{
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        ((f(lo) < 0.0) == (f(mid) < 0.0) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

const FramePose kBase{};

}  // namespace

TEST_SUITE("equilibrium")
{
    TEST_CASE("anti-aligned axial moment buckles to the elastica angle")
    {
        const RodParams rod = RodParams::defaults();
        const auto coils = table1_steering_coils();
        const MagneticEnvironment env;
        const double I = -0.2076;
        const double c = std::abs(I) * coil_moment_area(coils[0]) * env.B0.norm() * rod.free_length /
                         rod.flexural_rigidity();
        // Pure tip moment of magnitude mu B sin(theta): theta / sin(theta) = mu B L / EI.
        const double theta = bisect([&](double t) { return t - c * std::sin(t); }, 1e-3, std::numbers::pi - 1e-9);
        const EquilibriumResult r = solve_equilibrium(rod, kBase, coils, std::vector<double>{I, 0, 0}, env);
        CHECK(r.converged);
        CHECK(r.escaped_unstable);
        CHECK(tip_bend_angle(r.rod_state) == doctest::Approx(theta).epsilon(1e-6));
        CHECK(theta * 180.0 / std::numbers::pi == doctest::Approx(90.0).epsilon(0.01));
        CHECK(r.rod_state.tip().p.x() > 0.0);
        CHECK(std::abs(r.rod_state.tip().p.y()) < 1e-12);
        CHECK(r.residual < 1e-9 * rod.flexural_rigidity() / rod.free_length);

        EquilibriumOptions other;
        other.branch = -1;
        const EquilibriumResult m = solve_equilibrium(rod, kBase, coils, std::vector<double>{I, 0, 0}, env,
                                                      Vec3::Zero(), other);
        CHECK(m.rod_state.tip().p.x() == doctest::Approx(-r.rod_state.tip().p.x()).epsilon(1e-9));
    }

    TEST_CASE("aligned axial moment is stable and straight")
    {
        const RodParams rod = RodParams::defaults();
        const auto coils = table1_steering_coils();
        const EquilibriumResult r =
            solve_equilibrium(rod, kBase, coils, std::vector<double>{0.3, 0, 0}, MagneticEnvironment{});
        CHECK(r.converged);
        CHECK_FALSE(r.escaped_unstable);
        CHECK(tip_bend_angle(r.rod_state) < 1e-9);
    }

    TEST_CASE("saddle torque balances bending: theta = c cos(theta)")
    {
        const RodParams rod = RodParams::defaults();
        const auto coils = table1_steering_coils();
        const MagneticEnvironment env;
        const double I = 0.3;
        const double c = I * coil_moment_area(coils[1]) * env.B0.norm() * rod.free_length / rod.flexural_rigidity();
        const double theta = bisect([&](double t) { return t - c * std::cos(t); }, 0.0, std::numbers::pi / 2);
        const EquilibriumResult r = solve_equilibrium(rod, kBase, coils, std::vector<double>{0, I, 0}, env);
        CHECK(r.converged);
        CHECK(tip_bend_angle(r.rod_state) == doctest::Approx(theta).epsilon(1e-6));
        CHECK(r.rod_state.tip().p.x() < 0.0);  // x moment x B0 bends toward -x
    }

    TEST_CASE("tip force without currents matches the cantilever")
    {
        RodParams rod = RodParams::defaults();
        rod.linear_density = 0.0;
        const double F = 5e-5;
        const EquilibriumResult r = solve_equilibrium(rod, kBase, table1_steering_coils(), std::vector<double>{0, 0, 0},
                                                      MagneticEnvironment{}, Vec3(F, 0, 0));
        CHECK(r.converged);
        const double L = rod.free_length;
        CHECK(r.rod_state.tip().p.x() == doctest::Approx(F * L * L * L / (3 * rod.flexural_rigidity())).epsilon(0.01));
    }

    TEST_CASE("warm start reproduces the ramped solution")
    {
        const RodParams rod = RodParams::defaults();
        const auto coils = table1_steering_coils();
        const std::vector<double> I = {-0.15, 0.1, -0.05};
        const EquilibriumResult a = solve_equilibrium(rod, kBase, coils, I, MagneticEnvironment{});
        EquilibriumOptions warm;
        warm.initial_base_moment = a.base_moment;
        const EquilibriumResult b = solve_equilibrium(rod, kBase, coils, I, MagneticEnvironment{}, Vec3::Zero(), warm);
        CHECK(a.converged);
        CHECK(b.converged);
        CHECK((a.rod_state.tip().p - b.rod_state.tip().p).norm() < 1e-10);
    }

    TEST_CASE("bad inputs")
    {
        const auto coils = table1_steering_coils();
        CHECK_THROWS_AS(solve_equilibrium(RodParams::defaults(), kBase, coils, std::vector<double>{0, 0},
                                          MagneticEnvironment{}),
                        InvalidParameter);
        EquilibriumOptions o;
        o.branch = 0;
        CHECK_THROWS_AS(solve_equilibrium(RodParams::defaults(), kBase, coils, std::vector<double>{0, 0, 0},
                                          MagneticEnvironment{}, Vec3::Zero(), o),
                        InvalidParameter);
    }
}
