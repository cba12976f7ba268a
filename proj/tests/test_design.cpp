#include <cmath>
#include <numbers>

#include <doctest.h>

#include "lorentz/design.hpp"
#include "lorentz/errors.hpp"

using namespace lorentz;

TEST_SUITE("design")
{
    TEST_CASE("turn count and resistance scale with coil length")
    {
        const auto coils = coils_for_length(table1_steering_coils(), 0.01);
        CHECK(coils[0].turns == 250);
        CHECK(coil_resistance(coils[0]) == doctest::Approx(9.1875).epsilon(1e-4));
        const auto half = coils_for_length(table1_steering_coils(), 0.005);
        CHECK(half[0].turns == 125);
        CHECK(coil_resistance(half[0]) == doctest::Approx(0.5 * coil_resistance(coils[0])));
        CHECK(std::get<SaddleGeometry>(half[1].geometry).length == 0.005);
        CHECK_THROWS_AS(coils_for_length(table1_steering_coils(), 0.0), InvalidParameter);
    }

    TEST_CASE("sweep agrees with the closed-form axial power")
    {
        const RodParams rod = RodParams::defaults();
        const MagneticEnvironment env;
        const double theta = std::numbers::pi / 2;
        const DesignSweep s = design_curve(0.03, theta, table1_steering_coils(), rod, env);
        REQUIRE(s.points.size() == 19);
        for (const DesignPoint& p : s.points) {
            // Pure tip moment EI theta / L_f supplied by the axial coil at 90 degrees to B0.
            const auto coils = coils_for_length(table1_steering_coils(), p.coil_length);
            const double I = rod.flexural_rigidity() * theta / (p.free_length * coil_moment_area(coils[0]) * env.B0.norm());
            const double P = I * I * coil_resistance(coils[0]);
            CHECK(p.power == doctest::Approx(P).epsilon(2e-3));
            CHECK(std::abs(p.currents[0]) == doctest::Approx(I).epsilon(2e-3));
            CHECK(p.feasible == (I <= 0.3));
        }
    }

    TEST_CASE("interior optimum near one third")
    {
        const DesignSweep s = design_curve(0.03, std::numbers::pi / 2, table1_steering_coils(), RodParams::defaults(),
                                           MagneticEnvironment{});
        REQUIRE(s.has_optimum);
        CHECK(s.optimum_ratio > 0.1);
        CHECK(s.optimum_ratio < 0.9);
        CHECK(std::abs(s.optimum_ratio - 0.33) <= 0.15);
        const auto powers = s.power_at_target();
        const auto ratios = s.ratio_grid();
        CHECK(ratios.front() == 0.05);
        CHECK(ratios.back() == 0.95);
        // Extremes are infeasible at 300 mA but still carry a finite power.
        CHECK_FALSE(s.points.front().feasible);
        CHECK_FALSE(s.points.back().feasible);
        CHECK(std::isfinite(powers.front()));
        CHECK(powers.front() > s.optimum_power);
        CHECK(powers.back() > s.optimum_power);
    }

    TEST_CASE("ratios outside (0, 1) are rejected")
    {
        DesignOptions o;
        o.ratios = {0.2, 1.0};
        CHECK_THROWS_AS(design_curve(0.03, 1.0, table1_steering_coils(), RodParams::defaults(), MagneticEnvironment{}, o),
                        InvalidParameter);
    }

    TEST_CASE("grasper blocking force is linear through the origin")
    {
        const GrasperModel g = table1_grasper_model();
        const MagneticEnvironment env;
        CHECK(blocking_force(g, 0.5, env) == doctest::Approx(0.217).epsilon(0.02));
        CHECK(blocking_force(g, 0.5, env) == doctest::Approx(6.2e-4 * 0.5 * 7.0 / 0.01).epsilon(1e-12));
        double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
        const int n = 10;
        for (int k = 1; k <= n; ++k) {
            const double i = 0.05 * k;
            const double f = blocking_force(g, i, env);
            sx += i;
            sy += f;
            sxx += i * i;
            sxy += i * f;
            syy += f * f;
        }
        const double r2 = std::pow(n * sxy - sx * sy, 2) / ((n * sxx - sx * sx) * (n * syy - sy * sy));
        CHECK(r2 == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(blocking_force(g, -0.2, env) == doctest::Approx(-blocking_force(g, 0.2, env)));
        CHECK_THROWS_AS(blocking_force(g, 0.6, env), InvalidParameter);
    }

    TEST_CASE("ablation table")
    {
        const std::vector<double> I = {0.05, 0.1, 0.2, 0.25};
        const auto rows = ablation_table(11.0, I);
        const double expected[] = {0.0275, 0.110, 0.440, 0.6875};
        for (std::size_t k = 0; k < rows.size(); ++k) {
            CHECK(std::abs(rows[k].power - expected[k]) <= 1e-6);
            CHECK(rows[k].ablation_capable == (k == 3));
        }
        CHECK_THROWS_AS(ablation_table(0.0, I), InvalidParameter);
    }
}
