#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "lorentz/errors.hpp"
#include "lorentz/rod.hpp"

using namespace lorentz;

namespace {

FramePose identity_base()
{
    return FramePose{};
}

// Pure tip moment about local y: circular arc of angle T L / EI in the x-z plane.
Vec3 arc_tip(double theta, double L)
{
    const double r = L / theta;
    return {r * (1.0 - std::cos(theta)), 0.0, r * std::sin(theta)};
}

RodParams weightless(double EI, double L, int N)
{
    RodParams p = RodParams::from_rigidity(EI, 1e-3, L, 0.4, N);
    p.linear_density = 0.0;
    return p;
}

}  // namespace

TEST_SUITE("rod")
{
    TEST_CASE("pure tip moment bends into a circular arc")
    {
        const RodParams p = weightless(4.45e-5, 0.03, 200);
        const double T = 2.33e-3;
        const auto t0 = std::chrono::steady_clock::now();
        const RodState s = integrate_forward(identity_base(), Vec3::Zero(), Vec3(0.0, T, 0.0), p);
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const double theta = T * p.free_length / p.flexural_rigidity();
        CHECK(tip_bend_angle(s) * 180.0 / std::numbers::pi == doctest::Approx(90.0).epsilon(0.1 / 90.0));
        CHECK(tip_bend_angle(s) == doctest::Approx(theta).epsilon(1e-9));
        CHECK((s.tip().p - arc_tip(theta, p.free_length)).norm() < 1e-10);
        CHECK(elapsed < 1.0);
    }

    TEST_CASE("RK4 error falls with fourth order")
    {
        const double L = 0.03;
        const double T = 4.0e-3;  // about 155 degrees
        std::vector<double> logh, loge;
        for (int N : {25, 50, 100, 200}) {
            const RodParams p = weightless(4.45e-5, L, N);
            const SegmentState tip = integrate_tip(identity_base(), Vec3::Zero(), Vec3(0.0, T, 0.0), p);
            const double err = (tip.p - arc_tip(T * L / p.flexural_rigidity(), L)).norm();
            logh.push_back(std::log(L / N));
            loge.push_back(std::log(err));
        }
        double mh = 0.0, me = 0.0;
        for (std::size_t k = 0; k < logh.size(); ++k) {
            mh += logh[k] / logh.size();
            me += loge[k] / loge.size();
        }
        double sxy = 0.0, sxx = 0.0;
        for (std::size_t k = 0; k < logh.size(); ++k) {
            sxy += (logh[k] - mh) * (loge[k] - me);
            sxx += (logh[k] - mh) * (logh[k] - mh);
        }
        const double slope = sxy / sxx;
        CHECK(slope == doctest::Approx(4.0).epsilon(0.3 / 4.0));
    }

    TEST_CASE("small tip load matches Euler-Bernoulli cantilever deflection")
    {
        const RodParams p = weightless(4.45e-5, 0.02, 100);
        const double F = 1e-4;
        const double L = p.free_length;
        // Fixed base, free tip: n(s) = F, m(s) = F (L - s) about y.
        const RodState s = integrate_forward(identity_base(), Vec3(F, 0, 0), Vec3(0, F * L, 0), p);
        const double expected = F * L * L * L / (3.0 * p.flexural_rigidity());
        CHECK(s.tip().p.x() == doctest::Approx(expected).epsilon(0.01));
        CHECK(s.tip().m.norm() < 1e-4 * F * L);
    }

    TEST_CASE("mirrored moment gives the mirrored shape")
    {
        const RodParams p = RodParams::defaults();
        const Vec3 m0(0.4e-3, 1.1e-3, 0.2e-3);
        const RodState a = integrate_forward(identity_base(), Vec3::Zero(), m0, p);
        const RodState b = integrate_forward(identity_base(), Vec3::Zero(), Vec3(-m0.x(), m0.y(), -m0.z()), p);
        // Reflecting y -> -y maps the axial vector (mx, my, mz) to (-mx, my, -mz).
        const Vec3 pa = a.tip().p;
        const Vec3 pb = b.tip().p;
        CHECK(pb.x() == doctest::Approx(pa.x()).epsilon(1e-9));
        CHECK(pb.y() == doctest::Approx(-pa.y()).epsilon(1e-9));
        CHECK(pb.z() == doctest::Approx(pa.z()).epsilon(1e-9));
    }

    TEST_CASE("frames stay orthonormal and arc length is exact")
    {
        const RodParams p = RodParams::defaults();
        const RodState s = integrate_forward(identity_base(), Vec3(1e-3, -2e-3, 5e-4), Vec3(1e-3, 2e-3, 3e-4), p);
        REQUIRE(s.segments.size() == static_cast<std::size_t>(p.segment_count) + 1);
        for (const SegmentState& y : s.segments) {
            CHECK(orthonormality_error(y.R) < 1e-12);
        }
        CHECK(s.arc.back() == p.free_length);
        CHECK(straight_rod(identity_base(), p).tip().p.z() == doctest::Approx(p.free_length));
    }

    TEST_CASE("distributed weight produces a linear internal force")
    {
        RodParams p = RodParams::defaults();
        p.gravity = Vec3(0, 0, -9.81);
        const Vec3 n0 = p.linear_density * p.free_length * p.gravity;
        const RodState s = integrate_forward(identity_base(), n0, Vec3::Zero(), p);
        CHECK(s.tip().n.norm() < 1e-15);
        CHECK((s.segments[50].n - 0.5 * n0).norm() < 1e-15);
    }

    TEST_CASE("invalid inputs are rejected")
    {
        RodParams p = RodParams::defaults();
        p.elastic_modulus = 0.0;
        CHECK_THROWS_AS(integrate_tip(identity_base(), Vec3::Zero(), Vec3::Zero(), p), InvalidParameter);
        p = RodParams::defaults();
        p.segment_count = 1;
        CHECK_THROWS_AS(p.validate(), InvalidParameter);
        FramePose bad = identity_base();
        bad.rotation(0, 0) = 2.0;
        CHECK_THROWS_AS(integrate_tip(bad, Vec3::Zero(), Vec3::Zero(), RodParams::defaults()), InvalidParameter);
        CHECK_THROWS_AS(integrate_tip(identity_base(), Vec3(NAN, 0, 0), Vec3::Zero(), RodParams::defaults()),
                        InvalidParameter);
    }

    TEST_CASE("json round trip and schema errors")
    {
        const RodParams p = RodParams::from_rigidity(4.45e-5, 1e-3, 0.02);
        const RodParams q = rod_params_from_json(rod_params_to_json(p));
        CHECK(q.flexural_rigidity() == doctest::Approx(p.flexural_rigidity()));
        CHECK(q.free_length == p.free_length);
        CHECK(q.segment_count == p.segment_count);
        CHECK_THROWS_AS(rod_params_from_json(nlohmann::json{{"diameter", 1e-3}}), SchemaError);
        CHECK_THROWS_AS(rod_params_from_json(nlohmann::json{{"free_length", -1.0}, {"diameter", 1e-3}}), SchemaError);
    }

    TEST_CASE("csv has a header and one row per node")
    {
        const RodParams p = RodParams::defaults();
        std::ostringstream os;
        write_rod_state_csv(os, straight_rod(identity_base(), p));
        std::istringstream is(os.str());
        std::string line;
        int lines = 0;
        while (std::getline(is, line)) {
            ++lines;
        }
        CHECK(lines == p.segment_count + 1 + 2);
        CHECK(os.str().rfind("# lorentz rod-state v1", 0) == 0);
    }
}
