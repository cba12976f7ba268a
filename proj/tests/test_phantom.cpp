#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "lorentz/config.hpp"
#include "lorentz/errors.hpp"
#include "lorentz/phantom.hpp"

using namespace lorentz;

namespace {

// Parameter along [a, b] of the first point shared with [c, d], or nullopt. Cramer's rule,
// with collinear overlap handled by projecting onto the segment direction.
std::optional<double> brute_contact(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d)
{
    auto cross = [](const Vec2& p, const Vec2& q) { return p.x() * q.y() - p.y() * q.x(); };
    const Vec2 r = b - a;
    const Vec2 s = d - c;
    const double den = cross(r, s);
    if (std::abs(den) > 1e-14 * r.norm() * s.norm()) {
        const double t = cross(c - a, s) / den;
        const double u = cross(c - a, r) / den;
        if (t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0) {
            return t;
        }
        return std::nullopt;
    }
    if (std::abs(cross(c - a, r)) > 1e-12 * r.norm() * (c - a).norm()) {
        return std::nullopt;  // parallel, not collinear
    }
    const double t0 = (c - a).dot(r) / r.squaredNorm();
    const double t1 = (d - a).dot(r) / r.squaredNorm();
    const double lo = std::max(0.0, std::min(t0, t1));
    const double hi = std::min(1.0, std::max(t0, t1));
    if (lo > hi) {
        return std::nullopt;
    }
    return lo;
}

Polygon star(std::mt19937& rng, const Vec2& center, double radius, int n, PolygonKind kind)
{
    std::uniform_real_distribution<double> u(0.3, 1.0);
    Polygon p;
    p.kind = kind;
    p.name = "star";
    for (int k = 0; k < n; ++k) {
        const double a = 2.0 * std::numbers::pi * k / n;
        const double r = radius * u(rng);
        p.vertices.push_back(center + r * Vec2(std::cos(a), std::sin(a)));
    }
    return p;
}

}  // namespace

TEST_SUITE("phantom")
{
    TEST_CASE("collision matches a brute-force scan on random scenes")
    {
        std::mt19937 rng(2024);
        std::uniform_real_distribution<double> pos(-20.0, 20.0);
        std::uniform_real_distribution<double> step(-6.0, 6.0);
        int hits = 0;
        for (int scene = 0; scene < 1000; ++scene) {
            PhantomMap map;
            map.walls.push_back(star(rng, Vec2(pos(rng), pos(rng)), 15.0, 12, PolygonKind::ventricle));
            map.walls.push_back(star(rng, Vec2(pos(rng), pos(rng)), 4.0, 5, PolygonKind::obstacle));
            std::vector<Vec2> line = {Vec2(pos(rng), pos(rng))};
            for (int k = 0; k < 8; ++k) {
                line.push_back(line.back() + Vec2(step(rng), step(rng)));
            }

            int seg = -1;
            double best = 2.0;
            for (std::size_t s = 0; s + 1 < line.size() && seg < 0; ++s) {
                for (const Polygon& p : map.walls) {
                    for (std::size_t e = 0; e < p.vertices.size(); ++e) {
                        const auto t = brute_contact(line[s], line[s + 1], p.vertices[e],
                                                     p.vertices[(e + 1) % p.vertices.size()]);
                        if (t && *t < best) {
                            best = *t;
                            seg = static_cast<int>(s);
                        }
                    }
                }
            }
            const CollisionReport r = collide(line, map);
            REQUIRE(r.collided == (seg >= 0));
            if (seg >= 0) {
                ++hits;
                CHECK(r.segment == seg);
                const Vec2 expected = line[seg] + best * (line[seg + 1] - line[seg]);
                CHECK((r.point - expected).norm() < 1e-9);
                double arc = 0.0;
                for (int s = 0; s < seg; ++s) {
                    arc += (line[s + 1] - line[s]).norm();
                }
                CHECK(r.arc == doctest::Approx(arc + best * (line[seg + 1] - line[seg]).norm()));
            }
        }
        CHECK(hits > 100);
        CHECK(hits < 1000);
    }

    TEST_CASE("touching endpoints and collinear overlap count as contact")
    {
        CHECK(segments_intersect({0, 0}, {1, 0}, {1, 0}, {2, 1}));
        CHECK(segments_intersect({0, 0}, {2, 0}, {1, 0}, {3, 0}));
        CHECK_FALSE(segments_intersect({0, 0}, {1, 0}, {1.0000001, 0}, {2, 0}));
        CHECK_FALSE(segments_intersect({0, 0}, {1, 1}, {0, 1}, {0.4, 0.6 + 1e-9}));
    }

    TEST_CASE("polygon containment with boundary inside")
    {
        Polygon sq{"sq", PolygonKind::ventricle, {{0, 0}, {2, 0}, {2, 2}, {0, 2}}};
        CHECK(sq.contains({1, 1}));
        CHECK(sq.contains({0, 1}));
        CHECK(sq.contains({2, 2}));
        CHECK_FALSE(sq.contains({2.0001, 1}));
    }

    TEST_CASE("bundled phantom is valid and the entry heads across B0")
    {
        const PhantomMap map = load_phantom(data_dir() / "phantom_two_ventricle.json");
        CHECK_NOTHROW(map.validate());
        const MagneticEnvironment env;
        CHECK((map.b0_direction(env) - Vec2(0, 1)).norm() < 1e-15);
        CHECK((map.entry_direction(env) - Vec2(1, 0)).norm() < 1e-15);
        const FramePose f = map.entry_frame(env);
        CHECK(is_rotation(f.rotation));
        CHECK(std::abs(f.rotation.col(2).dot(env.direction())) < 1e-15);
        CHECK(f.rotation.col(0).dot(env.direction()) == doctest::Approx(1.0));
        const Vec2 back = map.slice.to_slice(map.slice.to_world(Vec2(12.5, -3.0)));
        CHECK((back - Vec2(12.5, -3.0)).norm() < 1e-12);
    }

    TEST_CASE("tumor capture is inclusive")
    {
        PhantomMap map;
        map.tumor = {{0, 0}, 1.5};
        CHECK(tumor_reached({3.5, 0}, map, 2.0));
        CHECK_FALSE(tumor_reached({3.5000001, 0}, map, 2.0));
        CHECK_THROWS_AS(tumor_reached({0, 0}, map, 0.0), InvalidParameter);
    }

    TEST_CASE("invalid maps are rejected")
    {
        nlohmann::json j = phantom_to_json(load_phantom(data_dir() / "phantom_two_ventricle.json"));
        auto bowtie = j;
        bowtie["walls"][1]["vertices"] = {{31, -8}, {36, -4.5}, {36, -8}, {31, -4.5}};
        CHECK_THROWS(phantom_from_json(bowtie));
        auto outside = j;
        outside["entry"]["position"] = {-50.0, 0.0};
        CHECK_THROWS(phantom_from_json(outside));
        auto schema = j;
        schema["schema"] = "phantom/2";
        CHECK_THROWS_AS(phantom_from_json(schema), SchemaError);
        auto kind = j;
        kind["walls"][0]["kind"] = "bone";
        CHECK_THROWS_AS(phantom_from_json(kind), SchemaError);
        auto extra = j;
        extra["color"] = "red";
        CHECK_THROWS_AS(phantom_from_json(extra), SchemaError);
    }

    TEST_CASE("insertion bounds")
    {
        CHECK_THROWS_AS((InsertionState{0.04, 0.03}.validate()), InvalidParameter);
        CHECK_THROWS_AS((InsertionState{-0.001, 0.03}.validate()), InvalidParameter);
        CHECK_NOTHROW((InsertionState{0.03, 0.03}.validate()));
    }
}
