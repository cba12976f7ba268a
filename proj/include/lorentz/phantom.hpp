#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "lorentz/actuation.hpp"
#include "lorentz/rod.hpp"

namespace lorentz {

enum class PolygonKind { ventricle, obstacle };

// Closed polygon in slice coordinates [mm]; the last vertex connects back to the first.
struct Polygon {
    std::string name;
    PolygonKind kind = PolygonKind::ventricle;
    std::vector<Vec2> vertices;

    bool contains(const Vec2& q) const;  // even-odd rule, boundary counts as inside
};

// Imaging slice embedded in the inertial frame. Slice coordinates (u, v) are in mm.
struct SliceFrame {
    Vec3 origin = Vec3::Zero();  // [m]
    Vec3 u_axis = Vec3::UnitX();
    Vec3 v_axis = Vec3::UnitZ();

    Vec2 to_slice(const Vec3& world) const;  // m -> mm, orthogonal projection
    Vec3 to_world(const Vec2& slice) const;  // mm -> m
    Vec3 normal() const { return u_axis.cross(v_axis); }
};

struct EntryPose {
    Vec2 position = Vec2::Zero();             // [mm]
    double heading = 1.5707963267948966;      // [rad] from the in-slice B0 direction
};

struct Tumor {
    Vec2 center = Vec2::Zero();  // [mm]
    double radius = 1.0;         // [mm]
};

struct PhantomMap {
    std::string name;
    bool synthetic = true;
    std::vector<Polygon> walls;
    EntryPose entry;
    Tumor tumor;
    SliceFrame slice;
    double capture_distance = 2.0;  // [mm]

    // Simple polygons, entry and tumor inside a ventricle and outside every obstacle.
    void validate() const;

    // In-slice unit direction of B0; throws InvalidParameter when B0 is normal to the slice.
    Vec2 b0_direction(const MagneticEnvironment& env) const;

    // In-slice unit direction of the entry heading.
    Vec2 entry_direction(const MagneticEnvironment& env) const;

    // Control frame at the entry point: local z along the heading, local x in the slice on the
    // B0 side (azimuth 0 bends toward B0), local y out of the slice.
    FramePose entry_frame(const MagneticEnvironment& env) const;
};

PhantomMap phantom_from_json(const nlohmann::json& j);
nlohmann::json phantom_to_json(const PhantomMap& map);
PhantomMap load_phantom(const std::filesystem::path& path);

struct CollisionReport {
    bool collided = false;
    int segment = -1;     // index of the first polyline segment touching a wall
    int polygon = -1;
    int edge = -1;        // edge k joins vertex k and k+1
    Vec2 point = Vec2::Zero();
    double arc = 0.0;     // [mm] polyline length up to the contact point
};

// Closed segments [a, b] and [c, d] share at least one point.
bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

// Earliest contact along the polyline with any wall edge; zero-length segments are skipped.
CollisionReport collide(std::span<const Vec2> polyline, const PhantomMap& map);

// Distance from tip to tumor center <= radius + capture distance (inclusive).
bool tumor_reached(const Vec2& tip, const PhantomMap& map, double capture_distance);

struct InsertionState {
    double inserted_length = 0.0;  // [m]
    double max_insertion = 0.03;   // [m]

    void validate() const;
};

}  // namespace lorentz
