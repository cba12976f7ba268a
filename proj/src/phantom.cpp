#include "lorentz/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "lorentz/errors.hpp"
#include "lorentz/json_util.hpp"

namespace lorentz {

namespace {

constexpr const char* kSchema = "phantom/1";

double cross2(const Vec2& a, const Vec2& b)
{
    return a.x() * b.y() - a.y() * b.x();
}

int orientation(const Vec2& p, const Vec2& q, const Vec2& r)
{
    const double v = cross2(q - p, r - p);
    return (v > 0.0) - (v < 0.0);
}

// q collinear with [p, r]: does it lie within the bounding box?
bool on_segment(const Vec2& p, const Vec2& q, const Vec2& r)
{
    return std::min(p.x(), r.x()) <= q.x() && q.x() <= std::max(p.x(), r.x()) &&
           std::min(p.y(), r.y()) <= q.y() && q.y() <= std::max(p.y(), r.y());
}

// Smallest parameter t in [0, 1] along [a, b] where it meets [c, d]; caller checked they meet.
double first_contact(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d)
{
    const Vec2 r = b - a;
    const Vec2 s = d - c;
    const double denom = cross2(r, s);
    if (denom != 0.0) {
        return std::clamp(cross2(c - a, s) / denom, 0.0, 1.0);
    }
    const double rr = r.squaredNorm();
    const double tc = (c - a).dot(r) / rr;
    const double td = (d - a).dot(r) / rr;
    return std::clamp(std::min(tc, td), 0.0, 1.0);
}

double signed_area(const std::vector<Vec2>& v)
{
    double a = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        a += cross2(v[i], v[(i + 1) % v.size()]);
    }
    return 0.5 * a;
}

void check_simple(const Polygon& poly, const std::string& where)
{
    const auto& v = poly.vertices;
    const std::size_t n = v.size();
    if (n < 3) {
        throw InvalidParameter(where + ": a polygon needs at least 3 vertices");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!v[i].allFinite()) {
            throw InvalidParameter(where + ": non-finite vertex " + std::to_string(i));
        }
        if (v[i] == v[(i + 1) % n]) {
            throw InvalidParameter(where + ": repeated vertex " + std::to_string(i));
        }
    }
    if (std::abs(signed_area(v)) <= 0.0) {
        throw InvalidParameter(where + ": polygon has zero area");
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            const Vec2 &a = v[i], &b = v[(i + 1) % n], &c = v[j], &d = v[(j + 1) % n];
            if (!adjacent) {
                if (segments_intersect(a, b, c, d)) {
                    throw InvalidParameter(where + ": edges " + std::to_string(i) + " and " + std::to_string(j) +
                                           " intersect (polygon not simple)");
                }
            } else {
                // Adjacent edges may only share their common vertex.
                const Vec2& shared = (j == i + 1) ? b : a;
                const Vec2& p = (j == i + 1) ? a : b;
                const Vec2& q = (j == i + 1) ? d : c;
                if (orientation(p, shared, q) == 0 && (q - shared).dot(p - shared) > 0.0) {
                    throw InvalidParameter(where + ": edges " + std::to_string(i) + " and " + std::to_string(j) +
                                           " fold back on each other");
                }
            }
        }
    }
}

Polygon polygon_from_json(const nlohmann::json& j, const std::string& where)
{
    using namespace json_util;
    if (!j.is_object()) {
        throw SchemaError(where + ": expected an object");
    }
    reject_unknown(j, {"name", "kind", "vertices"}, where);
    Polygon p;
    p.name = j.contains("name") ? string(j, "name", where) : std::string{};
    const std::string kind = j.contains("kind") ? string(j, "kind", where) : "ventricle";
    if (kind == "ventricle") {
        p.kind = PolygonKind::ventricle;
    } else if (kind == "obstacle") {
        p.kind = PolygonKind::obstacle;
    } else {
        throw SchemaError(where + ".kind: expected \"ventricle\" or \"obstacle\"");
    }
    if (!j.contains("vertices") || !j["vertices"].is_array()) {
        throw SchemaError(where + ".vertices: expected an array of [u, v] pairs");
    }
    const auto& vs = j["vertices"];
    for (std::size_t k = 0; k < vs.size(); ++k) {
        p.vertices.push_back(as_vec2(vs[k], where + ".vertices[" + std::to_string(k) + "]"));
    }
    return p;
}

}  // namespace

bool Polygon::contains(const Vec2& q) const
{
    bool inside = false;
    const std::size_t n = vertices.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = vertices[j];
        const Vec2& b = vertices[i];
        if (orientation(a, b, q) == 0 && on_segment(a, q, b)) {
            return true;
        }
        if ((b.y() > q.y()) != (a.y() > q.y())) {
            const double x = b.x() + (q.y() - b.y()) * (a.x() - b.x()) / (a.y() - b.y());
            if (q.x() < x) {
                inside = !inside;
            }
        }
    }
    return inside;
}

Vec2 SliceFrame::to_slice(const Vec3& world) const
{
    const Vec3 d = world - origin;
    return 1e3 * Vec2(d.dot(u_axis), d.dot(v_axis));
}

Vec3 SliceFrame::to_world(const Vec2& s) const
{
    return origin + 1e-3 * (s.x() * u_axis + s.y() * v_axis);
}

void PhantomMap::validate() const
{
    if (walls.empty()) {
        throw InvalidParameter("phantom has no wall polygons");
    }
    for (std::size_t k = 0; k < walls.size(); ++k) {
        check_simple(walls[k], "walls[" + std::to_string(k) + "]");
    }
    if (std::abs(slice.u_axis.norm() - 1.0) > 1e-9 || std::abs(slice.v_axis.norm() - 1.0) > 1e-9 ||
        std::abs(slice.u_axis.dot(slice.v_axis)) > 1e-9 || !slice.origin.allFinite()) {
        throw InvalidParameter("slice axes must be orthonormal");
    }
    if (!(tumor.radius > 0.0) || !tumor.center.allFinite()) {
        throw InvalidParameter("tumor radius must be positive");
    }
    if (!(capture_distance > 0.0)) {
        throw InvalidParameter("capture distance must be positive");
    }
    if (!entry.position.allFinite() || !std::isfinite(entry.heading)) {
        throw InvalidParameter("entry pose must be finite");
    }
    auto in_free_space = [&](const Vec2& q) {
        bool in_ventricle = false;
        for (const Polygon& p : walls) {
            if (p.kind == PolygonKind::ventricle && p.contains(q)) {
                in_ventricle = true;
            }
            if (p.kind == PolygonKind::obstacle && p.contains(q)) {
                return false;
            }
        }
        return in_ventricle;
    };
    if (!in_free_space(tumor.center)) {
        throw InvalidParameter("tumor center must lie inside a ventricle polygon and outside obstacles");
    }
    if (!in_free_space(entry.position)) {
        throw InvalidParameter("entry point must lie inside a ventricle polygon and outside obstacles");
    }
}

Vec2 PhantomMap::b0_direction(const MagneticEnvironment& env) const
{
    const Vec3 b = env.direction();
    const Vec2 in_slice(b.dot(slice.u_axis), b.dot(slice.v_axis));
    if (in_slice.norm() < 1e-9) {
        throw InvalidParameter("B0 is normal to the imaging slice; entry heading is undefined");
    }
    return in_slice.normalized();
}

Vec2 PhantomMap::entry_direction(const MagneticEnvironment& env) const
{
    const Vec2 b = b0_direction(env);
    const Vec2 n(b.y(), -b.x());
    return std::cos(entry.heading) * b + std::sin(entry.heading) * n;
}

FramePose PhantomMap::entry_frame(const MagneticEnvironment& env) const
{
    const Vec2 t = entry_direction(env);
    const Vec2 b = b0_direction(env);
    Vec2 side(-t.y(), t.x());
    const double toward_b0 = side.dot(b);
    if (toward_b0 < 0.0 || (toward_b0 == 0.0 && side.dot(Vec2(b.y(), -b.x())) < 0.0)) {
        side = -side;
    }
    FramePose f;
    f.origin = slice.to_world(entry.position);
    const Vec3 z = (t.x() * slice.u_axis + t.y() * slice.v_axis).normalized();
    const Vec3 x = (side.x() * slice.u_axis + side.y() * slice.v_axis).normalized();
    f.rotation.col(0) = x;
    f.rotation.col(1) = z.cross(x);
    f.rotation.col(2) = z;
    f.label = FrameLabel::control;
    return f;
}

PhantomMap phantom_from_json(const nlohmann::json& j)
{
    using namespace json_util;
    const std::string w = "phantom";
    if (!j.is_object()) {
        throw SchemaError("phantom: expected an object");
    }
    if (string(j, "schema", w) != kSchema) {
        throw SchemaError(std::string("phantom.schema: expected \"") + kSchema + "\"");
    }
    reject_unknown(j, {"schema", "name", "description", "synthetic", "slice", "walls", "entry", "tumor", "capture_distance"},
                   w);
    PhantomMap m;
    m.name = j.contains("name") ? string(j, "name", w) : std::string("unnamed");
    if (j.contains("synthetic")) {
        if (!j["synthetic"].is_boolean()) {
            throw SchemaError("phantom.synthetic: expected a boolean");
        }
        m.synthetic = j["synthetic"].get<bool>();
    }
    if (j.contains("slice")) {
        const auto& s = j["slice"];
        if (!s.is_object()) {
            throw SchemaError("phantom.slice: expected an object");
        }
        reject_unknown(s, {"origin", "u_axis", "v_axis"}, "phantom.slice");
        if (s.contains("origin")) {
            m.slice.origin = vec3(s, "origin", "phantom.slice");
        }
        if (s.contains("u_axis")) {
            m.slice.u_axis = vec3(s, "u_axis", "phantom.slice");
        }
        if (s.contains("v_axis")) {
            m.slice.v_axis = vec3(s, "v_axis", "phantom.slice");
        }
    }
    if (!j.contains("walls") || !j["walls"].is_array()) {
        throw SchemaError("phantom.walls: expected an array of polygons");
    }
    for (std::size_t k = 0; k < j["walls"].size(); ++k) {
        m.walls.push_back(polygon_from_json(j["walls"][k], "phantom.walls[" + std::to_string(k) + "]"));
    }
    if (j.contains("entry")) {
        const auto& e = j["entry"];
        if (!e.is_object()) {
            throw SchemaError("phantom.entry: expected an object");
        }
        reject_unknown(e, {"position", "heading", "heading_deg"}, "phantom.entry");
        m.entry.position = vec2(e, "position", "phantom.entry");
        m.entry.heading = optional_angle(e, "heading", "phantom.entry").value_or(m.entry.heading);
    }
    if (!j.contains("tumor") || !j["tumor"].is_object()) {
        throw SchemaError("phantom.tumor: expected an object");
    }
    reject_unknown(j["tumor"], {"center", "radius"}, "phantom.tumor");
    m.tumor.center = vec2(j["tumor"], "center", "phantom.tumor");
    m.tumor.radius = number(j["tumor"], "radius", "phantom.tumor");
    m.capture_distance = optional_number(j, "capture_distance", w).value_or(m.capture_distance);
    try {
        m.validate();
    } catch (const InvalidParameter& e) {
        throw SchemaError(std::string("phantom: ") + e.what());
    }
    return m;
}

nlohmann::json phantom_to_json(const PhantomMap& m)
{
    using json_util::to_json;
    nlohmann::json walls = nlohmann::json::array();
    for (const Polygon& p : m.walls) {
        nlohmann::json vs = nlohmann::json::array();
        for (const Vec2& v : p.vertices) {
            vs.push_back(to_json(v));
        }
        walls.push_back({{"name", p.name},
                         {"kind", p.kind == PolygonKind::ventricle ? "ventricle" : "obstacle"},
                         {"vertices", vs}});
    }
    return {{"schema", kSchema},
            {"name", m.name},
            {"synthetic", m.synthetic},
            {"slice", {{"origin", to_json(m.slice.origin)}, {"u_axis", to_json(m.slice.u_axis)},
                       {"v_axis", to_json(m.slice.v_axis)}}},
            {"walls", walls},
            {"entry", {{"position", to_json(m.entry.position)}, {"heading", m.entry.heading}}},
            {"tumor", {{"center", to_json(m.tumor.center)}, {"radius", m.tumor.radius}}},
            {"capture_distance", m.capture_distance}};
}

PhantomMap load_phantom(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw SchemaError("cannot open phantom file " + path.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("phantom " + path.string() + ": invalid JSON: " + e.what());
    }
    return phantom_from_json(j);
}

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d)
{
    const int o1 = orientation(a, b, c);
    const int o2 = orientation(a, b, d);
    const int o3 = orientation(c, d, a);
    const int o4 = orientation(c, d, b);
    if (o1 != o2 && o3 != o4) {
        return true;
    }
    return (o1 == 0 && on_segment(a, c, b)) || (o2 == 0 && on_segment(a, d, b)) ||
           (o3 == 0 && on_segment(c, a, d)) || (o4 == 0 && on_segment(c, b, d));
}

CollisionReport collide(std::span<const Vec2> polyline, const PhantomMap& map)
{
    if (polyline.size() < 2) {
        throw InvalidParameter("collision polyline needs at least 2 points");
    }
    CollisionReport report;
    double arc = 0.0;
    for (std::size_t s = 0; s + 1 < polyline.size(); ++s) {
        const Vec2& a = polyline[s];
        const Vec2& b = polyline[s + 1];
        const double len = (b - a).norm();
        if (len == 0.0) {
            continue;
        }
        const Vec2 lo = a.cwiseMin(b);
        const Vec2 hi = a.cwiseMax(b);
        double best_t = 2.0;
        for (std::size_t p = 0; p < map.walls.size(); ++p) {
            const auto& v = map.walls[p].vertices;
            for (std::size_t e = 0; e < v.size(); ++e) {
                const Vec2& c = v[e];
                const Vec2& d = v[(e + 1) % v.size()];
                if (std::max(c.x(), d.x()) < lo.x() || std::min(c.x(), d.x()) > hi.x() ||
                    std::max(c.y(), d.y()) < lo.y() || std::min(c.y(), d.y()) > hi.y()) {
                    continue;
                }
                if (!segments_intersect(a, b, c, d)) {
                    continue;
                }
                const double t = first_contact(a, b, c, d);
                if (t < best_t) {
                    best_t = t;
                    report.polygon = static_cast<int>(p);
                    report.edge = static_cast<int>(e);
                }
            }
        }
        if (best_t <= 1.0) {
            report.collided = true;
            report.segment = static_cast<int>(s);
            report.point = a + best_t * (b - a);
            report.arc = arc + best_t * len;
            return report;
        }
        arc += len;
    }
    return report;
}

bool tumor_reached(const Vec2& tip, const PhantomMap& map, double capture_distance)
{
    if (!(capture_distance > 0.0)) {
        throw InvalidParameter("capture distance must be positive");
    }
    return (tip - map.tumor.center).norm() <= map.tumor.radius + capture_distance;
}

void InsertionState::validate() const
{
    if (!(max_insertion > 0.0) || !(inserted_length >= 0.0) || inserted_length > max_insertion) {
        throw InvalidParameter("insertion length must lie in [0, max_insertion]");
    }
}

}  // namespace lorentz
