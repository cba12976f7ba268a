#include "lorentz/rod.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

#include "lorentz/csv.hpp"
#include "lorentz/errors.hpp"
#include "lorentz/json_util.hpp"

namespace lorentz {

Vec3 RodParams::shear_extension_stiffness() const
{
    const double GA = shear_modulus * area;
    return {GA, GA, elastic_modulus * area};
}

Vec3 RodParams::bending_torsion_stiffness() const
{
    const double EI = elastic_modulus * area_moment;
    return {EI, EI, shear_modulus * polar_moment};
}

void RodParams::validate() const
{
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw InvalidParameter(std::string("rod parameter must be positive: ") + name);
        }
    };
    positive(elastic_modulus, "elastic_modulus");
    positive(shear_modulus, "shear_modulus");
    positive(area, "area");
    positive(area_moment, "area_moment");
    positive(polar_moment, "polar_moment");
    positive(free_length, "free_length");
    if (!(linear_density >= 0.0) || !std::isfinite(linear_density)) {
        throw InvalidParameter("rod parameter must be non-negative: linear_density");
    }
    if (!gravity.allFinite()) {
        throw InvalidParameter("rod parameter must be finite: gravity");
    }
    if (segment_count < 2) {
        throw InvalidParameter("rod segment_count must be >= 2");
    }
}

RodParams RodParams::from_rigidity(double flexural_rigidity, double diameter, double free_length,
                                   double poisson_ratio, int segment_count)
{
    const double r = 0.5 * diameter;
    RodParams p;
    p.area = std::numbers::pi * r * r;
    p.area_moment = std::numbers::pi * r * r * r * r / 4.0;
    p.polar_moment = 2.0 * p.area_moment;
    p.elastic_modulus = flexural_rigidity / p.area_moment;
    p.shear_modulus = p.elastic_modulus / (2.0 * (1.0 + poisson_ratio));
    p.linear_density = 1200.0 * p.area;  // polyurethane
    p.free_length = free_length;
    p.segment_count = segment_count;
    return p;
}

RodParams RodParams::defaults()
{
    return from_rigidity(4.45e-5, 1.0e-3, 0.02);
}

SegmentDerivative rod_rhs(const SegmentState& y, const RodParams& params)
{
    const Vec3 k1 = params.shear_extension_stiffness();
    const Vec3 k2 = params.bending_torsion_stiffness();
    if (!(k1.minCoeff() > 0.0) || !(k2.minCoeff() > 0.0)) {
        throw InvalidParameter("singular rod stiffness (zero modulus or section property)");
    }
    const Vec3 v = Vec3::UnitZ() + (y.R.transpose() * y.n).cwiseQuotient(k1);
    const Vec3 u = (y.R.transpose() * y.m).cwiseQuotient(k2);

    SegmentDerivative d;
    d.dp = y.R * v;
    d.dR = y.R * skew(u);
    d.dn = -params.linear_density * params.gravity;
    d.dm = -d.dp.cross(y.n);
    return d;
}

namespace {

SegmentState axpy(const SegmentState& y, double h, const SegmentDerivative& d)
{
    SegmentState out;
    out.p = y.p + h * d.dp;
    out.R = y.R + h * d.dR;
    out.n = y.n + h * d.dn;
    out.m = y.m + h * d.dm;
    return out;
}

SegmentState rk4_step(const SegmentState& y, double h, const RodParams& params)
{
    const SegmentDerivative k1 = rod_rhs(y, params);
    const SegmentDerivative k2 = rod_rhs(axpy(y, 0.5 * h, k1), params);
    const SegmentDerivative k3 = rod_rhs(axpy(y, 0.5 * h, k2), params);
    const SegmentDerivative k4 = rod_rhs(axpy(y, h, k3), params);
    const double w = h / 6.0;
    SegmentState out;
    out.p = y.p + w * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
    out.R = orthonormalize(y.R + w * (k1.dR + 2.0 * k2.dR + 2.0 * k3.dR + k4.dR));
    out.n = y.n + w * (k1.dn + 2.0 * k2.dn + 2.0 * k3.dn + k4.dn);
    out.m = y.m + w * (k1.dm + 2.0 * k2.dm + 2.0 * k3.dm + k4.dm);
    return out;
}

bool finite(const SegmentState& y)
{
    return y.p.allFinite() && y.R.allFinite() && y.n.allFinite() && y.m.allFinite();
}

void check_inputs(const FramePose& base, const Vec3& n0, const Vec3& m0, const RodParams& params)
{
    params.validate();
    if (!is_rotation(base.rotation) || !base.origin.allFinite()) {
        throw InvalidParameter("base pose is not a valid rigid transform");
    }
    if (!n0.allFinite() || !m0.allFinite()) {
        throw InvalidParameter("initial force and moment must be finite");
    }
}

template <class Visit>
SegmentState integrate(const FramePose& base, const Vec3& n0, const Vec3& m0, const RodParams& params, Visit&& visit)
{
    check_inputs(base, n0, m0, params);
    const int N = params.segment_count;
    const double h = params.free_length / N;
    SegmentState y{base.origin, base.rotation, n0, m0};
    visit(0, y);
    for (int i = 1; i <= N; ++i) {
        y = rk4_step(y, h, params);
        if (!finite(y)) {
            throw DivergenceError("rod integration diverged at s = " + std::to_string(i * h) + " m", i * h);
        }
        visit(i, y);
    }
    return y;
}

}  // namespace

RodState integrate_forward(const FramePose& base, const Vec3& n0, const Vec3& m0, const RodParams& params)
{
    RodState state;
    state.segments.resize(static_cast<std::size_t>(params.segment_count) + 1);
    state.arc.resize(state.segments.size());
    const double h = params.free_length / params.segment_count;
    integrate(base, n0, m0, params, [&](int i, const SegmentState& y) {
        state.segments[i] = y;
        state.arc[i] = (i == params.segment_count) ? params.free_length : i * h;
    });
    return state;
}

SegmentState integrate_tip(const FramePose& base, const Vec3& n0, const Vec3& m0, const RodParams& params)
{
    return integrate(base, n0, m0, params, [](int, const SegmentState&) {});
}

RodState straight_rod(const FramePose& base, const RodParams& params)
{
    return integrate_forward(base, Vec3::Zero(), Vec3::Zero(), params);
}

double tip_bend_angle(const RodState& state)
{
    const Vec3 t0 = state.base().R.col(2);
    const Vec3 t1 = state.tip().R.col(2);
    return std::atan2(t0.cross(t1).norm(), t0.dot(t1));
}

RodParams rod_params_from_json(const nlohmann::json& j)
{
    using namespace json_util;
    const std::string where = "rod";
    if (!j.is_object()) {
        throw SchemaError("rod: expected an object");
    }
    reject_unknown(j, {"free_length", "poisson_ratio", "segment_count", "diameter", "elastic_modulus",
                       "flexural_rigidity", "area", "area_moment", "polar_moment", "shear_modulus", "linear_density",
                       "gravity"},
                   where);
    const double length = number(j, "free_length", where);
    const double poisson = optional_number(j, "poisson_ratio", where).value_or(0.4);
    const int segments = j.contains("segment_count") ? integer(j, "segment_count", where) : 100;

    if (j.contains("elastic_modulus") && j.contains("flexural_rigidity")) {
        throw SchemaError("rod: give either elastic_modulus or flexural_rigidity, not both");
    }
    RodParams p;
    if (j.contains("diameter")) {
        const double d = number(j, "diameter", where);
        double EI = optional_number(j, "flexural_rigidity", where).value_or(4.45e-5);
        if (auto E = optional_number(j, "elastic_modulus", where)) {
            EI = *E * std::numbers::pi * std::pow(0.5 * d, 4) / 4.0;
        }
        p = RodParams::from_rigidity(EI, d, length, poisson, segments);
    } else {
        p.area = number(j, "area", where);
        p.area_moment = number(j, "area_moment", where);
        p.polar_moment = optional_number(j, "polar_moment", where).value_or(2.0 * p.area_moment);
        if (auto EI = optional_number(j, "flexural_rigidity", where)) {
            p.elastic_modulus = *EI / p.area_moment;
        } else {
            p.elastic_modulus = number(j, "elastic_modulus", where);
        }
        p.shear_modulus = p.elastic_modulus / (2.0 * (1.0 + poisson));
        p.linear_density = 0.0;
        p.free_length = length;
        p.segment_count = segments;
    }
    if (auto G = optional_number(j, "shear_modulus", where)) {
        p.shear_modulus = *G;
    }
    if (auto rho = optional_number(j, "linear_density", where)) {
        p.linear_density = *rho;
    }
    if (j.contains("gravity")) {
        p.gravity = vec3(j, "gravity", where);
    }
    try {
        p.validate();
    } catch (const InvalidParameter& e) {
        throw SchemaError(std::string("rod: ") + e.what());
    }
    return p;
}

nlohmann::json rod_params_to_json(const RodParams& p)
{
    return {
        {"elastic_modulus", p.elastic_modulus},
        {"shear_modulus", p.shear_modulus},
        {"area", p.area},
        {"area_moment", p.area_moment},
        {"polar_moment", p.polar_moment},
        {"linear_density", p.linear_density},
        {"gravity", json_util::to_json(p.gravity)},
        {"free_length", p.free_length},
        {"segment_count", p.segment_count},
    };
}

void write_rod_state_csv(std::ostream& os, const RodState& state)
{
    write_csv_header(os, "lorentz rod-state v1 (SI units; quaternion w,x,y,z of R)",
                     {"s", "px", "py", "pz", "qw", "qx", "qy", "qz", "nx", "ny", "nz", "mx", "my", "mz"});
    for (std::size_t i = 0; i < state.segments.size(); ++i) {
        const SegmentState& y = state.segments[i];
        Eigen::Quaterniond q(y.R);
        if (q.w() < 0.0) {
            q.coeffs() = -q.coeffs();
        }
        write_csv_row(os, {state.arc[i], y.p.x(), y.p.y(), y.p.z(), q.w(), q.x(), q.y(), q.z(),
                           y.n.x(), y.n.y(), y.n.z(), y.m.x(), y.m.y(), y.m.z()});
    }
}

}  // namespace lorentz
