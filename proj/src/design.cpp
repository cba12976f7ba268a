#include "lorentz/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lorentz/errors.hpp"
#include "lorentz/steering.hpp"

namespace lorentz {

std::vector<double> DesignSweep::ratio_grid() const
{
    std::vector<double> out;
    for (const DesignPoint& p : points) {
        out.push_back(p.ratio);
    }
    return out;
}

std::vector<double> DesignSweep::power_at_target() const
{
    std::vector<double> out;
    for (const DesignPoint& p : points) {
        out.push_back(p.power);
    }
    return out;
}

std::vector<CoilSpec> coils_for_length(std::span<const CoilSpec> coil_template, double coil_length)
{
    if (!(coil_length > 0.0)) {
        throw InvalidParameter("coil length must be positive");
    }
    std::vector<CoilSpec> out(coil_template.begin(), coil_template.end());
    for (CoilSpec& c : out) {
        if (auto* g = std::get_if<AxialGeometry>(&c.geometry)) {
            const double pitch = c.wire.pitch() / g->layers;
            g->length = coil_length;
            c.turns = static_cast<int>(std::floor(coil_length / pitch + 1e-9));
            c.resistance_override.reset();
        } else if (auto* s = std::get_if<SaddleGeometry>(&c.geometry)) {
            s->length = coil_length;
            c.resistance_override.reset();
        }
    }
    return out;
}

DesignSweep design_curve(double total_length, double target_angle, std::span<const CoilSpec> coil_template,
                         const RodParams& rod, const MagneticEnvironment& env, const DesignOptions& options)
{
    if (!(total_length > 0.0)) {
        throw InvalidParameter("total length must be positive");
    }
    if (!(target_angle > 0.0) || target_angle > kMaxBend + 1e-12) {
        throw InvalidParameter("target angle must lie in (0, 120] degrees");
    }
    std::vector<double> ratios = options.ratios;
    if (ratios.empty()) {
        for (int k = 1; k <= 19; ++k) {
            ratios.push_back(k / 20.0);
        }
    }
    std::sort(ratios.begin(), ratios.end());
    for (std::size_t k = 0; k < ratios.size(); ++k) {
        if (!(ratios[k] > 0.0 && ratios[k] < 1.0) || (k > 0 && ratios[k] == ratios[k - 1])) {
            throw InvalidParameter("design ratios must be distinct and inside (0, 1)");
        }
    }

    DesignSweep sweep;
    sweep.target_angle = target_angle;
    for (double ratio : ratios) {
        DesignPoint pt;
        pt.ratio = ratio;
        pt.coil_length = ratio * total_length;
        pt.free_length = total_length - pt.coil_length;
        pt.power = std::numeric_limits<double>::infinity();
        const std::vector<CoilSpec> coils = coils_for_length(coil_template, pt.coil_length);
        const auto axial = std::find_if(coils.begin(), coils.end(),
                                        [](const CoilSpec& c) { return c.kind == CoilKind::axial; });
        if (axial != coils.end()) {
            pt.axial_turns = axial->turns;
            if (axial->turns >= 1) {
                pt.axial_resistance = coil_resistance(*axial);
            }
        }
        if (axial != coils.end() && axial->turns < 1) {
            pt.note = "coil too short for a single turn";
            sweep.points.push_back(pt);
            continue;
        }
        RodParams r = rod;
        r.free_length = pt.free_length;
        SteerOptions unlimited;
        unlimited.enforce_current_limits = false;
        const SteerResult res = steer_to({target_angle, 0.0}, r, options.base, coils, env, unlimited);
        pt.currents = res.allocation.currents;
        if (!res.consistent) {
            pt.note = res.warning.empty() ? "steering did not converge" : res.warning;
        } else {
            pt.power = res.allocation.total_power;
            pt.feasible = true;
            for (std::size_t j = 0; j < coils.size(); ++j) {
                if (std::abs(pt.currents[j]) > coils[j].current_limit) {
                    pt.feasible = false;
                    pt.note = "coil " + coils[j].name + " exceeds its current limit";
                    break;
                }
            }
        }
        sweep.points.push_back(pt);
    }
    for (const DesignPoint& pt : sweep.points) {
        if (pt.feasible && (!sweep.has_optimum || pt.power < sweep.optimum_power)) {
            sweep.has_optimum = true;
            sweep.optimum_ratio = pt.ratio;
            sweep.optimum_power = pt.power;
        }
    }
    return sweep;
}

void GrasperModel::validate() const
{
    coil.validate();
    if (!(lever_arm > 0.0)) {
        throw InvalidParameter("grasper lever arm must be positive");
    }
    if (!std::isfinite(rest_angle_to_B0) || !(calibration_factor >= 0.0)) {
        throw InvalidParameter("grasper angle and calibration must be finite, calibration non-negative");
    }
}

GrasperModel table1_grasper_model()
{
    GrasperModel m;
    m.coil = table1_grasper_coil();
    m.lever_arm = std::get<GrasperGeometry>(m.coil.geometry).length;
    return m;
}

double blocking_force(const GrasperModel& model, double current, const MagneticEnvironment& env)
{
    model.validate();
    env.validate();
    if (std::abs(current) > model.coil.current_limit) {
        throw InvalidParameter("grasper current exceeds its limit");
    }
    return model.calibration_factor * coil_moment_area(model.coil) * current * env.B0.norm() *
           std::sin(model.rest_angle_to_B0) / model.lever_arm;
}

std::vector<AblationRow> ablation_table(double resistance, std::span<const double> currents)
{
    if (!(resistance > 0.0) || !std::isfinite(resistance)) {
        throw InvalidParameter("resistance must be positive");
    }
    std::vector<AblationRow> rows;
    for (double i : currents) {
        if (!std::isfinite(i)) {
            throw InvalidParameter("ablation currents must be finite");
        }
        const double p = i * i * resistance;
        rows.push_back({i, p, p >= kAblationThreshold});
    }
    return rows;
}

}  // namespace lorentz
