#include "lorentz/workspace.hpp"

#include <algorithm>
#include <cmath>

#include "lorentz/equilibrium.hpp"
#include "lorentz/errors.hpp"

namespace lorentz {

FramePose flexible_base(const FramePose& entry, double inserted, double free_length)
{
    FramePose b = entry;
    b.origin = entry.origin + std::max(0.0, inserted - free_length) * entry.rotation.col(2);
    b.label = FrameLabel::control;
    return b;
}

namespace {

std::vector<double> linspace(double span, int n)
{
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        out[k] = n == 1 ? 0.0 : span * (2 * k - (n - 1)) / (n - 1);  // exactly antisymmetric
    }
    return out;
}

// Saddle coil whose moment axis lies closest to the base x axis.
int in_plane_saddle(std::span<const CoilSpec> coils)
{
    int best = -1;
    double best_dot = 0.5;
    for (std::size_t j = 0; j < coils.size(); ++j) {
        const double d = std::abs(coils[j].moment_axis.x());
        if (coils[j].kind == CoilKind::saddle && d > best_dot) {
            best_dot = d;
            best = static_cast<int>(j);
        }
    }
    return best;
}

}  // namespace

Workspace compute_workspace(const RodParams& rod, const FramePose& entry, std::span<const CoilSpec> coils,
                            const MagneticEnvironment& env, const InsertionState& insertion, double current_cap,
                            double power_cap, int grid, const WorkspaceOptions& options)
{
    if (grid < 8) {
        throw InvalidParameter("workspace grid must be >= 8");
    }
    if (!(current_cap >= 0.0) || !(power_cap >= 0.0)) {
        throw InvalidParameter("workspace caps must be non-negative");
    }
    insertion.validate();
    if (!(insertion.inserted_length > 0.0)) {
        throw InvalidParameter("workspace needs a positive inserted length");
    }
    const auto axial_it = std::find_if(coils.begin(), coils.end(),
                                       [](const CoilSpec& c) { return c.kind == CoilKind::axial; });
    const int axial = axial_it == coils.end() ? -1 : static_cast<int>(axial_it - coils.begin());
    const int saddle = in_plane_saddle(coils);
    if (axial < 0 && saddle < 0) {
        throw InvalidParameter("workspace needs an axial or an in-plane saddle coil");
    }

    RodParams r = rod;
    r.free_length = std::min(insertion.inserted_length, rod.free_length);
    const FramePose base = flexible_base(entry, insertion.inserted_length, rod.free_length);
    const Vec3 ex = base.rotation.col(0);
    const Vec3 ez = base.rotation.col(2);

    const double span = options.grid_span >= 0.0 ? options.grid_span : current_cap;
    const std::vector<double> axial_values = axial >= 0 ? linspace(span, grid) : std::vector<double>{0.0};
    const std::vector<double> saddle_values = saddle >= 0 ? linspace(span, grid) : std::vector<double>{0.0};

    Workspace ws;
    std::vector<std::vector<double>> seen;
    for (double ia : axial_values) {
        for (double is : saddle_values) {
            std::vector<double> I(coils.size(), 0.0);
            if (axial >= 0) {
                I[axial] = ia;
            }
            if (saddle >= 0) {
                I[saddle] = is;
            }
            if (std::find(seen.begin(), seen.end(), I) != seen.end()) {
                continue;
            }
            seen.push_back(I);
            bool inside = true;
            for (std::size_t j = 0; j < coils.size(); ++j) {
                inside = inside && std::abs(I[j]) <= std::min(current_cap, coils[j].current_limit);
            }
            const double power = total_power(I, coils);
            if (!inside || power > power_cap) {
                ++ws.rejected;
                continue;
            }
            for (int branch : {1, -1}) {
                EquilibriumOptions eo;
                eo.branch = branch;
                EquilibriumResult eq;
                try {
                    eq = solve_equilibrium(r, base, coils, I, env, Vec3::Zero(), eo);
                } catch (const DivergenceError&) {
                    eq.converged = false;
                }
                if (!eq.converged) {
                    ++ws.unconverged;
                    break;
                }
                WorkspaceSample s;
                s.currents = I;
                s.branch = branch;
                s.tip = eq.rod_state.tip().p;
                const Vec3 d = s.tip - base.origin;
                s.planar = Vec2(d.dot(ez), d.dot(ex));
                const Vec3 t = eq.rod_state.tip().R.col(2);
                const double magnitude = std::atan2(t.cross(ez).norm(), t.dot(ez));
                s.bend = t.dot(ex) < 0.0 ? -magnitude : magnitude;
                s.power = power;
                ws.max_bend = std::max(ws.max_bend, std::abs(s.bend));
                ws.samples.push_back(s);
                if (!eq.escaped_unstable) {
                    break;  // unique branch
                }
            }
        }
    }
    if (ws.samples.empty()) {
        ws.diagnostic = "no grid point satisfies the current and power caps with a converged equilibrium (" +
                        std::to_string(ws.rejected) + " outside caps, " + std::to_string(ws.unconverged) +
                        " unconverged)";
        return ws;
    }
    std::vector<const WorkspaceSample*> order;
    for (const WorkspaceSample& s : ws.samples) {
        order.push_back(&s);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const WorkspaceSample* a, const WorkspaceSample* b) { return a->bend < b->bend; });
    ws.boundary.push_back(Vec2::Zero());
    for (const WorkspaceSample* s : order) {
        if (ws.boundary.size() == 1 || (s->planar - ws.boundary.back()).norm() > 1e-12) {
            ws.boundary.push_back(s->planar);
        }
    }
    return ws;
}

}  // namespace lorentz
