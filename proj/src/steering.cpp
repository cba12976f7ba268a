#include "lorentz/steering.hpp"

#include <cmath>

#include "lorentz/errors.hpp"

namespace lorentz {

Mat3 target_rotation(const FramePose& base, const SteerTarget& target)
{
    return base.rotation * bend_rotation(target.bend, target.azimuth);
}

SteerResult steer_to(const SteerTarget& target, const RodParams& rod, const FramePose& base,
                     std::span<const CoilSpec> coils, const MagneticEnvironment& env, const SteerOptions& options)
{
    if (!std::isfinite(target.bend) || !std::isfinite(target.azimuth)) {
        throw InvalidParameter("steering target must be finite");
    }
    if (std::abs(target.bend) > kMaxBend + 1e-12) {
        throw InvalidParameter("bend target exceeds the 120 degree model guard");
    }
    if (options.max_rounds < 1 || !(options.torque_tolerance > 0.0)) {
        throw InvalidParameter("steering options must be positive");
    }

    IkProblem problem;
    problem.external_tip_force = options.external_tip_force;
    problem.rod = rod;
    problem.base = base;
    problem.penalty_axis = env.direction();

    const AllocationLimits limits{options.power_cap, options.enforce_current_limits};

    // IK and allocation alternate until the coils reproduce the IK tip torque.
    auto attempt = [&](double bend, const SteerResult* warm) {
        IkProblem p = problem;
        p.desired_tip_rotation = target_rotation(base, {bend, target.azimuth});
        IkOptions ik_options = options.ik;
        if (warm) {
            ik_options.initial_base_force = warm->ik.base_force;
            ik_options.initial_base_moment = warm->ik.base_moment;
        }
        SteerResult r;
        r.bend = bend;
        for (int round = 1; round <= options.max_rounds; ++round) {
            r.rounds = round;
            r.ik = solve_ik(p, ik_options);
            const Mat3& tip_R = r.ik.rod_state.tip().R;
            r.allocation = allocate_currents(r.ik.tip_torque, tip_R, coils, env, limits);
            r.torque_mismatch = (r.allocation.achieved_torque - r.ik.tip_torque).norm();
            if (r.torque_mismatch <= options.torque_tolerance) {
                r.consistent = true;
                break;
            }
            if (r.allocation.saturated) {
                break;
            }
            // The remaining mismatch is the tip moment along B0; penalize it harder and re-solve.
            p.penalty_weight = p.penalty_weight == 0.0 ? 1e2 : 10.0 * p.penalty_weight;
            ik_options.initial_base_force = r.ik.base_force;
            ik_options.initial_base_moment = r.ik.base_moment;
        }
        return r;
    };

    SteerResult out = attempt(target.bend, nullptr);
    if (!out.consistent && out.allocation.saturated) {
        // Scale the bend back along the commanded plane to the largest pose the limits hold.
        // Scaling the currents instead can drop the rod onto the mirrored side of B0.
        SteerResult best = attempt(0.0, nullptr);
        double lo = 0.0;
        double hi = target.bend;
        for (int k = 0; k < options.saturation_steps; ++k) {
            const double mid = 0.5 * (lo + hi);
            SteerResult r = attempt(mid, &best);
            if (r.consistent) {
                lo = mid;
                best = std::move(r);
            } else {
                hi = mid;
            }
        }
        best.saturated = true;
        best.warning = "currents saturated: bend scaled back to " + std::to_string(best.bend) +
                       " rad by the power and current limits";
        out = std::move(best);
    } else if (!out.consistent) {
        out.warning = "no consistent IK/allocation pair within " + std::to_string(options.max_rounds) + " rounds";
    } else if (!out.ik.converged) {
        out.warning = "IK reached the iteration limit";
    }
    return out;
}

}  // namespace lorentz
