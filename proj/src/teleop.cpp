#include "lorentz/teleop.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lorentz/errors.hpp"
#include "lorentz/workspace.hpp"

namespace lorentz {

const char* to_string(Mode mode)
{
    switch (mode) {
    case Mode::steering:
        return "steering";
    case Mode::imaging:
        return "imaging";
    case Mode::grasping:
        return "grasping";
    }
    return "?";
}

const char* to_string(AckStatus status)
{
    switch (status) {
    case AckStatus::accepted:
        return "accepted";
    case AckStatus::clamped:
        return "clamped";
    case AckStatus::stale:
        return "stale";
    case AckStatus::rejected:
        return "rejected";
    }
    return "?";
}

namespace {

double wrap_angle(double a)
{
    a = std::remainder(a, 2.0 * std::numbers::pi);
    return a <= -std::numbers::pi ? a + 2.0 * std::numbers::pi : a;
}

std::string format_value(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

SimSession::SimSession(SessionSettings settings) : settings_(std::move(settings))
{
    const SystemConfig& cfg = settings_.config;
    try {
        cfg.validate();
        settings_.phantom.validate();
        entry_ = settings_.phantom.entry_frame(cfg.env);
    } catch (const InvalidParameter& e) {
        throw SchemaError(std::string("session: ") + e.what());
    }
    coils_ = cfg.capped_steering_coils();
    inserted_ = cfg.teleop.initial_insertion;
    log("session_start", "phantom " + settings_.phantom.name + ", power cap " + format_value(cfg.safety.power_cap) + " W");
    std::vector<std::string> warnings;
    solve_pose(warnings);
    telemetry_ = make_telemetry(std::move(warnings));
    was_colliding_ = telemetry_.collision;
    was_reached_ = telemetry_.tumor_reached;
    last_mode_ = telemetry_.mode;
}

double SimSession::max_grasper_current() const
{
    const GrasperModel& g = settings_.config.grasper;
    const double cap = settings_.config.safety.power_cap;
    const double R = coil_resistance(g.coil);
    double i = std::min(g.coil.current_limit, std::sqrt(cap / R));
    while (i > 0.0 && i * i * R > cap) {
        i = std::nextafter(i, 0.0);
    }
    return i;
}

void SimSession::log(const std::string& kind, const std::string& message)
{
    events_.push_back({tick_, static_cast<double>(tick_) * dt(), kind, message});
}

std::vector<Event> SimSession::take_events()
{
    std::vector<Event> out(events_.begin() + static_cast<std::ptrdiff_t>(events_taken_), events_.end());
    events_taken_ = events_.size();
    return out;
}

void SimSession::release_client(const std::string& client_id)
{
    if (operator_ && *operator_ == client_id) {
        operator_.reset();
        log("operator_released", client_id + " released the operator lock");
    }
}

Ack SimSession::handle_command(const Command& cmd)
{
    Ack ack;
    ack.client_id = cmd.client_id;
    ack.sequence = cmd.sequence;
    if (cmd.client_id.empty()) {
        ack.status = AckStatus::rejected;
        ack.reason = "missing client_id";
        return ack;
    }
    if (operator_ && *operator_ != cmd.client_id) {
        ack.status = AckStatus::rejected;
        ack.reason = "operator lock held";
        return ack;
    }
    if (const auto it = last_sequence_.find(cmd.client_id); it != last_sequence_.end() && cmd.sequence <= it->second) {
        ack.status = AckStatus::stale;
        ack.reason = "sequence " + std::to_string(cmd.sequence) + " not after " + std::to_string(it->second);
        return ack;
    }
    for (const auto& [name, value] : {std::pair{"insert_velocity", cmd.insert_velocity},
                                      std::pair{"target_bend", cmd.target_bend},
                                      std::pair{"bend_azimuth", cmd.bend_azimuth},
                                      std::pair{"grasper_current", cmd.grasper_current}}) {
        if (value && !std::isfinite(*value)) {
            ack.status = AckStatus::rejected;
            ack.reason = std::string("non-finite ") + name;
            return ack;
        }
    }
    if (!operator_) {
        operator_ = cmd.client_id;
        log("operator_lock", cmd.client_id + " holds the operator lock");
    }
    last_sequence_[cmd.client_id] = cmd.sequence;

    auto clamp_field = [&](const char* name, double value, double limit) {
        const double applied = std::clamp(value, -limit, limit);
        if (applied != value) {
            ack.clamped.push_back(name);
        }
        ack.applied[name] = applied;
        return applied;
    };
    const TeleopSettings& t = settings_.config.teleop;
    if (cmd.insert_velocity) {
        insert_velocity_ = clamp_field("insert_velocity", *cmd.insert_velocity, t.max_insert_speed);
    }
    if (cmd.target_bend) {
        target_bend_ = clamp_field("target_bend", *cmd.target_bend, kMaxBend);
    }
    if (cmd.bend_azimuth) {
        target_azimuth_ = wrap_angle(*cmd.bend_azimuth);
        ack.applied["bend_azimuth"] = target_azimuth_;
    }
    if (cmd.grasper_current) {
        grasper_current_ = clamp_field("grasper_current", *cmd.grasper_current, max_grasper_current());
    }
    if (cmd.coils_enabled) {
        coils_enabled_ = *cmd.coils_enabled;
        ack.coils_enabled = coils_enabled_;
    }
    ack.status = ack.clamped.empty() ? AckStatus::accepted : AckStatus::clamped;
    return ack;
}

Telemetry SimSession::step(double dt_in)
{
    if (std::abs(dt_in - dt()) > 1e-12 * dt()) {
        throw InvalidParameter("step dt must equal 1 / tick_rate");
    }
    return step();
}

Telemetry SimSession::step()
{
    const SystemConfig& cfg = settings_.config;
    const double h = dt();
    ++tick_;
    inserted_ = std::clamp(inserted_ + 1e-3 * insert_velocity_ * h, 0.0, cfg.max_insertion);

    const Vec2 target = target_bend_ * Vec2(std::cos(target_azimuth_), std::sin(target_azimuth_));
    const Vec2 diff = target - bend_vector_;
    const double max_step = cfg.teleop.slew_rate * h;
    if (diff.norm() <= max_step) {
        bend_vector_ = target;
    } else {
        bend_vector_ += diff * (max_step / diff.norm());
    }

    std::vector<std::string> warnings;
    solve_pose(warnings);
    telemetry_ = make_telemetry(std::move(warnings));

    if (telemetry_.mode != last_mode_) {
        log("mode", std::string("mode changed to ") + to_string(telemetry_.mode));
        last_mode_ = telemetry_.mode;
    }
    if (telemetry_.collision && !was_colliding_) {
        log("collision", "wall contact at (" + format_value(telemetry_.collision_point.x()) + ", " +
                             format_value(telemetry_.collision_point.y()) + ") mm");
    }
    if (telemetry_.tumor_reached && !was_reached_) {
        log("tumor_reached", "tip within " + format_value(telemetry_.tumor_distance) + " mm of the tumor center");
    }
    if (telemetry_.saturated && !was_saturated_) {
        log("saturated", "steering currents limited by the power or current caps");
    }
    was_colliding_ = telemetry_.collision;
    was_reached_ = telemetry_.tumor_reached;
    was_saturated_ = telemetry_.saturated;
    return telemetry_;
}

void SimSession::solve_pose(std::vector<std::string>& warnings)
{
    const SystemConfig& cfg = settings_.config;
    const SolveKey key{inserted_, bend_vector_, coils_enabled_, grasper_current_};
    if (solved_for_ && *solved_for_ == key) {
        return;
    }

    RodParams rod = cfg.rod;
    rod.free_length = std::clamp(inserted_, cfg.teleop.min_flexible_length, cfg.rod.free_length);
    const FramePose base = flexible_base(entry_, inserted_, cfg.rod.free_length);
    const double grasper_power = grasper_current_ * grasper_current_ * coil_resistance(cfg.grasper.coil);
    const double budget = cfg.safety.power_cap - grasper_power;
    const double bend = bend_vector_.norm();

    Pose next;
    next.currents.assign(coils_.size(), 0.0);
    bool failed = false;
    std::string failure;
    if (!coils_enabled_ || bend == 0.0) {
        next.rod = straight_rod(base, rod);
    } else if (!(budget > 1e-12)) {
        next.rod = straight_rod(base, rod);
        next.saturated = true;
        warnings.push_back("no steering power budget left beside the grasper");
    } else {
        SteerOptions so;
        so.power_cap = budget;
        if (pose_.have_warm) {
            so.ik.initial_base_force = pose_.warm.head<3>();
            so.ik.initial_base_moment = pose_.warm.tail<3>();
        }
        const SteerTarget target{bend, std::atan2(bend_vector_.y(), bend_vector_.x())};
        try {
            const SteerResult res = steer_to(target, rod, base, coils_, cfg.env, so);
            if (res.consistent || (res.saturated && res.ik.converged)) {
                next.rod = res.ik.rod_state;
                next.currents = res.allocation.currents;
                next.saturated = res.saturated;
                next.warm << res.ik.base_force, res.ik.base_moment;
                next.have_warm = true;
            } else {
                failed = true;
                failure = res.warning.empty() ? "steering did not converge" : res.warning;
            }
        } catch (const std::exception& e) {
            failed = true;
            failure = e.what();
        }
    }
    if (failed) {
        // Hold the previous pose; keep its currents only if they still fit the budget.
        warnings.push_back("solver failed, holding previous pose: " + failure);
        log("solver_warning", failure);
        next = pose_;
        next.saturated = pose_.saturated;
        if (next.rod.segments.empty()) {
            next.rod = straight_rod(base, rod);
            next.currents.assign(coils_.size(), 0.0);
        }
    }

    // Hard interlock, independent of the solver path.
    for (std::size_t j = 0; j < coils_.size(); ++j) {
        next.currents[j] = std::clamp(next.currents[j], -coils_[j].current_limit, coils_[j].current_limit);
    }
    auto over_cap = [&] { return total_power(next.currents, coils_) + grasper_power > cfg.safety.power_cap; };
    for (int guard = 0; guard < 64 && over_cap(); ++guard) {
        const double p = total_power(next.currents, coils_);
        const double s = budget > 0.0 ? std::min(1.0, std::sqrt(budget / p)) * (1.0 - 1e-15 * (guard + 1)) : 0.0;
        for (double& i : next.currents) {
            i *= s;
        }
        next.saturated = true;
        if (guard == 0) {
            warnings.push_back("steering currents scaled to the power cap");
        }
    }
    if (over_cap()) {
        std::fill(next.currents.begin(), next.currents.end(), 0.0);
    }
    if (!coils_enabled_) {
        std::fill(next.currents.begin(), next.currents.end(), 0.0);
    }
    pose_ = std::move(next);
    pose_.have_warm = pose_.have_warm && !failed;
    solved_for_ = key;
    held_warnings_ = warnings;
}

Telemetry SimSession::make_telemetry(std::vector<std::string> warnings)
{
    const SystemConfig& cfg = settings_.config;
    const PhantomMap& map = settings_.phantom;
    const SliceFrame& slice = map.slice;
    if (warnings.empty()) {
        warnings = held_warnings_;
    }

    Telemetry t;
    t.tick = tick_;
    t.sim_time = static_cast<double>(tick_) * dt();
    t.mode = !coils_enabled_ ? Mode::imaging : (grasper_current_ != 0.0 ? Mode::grasping : Mode::steering);
    t.inserted_length = 1e3 * inserted_;
    t.flexible_length = 1e3 * pose_.rod.arc.back();
    t.commanded_bend = bend_vector_.norm();
    t.commanded_azimuth = t.commanded_bend > 0.0 ? std::atan2(bend_vector_.y(), bend_vector_.x()) : target_azimuth_;
    t.bend = tip_bend_angle(pose_.rod);
    for (const SegmentState& s : pose_.rod.segments) {
        t.polyline.push_back(slice.to_slice(s.p));
    }
    t.shaft_start = map.entry.position;
    t.shaft_end = t.polyline.front();
    const SegmentState& tip = pose_.rod.tip();
    t.tip = t.polyline.back();
    t.tip_position = tip.p;
    t.tip_rotation = tip.R;
    const Vec3 tangent = tip.R.col(2);
    const Vec2 dir(tangent.dot(slice.u_axis), tangent.dot(slice.v_axis));
    t.tip_direction = dir.norm() > 0.0 ? Vec2(dir.normalized()) : Vec2::Zero();

    for (const CoilSpec& c : coils_) {
        t.coil_names.push_back(c.name);
    }
    t.currents = pose_.currents;
    t.grasper_current = grasper_current_;
    t.steering_power = total_power(t.currents, coils_);
    t.total_power = t.steering_power + grasper_current_ * grasper_current_ * coil_resistance(cfg.grasper.coil);
    t.power_cap = cfg.safety.power_cap;
    t.imaging_distorted =
        coils_enabled_ && std::any_of(t.currents.begin(), t.currents.end(), [](double i) { return i != 0.0; });

    std::vector<Vec2> path;
    path.push_back(t.shaft_start);
    path.insert(path.end(), t.polyline.begin(), t.polyline.end());
    const CollisionReport hit = collide(path, map);
    t.collision = hit.collided;
    t.collision_point = hit.point;
    t.tumor_distance = (t.tip - map.tumor.center).norm();
    t.tumor_reached = tumor_reached(t.tip, map, map.capture_distance);
    t.grasper_force = blocking_force(cfg.grasper, grasper_current_, cfg.env);
    t.saturated = pose_.saturated;
    t.solver_warning = std::any_of(warnings.begin(), warnings.end(),
                                   [](const std::string& w) { return w.rfind("solver failed", 0) == 0; });
    t.warnings = std::move(warnings);
    return t;
}

}  // namespace lorentz
