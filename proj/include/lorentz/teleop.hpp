#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lorentz/config.hpp"
#include "lorentz/phantom.hpp"
#include "lorentz/steering.hpp"

namespace lorentz {

enum class Mode { steering, imaging, grasping };

const char* to_string(Mode mode);

// Operator input. Absent fields keep their previous value.
struct Command {
    std::string client_id;
    std::uint64_t sequence = 0;
    std::optional<double> insert_velocity;  // [mm/s]
    std::optional<double> target_bend;      // [rad]
    std::optional<double> bend_azimuth;     // [rad]
    std::optional<bool> coils_enabled;
    std::optional<double> grasper_current;  // [A]
};

enum class AckStatus { accepted, clamped, stale, rejected };

const char* to_string(AckStatus status);

struct Ack {
    std::string client_id;
    std::uint64_t sequence = 0;
    AckStatus status = AckStatus::accepted;
    std::string reason;
    std::map<std::string, double> applied;  // numeric fields as applied
    std::optional<bool> coils_enabled;
    std::vector<std::string> clamped;       // names of clamped fields
};

struct Event {
    std::uint64_t tick = 0;
    double sim_time = 0.0;
    std::string kind;
    std::string message;
};

struct Telemetry {
    std::uint64_t tick = 0;
    double sim_time = 0.0;  // [s]
    Mode mode = Mode::steering;
    double inserted_length = 0.0;  // [mm]
    double flexible_length = 0.0;  // [mm]
    double commanded_bend = 0.0;   // [rad] after slew limiting
    double commanded_azimuth = 0.0;
    double bend = 0.0;             // [rad] achieved angle between base and tip tangents
    std::vector<Vec2> polyline;    // flexible section in the slice [mm], N + 1 points
    Vec2 shaft_start = Vec2::Zero();  // rigid shaft from the entry point [mm]
    Vec2 shaft_end = Vec2::Zero();
    Vec2 tip = Vec2::Zero();       // [mm]
    Vec2 tip_direction = Vec2::Zero();  // in-slice projection of the tip tangent
    Vec3 tip_position = Vec3::Zero();   // [m], inertial
    Mat3 tip_rotation = Mat3::Identity();
    std::vector<std::string> coil_names;
    std::vector<double> currents;  // [A], steering coils
    double grasper_current = 0.0;  // [A]
    double steering_power = 0.0;   // [W]
    double total_power = 0.0;      // [W], steering + grasper
    double power_cap = 0.0;        // [W]
    bool imaging_distorted = false;
    bool collision = false;
    Vec2 collision_point = Vec2::Zero();
    bool tumor_reached = false;
    double tumor_distance = 0.0;   // [mm] tip to tumor center
    double grasper_force = 0.0;    // [N]
    bool saturated = false;
    bool solver_warning = false;
    std::vector<std::string> warnings;
};

struct SessionSettings {
    SystemConfig config;
    PhantomMap phantom;
};

// Quasi-static teleoperation session. Owns all mutable state; not thread-safe.
class SimSession {
public:
    explicit SimSession(SessionSettings settings);

    Ack handle_command(const Command& cmd);
    void release_client(const std::string& client_id);

    // Advances one fixed tick of length 1 / tick_rate.
    Telemetry step();
    // Same, checking that dt is the fixed tick length.
    Telemetry step(double dt);

    const Telemetry& latest() const { return telemetry_; }
    const std::vector<Event>& events() const { return events_; }
    std::vector<Event> take_events();
    const SystemConfig& config() const { return settings_.config; }
    const PhantomMap& phantom() const { return settings_.phantom; }
    const std::vector<CoilSpec>& steering_coils() const { return coils_; }
    std::optional<std::string> operator_id() const { return operator_; }
    double dt() const { return 1.0 / settings_.config.teleop.tick_rate; }
    double max_grasper_current() const;

private:
    struct Pose {
        RodState rod;
        std::vector<double> currents;
        IkVector warm = IkVector::Zero();
        bool have_warm = false;
        bool saturated = false;
    };

    void solve_pose(std::vector<std::string>& warnings);
    Telemetry make_telemetry(std::vector<std::string> warnings);
    void log(const std::string& kind, const std::string& message);

    SessionSettings settings_;
    std::vector<CoilSpec> coils_;
    FramePose entry_;
    std::optional<std::string> operator_;
    std::map<std::string, std::uint64_t> last_sequence_;

    // Commanded state.
    double insert_velocity_ = 0.0;  // [mm/s]
    double target_bend_ = 0.0;
    double target_azimuth_ = 0.0;
    bool coils_enabled_ = true;
    double grasper_current_ = 0.0;

    // Simulated state.
    std::uint64_t tick_ = 0;
    double inserted_ = 0.0;   // [m]
    Vec2 bend_vector_ = Vec2::Zero();  // slewed bend as (bend cos az, bend sin az)
    Pose pose_;
    struct SolveKey {
        double inserted;
        Vec2 bend;
        bool coils;
        double grasper;
        bool operator==(const SolveKey&) const = default;
    };
    std::optional<SolveKey> solved_for_;
    std::vector<std::string> held_warnings_;
    Telemetry telemetry_;
    bool was_colliding_ = false;
    bool was_reached_ = false;
    bool was_saturated_ = false;
    Mode last_mode_ = Mode::steering;
    std::vector<Event> events_;
    std::size_t events_taken_ = 0;
};

}  // namespace lorentz
