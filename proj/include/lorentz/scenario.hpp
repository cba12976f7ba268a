#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lorentz/teleop.hpp"

namespace lorentz {

struct ScenarioCommand {
    std::uint64_t tick = 0;  // applied after the telemetry of this tick, before the next step
    Command command;
};

// Expected telemetry values at a tick. Keys are telemetry field names or JSON pointers
// ("/tip/position/0"); values are booleans, strings, {"value", "tol"} or {"min", "max"}.
struct Checkpoint {
    std::uint64_t tick = 0;
    nlohmann::json expect;
};

struct Scenario {
    std::string name;
    std::string description;
    std::uint64_t ticks = 0;
    std::optional<double> initial_insertion;  // [m]
    std::filesystem::path phantom;            // empty: from the config
    std::vector<ScenarioCommand> commands;
    std::vector<Checkpoint> checkpoints;
    bool expect_tumor_reached = false;
    bool expect_no_collision = true;
};

Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
Scenario load_scenario(const std::filesystem::path& path);

// Bundled scenario by name, or a path to a scenario file. Throws InvalidParameter if unknown.
std::filesystem::path find_scenario(const std::string& name_or_path);

struct CheckResult {
    std::uint64_t tick = 0;
    std::string field;
    bool passed = false;
    std::string detail;
};

struct ReplayResult {
    Telemetry final;
    std::vector<Event> events;
    std::vector<CheckResult> checks;
    std::uint64_t collision_ticks = 0;
    std::uint64_t solver_warning_ticks = 0;
    double max_power = 0.0;
    bool ever_reached = false;
    bool passed = false;

    nlohmann::json summary(const Scenario& scenario) const;
};

// Deterministic replay. Published telemetry (every tick_rate / publish_rate ticks, plus the
// first and last) and events are written as teleop/1 lines to `stream` when given.
ReplayResult replay(const Scenario& scenario, SessionSettings settings, std::ostream* stream = nullptr);

}  // namespace lorentz
