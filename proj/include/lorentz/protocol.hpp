#pragma once

#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "lorentz/teleop.hpp"

namespace lorentz::protocol {

inline constexpr const char* kSchema = "teleop/1";

enum class Role { operator_role, observer };

struct Hello {
    Role role = Role::observer;
    std::string client_id;
};

// A parsed client message. Throws SchemaError for malformed input.
using ClientMessage = std::variant<Hello, Command>;
ClientMessage parse_client_message(const std::string& line);

nlohmann::json hello_ack(const Hello& hello, const SimSession& session);
nlohmann::json to_json(const Ack& ack);
nlohmann::json to_json(const Event& event);
nlohmann::json to_json(const Telemetry& t);
nlohmann::json to_json(const Command& cmd);
nlohmann::json error_message(const std::string& message);

// Serialized as one line (no embedded newlines), without the trailing newline.
std::string dump_line(const nlohmann::json& j);

}  // namespace lorentz::protocol
