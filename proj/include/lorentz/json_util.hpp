#pragma once

#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "lorentz/so3.hpp"

namespace lorentz::json_util {

using nlohmann::json;

// All helpers throw SchemaError with the dotted path of the offending field.
double number(const json& j, std::string_view key, std::string_view where);
std::optional<double> optional_number(const json& j, std::string_view key, std::string_view where);
int integer(const json& j, std::string_view key, std::string_view where);
std::string string(const json& j, std::string_view key, std::string_view where);
Vec3 vec3(const json& j, std::string_view key, std::string_view where);
Vec2 vec2(const json& j, std::string_view key, std::string_view where);
Vec3 as_vec3(const json& j, std::string_view where);
Vec2 as_vec2(const json& j, std::string_view where);

// Throws when j has a key outside `known`.
void reject_unknown(const json& j, std::initializer_list<std::string_view> known, std::string_view where);

// Angle given either as `key` [rad] or `key_deg` [deg].
std::optional<double> optional_angle(const json& j, std::string_view key, std::string_view where);

json to_json(const Vec3& v);
json to_json(const Vec2& v);

}  // namespace lorentz::json_util
