#include "lorentz/json_util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lorentz/errors.hpp"

namespace lorentz::json_util {

namespace {

std::string path(std::string_view where, std::string_view key)
{
    return std::string(where) + "." + std::string(key);
}

const json& field(const json& j, std::string_view key, std::string_view where)
{
    if (!j.is_object()) {
        throw SchemaError(std::string(where) + ": expected an object");
    }
    const auto it = j.find(std::string(key));
    if (it == j.end()) {
        throw SchemaError(path(where, key) + ": missing required field");
    }
    return *it;
}

double as_number(const json& v, const std::string& where)
{
    if (!v.is_number()) {
        throw SchemaError(where + ": expected a number");
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
        throw SchemaError(where + ": expected a finite number");
    }
    return x;
}

}  // namespace

double number(const json& j, std::string_view key, std::string_view where)
{
    return as_number(field(j, key, where), path(where, key));
}

std::optional<double> optional_number(const json& j, std::string_view key, std::string_view where)
{
    if (!j.is_object() || !j.contains(std::string(key))) {
        return std::nullopt;
    }
    return number(j, key, where);
}

int integer(const json& j, std::string_view key, std::string_view where)
{
    const json& v = field(j, key, where);
    if (!v.is_number_integer()) {
        throw SchemaError(path(where, key) + ": expected an integer");
    }
    return v.get<int>();
}

std::string string(const json& j, std::string_view key, std::string_view where)
{
    const json& v = field(j, key, where);
    if (!v.is_string()) {
        throw SchemaError(path(where, key) + ": expected a string");
    }
    return v.get<std::string>();
}

Vec3 as_vec3(const json& v, std::string_view where)
{
    if (!v.is_array() || v.size() != 3) {
        throw SchemaError(std::string(where) + ": expected an array of 3 numbers");
    }
    return {as_number(v[0], std::string(where) + "[0]"), as_number(v[1], std::string(where) + "[1]"),
            as_number(v[2], std::string(where) + "[2]")};
}

Vec2 as_vec2(const json& v, std::string_view where)
{
    if (!v.is_array() || v.size() != 2) {
        throw SchemaError(std::string(where) + ": expected an array of 2 numbers");
    }
    return {as_number(v[0], std::string(where) + "[0]"), as_number(v[1], std::string(where) + "[1]")};
}

Vec3 vec3(const json& j, std::string_view key, std::string_view where)
{
    return as_vec3(field(j, key, where), path(where, key));
}

Vec2 vec2(const json& j, std::string_view key, std::string_view where)
{
    return as_vec2(field(j, key, where), path(where, key));
}

std::optional<double> optional_angle(const json& j, std::string_view key, std::string_view where)
{
    if (auto rad = optional_number(j, key, where)) {
        return rad;
    }
    if (auto deg = optional_number(j, std::string(key) + "_deg", where)) {
        return *deg * std::numbers::pi / 180.0;
    }
    return std::nullopt;
}

json to_json(const Vec3& v)
{
    return json::array({v.x(), v.y(), v.z()});
}

json to_json(const Vec2& v)
{
    return json::array({v.x(), v.y()});
}

void reject_unknown(const json& j, std::initializer_list<std::string_view> known, std::string_view where)
{
    for (const auto& [key, value] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw SchemaError(std::string(where) + "." + key + ": unknown field");
        }
    }
}

}  // namespace lorentz::json_util
