#pragma once

#include <stdexcept>
#include <string>

namespace lorentz {

// Parameters violate a documented precondition (zero stiffness, bad caps, ...).
class InvalidParameter : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Coil winding geometry cannot be realized.
class GeometryError : public std::runtime_error {
public:
    GeometryError(const std::string& what, int turn_index)
        : std::runtime_error(what), turn_index_(turn_index) {}
    int turn_index() const noexcept { return turn_index_; }

private:
    int turn_index_;
};

// Forward integration produced non-finite values.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, double arc)
        : std::runtime_error(what), arc_(arc) {}
    double arc_coordinate() const noexcept { return arc_; }

private:
    double arc_;
};

// A config, phantom or scenario document does not match its schema.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace lorentz
