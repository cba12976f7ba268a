#include "lorentz/csv.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

namespace lorentz {

std::string format_number(double value)
{
    if (!std::isfinite(value)) {
        return std::isnan(value) ? "nan" : (value > 0 ? "inf" : "-inf");
    }
    if (value == 0.0) {
        return "0";  // folds -0
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

void write_csv_row(std::ostream& os, const std::vector<double>& values)
{
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) {
            os << ',';
        }
        os << format_number(values[i]);
    }
    os << '\n';
}

void write_csv_header(std::ostream& os, std::string_view comment, const std::vector<std::string>& columns)
{
    os << "# " << comment << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i > 0) {
            os << ',';
        }
        os << columns[i];
    }
    os << '\n';
}

}  // namespace lorentz
