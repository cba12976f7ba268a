#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace lorentz {

// Shortest round-trip decimal representation, independent of the global locale.
std::string format_number(double value);

// Writes one comma-separated row.
void write_csv_row(std::ostream& os, const std::vector<double>& values);
void write_csv_header(std::ostream& os, std::string_view comment, const std::vector<std::string>& columns);

}  // namespace lorentz
