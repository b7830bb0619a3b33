#pragma once

// Minimal CSV support: RFC-4180 quoting, header row, full round-trip of
// doubles via max_digits10 formatting.

#include <string>
#include <vector>

namespace setloc::csv {

std::string escape_field(const std::string& field);
std::string format_double(double v);

// Splits one CSV line honoring double-quote escapes.
std::vector<std::string> split_line(const std::string& line);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Index of a column name, or -1 if absent.
    int column(const std::string& name) const;
};

Table read_file(const std::string& path);
void write_file(const std::string& path, const Table& table);

}  // namespace setloc::csv
