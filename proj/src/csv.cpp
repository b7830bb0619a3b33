#include "setloc/csv.hpp"

#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace setloc::csv {

std::string escape_field(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", std::numeric_limits<double>::max_digits10, v);
    return buf;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

int Table::column(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return int(i);
    }
    return -1;
}

Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("csv: cannot open '" + path + "'");
    }
    Table t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (first) {
            t.header = split_line(line);
            first = false;
        } else if (!line.empty()) {
            t.rows.push_back(split_line(line));
        }
    }
    if (first) {
        throw std::runtime_error("csv: '" + path + "' is empty (no header row)");
    }
    return t;
}

void write_file(const std::string& path, const Table& table) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("csv: cannot write '" + path + "'");
    }
    auto write_row = [&out](const std::vector<std::string>& row) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << escape_field(row[i]);
        }
        out << '\n';
    };
    write_row(table.header);
    for (const auto& row : table.rows) {
        write_row(row);
    }
    if (!out) {
        throw std::runtime_error("csv: write to '" + path + "' failed");
    }
}

}  // namespace setloc::csv
