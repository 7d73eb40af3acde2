#pragma once

// Minimal RFC-4180-style CSV reading and fixed-format number writing.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lcurve/errors.hpp"

namespace lcurve::csv {

using Row = std::vector<std::string>;

inline Row split_line(const std::string& line) {
    Row out;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::move(cell));
            cell.clear();
        } else if (ch != '\r') {
            cell.push_back(ch);
        }
    }
    out.push_back(std::move(cell));
    return out;
}

struct Table {
    Row header;
    std::vector<Row> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw LoadError("unknown column '" + name + "'");
    }
};

inline Table read_stream(std::istream& in) {
    Table t;
    std::string line;
    bool first = true;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto row = split_line(line);
        if (first) {
            t.header = std::move(row);
            first = false;
            continue;
        }
        if (row.size() != t.header.size()) {
            throw LoadError("line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                            " fields, got " + std::to_string(row.size()));
        }
        t.rows.push_back(std::move(row));
    }
    if (first) throw LoadError("empty CSV input");
    return t;
}

inline Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open '" + path + "'");
    return read_stream(in);
}

// 17 significant digits so every double survives a write/read cycle.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "NA";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline bool is_missing(const std::string& cell) {
    return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "." || cell == "null";
}

inline bool parse_double(const std::string& cell, double& out) {
    if (is_missing(cell)) return false;
    std::size_t used = 0;
    try {
        out = std::stod(cell, &used);
    } catch (const std::exception&) {
        return false;
    }
    while (used < cell.size() && (cell[used] == ' ' || cell[used] == '\t')) ++used;
    return used == cell.size() && std::isfinite(out);
}

inline std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += "\"\"";
        else out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

} // namespace lcurve::csv
