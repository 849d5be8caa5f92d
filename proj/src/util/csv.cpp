#include "affect/util/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace affect::csv {

std::vector<std::string> split_line(const std::string& line, int line_no) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
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
            if (!cur.empty())
                throw std::runtime_error("csv: stray quote at line " + std::to_string(line_no));
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c == '\r') {
            // tolerate CRLF
        } else {
            cur += c;
        }
    }
    if (quoted)
        throw std::runtime_error("csv: unterminated quote at line " + std::to_string(line_no));
    out.push_back(cur);
    return out;
}

Table read_file(const std::string& path, bool expect_header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open " + path);
    Table t;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_line(line, line_no);
        if (expect_header && t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (!t.header.empty() && fields.size() != t.header.size())
            throw std::runtime_error("csv: line " + std::to_string(line_no) + " has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(t.header.size()) + " (" + path + ")");
        t.rows.push_back(std::move(fields));
    }
    return t;
}

std::string escape(const std::string& field) {
    const bool needs = field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::string join_row(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += escape(fields[i]);
    }
    return out;
}

void write_file(const std::string& path, const Table& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("csv: cannot write " + path);
    if (!t.header.empty()) out << join_row(t.header) << '\n';
    for (const auto& r : t.rows) out << join_row(r) << '\n';
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

} // namespace affect::csv
