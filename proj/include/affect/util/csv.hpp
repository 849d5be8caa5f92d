#pragma once

#include <string>
#include <vector>

namespace affect::csv {

// RFC-4180-ish CSV. Fields containing commas, quotes or newlines are quoted;
// embedded quotes are doubled. Parsing reports the 1-based line number on error.

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split_line(const std::string& line, int line_no);
Table read_file(const std::string& path, bool expect_header = true);

std::string escape(const std::string& field);
std::string join_row(const std::vector<std::string>& fields);
void write_file(const std::string& path, const Table& t);

// canonical numeric formatting shared by every report writer, so that
// identical runs yield byte-identical files
std::string format_number(double v);

} // namespace affect::csv
