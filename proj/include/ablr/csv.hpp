#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ablr::csv {

struct Row {
    std::size_t line_number = 0;  // 1-based line in the source file
    std::vector<std::string> cells;
};

// Parsed CSV file: header plus data rows. Lines starting with '#' before the
// header are collected as comments (used for the meta-feature version tag).
struct Table {
    std::vector<std::string> comments;
    std::vector<std::string> header;
    std::vector<Row> rows;
};

// Reads a comma-separated file. Cells are trimmed of surrounding whitespace.
// Quoting is not supported; the formats this tool reads and writes never
// quote. Throws MalformedFile on I/O failure or ragged rows.
Table read_table(const std::string& path);

// Shortest round-trip decimal form of a double (via std::to_chars).
std::string format_double(double v);

// Strict double parse of a full cell; nullopt if not a decimal number.
std::optional<double> parse_double(const std::string& cell);

// Strict non-negative integer parse of a full cell.
std::optional<long long> parse_int(const std::string& cell);

std::string trim(const std::string& s);

// True for cells conventionally denoting a missing value: "", "?", "NA",
// "N/A", "nan" (case-insensitive).
bool is_missing_cell(const std::string& cell);

std::string join(const std::vector<std::string>& cells, char sep = ',');

}  // namespace ablr::csv
