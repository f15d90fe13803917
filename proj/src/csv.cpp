#include "ablr/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>

#include "ablr/errors.hpp"

namespace ablr::csv {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            cells.push_back(trim(line.substr(start)));
            break;
        }
        cells.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return cells;
}

}  // namespace

Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MalformedFile(path, "cannot open file");

    Table table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        if (stripped[0] == '#') {
            if (!have_header) table.comments.push_back(stripped);
            continue;
        }
        if (!have_header) {
            table.header = split_line(line);
            have_header = true;
            continue;
        }
        Row row;
        row.line_number = line_no;
        row.cells = split_line(line);
        if (row.cells.size() != table.header.size()) {
            throw MalformedFile(path, line_no,
                                "expected " + std::to_string(table.header.size()) + " cells, got " +
                                    std::to_string(row.cells.size()));
        }
        table.rows.push_back(std::move(row));
    }
    if (!have_header) throw MalformedFile(path, "missing header row");
    return table;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::optional<double> parse_double(const std::string& cell) {
    const std::string s = trim(cell);
    if (s.empty()) return std::nullopt;
    double value = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    // std::from_chars does not accept a leading '+'
    if (*first == '+') ++first;
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last) return std::nullopt;
    return value;
}

std::optional<long long> parse_int(const std::string& cell) {
    const std::string s = trim(cell);
    if (s.empty()) return std::nullopt;
    long long value = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

bool is_missing_cell(const std::string& cell) {
    const std::string s = trim(cell);
    if (s.empty() || s == "?") return true;
    std::string lower(s.size(), '\0');
    std::transform(s.begin(), s.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return lower == "na" || lower == "n/a" || lower == "nan";
}

std::string join(const std::vector<std::string>& cells, char sep) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out.push_back(sep);
        out += cells[i];
    }
    return out;
}

}  // namespace ablr::csv
