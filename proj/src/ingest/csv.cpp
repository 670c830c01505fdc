// SPDX-License-Identifier: Apache-2.0
#include "evpv/csv.hpp"

#include "evpv/errors.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace evpv::csv {

std::string trim(std::string_view text) {
    std::size_t b = 0, e = text.size();
    while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
    return std::string(text.substr(b, e - b));
}

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        cells.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return cells;
}

} // namespace

std::optional<std::size_t> Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    return std::nullopt;
}

std::size_t Table::require_column(std::string_view name) const {
    auto c = column(name);
    if (!c) throw ParseError(source, 1, "missing column '" + std::string(name) + "'");
    return *c;
}

Table read_stream(std::istream& in, const std::string& source) {
    Table table;
    table.source = source;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        auto cells = split(stripped);
        if (table.header.empty()) {
            table.header = std::move(cells);
            continue;
        }
        if (cells.size() != table.header.size())
            throw ParseError(source, number, "expected " + std::to_string(table.header.size()) + " fields, found " +
                                                 std::to_string(cells.size()));
        table.rows.push_back({number, std::move(cells)});
    }
    if (table.header.empty()) throw ParseError(source, 0, "file is empty");
    return table;
}

Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return read_stream(in, path);
}

double to_double(const Table& table, const Row& row, std::size_t col) {
    const auto& cell = row.cells.at(col);
    double value = 0.0;
    const char* first = cell.data();
    const char* last = first + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value))
        throw ParseError(table.source, row.line,
                         "column '" + table.header.at(col) + "': '" + cell + "' is not a finite number");
    return value;
}

int to_int(const Table& table, const Row& row, std::size_t col) {
    const auto& cell = row.cells.at(col);
    int value = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size())
        throw ParseError(table.source, row.line, "column '" + table.header.at(col) + "': '" + cell + "' is not an integer");
    return value;
}

std::string format_number(double value) {
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (value == 0.0) return "0"; // folds -0
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    (void)ec;
    return std::string(buf, ptr);
}

} // namespace evpv::csv
