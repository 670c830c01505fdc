// SPDX-License-Identifier: Apache-2.0
//
// Minimal CSV plumbing shared by the loaders and writers: comma separated,
// no quoting, '#' starts a comment line, surrounding whitespace trimmed.
#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace evpv::csv {

struct Row {
    std::size_t line = 0; ///< 1-based line number in the source
    std::vector<std::string> cells;
};

struct Table {
    std::string source;
    std::vector<std::string> header;
    std::vector<Row> rows;

    /// Column index for a header name, nullopt when absent.
    std::optional<std::size_t> column(std::string_view name) const;
    /// Like column() but throws ParseError naming the missing column.
    std::size_t require_column(std::string_view name) const;
};

/// Reads a whole table. Throws IoError if the file cannot be opened and
/// ParseError on an empty file or a row whose width differs from the header.
Table read_file(const std::string& path);
Table read_stream(std::istream& in, const std::string& source);

/// Parses a full cell as a double; throws ParseError pointing at the row.
double to_double(const Table& table, const Row& row, std::size_t col);
int to_int(const Table& table, const Row& row, std::size_t col);

/// Shortest decimal text that reads back to the identical double.
std::string format_number(double value);

std::string trim(std::string_view text);

} // namespace evpv::csv
