#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mmexit {

using Cell = std::variant<long long, double, std::string>;

/// Rectangular record set emitted by the CLI.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    explicit Table(std::vector<std::string> cols = {}) : columns(std::move(cols)) {}
    /// Throws ArgumentError when the row width differs from the header.
    void add_row(std::vector<Cell> row);
};

/// Shortest representation that reads back to the same double.
std::string format_number(double v);
std::string format_cell(const Cell& c);
/// Integer if the whole text is one, then double, else the text itself.
Cell parse_cell(std::string_view text);

/// Header line plus one line per row, '\n' terminated. Fields with ',', '"' or newlines are quoted.
std::string to_csv(const Table& t);
/// Inverse of to_csv; to_csv(parse_csv(s)) == s for any s produced by to_csv.
Table parse_csv(std::string_view text);

/// One JSON object per row, keyed by column name.
std::string to_json_lines(const Table& t);

} // namespace mmexit
