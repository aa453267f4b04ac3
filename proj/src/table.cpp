#include "mmexit/table.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

#include <json.hpp>

#include "mmexit/errors.hpp"

namespace mmexit {

void Table::add_row(std::vector<Cell> row)
{
    if (row.size() != columns.size()) throw ArgumentError("table: row width does not match the header");
    rows.push_back(std::move(row));
}

std::string format_number(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string format_cell(const Cell& c)
{
    if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
    if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
    return std::get<std::string>(c);
}

Cell parse_cell(std::string_view text)
{
    const char* first = text.data();
    const char* last = first + text.size();
    if (!text.empty()) {
        long long i = 0;
        auto ri = std::from_chars(first, last, i);
        if (ri.ec == std::errc() && ri.ptr == last) return i;
        double d = 0.0;
        auto rd = std::from_chars(first, last, d);
        if (rd.ec == std::errc() && rd.ptr == last && format_number(d) == text) return d;
    }
    return std::string(text);
}

namespace {

std::string quoted(const std::string& s)
{
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

// Splits one record starting at `pos`; advances past its line terminator.
std::vector<std::string> read_record(std::string_view text, std::size_t& pos, std::vector<bool>& was_quoted)
{
    std::vector<std::string> fields(1);
    was_quoted.assign(1, false);
    bool in_quotes = false;
    while (pos < text.size()) {
        char ch = text[pos++];
        if (in_quotes) {
            if (ch == '"') {
                if (pos < text.size() && text[pos] == '"') {
                    fields.back() += '"';
                    ++pos;
                } else {
                    in_quotes = false;
                }
            } else {
                fields.back() += ch;
            }
        } else if (ch == '"') {
            in_quotes = true;
            was_quoted.back() = true;
        } else if (ch == ',') {
            fields.emplace_back();
            was_quoted.push_back(false);
        } else if (ch == '\n') {
            return fields;
        } else {
            fields.back() += ch;
        }
    }
    if (in_quotes) throw ArgumentError("csv: unterminated quoted field");
    return fields;
}

} // namespace

std::string to_csv(const Table& t)
{
    std::string out;
    for (std::size_t i = 0; i < t.columns.size(); ++i) {
        if (i) out += ',';
        out += quoted(t.columns[i]);
    }
    out += '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += quoted(format_cell(row[i]));
        }
        out += '\n';
    }
    return out;
}

Table parse_csv(std::string_view text)
{
    std::size_t pos = 0;
    std::vector<bool> q;
    if (text.empty()) throw ArgumentError("csv: missing header");
    Table t(read_record(text, pos, q));
    while (pos < text.size()) {
        auto fields = read_record(text, pos, q);
        std::vector<Cell> row;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            row.push_back(q[i] ? Cell(fields[i]) : parse_cell(fields[i]));
        }
        t.add_row(std::move(row));
    }
    return t;
}

std::string to_json_lines(const Table& t)
{
    std::string out;
    for (const auto& row : t.rows) {
        nlohmann::ordered_json rec;
        for (std::size_t i = 0; i < row.size(); ++i) {
            std::visit(
                [&](const auto& v) {
                    using V = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<V, double>) {
                        if (std::isfinite(v)) {
                            rec[t.columns[i]] = v;
                        } else {
                            rec[t.columns[i]] = format_number(v);
                        }
                    } else {
                        rec[t.columns[i]] = v;
                    }
                },
                row[i]);
        }
        out += rec.dump();
        out += '\n';
    }
    return out;
}

} // namespace mmexit
