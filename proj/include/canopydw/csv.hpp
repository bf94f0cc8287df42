#pragma once

// Comma-separated text codec shared by the table files, the ingest inputs
// and the report writers. Fields containing a comma, quote, CR or LF are
// wrapped in double quotes with inner quotes doubled, so one record may span
// several physical lines.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace canopydw::csv {

struct Record {
    std::size_t line = 0;        ///< 1-based physical line the record starts on
    std::size_t end_offset = 0;  ///< byte offset just past the record terminator
    bool terminated = true;      ///< false when the input ended without a newline
    bool open_quote = false;     ///< input ended inside a quoted field
    std::vector<std::string> fields;
};

/// Splits a whole buffer into records. A blank physical line yields a record
/// with no fields; input ending inside quotes yields a final record with
/// `open_quote` set. Throws Error(Parse) on stray characters after a closing
/// quote or a quote inside an unquoted field.
std::vector<Record> parse(std::string_view text);

/// Parses exactly one record; `line` is used for error attribution.
std::vector<std::string> parse_line(std::string_view line, std::size_t line_no = 0);

void append_field(std::string &out, std::string_view field);
std::string join(const std::vector<std::string> &fields);

/// Shortest decimal text that reads back as the identical double.
std::string format_real(double value);
std::string format_optional(const std::optional<double> &value);

/// Strict decimal parsing: no surrounding whitespace, no leading '+', finite only.
std::optional<double> parse_real(std::string_view text) noexcept;
std::optional<std::int64_t> parse_int(std::string_view text) noexcept;

} // namespace canopydw::csv
