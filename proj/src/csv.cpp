#include "canopydw/csv.hpp"

#include <charconv>
#include <cmath>
#include <system_error>

#include "canopydw/error.hpp"

namespace canopydw::csv {

std::vector<Record> parse(std::string_view text) {
    std::vector<Record> records;
    std::size_t pos = 0;
    std::size_t line = 1;
    const std::size_t n = text.size();

    while (pos < n) {
        Record rec;
        rec.line = line;
        std::string field;
        bool any_field = false;
        bool done = false;

        while (!done) {
            if (pos >= n) {
                // End of input without a terminator.
                if (any_field || !field.empty()) {
                    rec.fields.push_back(std::move(field));
                }
                rec.terminated = false;
                rec.end_offset = n;
                break;
            }
            if (text[pos] == '"' && field.empty()) {
                ++pos;
                bool closed = false;
                while (pos < n) {
                    const char c = text[pos];
                    if (c == '"') {
                        if (pos + 1 < n && text[pos + 1] == '"') {
                            field.push_back('"');
                            pos += 2;
                            continue;
                        }
                        ++pos;
                        closed = true;
                        break;
                    }
                    if (c == '\n') {
                        ++line;
                    }
                    field.push_back(c);
                    ++pos;
                }
                if (!closed) {
                    rec.fields.push_back(std::move(field));
                    rec.terminated = false;
                    rec.open_quote = true;
                    rec.end_offset = n;
                    break;
                }
                if (pos < n && text[pos] != ',' && text[pos] != '\n' &&
                    !(text[pos] == '\r' && pos + 1 < n && text[pos + 1] == '\n')) {
                    throw Error(ErrorKind::Parse,
                                "line " + std::to_string(rec.line) + ": unexpected character after closing quote",
                                rec.line);
                }
                any_field = true;
                continue;
            }
            const char c = text[pos];
            if (c == ',') {
                rec.fields.push_back(std::move(field));
                field.clear();
                any_field = true;
                ++pos;
            } else if (c == '\n' || (c == '\r' && pos + 1 < n && text[pos + 1] == '\n')) {
                if (any_field || !field.empty()) {
                    rec.fields.push_back(std::move(field));
                }
                pos += c == '\r' ? 2 : 1;
                ++line;
                rec.end_offset = pos;
                done = true;
            } else {
                if (c == '"') {
                    throw Error(ErrorKind::Parse,
                                "line " + std::to_string(rec.line) + ": quote inside unquoted field", rec.line);
                }
                field.push_back(c);
                ++pos;
            }
        }
        records.push_back(std::move(rec));
        if (!records.back().terminated) {
            break;
        }
    }
    return records;
}

std::vector<std::string> parse_line(std::string_view line, std::size_t line_no) {
    auto records = parse(line);
    if (records.empty()) {
        return {};
    }
    const auto where = line_no ? "line " + std::to_string(line_no) + ": " : std::string();
    if (records.size() != 1) {
        throw Error(ErrorKind::Parse, where + "expected exactly one record", line_no);
    }
    if (records[0].open_quote) {
        throw Error(ErrorKind::Parse, where + "unterminated quoted field", line_no);
    }
    return std::move(records[0].fields);
}

void append_field(std::string &out, std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
        out.append(field);
        return;
    }
    out.push_back('"');
    for (char c : field) {
        if (c == '"') {
            out.push_back('"');
        }
        out.push_back(c);
    }
    out.push_back('"');
}

std::string join(const std::vector<std::string> &fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) {
            out.push_back(',');
        }
        append_field(out, fields[i]);
    }
    return out;
}

std::string format_real(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

std::string format_optional(const std::optional<double> &value) {
    return value ? format_real(*value) : std::string();
}

std::optional<double> parse_real(std::string_view text) noexcept {
    if (text.empty() || text.front() == '+') {
        return std::nullopt;
    }
    for (char c : text) {
        const bool ok = (c >= '0' && c <= '9') || c == '.' || c == '-' || c == 'e' || c == 'E' || c == '+';
        if (!ok) {
            return std::nullopt;
        }
    }
    double value = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

std::optional<std::int64_t> parse_int(std::string_view text) noexcept {
    if (text.empty() || text.front() == '+') {
        return std::nullopt;
    }
    std::int64_t value = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        return std::nullopt;
    }
    return value;
}

} // namespace canopydw::csv
