#include "canopydw/table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "canopydw/csv.hpp"

namespace canopydw {

namespace {

bool looks_numeric(const std::string &cell) {
    return !cell.empty() && (csv::parse_real(cell).has_value() || cell == "-");
}

} // namespace

std::string ResultTable::to_csv() const {
    std::string out = csv::join(columns);
    out.push_back('\n');
    for (const auto &row : rows) {
        out += csv::join(row);
        out.push_back('\n');
    }
    return out;
}

std::string ResultTable::to_text() const {
    std::vector<std::size_t> width(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
        width[c] = columns[c].size();
        for (const auto &row : rows) {
            if (c < row.size()) {
                width[c] = std::max(width[c], row[c].size());
            }
        }
    }
    const auto emit = [&](std::string &out, const std::vector<std::string> &cells, bool header) {
        std::string line;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const std::string &cell = c < cells.size() ? cells[c] : std::string();
            const std::size_t pad = width[c] - cell.size();
            if (c) {
                line += "  ";
            }
            if (!header && looks_numeric(cell)) {
                line.append(pad, ' ');
                line += cell;
            } else {
                line += cell;
                line.append(pad, ' ');
            }
        }
        while (!line.empty() && line.back() == ' ') {
            line.pop_back();
        }
        out += line;
        out.push_back('\n');
    };
    std::string out;
    emit(out, columns, true);
    for (const auto &row : rows) {
        emit(out, row, false);
    }
    return out;
}

std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    return buf;
}

std::string format_size(double value) {
    if (value == 0) {
        return "0";
    }
    if (std::abs(value) >= 1) {
        return format_fixed(value, 1);
    }
    // Two significant digits, fixed notation.
    const int exponent = static_cast<int>(std::floor(std::log10(std::abs(value))));
    const int decimals = std::max(1, 1 - exponent);
    return format_fixed(value, decimals);
}

} // namespace canopydw
