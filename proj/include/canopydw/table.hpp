#pragma once

#include <string>
#include <vector>

namespace canopydw {

/// Rendered report: header columns plus rows of already-formatted cells.
/// CSV output always carries the header line.
struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::string to_csv() const;
    /// Space-padded columns, numbers right-aligned.
    std::string to_text() const;

    friend bool operator==(const ResultTable &, const ResultTable &) = default;
};

/// Fixed-point text with `decimals` digits after the point.
std::string format_fixed(double value, int decimals);

/// Sizes as the capacity tables print them: one decimal from 1 upward,
/// two significant digits below.
std::string format_size(double value);

} // namespace canopydw
