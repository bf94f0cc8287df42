#include "canopydw/model.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>

#include "canopydw/error.hpp"

namespace canopydw {

bool is_leap_year(int year) noexcept {
    return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

int days_in_month(int year, int month) noexcept {
    static constexpr std::array<int, 12> kDays{31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month < 1 || month > 12) {
        return 0;
    }
    return month == 2 && is_leap_year(year) ? 29 : kDays[month - 1];
}

bool DateKey::is_valid() const noexcept {
    if (value_ < 19000101 || value_ > 22001231) {
        return false;
    }
    const int d = day();
    return d >= 1 && d <= days_in_month(year(), month());
}

DateKey DateKey::parse_iso(std::string_view text) {
    const auto fail = [&] {
        return Error(ErrorKind::InvalidDate, "invalid date '" + std::string(text) + "', expected YYYY-MM-DD");
    };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw fail();
    }
    int parts[3] = {0, 0, 0};
    const std::size_t starts[3] = {0, 5, 8};
    const std::size_t lengths[3] = {4, 2, 2};
    for (int i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < lengths[i]; ++j) {
            const char c = text[starts[i] + j];
            if (!std::isdigit(static_cast<unsigned char>(c))) {
                throw fail();
            }
            parts[i] = parts[i] * 10 + (c - '0');
        }
    }
    const DateKey key = from_ymd(parts[0], parts[1], parts[2]);
    if (!key.is_valid()) {
        throw fail();
    }
    return key;
}

std::string DateKey::to_iso() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year(), month(), day());
    return buf;
}

DimDate derive_date(DateKey key) {
    if (!key.is_valid()) {
        throw Error(ErrorKind::InvalidDate, "invalid date key " + std::to_string(key.value()));
    }
    DimDate out;
    out.date_key = key;
    out.year = key.year();
    out.month = key.month();
    out.day = key.day();
    out.quarter = (out.month + 2) / 3;
    out.day_of_year = out.day;
    for (int m = 1; m < out.month; ++m) {
        out.day_of_year += days_in_month(out.year, m);
    }
    return out;
}

std::string_view to_string(Platform p) noexcept {
    switch (p) {
    case Platform::Uav: return "uav";
    case Platform::Satellite: return "satellite";
    case Platform::Aerial: return "aerial";
    case Platform::Ground: return "ground";
    }
    return "uav";
}

std::string_view to_string(ConservationStatus s) noexcept {
    switch (s) {
    case ConservationStatus::LeastConcern: return "least_concern";
    case ConservationStatus::NearThreatened: return "near_threatened";
    case ConservationStatus::Vulnerable: return "vulnerable";
    case ConservationStatus::Endangered: return "endangered";
    case ConservationStatus::CriticallyEndangered: return "critically_endangered";
    case ConservationStatus::Unknown: return "unknown";
    }
    return "unknown";
}

std::string_view to_string(Validation v) noexcept {
    switch (v) {
    case Validation::Unvalidated: return "unvalidated";
    case Validation::Confirmed: return "confirmed";
    case Validation::SpeciesMismatch: return "species_mismatch";
    case Validation::Unmatched: return "unmatched";
    }
    return "unvalidated";
}

std::optional<Platform> parse_platform(std::string_view text) noexcept {
    for (auto p : {Platform::Uav, Platform::Satellite, Platform::Aerial, Platform::Ground}) {
        if (text == to_string(p)) {
            return p;
        }
    }
    return std::nullopt;
}

std::optional<ConservationStatus> parse_conservation_status(std::string_view text) noexcept {
    for (auto s : {ConservationStatus::LeastConcern, ConservationStatus::NearThreatened,
                   ConservationStatus::Vulnerable, ConservationStatus::Endangered,
                   ConservationStatus::CriticallyEndangered, ConservationStatus::Unknown}) {
        if (text == to_string(s)) {
            return s;
        }
    }
    return std::nullopt;
}

std::optional<Validation> parse_validation(std::string_view text) noexcept {
    for (auto v : {Validation::Unvalidated, Validation::Confirmed, Validation::SpeciesMismatch,
                   Validation::Unmatched}) {
        if (text == to_string(v)) {
            return v;
        }
    }
    return std::nullopt;
}

namespace {

bool within_unit(double v) noexcept {
    return v >= -kClampTolerance && v <= 1.0 + kClampTolerance;
}

} // namespace

std::optional<std::string> check_bbox(const BoundingBox &box) {
    if (!std::isfinite(box.cx) || !std::isfinite(box.cy) || !std::isfinite(box.w) ||
        !std::isfinite(box.h)) {
        return "bbox has non-finite component";
    }
    if (!within_unit(box.cx)) {
        return "cx out of range";
    }
    if (!within_unit(box.cy)) {
        return "cy out of range";
    }
    if (box.w <= 0 || box.w > 1.0 + kClampTolerance) {
        return "w out of range";
    }
    if (box.h <= 0 || box.h > 1.0 + kClampTolerance) {
        return "h out of range";
    }
    if (!within_unit(box.cx - box.w / 2) || !within_unit(box.cx + box.w / 2)) {
        return "bbox exceeds image horizontally";
    }
    if (!within_unit(box.cy - box.h / 2) || !within_unit(box.cy + box.h / 2)) {
        return "bbox exceeds image vertically";
    }
    return std::nullopt;
}

bool is_valid_checksum(std::string_view checksum) noexcept {
    if (checksum.size() != 64) {
        return false;
    }
    for (char c : checksum) {
        if (!std::isxdigit(static_cast<unsigned char>(c))) {
            return false;
        }
    }
    return true;
}

std::vector<std::string> check_image(const DimImage &image) {
    std::vector<std::string> out;
    if (image.file_name.empty()) {
        out.emplace_back("file_name is empty");
    }
    if (!image.capture_date_key.is_valid()) {
        out.emplace_back("capture_date_key is not a valid date");
    }
    if (image.width_px < 1) {
        out.emplace_back("width_px must be >= 1");
    }
    if (image.height_px < 1) {
        out.emplace_back("height_px must be >= 1");
    }
    if (!(image.gsd_cm_per_px > 0) || !std::isfinite(image.gsd_cm_per_px)) {
        out.emplace_back("gsd_cm_per_px must be positive");
    }
    const auto &gt = image.geotransform;
    if (!std::isfinite(gt.origin_x) || !std::isfinite(gt.origin_y) || !gt.invertible()) {
        out.emplace_back("geotransform is not invertible");
    }
    if (image.size_bytes < 0) {
        out.emplace_back("size_bytes must be non-negative");
    }
    if (!is_valid_checksum(image.checksum)) {
        out.emplace_back("checksum must be 64 hex characters");
    }
    return out;
}

std::vector<std::string> check_fact_values(const FactTreeMetric &fact) {
    std::vector<std::string> out;
    if (auto bad = check_bbox(fact.bbox)) {
        out.push_back(*bad);
    }
    if (!(fact.confidence >= 0.0 && fact.confidence <= 1.0)) {
        out.emplace_back("confidence out of range");
    }
    if (!std::isfinite(fact.geo_x) || !std::isfinite(fact.geo_y)) {
        out.emplace_back("geo position is not finite");
    }
    if (fact.height_m && !(*fact.height_m > 0 && std::isfinite(*fact.height_m))) {
        out.emplace_back("height_m must be positive");
    }
    if (fact.dbh_cm && !(*fact.dbh_cm > 0 && std::isfinite(*fact.dbh_cm))) {
        out.emplace_back("dbh_cm must be positive");
    }
    const bool paired = fact.validation == Validation::Confirmed ||
                        fact.validation == Validation::SpeciesMismatch;
    if (paired != fact.matched_record_id.has_value()) {
        out.emplace_back("matched_record_id inconsistent with validation status");
    }
    return out;
}

std::vector<Violation> validate_fact(const FactTreeMetric &fact, const DimensionIndex &index) {
    std::vector<Violation> out;
    const auto image = index.image_capture_dates.find(fact.image_key);
    if (image == index.image_capture_dates.end()) {
        out.push_back({"image_key", "image_key unresolved"});
    }
    if (!index.species.contains(fact.species_key)) {
        out.push_back({"species_key", "species_key unresolved"});
    }
    if (!index.dates.contains(fact.date_key)) {
        out.push_back({"date_key", "date_key unresolved"});
    }
    if (image != index.image_capture_dates.end() && image->second != fact.date_key) {
        out.push_back({"date_key", "date mismatch"});
    }
    return out;
}

} // namespace canopydw
