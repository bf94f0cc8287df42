#pragma once

// Star-schema domain types: the date, image and species dimensions, the
// tree-metric fact, and the survey records used as ground truth.

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "canopydw/geo.hpp"

namespace canopydw {

/// Strongly typed surrogate key. Keys are assigned densely from 1.
template <class Tag>
struct Id {
    std::int64_t value = 0;

    friend auto operator<=>(const Id &, const Id &) = default;
};

using ImageKey = Id<struct ImageKeyTag>;
using SpeciesKey = Id<struct SpeciesKeyTag>;
using FactId = Id<struct FactIdTag>;

/// Natural date key encoded as YYYYMMDD.
class DateKey {
public:
    constexpr DateKey() = default;
    constexpr explicit DateKey(std::int32_t encoded) : value_(encoded) {}

    static DateKey from_ymd(int year, int month, int day) noexcept {
        return DateKey(year * 10000 + month * 100 + day);
    }
    /// Strict `YYYY-MM-DD`. Throws InvalidDate.
    static DateKey parse_iso(std::string_view text);

    constexpr std::int32_t value() const noexcept { return value_; }
    constexpr int year() const noexcept { return value_ / 10000; }
    constexpr int month() const noexcept { return value_ / 100 % 100; }
    constexpr int day() const noexcept { return value_ % 100; }

    /// Valid Gregorian date with year in [1900, 2200].
    bool is_valid() const noexcept;
    std::string to_iso() const;

    friend auto operator<=>(const DateKey &, const DateKey &) = default;

private:
    std::int32_t value_ = 0;
};

bool is_leap_year(int year) noexcept;
int days_in_month(int year, int month) noexcept;

struct DimDate {
    DateKey date_key;
    int year = 0;
    int quarter = 0;
    int month = 0;
    int day = 0;
    int day_of_year = 0;

    friend bool operator==(const DimDate &, const DimDate &) = default;
};

/// Throws InvalidDate for keys that do not decode to a calendar date.
DimDate derive_date(DateKey key);

enum class Platform { Uav, Satellite, Aerial, Ground };
enum class ConservationStatus {
    LeastConcern,
    NearThreatened,
    Vulnerable,
    Endangered,
    CriticallyEndangered,
    Unknown,
};
enum class Validation { Unvalidated, Confirmed, SpeciesMismatch, Unmatched };

std::string_view to_string(Platform p) noexcept;
std::string_view to_string(ConservationStatus s) noexcept;
std::string_view to_string(Validation v) noexcept;
std::optional<Platform> parse_platform(std::string_view text) noexcept;
std::optional<ConservationStatus> parse_conservation_status(std::string_view text) noexcept;
std::optional<Validation> parse_validation(std::string_view text) noexcept;

/// Detection box, center and size normalized to the image dimensions.
struct BoundingBox {
    double cx = 0;
    double cy = 0;
    double w = 0;
    double h = 0;

    friend bool operator==(const BoundingBox &, const BoundingBox &) = default;
};

/// How far a box edge (or a normalized coordinate) may stray outside [0, 1].
inline constexpr double kClampTolerance = 0.005;

/// Empty when the box is acceptable; otherwise a description of the problem.
std::optional<std::string> check_bbox(const BoundingBox &box);

struct DimImage {
    ImageKey image_key;
    std::string file_name;
    Platform platform = Platform::Uav;
    DateKey capture_date_key;
    std::int64_t width_px = 0;
    std::int64_t height_px = 0;
    double gsd_cm_per_px = 0;
    Geotransform geotransform;
    std::int64_t size_bytes = 0;
    std::string checksum;

    friend bool operator==(const DimImage &, const DimImage &) = default;
};

/// Invariant violations of an image row (the key is not checked).
std::vector<std::string> check_image(const DimImage &image);

/// 64 hexadecimal characters.
bool is_valid_checksum(std::string_view checksum) noexcept;

struct DimSpecies {
    SpeciesKey species_key;
    std::string code;
    std::string scientific_name;
    std::string common_name;
    ConservationStatus conservation_status = ConservationStatus::Unknown;

    friend bool operator==(const DimSpecies &, const DimSpecies &) = default;
};

struct FactTreeMetric {
    FactId fact_id;
    DateKey date_key;
    ImageKey image_key;
    SpeciesKey species_key;
    BoundingBox bbox;
    double confidence = 1.0;
    double geo_x = 0;
    double geo_y = 0;
    std::optional<double> height_m;
    std::optional<double> dbh_cm;
    Validation validation = Validation::Unvalidated;
    std::optional<std::string> matched_record_id;

    friend bool operator==(const FactTreeMetric &, const FactTreeMetric &) = default;
};

/// Value-level fact checks that need no dimension lookup: box, confidence,
/// positive measures, and the validation/matched-record pairing.
std::vector<std::string> check_fact_values(const FactTreeMetric &fact);

struct SurveyRecord {
    std::string record_id;
    double geo_x = 0;
    double geo_y = 0;
    std::string species_code;
    std::optional<double> dbh_cm;
    std::optional<double> height_m;
    DateKey surveyed_date_key;

    friend bool operator==(const SurveyRecord &, const SurveyRecord &) = default;
};

} // namespace canopydw

template <class Tag>
struct std::hash<canopydw::Id<Tag>> {
    std::size_t operator()(const canopydw::Id<Tag> &id) const noexcept {
        return std::hash<std::int64_t>{}(id.value);
    }
};

template <>
struct std::hash<canopydw::DateKey> {
    std::size_t operator()(const canopydw::DateKey &key) const noexcept {
        return std::hash<std::int32_t>{}(key.value());
    }
};

namespace canopydw {

/// Committed dimension keys, as needed to check a fact's foreign keys.
struct DimensionIndex {
    std::unordered_map<ImageKey, DateKey> image_capture_dates;
    std::unordered_set<SpeciesKey> species;
    std::unordered_set<DateKey> dates;
};

struct Violation {
    std::string field;
    std::string message;

    friend bool operator==(const Violation &, const Violation &) = default;
};

/// Referential integrity and date consistency of one fact. An empty result
/// means the fact is acceptable.
std::vector<Violation> validate_fact(const FactTreeMetric &fact, const DimensionIndex &index);

} // namespace canopydw
