#pragma once

// Fixed-shape star-join aggregation: one scan of the fact table, dimension
// attributes resolved through the three foreign keys, conjunctive filters,
// grouping, then aggregation.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "canopydw/model.hpp"
#include "canopydw/storage.hpp"
#include "canopydw/table.hpp"

namespace canopydw {

enum class GroupKey { Year, Quarter, Month, Date, Species, Platform, ResolutionClass, ConservationStatus };
enum class Measure { TreeCount, MeanConfidence, MeanHeightM, MeanDbhCm };
enum class ResolutionClass { Low, Medium, High };

std::string_view to_string(GroupKey key) noexcept;
std::string_view to_string(Measure measure) noexcept;
std::string_view to_string(ResolutionClass cls) noexcept;
std::optional<GroupKey> parse_group_key(std::string_view text) noexcept;
std::optional<Measure> parse_measure(std::string_view text) noexcept;

/// Below 1 MP low, 1 to 12 MP (inclusive) medium, above 12 MP high.
ResolutionClass resolution_class(std::int64_t width_px, std::int64_t height_px) noexcept;

struct QuerySpec {
    std::optional<DateKey> date_from;
    std::optional<DateKey> date_to;
    std::optional<std::set<std::string>> species_codes;
    std::optional<std::set<Platform>> platforms;
    std::optional<std::int64_t> min_width_px;
    std::optional<std::int64_t> min_height_px;
    std::optional<std::set<Validation>> validation_states;
    std::vector<GroupKey> group_by;
    std::set<Measure> measures; ///< emitted in enum order

    /// Throws InvalidSpec.
    void validate() const;
};

/// Group columns then measure columns. Rows are ordered by the group values
/// compared column by column: temporal keys chronologically, species by
/// code, enumerations in declaration order. Means skip absent measures and
/// print as an empty cell when nothing contributed.
ResultTable run_query(const Warehouse &wh, const QuerySpec &spec);

/// Builds a spec from named parameters shared by the CLI flags and the HTTP
/// query string: group_by, measures, date_from, date_to (YYYY-MM-DD),
/// species, platforms, validation (each comma-separated, repeatable),
/// min_width_px, min_height_px. Measures default to tree_count. Throws
/// InvalidSpec on unknown names or malformed values.
QuerySpec query_spec_from_params(const std::vector<std::pair<std::string, std::string>> &params);

enum class Granularity { Year, Quarter, Month };
std::optional<Granularity> parse_granularity(std::string_view text) noexcept;

/// Tree counts of one species over time. Throws UnknownSpecies.
ResultTable species_trend(const Warehouse &wh, std::string_view species_code, Granularity granularity);

/// Images and facts per (resolution_class, platform).
ResultTable image_usage_report(const Warehouse &wh);

} // namespace canopydw
