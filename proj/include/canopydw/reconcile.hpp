#pragma once

// Ground-truth reconciliation: detections are placed on the map through the
// image geotransform, paired one-to-one with survey records, and scored.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "canopydw/geo.hpp"
#include "canopydw/model.hpp"
#include "canopydw/storage.hpp"

namespace canopydw {

inline constexpr double kDefaultMatchRadiusM = 2.0;

/// A fact reduced to what matching needs.
struct GeoFact {
    FactId fact_id;
    double geo_x = 0;
    double geo_y = 0;
    std::string species_code;
};

struct MatchPair {
    FactId fact_id;
    std::string record_id;
    double distance = 0;

    friend bool operator==(const MatchPair &, const MatchPair &) = default;
};

struct MatchResult {
    std::vector<MatchPair> pairs;            ///< in binding order
    std::vector<FactId> unmatched_facts;     ///< ascending
    std::vector<std::string> unmatched_records; ///< ascending

    friend bool operator==(const MatchResult &, const MatchResult &) = default;
};

/// Greedy global-minimum matching in a planar metric CRS: repeatedly binds
/// the closest unbound (fact, record) pair within `radius_m`, ties broken by
/// lower fact_id then lower record_id.
///
/// Throws MixedUnits for a non-finite coordinate, Range for a radius that is
/// not positive and finite, Duplicate for repeated fact or record ids.
MatchResult match_detections(std::span<const GeoFact> facts, std::span<const SurveyRecord> records,
                             double radius_m = kDefaultMatchRadiusM);

struct SpeciesMetrics {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::optional<double> precision; ///< absent when tp + fp = 0
    std::optional<double> recall;    ///< absent when tp + fn = 0

    friend bool operator==(const SpeciesMetrics &, const SpeciesMetrics &) = default;
};

struct ValidationMetrics {
    /// Species-agreeing pairs over all pairs; absent when nothing paired.
    std::optional<double> overall_accuracy;
    std::int64_t pairs = 0;
    std::int64_t agreeing_pairs = 0;
    std::int64_t facts_considered = 0;
    std::map<std::string, SpeciesMetrics> per_species;
};

/// Pure scoring of a match. For species s: tp counts pairs labeled s on both
/// sides, fp the remaining facts labeled s, fn the remaining records of s.
ValidationMetrics compute_metrics(std::span<const GeoFact> facts, std::span<const SurveyRecord> records,
                                  const MatchResult &match);

/// Committed facts with their species codes, in fact_id order.
std::vector<GeoFact> geo_facts(const Warehouse &wh);

/// Applies a match to the fact table (confirmed / species_mismatch /
/// unmatched, measures inherited by confirmed facts) and scores it.
/// Throws StaleMatch if a matched fact no longer exists.
ValidationMetrics validate_facts(Warehouse &wh, const MatchResult &match, std::span<const SurveyRecord> records);

std::size_t rewrite_validation(Warehouse &wh, const std::map<FactId, ValidationUpdate> &updates);

/// Matches every committed fact against one stored survey and applies the
/// result. With an empty `survey_id` the warehouse must hold exactly one
/// survey.
ValidationMetrics reconcile(Warehouse &wh, std::string_view survey_id, double radius_m = kDefaultMatchRadiusM);

/// `species_code,tp,fp,fn,precision,recall` rows by code, then
/// `OVERALL,accuracy=<value>`.
std::string metrics_csv(const ValidationMetrics &metrics);
std::string metrics_text(const ValidationMetrics &metrics);

} // namespace canopydw
