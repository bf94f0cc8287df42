#pragma once

// Linear storage-growth model for capacity planning.
//
//   average images per day  per-day mean of that day's dataset sizes,
//                           averaged over days and floored
//   yearly growth           average per day * ingest events per year
//   projected records       current + yearly growth * years
//   projected bytes         projected records * bytes per record

#include <cstdint>
#include <string>
#include <vector>

#include "canopydw/storage.hpp"
#include "canopydw/table.hpp"

namespace canopydw {

inline constexpr double kMiB = 1024.0 * 1024.0;
inline constexpr double kGiB = 1024.0 * 1024.0 * 1024.0;

/// Published 10-year reference estimate. Neither figure follows from the
/// linear model; reports print them as a discrepancy note.
inline constexpr std::int64_t kReferenceTenYearRecords = 2072;
inline constexpr double kReferenceTenYearImageGiB = 8.12;

/// One inner list per day, holding the image counts of that day's datasets.
/// Throws EmptyInput for no days or a day without datasets, Range for a
/// negative count.
std::int64_t average_daily_images(const std::vector<std::vector<std::int64_t>> &day_counts);

std::int64_t total_records(const std::vector<std::int64_t> &dataset_counts);

struct GrowthModel {
    std::int64_t avg_images_per_day = 0;
    std::int64_t ingest_events_per_year = 4;
    std::int64_t current_records = 0;
    double bytes_per_image_record = 0;
    double bytes_per_fact_record = 0;

    /// Throws Range.
    void validate() const;
};

std::int64_t yearly_growth(const GrowthModel &model);

struct Projection {
    std::int64_t years = 0;
    std::int64_t records = 0;
    double image_dim_bytes = 0;
    double fact_table_bytes = 0;
};

Projection project(const GrowthModel &model, std::int64_t years);

struct CapacityReport {
    GrowthModel model;
    std::vector<std::vector<std::int64_t>> day_counts; ///< derived dataset sizes per capture day
    Projection current;
    Projection projected;
};

/// Derives the model from live data. A dataset is the set of images sharing
/// a capture date and platform; a day's value is the mean of its datasets.
/// Throws EmptyWarehouse when there are no images.
CapacityReport estimate_from_warehouse(const Warehouse &wh, std::int64_t ingest_events_per_year,
                                       std::int64_t years);

/// `horizon_years,type,records,bytes,mib,gib`; current rows then projected.
ResultTable estimate_table(const CapacityReport &report);

/// Two text tables in the Type / No. of Records / size layout, followed by
/// the model parameters and, for a 10-year horizon, the reference note.
std::string estimate_text(const CapacityReport &report);

/// `type,records,bytes,mib`. The first two rows are the size summary
/// (Image Dimension counts image payload bytes, Fact Table counts committed
/// fact rows); the rest are per-table file sizes.
ResultTable stats_table(const WarehouseStats &stats);
std::string stats_text(const WarehouseStats &stats);

} // namespace canopydw
