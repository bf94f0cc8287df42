#include "canopydw/capacity.hpp"

#include <cmath>
#include <map>
#include <numeric>

#include "canopydw/csv.hpp"
#include "canopydw/error.hpp"

namespace canopydw {

std::int64_t average_daily_images(const std::vector<std::vector<std::int64_t>> &day_counts) {
    if (day_counts.empty()) {
        throw Error(ErrorKind::EmptyInput, "at least one day of counts is required");
    }
    // Exact rational sum of the per-day means over a common denominator.
    __int128 denominator = 1;
    for (const auto &day : day_counts) {
        if (day.empty()) {
            throw Error(ErrorKind::EmptyInput, "a day must list at least one dataset");
        }
        denominator = std::lcm(static_cast<std::int64_t>(denominator), static_cast<std::int64_t>(day.size()));
    }
    __int128 numerator = 0;
    for (const auto &day : day_counts) {
        __int128 sum = 0;
        for (auto c : day) {
            if (c < 0) {
                throw Error(ErrorKind::Range, "dataset counts must be non-negative");
            }
            sum += c;
        }
        numerator += sum * (denominator / static_cast<__int128>(day.size()));
    }
    return static_cast<std::int64_t>(numerator / (denominator * static_cast<__int128>(day_counts.size())));
}

std::int64_t total_records(const std::vector<std::int64_t> &dataset_counts) {
    return std::accumulate(dataset_counts.begin(), dataset_counts.end(), std::int64_t{0});
}

void GrowthModel::validate() const {
    if (avg_images_per_day < 0) {
        throw Error(ErrorKind::Range, "avg_images_per_day must be non-negative");
    }
    if (ingest_events_per_year <= 0) {
        throw Error(ErrorKind::Range, "ingest_events_per_year must be positive");
    }
    if (current_records < 0) {
        throw Error(ErrorKind::Range, "current_records must be non-negative");
    }
    if (!(bytes_per_image_record >= 0) || !std::isfinite(bytes_per_image_record) ||
        !(bytes_per_fact_record >= 0) || !std::isfinite(bytes_per_fact_record)) {
        throw Error(ErrorKind::Range, "bytes per record must be finite and non-negative");
    }
}

std::int64_t yearly_growth(const GrowthModel &model) {
    model.validate();
    return model.avg_images_per_day * model.ingest_events_per_year;
}

Projection project(const GrowthModel &model, std::int64_t years) {
    if (years < 0) {
        throw Error(ErrorKind::Range, "years must be non-negative");
    }
    Projection p;
    p.years = years;
    p.records = model.current_records + yearly_growth(model) * years;
    p.image_dim_bytes = static_cast<double>(p.records) * model.bytes_per_image_record;
    p.fact_table_bytes = static_cast<double>(p.records) * model.bytes_per_fact_record;
    return p;
}

CapacityReport estimate_from_warehouse(const Warehouse &wh, std::int64_t ingest_events_per_year,
                                       std::int64_t years) {
    const auto stats = wh.stats();
    if (stats.images.rows == 0) {
        throw Error(ErrorKind::EmptyWarehouse, "the warehouse holds no images; averages are undefined");
    }
    std::map<DateKey, std::map<Platform, std::int64_t>> datasets;
    for (const auto &img : wh.images()) {
        ++datasets[img.capture_date_key][img.platform];
    }
    CapacityReport report;
    for (const auto &[date, by_platform] : datasets) {
        auto &day = report.day_counts.emplace_back();
        for (const auto &[platform, n] : by_platform) {
            day.push_back(n);
        }
    }
    auto &m = report.model;
    m.avg_images_per_day = average_daily_images(report.day_counts);
    m.ingest_events_per_year = ingest_events_per_year;
    m.current_records = stats.images.rows;
    m.bytes_per_image_record = static_cast<double>(stats.image_payload_bytes) / static_cast<double>(stats.images.rows);
    m.bytes_per_fact_record =
        stats.facts.rows ? static_cast<double>(stats.facts.bytes) / static_cast<double>(stats.facts.rows) : 0.0;
    m.validate();
    report.current = project(m, 0);
    report.projected = project(m, years);
    return report;
}

ResultTable estimate_table(const CapacityReport &report) {
    ResultTable out{{"horizon_years", "type", "records", "bytes", "mib", "gib"}, {}};
    for (const auto *p : {&report.current, &report.projected}) {
        const std::pair<const char *, double> rows[] = {{"Image Dimension", p->image_dim_bytes},
                                                        {"Fact Table", p->fact_table_bytes}};
        for (const auto &[type, bytes] : rows) {
            out.rows.push_back({std::to_string(p->years), type, std::to_string(p->records),
                                csv::format_real(std::round(bytes)), csv::format_real(bytes / kMiB),
                                csv::format_real(bytes / kGiB)});
        }
    }
    return out;
}

std::string estimate_text(const CapacityReport &report) {
    const auto block = [](const std::string &title, const Projection &p, bool gib) {
        const double unit = gib ? kGiB : kMiB;
        ResultTable t{{"Type", "No. of Records", gib ? "GiB" : "MiB"},
                      {{"Image Dimension", std::to_string(p.records), format_size(p.image_dim_bytes / unit)},
                       {"Fact Table", std::to_string(p.records), format_size(p.fact_table_bytes / unit)}}};
        return title + "\n" + t.to_text();
    };
    const auto &m = report.model;
    std::string out = block("Current size", report.current, false);
    out += "\n";
    out += block("Estimated size after " + std::to_string(report.projected.years) + " years", report.projected, true);
    out += "\naverage images per day: " + std::to_string(m.avg_images_per_day) + "\n";
    out += "yearly growth: " + std::to_string(m.avg_images_per_day) + " * " +
           std::to_string(m.ingest_events_per_year) + " = " + std::to_string(yearly_growth(m)) + "\n";
    out += "projected records: " + std::to_string(m.current_records) + " + " + std::to_string(yearly_growth(m)) +
           " * " + std::to_string(report.projected.years) + " = " + std::to_string(report.projected.records) + "\n";
    if (report.projected.years == 10) {
        const double at_reference = static_cast<double>(kReferenceTenYearRecords) * m.bytes_per_image_record / kGiB;
        out += "note: the reference 10-year estimate (" + std::to_string(kReferenceTenYearRecords) + " records, " +
               format_fixed(kReferenceTenYearImageGiB, 2) +
               " GiB) does not follow from this model; the linear formula gives " +
               std::to_string(report.projected.records) + " records, and " +
               std::to_string(kReferenceTenYearRecords) + " records at the current bytes per image is " +
               format_fixed(at_reference, 2) + " GiB\n";
    }
    return out;
}

ResultTable stats_table(const WarehouseStats &s) {
    ResultTable out{{"type", "records", "bytes", "mib"}, {}};
    const auto row = [&](const std::string &type, std::int64_t records, std::int64_t bytes) {
        out.rows.push_back({type, std::to_string(records), std::to_string(bytes),
                            csv::format_real(static_cast<double>(bytes) / kMiB)});
    };
    row("Image Dimension", s.images.rows, s.image_payload_bytes);
    row("Fact Table", s.facts.rows, s.facts.bytes);
    for (const auto *t : {&s.dates, &s.images, &s.species, &s.facts}) {
        row(t->table, t->rows, t->bytes);
    }
    return out;
}

std::string stats_text(const WarehouseStats &s) {
    ResultTable summary{{"Type", "No. of Records", "MiB"},
                        {{"Image Dimension", std::to_string(s.images.rows),
                          format_size(static_cast<double>(s.image_payload_bytes) / kMiB)},
                         {"Fact Table", std::to_string(s.facts.rows),
                          format_size(static_cast<double>(s.facts.bytes) / kMiB)}}};
    ResultTable files{{"table", "rows", "bytes"}, {}};
    for (const auto *t : {&s.dates, &s.images, &s.species, &s.facts}) {
        files.rows.push_back({t->table, std::to_string(t->rows), std::to_string(t->bytes)});
    }
    return summary.to_text() + "\n" + files.to_text();
}

} // namespace canopydw
