#include "rows.hpp"

#include "canopydw/csv.hpp"
#include "canopydw/error.hpp"

namespace canopydw::rows {

namespace {

[[noreturn]] void bad(const std::string &column, const std::string &value) {
    throw Error(ErrorKind::Parse, "bad " + column + " '" + value + "'");
}

void expect_columns(const std::vector<std::string> &fields, std::size_t n) {
    if (fields.size() != n) {
        throw Error(ErrorKind::Parse,
                    "expected " + std::to_string(n) + " columns, found " + std::to_string(fields.size()));
    }
}

std::int64_t to_int(const std::vector<std::string> &f, std::size_t i, const char *column) {
    auto v = csv::parse_int(f[i]);
    if (!v) {
        bad(column, f[i]);
    }
    return *v;
}

double to_real(const std::vector<std::string> &f, std::size_t i, const char *column) {
    auto v = csv::parse_real(f[i]);
    if (!v) {
        bad(column, f[i]);
    }
    return *v;
}

std::optional<double> to_optional_real(const std::vector<std::string> &f, std::size_t i, const char *column) {
    if (f[i].empty()) {
        return std::nullopt;
    }
    return to_real(f, i, column);
}

DateKey to_date_key(const std::vector<std::string> &f, std::size_t i, const char *column) {
    const auto v = to_int(f, i, column);
    const DateKey key(static_cast<std::int32_t>(v));
    if (v < 0 || v > 99999999 || !key.is_valid()) {
        bad(column, f[i]);
    }
    return key;
}

void push(std::string &out, std::string_view field, bool first = false) {
    if (!first) {
        out.push_back(',');
    }
    csv::append_field(out, field);
}

} // namespace

std::string render(const DimDate &r) {
    std::string out = std::to_string(r.date_key.value());
    for (int v : {r.year, r.quarter, r.month, r.day, r.day_of_year}) {
        push(out, std::to_string(v));
    }
    return out;
}

std::string render(const DimImage &r) {
    std::string out = std::to_string(r.image_key.value);
    push(out, r.file_name);
    push(out, to_string(r.platform));
    push(out, std::to_string(r.capture_date_key.value()));
    push(out, std::to_string(r.width_px));
    push(out, std::to_string(r.height_px));
    push(out, csv::format_real(r.gsd_cm_per_px));
    const auto &gt = r.geotransform;
    for (double v : {gt.origin_x, gt.origin_y, gt.a, gt.b, gt.d, gt.e}) {
        push(out, csv::format_real(v));
    }
    push(out, std::to_string(r.size_bytes));
    push(out, r.checksum);
    return out;
}

std::string render(const DimSpecies &r) {
    std::string out = std::to_string(r.species_key.value);
    push(out, r.code);
    push(out, r.scientific_name);
    push(out, r.common_name);
    push(out, to_string(r.conservation_status));
    return out;
}

std::string render(const FactTreeMetric &r) {
    std::string out = std::to_string(r.fact_id.value);
    push(out, std::to_string(r.date_key.value()));
    push(out, std::to_string(r.image_key.value));
    push(out, std::to_string(r.species_key.value));
    for (double v : {r.bbox.cx, r.bbox.cy, r.bbox.w, r.bbox.h, r.confidence, r.geo_x, r.geo_y}) {
        push(out, csv::format_real(v));
    }
    push(out, csv::format_optional(r.height_m));
    push(out, csv::format_optional(r.dbh_cm));
    push(out, to_string(r.validation));
    push(out, r.matched_record_id.value_or(""));
    return out;
}

std::string render(const SurveyRecord &r) {
    std::string out;
    push(out, r.record_id, true);
    push(out, csv::format_real(r.geo_x));
    push(out, csv::format_real(r.geo_y));
    push(out, r.species_code);
    push(out, csv::format_optional(r.dbh_cm));
    push(out, csv::format_optional(r.height_m));
    push(out, std::to_string(r.surveyed_date_key.value()));
    return out;
}

DimDate parse_date(const std::vector<std::string> &f) {
    expect_columns(f, 6);
    DimDate r;
    r.date_key = to_date_key(f, 0, "date_key");
    r.year = static_cast<int>(to_int(f, 1, "year"));
    r.quarter = static_cast<int>(to_int(f, 2, "quarter"));
    r.month = static_cast<int>(to_int(f, 3, "month"));
    r.day = static_cast<int>(to_int(f, 4, "day"));
    r.day_of_year = static_cast<int>(to_int(f, 5, "day_of_year"));
    return r;
}

DimImage parse_image(const std::vector<std::string> &f) {
    expect_columns(f, 15);
    DimImage r;
    r.image_key = ImageKey{to_int(f, 0, "image_key")};
    r.file_name = f[1];
    const auto platform = parse_platform(f[2]);
    if (!platform) {
        bad("platform", f[2]);
    }
    r.platform = *platform;
    r.capture_date_key = to_date_key(f, 3, "capture_date_key");
    r.width_px = to_int(f, 4, "width_px");
    r.height_px = to_int(f, 5, "height_px");
    r.gsd_cm_per_px = to_real(f, 6, "gsd_cm_per_px");
    r.geotransform = {to_real(f, 7, "gt_origin_x"), to_real(f, 8, "gt_origin_y"), to_real(f, 9, "gt_a"),
                      to_real(f, 10, "gt_b"),       to_real(f, 11, "gt_d"),       to_real(f, 12, "gt_e")};
    r.size_bytes = to_int(f, 13, "size_bytes");
    r.checksum = f[14];
    return r;
}

DimSpecies parse_species(const std::vector<std::string> &f) {
    expect_columns(f, 5);
    DimSpecies r;
    r.species_key = SpeciesKey{to_int(f, 0, "species_key")};
    r.code = f[1];
    r.scientific_name = f[2];
    r.common_name = f[3];
    const auto status = parse_conservation_status(f[4]);
    if (!status) {
        bad("conservation_status", f[4]);
    }
    r.conservation_status = *status;
    return r;
}

FactTreeMetric parse_fact(const std::vector<std::string> &f) {
    expect_columns(f, 15);
    FactTreeMetric r;
    r.fact_id = FactId{to_int(f, 0, "fact_id")};
    r.date_key = to_date_key(f, 1, "date_key");
    r.image_key = ImageKey{to_int(f, 2, "image_key")};
    r.species_key = SpeciesKey{to_int(f, 3, "species_key")};
    r.bbox = {to_real(f, 4, "bbox_cx"), to_real(f, 5, "bbox_cy"), to_real(f, 6, "bbox_w"),
              to_real(f, 7, "bbox_h")};
    r.confidence = to_real(f, 8, "confidence");
    r.geo_x = to_real(f, 9, "geo_x");
    r.geo_y = to_real(f, 10, "geo_y");
    r.height_m = to_optional_real(f, 11, "height_m");
    r.dbh_cm = to_optional_real(f, 12, "dbh_cm");
    const auto validation = parse_validation(f[13]);
    if (!validation) {
        bad("validation", f[13]);
    }
    r.validation = *validation;
    if (!f[14].empty()) {
        r.matched_record_id = f[14];
    }
    return r;
}

SurveyRecord parse_survey(const std::vector<std::string> &f) {
    expect_columns(f, 7);
    SurveyRecord r;
    r.record_id = f[0];
    r.geo_x = to_real(f, 1, "geo_x");
    r.geo_y = to_real(f, 2, "geo_y");
    r.species_code = f[3];
    r.dbh_cm = to_optional_real(f, 4, "dbh_cm");
    r.height_m = to_optional_real(f, 5, "height_m");
    r.surveyed_date_key = to_date_key(f, 6, "surveyed_date_key");
    return r;
}

} // namespace canopydw::rows
