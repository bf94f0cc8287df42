#include "canopydw/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "canopydw/csv.hpp"
#include "canopydw/error.hpp"
#include "canopydw/geo.hpp"

namespace canopydw {

namespace {

std::string at_line(std::size_t line_no) {
    return line_no ? "line " + std::to_string(line_no) + ": " : std::string();
}

[[noreturn]] void fail(ErrorKind kind, std::size_t line_no, const std::string &what) {
    throw Error(kind, at_line(line_no) + what, line_no);
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) {
            ++i;
        }
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') {
            ++i;
        }
        if (i > start) {
            tokens.push_back(line.substr(start, i - start));
        }
    }
    return tokens;
}

double clamp_unit(double v) {
    return std::clamp(v, 0.0, 1.0);
}

/// Data records of a CSV input whose first line must equal `header`.
std::vector<csv::Record> read_csv(std::string_view text, std::string_view header) {
    auto records = csv::parse(text);
    if (records.empty() || csv::join(records.front().fields) != header) {
        fail(ErrorKind::Parse, 1, "header must be '" + std::string(header) + "'");
    }
    std::vector<csv::Record> out;
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].open_quote) {
            fail(ErrorKind::Parse, records[i].line, "unterminated quoted field");
        }
        if (records[i].fields.empty()) {
            continue;
        }
        out.push_back(std::move(records[i]));
    }
    return out;
}

void expect_fields(const std::vector<std::string> &fields, std::size_t n, std::size_t line_no) {
    if (fields.size() != n) {
        fail(ErrorKind::Parse, line_no,
             "expected " + std::to_string(n) + " fields, found " + std::to_string(fields.size()));
    }
}

double real_field(const std::string &text, const char *column, std::size_t line_no) {
    const auto v = csv::parse_real(text);
    if (!v) {
        fail(ErrorKind::Parse, line_no, std::string(column) + " is not a number: '" + text + "'");
    }
    return *v;
}

std::optional<double> positive_optional(const std::string &text, const char *column, std::size_t line_no) {
    if (text.empty()) {
        return std::nullopt;
    }
    const double v = real_field(text, column, line_no);
    if (!(v > 0)) {
        fail(ErrorKind::Range, line_no, std::string(column) + " must be positive");
    }
    return v;
}

std::int64_t int_field(const std::string &text, const char *column, std::size_t line_no) {
    const auto v = csv::parse_int(text);
    if (!v) {
        fail(ErrorKind::Parse, line_no, std::string(column) + " is not an integer: '" + text + "'");
    }
    return *v;
}

DateKey date_field(const std::string &text, std::size_t line_no) {
    try {
        return DateKey::parse_iso(text);
    } catch (const Error &e) {
        fail(ErrorKind::InvalidDate, line_no, e.what());
    }
}

bool valid_registry_code(std::string_view code) {
    if (code.empty() || code.size() > 16) {
        return false;
    }
    return std::all_of(code.begin(), code.end(), [](char c) {
        return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
    });
}

} // namespace

bool is_detection_comment(std::string_view line) noexcept {
    const auto first = line.find_first_not_of(" \t\r");
    return first == std::string_view::npos || line[first] == '#';
}

Detection parse_detection_line(std::string_view line, std::size_t line_no) {
    if (!line.empty() && line.back() == '\r') {
        line.remove_suffix(1);
    }
    const auto tokens = split_whitespace(line);
    if (tokens.size() != 5 && tokens.size() != 6) {
        fail(ErrorKind::Parse, line_no,
             "expected 'class_id cx cy w h [confidence]', found " + std::to_string(tokens.size()) + " fields");
    }
    Detection det;
    const auto cls = csv::parse_int(tokens[0]);
    if (!cls) {
        fail(ErrorKind::Parse, line_no, "class_id is not an integer: '" + std::string(tokens[0]) + "'");
    }
    if (*cls < 0) {
        fail(ErrorKind::Range, line_no, "class_id must be non-negative");
    }
    det.class_id = *cls;

    double values[5] = {0, 0, 0, 0, 1.0};
    static constexpr const char *kNames[5] = {"cx", "cy", "w", "h", "confidence"};
    for (std::size_t i = 1; i < tokens.size(); ++i) {
        const auto v = csv::parse_real(tokens[i]);
        if (!v) {
            fail(ErrorKind::Parse, line_no,
                 std::string(kNames[i - 1]) + " is not a number: '" + std::string(tokens[i]) + "'");
        }
        values[i - 1] = *v;
    }
    det.bbox = {values[0], values[1], values[2], values[3]};
    det.confidence = values[4];
    if (auto bad = check_bbox(det.bbox)) {
        fail(ErrorKind::Range, line_no, *bad);
    }
    if (det.confidence < -kClampTolerance || det.confidence > 1.0 + kClampTolerance) {
        fail(ErrorKind::Range, line_no, "confidence out of range");
    }
    det.bbox.cx = clamp_unit(det.bbox.cx);
    det.bbox.cy = clamp_unit(det.bbox.cy);
    det.bbox.w = std::min(det.bbox.w, 1.0);
    det.bbox.h = std::min(det.bbox.h, 1.0);
    det.confidence = clamp_unit(det.confidence);
    return det;
}

std::string render_detection(const Detection &d) {
    std::string out = std::to_string(d.class_id);
    for (double v : {d.bbox.cx, d.bbox.cy, d.bbox.w, d.bbox.h, d.confidence}) {
        out.push_back(' ');
        out += csv::format_real(v);
    }
    return out;
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        lines.emplace_back(line);
        start = end + 1;
    }
    return lines;
}

std::vector<Detection> parse_detection_lines(const std::vector<std::string> &lines) {
    std::vector<Detection> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (is_detection_comment(lines[i])) {
            continue;
        }
        out.push_back(parse_detection_line(lines[i], i + 1));
    }
    return out;
}

ClassMap::ClassMap(std::vector<std::string> codes) : codes_(std::move(codes)) {
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < codes_.size(); ++i) {
        if (codes_[i].empty()) {
            fail(ErrorKind::Parse, i + 1, "empty species code in class map");
        }
        if (!seen.insert(codes_[i]).second) {
            fail(ErrorKind::Parse, i + 1, "duplicate species code '" + codes_[i] + "' in class map");
        }
    }
}

ClassMap ClassMap::parse(std::string_view text) {
    auto lines = split_lines(text);
    for (auto &line : lines) {
        const auto first = line.find_first_not_of(" \t");
        const auto last = line.find_last_not_of(" \t");
        line = first == std::string::npos ? std::string() : line.substr(first, last - first + 1);
    }
    return ClassMap(std::move(lines));
}

const std::string *ClassMap::code_for(std::int64_t class_id) const noexcept {
    if (class_id < 0 || class_id >= static_cast<std::int64_t>(codes_.size())) {
        return nullptr;
    }
    return &codes_[static_cast<std::size_t>(class_id)];
}

ImageManifestRow parse_manifest_fields(const std::vector<std::string> &f, std::size_t line_no) {
    expect_fields(f, 14, line_no);
    ImageManifestRow row;
    row.file_name = f[0];
    if (row.file_name.empty()) {
        fail(ErrorKind::Parse, line_no, "file_name is empty");
    }
    row.capture_date = date_field(f[1], line_no);
    const auto platform = parse_platform(f[2]);
    if (!platform) {
        fail(ErrorKind::Parse, line_no, "unknown platform '" + f[2] + "'");
    }
    row.platform = *platform;
    row.width_px = int_field(f[3], "width_px", line_no);
    row.height_px = int_field(f[4], "height_px", line_no);
    row.gsd_cm_per_px = real_field(f[5], "gsd_cm_per_px", line_no);
    row.geotransform = {real_field(f[6], "gt_origin_x", line_no), real_field(f[7], "gt_origin_y", line_no),
                        real_field(f[8], "gt_a", line_no),        real_field(f[9], "gt_b", line_no),
                        real_field(f[10], "gt_d", line_no),       real_field(f[11], "gt_e", line_no)};
    row.size_bytes = int_field(f[12], "size_bytes", line_no);
    row.checksum = f[13];
    std::transform(row.checksum.begin(), row.checksum.end(), row.checksum.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

    const auto problems = check_image(to_dim_image(row));
    if (!problems.empty()) {
        std::string what;
        for (const auto &p : problems) {
            what += what.empty() ? p : "; " + p;
        }
        fail(ErrorKind::InvalidMetadata, line_no, what);
    }
    return row;
}

std::vector<ImageManifestRow> parse_image_manifest(std::string_view csv_text) {
    std::vector<ImageManifestRow> out;
    for (const auto &rec : read_csv(csv_text, kManifestHeader)) {
        out.push_back(parse_manifest_fields(rec.fields, rec.line));
    }
    return out;
}

DimImage to_dim_image(const ImageManifestRow &row) {
    DimImage img;
    img.file_name = row.file_name;
    img.platform = row.platform;
    img.capture_date_key = row.capture_date;
    img.width_px = row.width_px;
    img.height_px = row.height_px;
    img.gsd_cm_per_px = row.gsd_cm_per_px;
    img.geotransform = row.geotransform;
    img.size_bytes = row.size_bytes;
    img.checksum = row.checksum;
    return img;
}

std::vector<SpeciesRegistryRow> parse_species_registry(std::string_view csv_text) {
    std::vector<SpeciesRegistryRow> out;
    for (const auto &rec : read_csv(csv_text, kRegistryHeader)) {
        expect_fields(rec.fields, 4, rec.line);
        SpeciesRegistryRow row;
        row.code = rec.fields[0];
        if (row.code.empty()) {
            fail(ErrorKind::Parse, rec.line, "species code is empty");
        }
        if (!valid_registry_code(row.code)) {
            fail(ErrorKind::Parse, rec.line,
                 "species code '" + row.code + "' must be 1-16 of A-Z, 0-9, '_' or '-'");
        }
        row.scientific_name = rec.fields[1];
        row.common_name = rec.fields[2];
        row.conservation_status =
            parse_conservation_status(rec.fields[3]).value_or(ConservationStatus::Unknown);
        out.push_back(std::move(row));
    }
    return out;
}

std::size_t ingest_species_registry(Warehouse &wh, std::string_view csv_text) {
    const auto rows = parse_species_registry(csv_text);
    Warehouse::WriteGuard guard(wh);
    std::size_t added = 0;
    for (const auto &row : rows) {
        added += wh.upsert_species(row.code, row.scientific_name, row.common_name, row.conservation_status).created;
    }
    return added;
}

std::vector<SurveyRecord> parse_survey_csv(std::string_view csv_text) {
    std::vector<SurveyRecord> out;
    std::unordered_set<std::string> ids;
    for (const auto &rec : read_csv(csv_text, kSurveyCsvHeader)) {
        const auto &f = rec.fields;
        expect_fields(f, 7, rec.line);
        SurveyRecord r;
        r.record_id = f[0];
        if (r.record_id.empty()) {
            fail(ErrorKind::Parse, rec.line, "record_id is empty");
        }
        if (!ids.insert(r.record_id).second) {
            fail(ErrorKind::Duplicate, rec.line, "duplicate record_id '" + r.record_id + "'");
        }
        r.geo_x = real_field(f[1], "geo_x", rec.line);
        r.geo_y = real_field(f[2], "geo_y", rec.line);
        r.species_code = f[3];
        if (r.species_code.empty()) {
            fail(ErrorKind::Parse, rec.line, "species_code is empty");
        }
        r.dbh_cm = positive_optional(f[4], "dbh_cm", rec.line);
        r.height_m = positive_optional(f[5], "height_m", rec.line);
        r.surveyed_date_key = date_field(f[6], rec.line);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<SurveyRecord> ingest_survey(Warehouse &wh, std::string_view survey_id, std::string_view csv_text) {
    auto records = parse_survey_csv(csv_text);
    Warehouse::WriteGuard guard(wh);
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!wh.find_species(records[i].species_code)) {
            throw Error(ErrorKind::UnknownSpecies,
                        "record '" + records[i].record_id + "': unknown species code '" +
                            records[i].species_code + "'");
        }
    }
    wh.store_survey(survey_id, records);
    return records;
}

std::string detection_file_name(std::string_view image_file_name) {
    const auto slash = image_file_name.find_last_of('/');
    const auto base_start = slash == std::string_view::npos ? 0 : slash + 1;
    const auto dot = image_file_name.find_last_of('.');
    const auto stem_end = dot == std::string_view::npos || dot < base_start ? image_file_name.size() : dot;
    return std::string(image_file_name.substr(0, stem_end)) + ".txt";
}

IngestReport ingest_image_batch(Warehouse &wh, const std::vector<ImageManifestRow> &manifest,
                                const DetectionFiles &detection_files, const ClassMap &class_map) {
    Warehouse::WriteGuard guard(wh);

    std::vector<SpeciesKey> species_of_class;
    species_of_class.reserve(class_map.size());
    for (const auto &code : class_map.codes()) {
        const auto *sp = wh.find_species(code);
        if (!sp) {
            throw Error(ErrorKind::UnknownSpecies, "class map code '" + code + "' is not registered");
        }
        species_of_class.push_back(sp->species_key);
    }

    IngestReport report;
    std::unordered_set<std::string> in_manifest;
    for (const auto &row : manifest) {
        in_manifest.insert(row.file_name);
        const auto det_it = detection_files.find(row.file_name);
        const auto det_lines = [&]() -> std::int64_t {
            if (det_it == detection_files.end()) {
                return 0;
            }
            return std::count_if(det_it->second.begin(), det_it->second.end(),
                                 [](const std::string &l) { return !is_detection_comment(l); });
        };

        DimImage image = to_dim_image(row);
        ImageKey key;
        try {
            wh.ensure_date(row.capture_date);
            const auto inserted = wh.insert_image(image);
            if (!inserted.created) {
                report.rows_skipped += 1 + det_lines();
                continue;
            }
            key = inserted.key;
            ++report.images_added;
        } catch (const Error &e) {
            if (e.kind() == ErrorKind::Io || e.kind() == ErrorKind::Locked) {
                throw;
            }
            report.errors.push_back({row.file_name, e.line(), e.what()});
            report.rows_skipped += 1 + det_lines();
            continue;
        }
        if (det_it == detection_files.end()) {
            continue;
        }

        const auto file = detection_file_name(row.file_name);
        std::vector<FactTreeMetric> facts;
        try {
            const auto &lines = det_it->second;
            for (std::size_t i = 0; i < lines.size(); ++i) {
                if (is_detection_comment(lines[i])) {
                    continue;
                }
                const auto det = parse_detection_line(lines[i], i + 1);
                if (!class_map.code_for(det.class_id)) {
                    fail(ErrorKind::Range, i + 1,
                         "class_id " + std::to_string(det.class_id) + " is not in the class map");
                }
                FactTreeMetric fact;
                fact.date_key = row.capture_date;
                fact.image_key = key;
                fact.species_key = species_of_class[static_cast<std::size_t>(det.class_id)];
                fact.bbox = det.bbox;
                fact.confidence = det.confidence;
                const auto geo = pixel_to_geo(row.geotransform, det.bbox.cx * static_cast<double>(row.width_px),
                                              det.bbox.cy * static_cast<double>(row.height_px));
                fact.geo_x = geo.x;
                fact.geo_y = geo.y;
                facts.push_back(std::move(fact));
            }
        } catch (const Error &e) {
            report.errors.push_back({file, e.line(), e.what()});
            report.rows_skipped += det_lines();
            continue;
        }
        report.facts_added += static_cast<std::int64_t>(wh.append_facts(std::move(facts)).size());
    }

    for (const auto &[name, lines] : detection_files) {
        if (!in_manifest.contains(name)) {
            report.errors.push_back({detection_file_name(name), 0, "no manifest row for image '" + name + "'"});
        }
    }
    return report;
}

} // namespace canopydw
