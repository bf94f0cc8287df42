#pragma once

// Parsers for the ingest inputs and the pipeline that commits them:
//
//   detection file   one `class_id cx cy w h [confidence]` per line
//   class map        one species code per line, line index = class_id
//   image manifest   CSV, kManifestHeader
//   species registry CSV, kRegistryHeader
//   survey           CSV, kSurveyCsvHeader, dates as YYYY-MM-DD
//
// Parse functions are pure. Errors carry the 1-based source line.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "canopydw/model.hpp"
#include "canopydw/storage.hpp"

namespace canopydw {

inline constexpr std::string_view kManifestHeader =
    "file_name,capture_date,platform,width_px,height_px,gsd_cm_per_px,gt_origin_x,gt_origin_y,"
    "gt_a,gt_b,gt_d,gt_e,size_bytes,checksum";
inline constexpr std::string_view kRegistryHeader = "code,scientific_name,common_name,conservation_status";
inline constexpr std::string_view kSurveyCsvHeader =
    "record_id,geo_x,geo_y,species_code,dbh_cm,height_m,surveyed_date";

struct Detection {
    std::int64_t class_id = 0;
    BoundingBox bbox;
    double confidence = 1.0;

    friend bool operator==(const Detection &, const Detection &) = default;
};

/// Throws Error(Parse) for a wrong field count or a non-numeric token and
/// Error(Range) for values outside [0, 1] beyond kClampTolerance. Values
/// inside the tolerance band are clamped.
Detection parse_detection_line(std::string_view line, std::size_t line_no = 0);

/// `class_id cx cy w h confidence` with shortest round-trip reals.
std::string render_detection(const Detection &detection);

/// Blank lines and `#` comments carry no detection.
bool is_detection_comment(std::string_view line) noexcept;

/// Parses every meaningful line; the first bad line throws.
std::vector<Detection> parse_detection_lines(const std::vector<std::string> &lines);

/// Splits file text into lines, dropping a trailing CR from each.
std::vector<std::string> split_lines(std::string_view text);

class ClassMap {
public:
    ClassMap() = default;
    /// Throws Error(Parse) on an empty or duplicate code.
    explicit ClassMap(std::vector<std::string> codes);

    /// One code per line; blank lines and `#` comments are not allowed
    /// since they would shift class ids.
    static ClassMap parse(std::string_view text);

    const std::vector<std::string> &codes() const noexcept { return codes_; }
    std::size_t size() const noexcept { return codes_.size(); }
    const std::string *code_for(std::int64_t class_id) const noexcept;

private:
    std::vector<std::string> codes_;
};

struct ImageManifestRow {
    std::string file_name;
    DateKey capture_date;
    Platform platform = Platform::Uav;
    std::int64_t width_px = 0;
    std::int64_t height_px = 0;
    double gsd_cm_per_px = 0;
    Geotransform geotransform;
    std::int64_t size_bytes = 0;
    std::string checksum;

    friend bool operator==(const ImageManifestRow &, const ImageManifestRow &) = default;
};

/// One manifest data row (already split into fields). Throws Parse,
/// InvalidDate or InvalidMetadata carrying `line_no`.
ImageManifestRow parse_manifest_fields(const std::vector<std::string> &fields, std::size_t line_no);
std::vector<ImageManifestRow> parse_image_manifest(std::string_view csv_text);
DimImage to_dim_image(const ImageManifestRow &row);

struct SpeciesRegistryRow {
    std::string code;
    std::string scientific_name;
    std::string common_name;
    ConservationStatus conservation_status = ConservationStatus::Unknown;
};

std::vector<SpeciesRegistryRow> parse_species_registry(std::string_view csv_text);

/// Returns the number of species newly added. Nothing is written if any row
/// fails to parse.
std::size_t ingest_species_registry(Warehouse &wh, std::string_view csv_text);

/// Survey rows with syntax checks and duplicate detection (Error(Duplicate)).
std::vector<SurveyRecord> parse_survey_csv(std::string_view csv_text);

/// Parses, resolves species codes (Error(UnknownSpecies)) and persists the
/// records under `survey_id`.
std::vector<SurveyRecord> ingest_survey(Warehouse &wh, std::string_view survey_id, std::string_view csv_text);

struct IngestIssue {
    std::string file_name;
    std::size_t line = 0;
    std::string message;
};

struct IngestReport {
    std::int64_t images_added = 0;
    std::int64_t facts_added = 0;
    std::int64_t rows_skipped = 0;
    std::vector<IngestIssue> errors;
};

/// Detection lines keyed by the image file name they belong to.
using DetectionFiles = std::map<std::string, std::vector<std::string>>;

/// Commits images and their detections. Facts of one image commit together;
/// a bad detection file costs only that image's facts. An image already in
/// the warehouse is skipped with its detections. Throws UnknownSpecies
/// before writing anything if a class map code is not registered.
IngestReport ingest_image_batch(Warehouse &wh, const std::vector<ImageManifestRow> &manifest,
                                const DetectionFiles &detection_files, const ClassMap &class_map);

/// Detection file name for an image: same base name, `.txt` extension.
std::string detection_file_name(std::string_view image_file_name);

} // namespace canopydw
