#pragma once

// File-backed, append-only persistence for the star schema.
//
// Layout under the warehouse root:
//
//     dim_date.tbl  dim_image.tbl  dim_species.tbl  fact_tree_metrics.tbl
//     COMMIT        last committed fact_id, decimal text
//     LOCK          flock(2) target for cross-process single-writer exclusion
//     surveys/<id>.tbl
//
// Dimension tables are replaced whole (write temp, rename). The fact table is
// appended and fsync'd, then COMMIT is replaced; fact rows past the COMMIT
// value are an interrupted batch and are ignored on load.
//
// A Warehouse is not internally synchronized. Callers sharing one between
// threads must serialize mutations and keep readers out while one runs.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "canopydw/model.hpp"

namespace canopydw {

inline constexpr std::string_view kDateHeader = "date_key,year,quarter,month,day,day_of_year";
inline constexpr std::string_view kImageHeader =
    "image_key,file_name,platform,capture_date_key,width_px,height_px,gsd_cm_per_px,"
    "gt_origin_x,gt_origin_y,gt_a,gt_b,gt_d,gt_e,size_bytes,checksum";
inline constexpr std::string_view kSpeciesHeader =
    "species_key,code,scientific_name,common_name,conservation_status";
inline constexpr std::string_view kFactHeader =
    "fact_id,date_key,image_key,species_key,bbox_cx,bbox_cy,bbox_w,bbox_h,confidence,"
    "geo_x,geo_y,height_m,dbh_cm,validation,matched_record_id";
inline constexpr std::string_view kSurveyHeader =
    "record_id,geo_x,geo_y,species_code,dbh_cm,height_m,surveyed_date_key";

template <class Key>
struct Upserted {
    Key key;
    bool created = false;
};

struct TableStats {
    std::string table;
    std::int64_t rows = 0;
    std::int64_t bytes = 0; ///< committed data bytes, header excluded
};

struct WarehouseStats {
    TableStats dates;
    TableStats images;
    TableStats species;
    TableStats facts;
    std::int64_t image_payload_bytes = 0; ///< sum of size_bytes over images
};

/// Post-processing annotation applied to one fact by reconciliation.
struct ValidationUpdate {
    Validation validation = Validation::Unvalidated;
    std::optional<std::string> matched_record_id;
    std::optional<double> height_m;
    std::optional<double> dbh_cm;
};

/// Next surrogate key for each keyed table.
struct KeyCounters {
    std::int64_t next_image = 1;
    std::int64_t next_species = 1;
    std::int64_t next_fact = 1;

    friend bool operator==(const KeyCounters &, const KeyCounters &) = default;
};

class Warehouse {
public:
    struct Options {
        /// fsync data and directory entries on every commit.
        bool durable = true;
    };

    /// Opens or initializes a warehouse. Throws CorruptTable (file and line
    /// attributed), Integrity (dangling key found at load) or Io.
    static Warehouse open(const std::filesystem::path &root, Options options);
    static Warehouse open(const std::filesystem::path &root) { return open(root, Options{}); }

    Warehouse(Warehouse &&) noexcept;
    Warehouse &operator=(Warehouse &&) noexcept;
    Warehouse(const Warehouse &) = delete;
    Warehouse &operator=(const Warehouse &) = delete;
    ~Warehouse();

    const std::filesystem::path &root() const noexcept { return root_; }

    const std::vector<DimDate> &dates() const noexcept { return dates_; }
    const std::vector<DimImage> &images() const noexcept { return images_; }
    const std::vector<DimSpecies> &species() const noexcept { return species_; }
    const std::vector<FactTreeMetric> &facts() const noexcept { return facts_; }
    const DimensionIndex &index() const noexcept { return index_; }
    KeyCounters counters() const noexcept;

    const DimImage *find_image(ImageKey key) const noexcept;
    const DimImage *find_image(std::string_view file_name, std::string_view checksum) const noexcept;
    const DimSpecies *find_species(SpeciesKey key) const noexcept;
    const DimSpecies *find_species(std::string_view code) const noexcept;
    const FactTreeMetric *find_fact(FactId id) const noexcept;

    /// Descriptive fields of an existing code are never overwritten.
    Upserted<SpeciesKey> upsert_species(std::string_view code, std::string_view scientific_name,
                                        std::string_view common_name, ConservationStatus status);

    /// `image.image_key` is ignored. Idempotent on (file_name, checksum).
    /// The capture date must already be materialized with ensure_date.
    Upserted<ImageKey> insert_image(DimImage image);

    DateKey ensure_date(DateKey key);

    /// All-or-nothing: any fact failing validation throws Integrity and
    /// nothing is written. `fact_id` of the inputs is ignored.
    std::vector<FactId> append_facts(std::vector<FactTreeMetric> facts);

    /// Rewrites the fact table with the given annotations. Throws UnknownId
    /// (nothing written) if any id is absent.
    std::size_t rewrite_validation(const std::map<FactId, ValidationUpdate> &updates);

    WarehouseStats stats() const;

    /// Survey files are write-once. Storing identical records again is a
    /// no-op; different records under an existing id throw Duplicate.
    void store_survey(std::string_view survey_id, const std::vector<SurveyRecord> &records);
    std::vector<std::string> survey_ids() const;
    std::vector<SurveyRecord> load_survey(std::string_view survey_id) const;

    /// Scoped write lock. Nested acquisition in one handle is allowed; the
    /// outermost guard takes the LOCK file (throws Locked when another
    /// handle or process holds it) and reloads if the files changed.
    class WriteGuard {
    public:
        explicit WriteGuard(Warehouse &wh);
        WriteGuard(const WriteGuard &) = delete;
        WriteGuard &operator=(const WriteGuard &) = delete;
        ~WriteGuard();

    private:
        Warehouse &wh_;
    };

    /// Reloads from disk when another handle committed since the last load.
    /// Returns true if state was reloaded.
    bool refresh();

    /// refresh() under a shared LOCK so a concurrent writer's half-finished
    /// commit is never observed. Returns false without reloading when a
    /// writer currently holds the lock.
    bool refresh_shared();

private:
    struct Fingerprint {
        std::vector<std::int64_t> values;
        friend bool operator==(const Fingerprint &, const Fingerprint &) = default;
    };

    explicit Warehouse(std::filesystem::path root, Options options);

    void load();
    void rebuild_indexes();
    Fingerprint fingerprint() const;
    void acquire_lock();
    void release_lock() noexcept;
    void write_dates();
    void write_images();
    void write_species();
    void write_commit(std::int64_t last_fact_id);
    std::filesystem::path table_path(std::string_view name) const;

    std::filesystem::path root_;
    Options options_;
    int lock_fd_ = -1;
    int lock_depth_ = 0;

    std::vector<DimDate> dates_;
    std::vector<DimImage> images_;
    std::vector<DimSpecies> species_;
    std::vector<FactTreeMetric> facts_;

    DimensionIndex index_;
    std::unordered_map<std::string, std::size_t> species_by_code_;
    std::unordered_map<std::string, std::size_t> image_by_identity_;
    std::unordered_map<DateKey, std::size_t> date_rows_;

    std::int64_t committed_fact_bytes_ = 0; ///< fact file size through the last committed row
    std::int64_t dim_bytes_[3] = {0, 0, 0};
    Fingerprint fingerprint_;
};

} // namespace canopydw
