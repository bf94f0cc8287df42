#pragma once

// Shared helpers for the test binaries: scratch directories, deterministic
// input builders, the 238-image reference warehouse, and random operation
// generators for the property tests.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "canopydw/ingest.hpp"
#include "canopydw/model.hpp"
#include "canopydw/storage.hpp"

namespace canopydw::testing {

namespace fs = std::filesystem;

/// Removed with its contents on destruction.
class TempDir {
public:
    TempDir();
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;
    ~TempDir();

    const fs::path &path() const noexcept { return path_; }
    fs::path operator/(const std::string &name) const { return path_ / name; }

private:
    fs::path path_;
};

std::string read_text(const fs::path &path);
void write_text(const fs::path &path, const std::string &text);

/// Deterministic 64-hex-digit string.
std::string checksum_for(std::uint64_t seed);

ImageManifestRow manifest_row(const std::string &file_name, DateKey date, Platform platform = Platform::Uav,
                              std::int64_t width = 4000, std::int64_t height = 3000, std::int64_t size_bytes = 1000);

/// Registers PIAB, PISY, BEPE, QURO (in that order) and returns the class
/// map listing them in the same order.
ClassMap register_default_species(Warehouse &wh);

// Reference warehouse: four datasets of 22, 50, 116 and 50 images over three
// capture days (the last day flown by uav and satellite), one detection per
// image, image payload summing to kReferencePayloadBytes.
inline constexpr std::int64_t kReferenceImages = 238;
inline constexpr std::int64_t kReferencePayloadBytes = 965'633'638;
void build_reference_warehouse(Warehouse &wh);

/// Random but valid dimension and fact content for property tests. All
/// mutations go through the public Warehouse API.
class RandomOps {
public:
    explicit RandomOps(std::uint64_t seed) : rng_(seed) {}

    std::mt19937_64 &rng() noexcept { return rng_; }

    double uniform(double lo, double hi);
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    bool chance(double p);

    DateKey random_date();
    DimImage random_image(DateKey date);
    /// A fact that passes validation against `wh`, which must hold at
    /// least one image and one species.
    FactTreeMetric random_fact(const Warehouse &wh);
    /// A fact broken in one random way (dangling key, date mismatch, bad
    /// box or confidence).
    FactTreeMetric broken_fact(const Warehouse &wh);
    SurveyRecord random_record(const Warehouse &wh, const std::string &id);

    /// Runs `steps` random operations, some of them expected to be
    /// rejected. Returns how many operations were rejected.
    int run(Warehouse &wh, int steps);

private:
    std::mt19937_64 rng_;
    int surveys_ = 0;
};

} // namespace canopydw::testing
