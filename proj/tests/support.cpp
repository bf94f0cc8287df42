#include "support.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "canopydw/error.hpp"
#include "canopydw/geo.hpp"

namespace canopydw::testing {

TempDir::TempDir() {
    std::string pattern = (fs::temp_directory_path() / "canopydw-test-XXXXXX").string();
    if (::mkdtemp(pattern.data()) == nullptr) {
        throw std::runtime_error("mkdtemp failed");
    }
    path_ = pattern;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::string read_text(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

std::string checksum_for(std::uint64_t seed) {
    std::string out;
    std::uint64_t x = seed;
    for (int i = 0; i < 4; ++i) {
        // splitmix64
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        z ^= z >> 31;
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(z));
        out += buf;
    }
    return out;
}

ImageManifestRow manifest_row(const std::string &file_name, DateKey date, Platform platform, std::int64_t width,
                              std::int64_t height, std::int64_t size_bytes) {
    ImageManifestRow row;
    row.file_name = file_name;
    row.capture_date = date;
    row.platform = platform;
    row.width_px = width;
    row.height_px = height;
    row.gsd_cm_per_px = 2.5;
    row.geotransform = Geotransform{0, 100, 0.025, 0, 0, -0.025};
    row.size_bytes = size_bytes;
    row.checksum = checksum_for(std::hash<std::string>{}(file_name));
    return row;
}

ClassMap register_default_species(Warehouse &wh) {
    wh.upsert_species("PIAB", "Picea abies", "Norway spruce", ConservationStatus::LeastConcern);
    wh.upsert_species("PISY", "Pinus sylvestris", "Scots pine", ConservationStatus::LeastConcern);
    wh.upsert_species("BEPE", "Betula pendula", "Silver birch", ConservationStatus::NearThreatened);
    wh.upsert_species("QURO", "Quercus robur", "Pedunculate oak", ConservationStatus::Vulnerable);
    return ClassMap({"PIAB", "PISY", "BEPE", "QURO"});
}

void build_reference_warehouse(Warehouse &wh) {
    const ClassMap classes = register_default_species(wh);
    struct Dataset {
        const char *prefix;
        DateKey date;
        Platform platform;
        int images;
    };
    const Dataset datasets[] = {
        {"d1", DateKey(20240603), Platform::Uav, 22},
        {"d2", DateKey(20240610), Platform::Uav, 50},
        {"d3", DateKey(20240617), Platform::Uav, 116},
        {"d4", DateKey(20240617), Platform::Satellite, 50},
    };
    const std::int64_t base = kReferencePayloadBytes / kReferenceImages;
    std::int64_t remainder = kReferencePayloadBytes % kReferenceImages;
    int n = 0;
    for (const auto &ds : datasets) {
        std::vector<ImageManifestRow> manifest;
        DetectionFiles detections;
        for (int i = 0; i < ds.images; ++i, ++n) {
            char name[32];
            std::snprintf(name, sizeof name, "%s_%03d.tif", ds.prefix, i + 1);
            const std::int64_t size = base + (remainder-- > 0 ? 1 : 0);
            manifest.push_back(manifest_row(name, ds.date, ds.platform, 4000, 3000, size));
            detections[name] = {std::to_string(n % 4) + " 0.5 0.5 0.1 0.1"};
        }
        const auto report = ingest_image_batch(wh, manifest, detections, classes);
        if (!report.errors.empty() || report.images_added != ds.images) {
            throw std::logic_error("reference fixture did not ingest cleanly");
        }
    }
}

double RandomOps::uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

std::int64_t RandomOps::uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng_);
}

bool RandomOps::chance(double p) { return uniform(0, 1) < p; }

DateKey RandomOps::random_date() {
    const int year = static_cast<int>(uniform_int(2015, 2025));
    const int month = static_cast<int>(uniform_int(1, 12));
    const int day = static_cast<int>(uniform_int(1, days_in_month(year, month)));
    return DateKey::from_ymd(year, month, day);
}

DimImage RandomOps::random_image(DateKey date) {
    DimImage img;
    img.file_name = "img_" + std::to_string(uniform_int(0, 1'000'000'000)) + ".tif";
    img.platform = static_cast<Platform>(uniform_int(0, 3));
    img.capture_date_key = date;
    img.width_px = uniform_int(1, 9000);
    img.height_px = uniform_int(1, 6000);
    img.gsd_cm_per_px = uniform(0.5, 100);
    Geotransform gt;
    gt.origin_x = uniform(-1e5, 1e5);
    gt.origin_y = uniform(-1e5, 1e5);
    gt.a = uniform(0.05, 2) * (chance(0.5) ? 1 : -1);
    gt.e = uniform(0.05, 2) * (chance(0.5) ? 1 : -1);
    if (chance(0.3)) {
        gt.b = uniform(-0.01, 0.01);
        gt.d = uniform(-0.01, 0.01);
    }
    img.geotransform = gt;
    img.size_bytes = uniform_int(0, 100'000'000);
    img.checksum = checksum_for(rng_());
    return img;
}

FactTreeMetric RandomOps::random_fact(const Warehouse &wh) {
    const auto &img = wh.images()[static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(wh.images().size()) - 1))];
    const auto &sp = wh.species()[static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(wh.species().size()) - 1))];
    FactTreeMetric f;
    f.date_key = img.capture_date_key;
    f.image_key = img.image_key;
    f.species_key = sp.species_key;
    f.bbox.w = uniform(0.001, 0.2);
    f.bbox.h = uniform(0.001, 0.2);
    f.bbox.cx = uniform(0.1, 0.9);
    f.bbox.cy = uniform(0.1, 0.9);
    f.confidence = chance(0.1) ? 1.0 : uniform(0, 1);
    const auto geo = pixel_to_geo(img.geotransform, f.bbox.cx * static_cast<double>(img.width_px),
                                  f.bbox.cy * static_cast<double>(img.height_px));
    f.geo_x = geo.x;
    f.geo_y = geo.y;
    if (chance(0.4)) {
        f.height_m = uniform(0.5, 60);
    }
    if (chance(0.4)) {
        f.dbh_cm = uniform(1, 200);
    }
    f.validation = static_cast<Validation>(uniform_int(0, 3));
    if (f.validation == Validation::Confirmed || f.validation == Validation::SpeciesMismatch) {
        f.matched_record_id = "R" + std::to_string(uniform_int(1, 500));
    }
    return f;
}

FactTreeMetric RandomOps::broken_fact(const Warehouse &wh) {
    FactTreeMetric f = random_fact(wh);
    switch (uniform_int(0, 5)) {
    case 0: f.image_key = ImageKey{static_cast<std::int64_t>(wh.images().size()) + uniform_int(1, 50)}; break;
    case 1: f.species_key = SpeciesKey{99}; break;
    case 2: f.date_key = DateKey(f.date_key.value() == 20000101 ? 20000102 : 20000101); break;
    case 3: f.bbox.cx = 1.5; break;
    case 4: f.confidence = 1.25; break;
    default:
        f.validation = Validation::Confirmed;
        f.matched_record_id.reset();
        break;
    }
    return f;
}

SurveyRecord RandomOps::random_record(const Warehouse &wh, const std::string &id) {
    SurveyRecord r;
    r.record_id = id;
    r.geo_x = uniform(-1e5, 1e5);
    r.geo_y = uniform(-1e5, 1e5);
    r.species_code = wh.species()[static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(wh.species().size()) - 1))].code;
    if (chance(0.5)) {
        r.dbh_cm = uniform(1, 200);
    }
    if (chance(0.5)) {
        r.height_m = uniform(0.5, 60);
    }
    r.surveyed_date_key = random_date();
    return r;
}

namespace {

struct Snapshot {
    std::vector<DimDate> dates;
    std::vector<DimImage> images;
    std::vector<DimSpecies> species;
    std::vector<FactTreeMetric> facts;
    KeyCounters counters;
    friend bool operator==(const Snapshot &, const Snapshot &) = default;
};

Snapshot snapshot(const Warehouse &wh) { return {wh.dates(), wh.images(), wh.species(), wh.facts(), wh.counters()}; }

} // namespace

int RandomOps::run(Warehouse &wh, int steps) {
    static const char *const codes[] = {"PSME", "THPL", "ABGR", "TSHE", "PIAB", "X-1"};
    int rejected = 0;
    for (int step = 0; step < steps; ++step) {
        const auto before = snapshot(wh);
        const auto expect_rejected = [&](auto &&op, ErrorKind kind) {
            try {
                op();
            } catch (const Error &e) {
                if (e.kind() != kind) {
                    throw std::logic_error(std::string("unexpected error kind ") + std::string(to_string(e.kind())) +
                                           ": " + e.what());
                }
                if (!(snapshot(wh) == before)) {
                    throw std::logic_error("rejected operation changed the warehouse");
                }
                ++rejected;
                return;
            }
            throw std::logic_error("operation expected to fail succeeded");
        };

        const double dice = uniform(0, 1);
        if (dice < 0.15 || wh.species().empty()) {
            wh.upsert_species(codes[uniform_int(0, 5)], "Sci " + std::to_string(step), "Common, \"name\"",
                              static_cast<ConservationStatus>(uniform_int(0, 5)));
        } else if (dice < 0.22) {
            if (chance(0.2)) {
                expect_rejected([&] { wh.ensure_date(DateKey(20241301)); }, ErrorKind::InvalidDate);
            } else {
                wh.ensure_date(random_date());
            }
        } else if (dice < 0.42 || wh.images().empty()) {
            if (!wh.images().empty() && chance(0.25)) {
                const auto existing = wh.images()[static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(wh.images().size()) - 1))];
                const auto again = wh.insert_image(existing);
                if (again.created || again.key != existing.image_key) {
                    throw std::logic_error("re-inserting an image was not idempotent");
                }
            } else if (chance(0.1)) {
                auto img = random_image(random_date());
                wh.ensure_date(img.capture_date_key);
                const auto mid = snapshot(wh);
                img.width_px = 0;
                try {
                    wh.insert_image(img);
                    throw std::logic_error("zero-width image accepted");
                } catch (const Error &e) {
                    if (e.kind() != ErrorKind::InvalidMetadata || !(snapshot(wh) == mid)) {
                        throw std::logic_error("zero-width image not rejected cleanly");
                    }
                    ++rejected;
                }
            } else {
                const auto img = random_image(random_date());
                wh.ensure_date(img.capture_date_key);
                wh.insert_image(img);
            }
        } else if (dice < 0.80) {
            std::vector<FactTreeMetric> batch;
            const auto n = uniform_int(1, 6);
            for (std::int64_t i = 0; i < n; ++i) {
                batch.push_back(random_fact(wh));
            }
            if (chance(0.2)) {
                batch[static_cast<std::size_t>(uniform_int(0, n - 1))] = broken_fact(wh);
                expect_rejected([&] { wh.append_facts(batch); }, ErrorKind::Integrity);
            } else {
                const auto ids = wh.append_facts(batch);
                if (static_cast<std::int64_t>(ids.size()) != n || ids.front().value != before.counters.next_fact) {
                    throw std::logic_error("fact ids not assigned consecutively");
                }
            }
        } else if (dice < 0.93) {
            if (wh.facts().empty()) {
                continue;
            }
            std::map<FactId, ValidationUpdate> updates;
            const auto n = uniform_int(1, 4);
            for (std::int64_t i = 0; i < n; ++i) {
                const auto &f = wh.facts()[static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(wh.facts().size()) - 1))];
                ValidationUpdate u;
                u.validation = static_cast<Validation>(uniform_int(0, 3));
                if (u.validation == Validation::Confirmed || u.validation == Validation::SpeciesMismatch) {
                    u.matched_record_id = "S" + std::to_string(uniform_int(1, 99));
                }
                if (chance(0.5)) {
                    u.height_m = uniform(0.5, 60);
                }
                updates[f.fact_id] = u;
            }
            if (chance(0.15)) {
                updates[FactId{before.counters.next_fact + 100}] = ValidationUpdate{};
                expect_rejected([&] { wh.rewrite_validation(updates); }, ErrorKind::UnknownId);
            } else {
                wh.rewrite_validation(updates);
            }
        } else {
            std::vector<SurveyRecord> records;
            const auto n = uniform_int(0, 5);
            for (std::int64_t i = 0; i < n; ++i) {
                records.push_back(random_record(wh, "rec-" + std::to_string(i)));
            }
            wh.store_survey("survey-" + std::to_string(++surveys_), records);
        }
    }
    return rejected;
}

} // namespace canopydw::testing
