#include "canopydw/storage.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <utility>

#include "canopydw/csv.hpp"
#include "canopydw/error.hpp"
#include "rows.hpp"

namespace fs = std::filesystem;

namespace canopydw {

namespace {

constexpr std::string_view kDateFile = "dim_date.tbl";
constexpr std::string_view kImageFile = "dim_image.tbl";
constexpr std::string_view kSpeciesFile = "dim_species.tbl";
constexpr std::string_view kFactFile = "fact_tree_metrics.tbl";
constexpr std::string_view kCommitFile = "COMMIT";
constexpr std::string_view kLockFile = "LOCK";
constexpr std::string_view kSurveyDir = "surveys";

[[noreturn]] void throw_io(const std::string &what, const fs::path &path, int err = errno) {
    throw Error(ErrorKind::Io, what + " " + path.string() + ": " + std::strerror(err));
}

std::string read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw_io("cannot read", path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void fsync_dir(const fs::path &dir) {
    const int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
    if (fd >= 0) {
        ::fsync(fd);
        ::close(fd);
    }
}

void write_all(int fd, std::string_view data, const fs::path &path) {
    while (!data.empty()) {
        const ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw_io("cannot write", path);
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

/// Replaces `path` with `content` through a temporary file and rename.
void replace_file(const fs::path &path, std::string_view content, bool durable) {
    fs::path tmp = path;
    tmp += ".tmp";
    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) {
        throw_io("cannot create", tmp);
    }
    try {
        write_all(fd, content, tmp);
        if (durable && ::fsync(fd) != 0) {
            throw_io("cannot sync", tmp);
        }
    } catch (...) {
        ::close(fd);
        ::unlink(tmp.c_str());
        throw;
    }
    ::close(fd);
    if (::rename(tmp.c_str(), path.c_str()) != 0) {
        const int err = errno;
        ::unlink(tmp.c_str());
        throw_io("cannot rename onto", path, err);
    }
    if (durable) {
        fsync_dir(path.parent_path());
    }
}

template <class Row>
std::string render_table(std::string_view header, const std::vector<Row> &rows) {
    std::string out(header);
    out.push_back('\n');
    for (const auto &row : rows) {
        out += rows::render(row);
        out.push_back('\n');
    }
    return out;
}

struct LoadedTable {
    std::vector<csv::Record> records; ///< data records, header excluded
    std::size_t header_end = 0;
};

[[noreturn]] void corrupt(const fs::path &path, std::size_t line, const std::string &what) {
    throw Error(ErrorKind::CorruptTable, path.filename().string() + ":" + std::to_string(line) + ": " + what,
                line);
}

LoadedTable read_table(const fs::path &path, std::string_view header) {
    const std::string text = read_file(path);
    std::vector<csv::Record> records;
    try {
        records = csv::parse(text);
    } catch (const Error &e) {
        corrupt(path, e.line(), e.what());
    }
    if (records.empty() || !records.front().terminated || csv::join(records.front().fields) != header) {
        corrupt(path, 1, "header does not match expected columns");
    }
    LoadedTable out;
    out.header_end = records.front().end_offset;
    out.records.assign(std::make_move_iterator(records.begin() + 1), std::make_move_iterator(records.end()));
    return out;
}

template <class Row, class Parse>
std::vector<Row> load_dimension(const fs::path &path, std::string_view header, Parse parse,
                                std::int64_t &bytes) {
    auto table = read_table(path, header);
    std::vector<Row> out;
    out.reserve(table.records.size());
    std::size_t end = table.header_end;
    for (const auto &rec : table.records) {
        if (!rec.terminated) {
            corrupt(path, rec.line, "truncated row");
        }
        try {
            out.push_back(parse(rec.fields));
        } catch (const Error &e) {
            corrupt(path, rec.line, e.what());
        }
        end = rec.end_offset;
    }
    bytes = static_cast<std::int64_t>(end - table.header_end);
    return out;
}

std::string describe(const std::vector<std::string> &problems) {
    std::string out;
    for (const auto &p : problems) {
        if (!out.empty()) {
            out += "; ";
        }
        out += p;
    }
    return out;
}

bool valid_survey_id(std::string_view id) {
    if (id.empty() || id.front() == '.') {
        return false;
    }
    return std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    });
}

} // namespace

Warehouse::Warehouse(fs::path root, Options options) : root_(std::move(root)), options_(options) {}

Warehouse::Warehouse(Warehouse &&other) noexcept
    : root_(std::move(other.root_)),
      options_(other.options_),
      lock_fd_(std::exchange(other.lock_fd_, -1)),
      lock_depth_(std::exchange(other.lock_depth_, 0)),
      dates_(std::move(other.dates_)),
      images_(std::move(other.images_)),
      species_(std::move(other.species_)),
      facts_(std::move(other.facts_)),
      index_(std::move(other.index_)),
      species_by_code_(std::move(other.species_by_code_)),
      image_by_identity_(std::move(other.image_by_identity_)),
      date_rows_(std::move(other.date_rows_)),
      committed_fact_bytes_(other.committed_fact_bytes_),
      dim_bytes_{other.dim_bytes_[0], other.dim_bytes_[1], other.dim_bytes_[2]},
      fingerprint_(std::move(other.fingerprint_)) {}

Warehouse &Warehouse::operator=(Warehouse &&other) noexcept {
    if (this != &other) {
        if (lock_fd_ >= 0) {
            ::close(lock_fd_);
        }
        root_ = std::move(other.root_);
        options_ = other.options_;
        lock_fd_ = std::exchange(other.lock_fd_, -1);
        lock_depth_ = std::exchange(other.lock_depth_, 0);
        dates_ = std::move(other.dates_);
        images_ = std::move(other.images_);
        species_ = std::move(other.species_);
        facts_ = std::move(other.facts_);
        index_ = std::move(other.index_);
        species_by_code_ = std::move(other.species_by_code_);
        image_by_identity_ = std::move(other.image_by_identity_);
        date_rows_ = std::move(other.date_rows_);
        committed_fact_bytes_ = other.committed_fact_bytes_;
        std::copy(std::begin(other.dim_bytes_), std::end(other.dim_bytes_), std::begin(dim_bytes_));
        fingerprint_ = std::move(other.fingerprint_);
    }
    return *this;
}

Warehouse::~Warehouse() {
    if (lock_fd_ >= 0) {
        ::close(lock_fd_);
    }
}

fs::path Warehouse::table_path(std::string_view name) const {
    return root_ / fs::path(name);
}

Warehouse Warehouse::open(const fs::path &root, Options options) {
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec || !fs::is_directory(root)) {
        throw Error(ErrorKind::Io, "cannot create warehouse directory " + root.string());
    }
    Warehouse wh(root, options);
    const fs::path lock = wh.table_path(kLockFile);
    wh.lock_fd_ = ::open(lock.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (wh.lock_fd_ < 0) {
        throw_io("cannot open", lock);
    }

    const std::pair<std::string_view, std::string_view> tables[] = {
        {kDateFile, kDateHeader}, {kImageFile, kImageHeader}, {kSpeciesFile, kSpeciesHeader}, {kFactFile, kFactHeader}};
    const bool missing = std::any_of(std::begin(tables), std::end(tables),
                                     [&](const auto &t) { return !fs::exists(wh.table_path(t.first)); });
    if (missing) {
        WriteGuard guard(wh);
        for (const auto &[file, header] : tables) {
            const auto path = wh.table_path(file);
            if (!fs::exists(path)) {
                replace_file(path, std::string(header) + "\n", options.durable);
            }
        }
        if (!fs::exists(wh.table_path(kCommitFile))) {
            wh.write_commit(0);
        }
        wh.load();
    } else {
        while (::flock(wh.lock_fd_, LOCK_SH) != 0) {
            if (errno != EINTR) {
                throw_io("cannot lock", lock);
            }
        }
        try {
            wh.load();
        } catch (...) {
            ::flock(wh.lock_fd_, LOCK_UN);
            throw;
        }
        ::flock(wh.lock_fd_, LOCK_UN);
    }
    return wh;
}

void Warehouse::load() {
    dates_ = load_dimension<DimDate>(table_path(kDateFile), kDateHeader, rows::parse_date, dim_bytes_[0]);
    images_ = load_dimension<DimImage>(table_path(kImageFile), kImageHeader, rows::parse_image, dim_bytes_[1]);
    species_ = load_dimension<DimSpecies>(table_path(kSpeciesFile), kSpeciesHeader, rows::parse_species,
                                          dim_bytes_[2]);

    // Dimension row checks.
    for (std::size_t i = 0; i < dates_.size(); ++i) {
        const auto &row = dates_[i];
        if (derive_date(row.date_key) != row) {
            corrupt(table_path(kDateFile), i + 2, "derived fields disagree with date_key");
        }
    }
    for (std::size_t i = 0; i < images_.size(); ++i) {
        if (images_[i].image_key.value != static_cast<std::int64_t>(i) + 1) {
            corrupt(table_path(kImageFile), i + 2, "image_key out of sequence");
        }
        if (auto problems = check_image(images_[i]); !problems.empty()) {
            corrupt(table_path(kImageFile), i + 2, describe(problems));
        }
    }
    for (std::size_t i = 0; i < species_.size(); ++i) {
        if (species_[i].species_key.value != static_cast<std::int64_t>(i) + 1) {
            corrupt(table_path(kSpeciesFile), i + 2, "species_key out of sequence");
        }
        if (species_[i].code.empty()) {
            corrupt(table_path(kSpeciesFile), i + 2, "empty species code");
        }
    }

    // Facts: rows past the COMMIT marker belong to an interrupted batch.
    const fs::path fact_path = table_path(kFactFile);
    const fs::path commit_path = table_path(kCommitFile);
    std::int64_t committed = 0;
    if (fs::exists(commit_path)) {
        std::string text = read_file(commit_path);
        while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) {
            text.pop_back();
        }
        const auto value = csv::parse_int(text);
        if (!value || *value < 0) {
            corrupt(commit_path, 1, "COMMIT marker is not a fact id");
        }
        committed = *value;
    }
    auto table = read_table(fact_path, kFactHeader);
    facts_.clear();
    facts_.reserve(static_cast<std::size_t>(committed));
    std::size_t end = table.header_end;
    for (const auto &rec : table.records) {
        if (static_cast<std::int64_t>(facts_.size()) == committed) {
            break;
        }
        if (!rec.terminated) {
            corrupt(fact_path, rec.line, "truncated row inside committed range");
        }
        FactTreeMetric fact;
        try {
            fact = rows::parse_fact(rec.fields);
        } catch (const Error &e) {
            corrupt(fact_path, rec.line, e.what());
        }
        if (fact.fact_id.value != static_cast<std::int64_t>(facts_.size()) + 1) {
            corrupt(fact_path, rec.line, "fact_id out of sequence");
        }
        facts_.push_back(std::move(fact));
        end = rec.end_offset;
    }
    if (static_cast<std::int64_t>(facts_.size()) != committed) {
        corrupt(fact_path, table.records.empty() ? 1 : table.records.back().line,
                "COMMIT marker names fact " + std::to_string(committed) + " but only " +
                    std::to_string(facts_.size()) + " rows are present");
    }
    committed_fact_bytes_ = static_cast<std::int64_t>(end);

    rebuild_indexes();

    for (std::size_t i = 0; i < facts_.size(); ++i) {
        const auto &fact = facts_[i];
        auto problems = check_fact_values(fact);
        for (const auto &v : validate_fact(fact, index_)) {
            problems.push_back(v.message);
        }
        if (!problems.empty()) {
            throw Error(ErrorKind::Integrity,
                        "fact " + std::to_string(fact.fact_id.value) + ": " + describe(problems), i + 2);
        }
    }
    fingerprint_ = fingerprint();
}

void Warehouse::rebuild_indexes() {
    index_ = {};
    species_by_code_.clear();
    image_by_identity_.clear();
    date_rows_.clear();
    for (std::size_t i = 0; i < dates_.size(); ++i) {
        if (!date_rows_.emplace(dates_[i].date_key, i).second) {
            corrupt(table_path(kDateFile), i + 2, "duplicate date_key");
        }
        index_.dates.insert(dates_[i].date_key);
    }
    for (std::size_t i = 0; i < species_.size(); ++i) {
        if (!species_by_code_.emplace(species_[i].code, i).second) {
            corrupt(table_path(kSpeciesFile), i + 2, "duplicate species code " + species_[i].code);
        }
        index_.species.insert(species_[i].species_key);
    }
    for (std::size_t i = 0; i < images_.size(); ++i) {
        const auto &img = images_[i];
        if (!image_by_identity_.emplace(img.file_name + '\n' + img.checksum, i).second) {
            corrupt(table_path(kImageFile), i + 2, "duplicate (file_name, checksum)");
        }
        if (!index_.dates.contains(img.capture_date_key)) {
            throw Error(ErrorKind::Integrity,
                        "image " + std::to_string(img.image_key.value) + ": capture_date_key unresolved", i + 2);
        }
        index_.image_capture_dates.emplace(img.image_key, img.capture_date_key);
    }
}

Warehouse::Fingerprint Warehouse::fingerprint() const {
    Fingerprint fp;
    for (auto name : {kDateFile, kImageFile, kSpeciesFile, kFactFile, kCommitFile}) {
        struct stat st {};
        if (::stat(table_path(name).c_str(), &st) != 0) {
            fp.values.insert(fp.values.end(), {-1, -1, -1});
            continue;
        }
        fp.values.push_back(static_cast<std::int64_t>(st.st_size));
        fp.values.push_back(static_cast<std::int64_t>(st.st_mtim.tv_sec) * 1'000'000'000 + st.st_mtim.tv_nsec);
        fp.values.push_back(static_cast<std::int64_t>(st.st_ino));
    }
    return fp;
}

bool Warehouse::refresh() {
    if (fingerprint() == fingerprint_) {
        return false;
    }
    load();
    return true;
}

bool Warehouse::refresh_shared() {
    if (lock_depth_ > 0) {
        return refresh();
    }
    if (fingerprint() == fingerprint_) {
        return false;
    }
    if (::flock(lock_fd_, LOCK_SH | LOCK_NB) != 0) {
        return false;
    }
    try {
        const bool reloaded = refresh();
        ::flock(lock_fd_, LOCK_UN);
        return reloaded;
    } catch (...) {
        ::flock(lock_fd_, LOCK_UN);
        throw;
    }
}

void Warehouse::acquire_lock() {
    if (lock_depth_ == 0) {
        while (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
            if (errno == EINTR) {
                continue;
            }
            if (errno == EWOULDBLOCK) {
                throw Error(ErrorKind::Locked, "warehouse " + root_.string() + " is locked by another writer");
            }
            throw_io("cannot lock", table_path(kLockFile));
        }
        try {
            if (!fingerprint_.values.empty()) {
                refresh();
            }
        } catch (...) {
            ::flock(lock_fd_, LOCK_UN);
            throw;
        }
    }
    ++lock_depth_;
}

void Warehouse::release_lock() noexcept {
    if (--lock_depth_ == 0) {
        ::flock(lock_fd_, LOCK_UN);
    }
}

Warehouse::WriteGuard::WriteGuard(Warehouse &wh) : wh_(wh) {
    wh_.acquire_lock();
}

Warehouse::WriteGuard::~WriteGuard() {
    wh_.release_lock();
}

KeyCounters Warehouse::counters() const noexcept {
    return {static_cast<std::int64_t>(images_.size()) + 1, static_cast<std::int64_t>(species_.size()) + 1,
            static_cast<std::int64_t>(facts_.size()) + 1};
}

const DimImage *Warehouse::find_image(ImageKey key) const noexcept {
    if (key.value < 1 || key.value > static_cast<std::int64_t>(images_.size())) {
        return nullptr;
    }
    return &images_[static_cast<std::size_t>(key.value - 1)];
}

const DimImage *Warehouse::find_image(std::string_view file_name, std::string_view checksum) const noexcept {
    std::string identity(file_name);
    identity += '\n';
    identity += checksum;
    const auto it = image_by_identity_.find(identity);
    return it == image_by_identity_.end() ? nullptr : &images_[it->second];
}

const DimSpecies *Warehouse::find_species(SpeciesKey key) const noexcept {
    if (key.value < 1 || key.value > static_cast<std::int64_t>(species_.size())) {
        return nullptr;
    }
    return &species_[static_cast<std::size_t>(key.value - 1)];
}

const DimSpecies *Warehouse::find_species(std::string_view code) const noexcept {
    const auto it = species_by_code_.find(std::string(code));
    return it == species_by_code_.end() ? nullptr : &species_[it->second];
}

const FactTreeMetric *Warehouse::find_fact(FactId id) const noexcept {
    if (id.value < 1 || id.value > static_cast<std::int64_t>(facts_.size())) {
        return nullptr;
    }
    return &facts_[static_cast<std::size_t>(id.value - 1)];
}

void Warehouse::write_dates() {
    const auto text = render_table(kDateHeader, dates_);
    replace_file(table_path(kDateFile), text, options_.durable);
    dim_bytes_[0] = static_cast<std::int64_t>(text.size() - kDateHeader.size() - 1);
}

void Warehouse::write_images() {
    const auto text = render_table(kImageHeader, images_);
    replace_file(table_path(kImageFile), text, options_.durable);
    dim_bytes_[1] = static_cast<std::int64_t>(text.size() - kImageHeader.size() - 1);
}

void Warehouse::write_species() {
    const auto text = render_table(kSpeciesHeader, species_);
    replace_file(table_path(kSpeciesFile), text, options_.durable);
    dim_bytes_[2] = static_cast<std::int64_t>(text.size() - kSpeciesHeader.size() - 1);
}

void Warehouse::write_commit(std::int64_t last_fact_id) {
    replace_file(table_path(kCommitFile), std::to_string(last_fact_id) + "\n", options_.durable);
}

Upserted<SpeciesKey> Warehouse::upsert_species(std::string_view code, std::string_view scientific_name,
                                               std::string_view common_name, ConservationStatus status) {
    if (code.empty()) {
        throw Error(ErrorKind::InvalidMetadata, "species code must not be empty");
    }
    WriteGuard guard(*this);
    if (const auto *existing = find_species(code)) {
        return {existing->species_key, false};
    }
    DimSpecies row{SpeciesKey{static_cast<std::int64_t>(species_.size()) + 1}, std::string(code),
                   std::string(scientific_name), std::string(common_name), status};
    species_.push_back(row);
    try {
        write_species();
    } catch (...) {
        species_.pop_back();
        throw;
    }
    species_by_code_.emplace(row.code, species_.size() - 1);
    index_.species.insert(row.species_key);
    fingerprint_ = fingerprint();
    return {row.species_key, true};
}

DateKey Warehouse::ensure_date(DateKey key) {
    DimDate row = derive_date(key);
    WriteGuard guard(*this);
    if (date_rows_.contains(key)) {
        return key;
    }
    dates_.push_back(row);
    try {
        write_dates();
    } catch (...) {
        dates_.pop_back();
        throw;
    }
    date_rows_.emplace(key, dates_.size() - 1);
    index_.dates.insert(key);
    fingerprint_ = fingerprint();
    return key;
}

Upserted<ImageKey> Warehouse::insert_image(DimImage image) {
    auto problems = check_image(image);
    if (!problems.empty()) {
        throw Error(ErrorKind::InvalidMetadata, "image " + image.file_name + ": " + describe(problems));
    }
    std::transform(image.checksum.begin(), image.checksum.end(), image.checksum.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    WriteGuard guard(*this);
    if (const auto *existing = find_image(image.file_name, image.checksum)) {
        return {existing->image_key, false};
    }
    if (!index_.dates.contains(image.capture_date_key)) {
        throw Error(ErrorKind::Integrity,
                    "image " + image.file_name + ": capture date " +
                        std::to_string(image.capture_date_key.value()) + " not materialized");
    }
    image.image_key = ImageKey{static_cast<std::int64_t>(images_.size()) + 1};
    images_.push_back(image);
    try {
        write_images();
    } catch (...) {
        images_.pop_back();
        throw;
    }
    image_by_identity_.emplace(image.file_name + '\n' + image.checksum, images_.size() - 1);
    index_.image_capture_dates.emplace(image.image_key, image.capture_date_key);
    fingerprint_ = fingerprint();
    return {image.image_key, true};
}

std::vector<FactId> Warehouse::append_facts(std::vector<FactTreeMetric> facts) {
    WriteGuard guard(*this);
    std::vector<FactId> ids;
    if (facts.empty()) {
        return ids;
    }
    ids.reserve(facts.size());
    std::string batch;
    std::int64_t next = static_cast<std::int64_t>(facts_.size()) + 1;
    for (std::size_t i = 0; i < facts.size(); ++i) {
        auto &fact = facts[i];
        fact.fact_id = FactId{next++};
        auto problems = check_fact_values(fact);
        for (const auto &v : validate_fact(fact, index_)) {
            problems.push_back(v.message);
        }
        if (!problems.empty()) {
            throw Error(ErrorKind::Integrity,
                        "batch fact " + std::to_string(i + 1) + ": " + describe(problems));
        }
        batch += rows::render(fact);
        batch.push_back('\n');
        ids.push_back(fact.fact_id);
    }

    const fs::path path = table_path(kFactFile);
    const int fd = ::open(path.c_str(), O_WRONLY | O_CLOEXEC);
    if (fd < 0) {
        throw_io("cannot open", path);
    }
    try {
        // Drop any tail left by an interrupted batch before appending.
        if (::ftruncate(fd, committed_fact_bytes_) != 0) {
            throw_io("cannot truncate", path);
        }
        if (::lseek(fd, committed_fact_bytes_, SEEK_SET) < 0) {
            throw_io("cannot seek", path);
        }
        write_all(fd, batch, path);
        if (options_.durable && ::fsync(fd) != 0) {
            throw_io("cannot sync", path);
        }
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
    write_commit(next - 1);

    committed_fact_bytes_ += static_cast<std::int64_t>(batch.size());
    facts_.insert(facts_.end(), std::make_move_iterator(facts.begin()), std::make_move_iterator(facts.end()));
    fingerprint_ = fingerprint();
    return ids;
}

std::size_t Warehouse::rewrite_validation(const std::map<FactId, ValidationUpdate> &updates) {
    WriteGuard guard(*this);
    if (updates.empty()) {
        return 0;
    }
    for (const auto &[id, update] : updates) {
        if (!find_fact(id)) {
            throw Error(ErrorKind::UnknownId, "unknown fact_id " + std::to_string(id.value));
        }
    }
    auto next = facts_;
    for (const auto &[id, update] : updates) {
        auto &fact = next[static_cast<std::size_t>(id.value - 1)];
        fact.validation = update.validation;
        fact.matched_record_id = update.matched_record_id;
        fact.height_m = update.height_m;
        fact.dbh_cm = update.dbh_cm;
        if (auto problems = check_fact_values(fact); !problems.empty()) {
            throw Error(ErrorKind::Integrity, "fact " + std::to_string(id.value) + ": " + describe(problems));
        }
    }
    const auto text = render_table(kFactHeader, next);
    replace_file(table_path(kFactFile), text, options_.durable);
    write_commit(static_cast<std::int64_t>(next.size()));
    facts_ = std::move(next);
    committed_fact_bytes_ = static_cast<std::int64_t>(text.size());
    fingerprint_ = fingerprint();
    return updates.size();
}

WarehouseStats Warehouse::stats() const {
    WarehouseStats s;
    s.dates = {"dim_date", static_cast<std::int64_t>(dates_.size()), dim_bytes_[0]};
    s.images = {"dim_image", static_cast<std::int64_t>(images_.size()), dim_bytes_[1]};
    s.species = {"dim_species", static_cast<std::int64_t>(species_.size()), dim_bytes_[2]};
    s.facts = {"fact_tree_metrics", static_cast<std::int64_t>(facts_.size()),
               committed_fact_bytes_ - static_cast<std::int64_t>(kFactHeader.size() + 1)};
    for (const auto &img : images_) {
        s.image_payload_bytes += img.size_bytes;
    }
    return s;
}

void Warehouse::store_survey(std::string_view survey_id, const std::vector<SurveyRecord> &records) {
    if (!valid_survey_id(survey_id)) {
        throw Error(ErrorKind::InvalidMetadata, "invalid survey id '" + std::string(survey_id) + "'");
    }
    WriteGuard guard(*this);
    const fs::path dir = root_ / fs::path(kSurveyDir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
    }
    const fs::path path = dir / (std::string(survey_id) + ".tbl");
    const auto text = render_table(kSurveyHeader, records);
    if (fs::exists(path)) {
        if (read_file(path) == text) {
            return;
        }
        throw Error(ErrorKind::Duplicate, "survey '" + std::string(survey_id) + "' already exists with different records");
    }
    replace_file(path, text, options_.durable);
}

std::vector<std::string> Warehouse::survey_ids() const {
    std::vector<std::string> ids;
    const fs::path dir = root_ / fs::path(kSurveyDir);
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) {
        return ids;
    }
    for (const auto &entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".tbl") {
            ids.push_back(entry.path().stem().string());
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<SurveyRecord> Warehouse::load_survey(std::string_view survey_id) const {
    const fs::path path = root_ / fs::path(kSurveyDir) / (std::string(survey_id) + ".tbl");
    if (!valid_survey_id(survey_id) || !fs::exists(path)) {
        throw Error(ErrorKind::UnknownId, "unknown survey '" + std::string(survey_id) + "'");
    }
    auto table = read_table(path, kSurveyHeader);
    std::vector<SurveyRecord> out;
    for (const auto &rec : table.records) {
        if (!rec.terminated) {
            corrupt(path, rec.line, "truncated row");
        }
        try {
            out.push_back(rows::parse_survey(rec.fields));
        } catch (const Error &e) {
            corrupt(path, rec.line, e.what());
        }
    }
    return out;
}

} // namespace canopydw
