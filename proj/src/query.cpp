#include "canopydw/query.hpp"

#include <cstdio>
#include <map>

#include "canopydw/csv.hpp"
#include "canopydw/error.hpp"

namespace canopydw {

namespace {

/// Sortable group value: `rank` orders first, `text` breaks ties and is
/// what gets printed.
struct GroupValue {
    std::int64_t rank = 0;
    std::string text;

    friend auto operator<=>(const GroupValue &, const GroupValue &) = default;
};

struct Accumulator {
    std::int64_t count = 0;
    double confidence_sum = 0;
    std::int64_t confidence_n = 0;
    double height_sum = 0;
    std::int64_t height_n = 0;
    double dbh_sum = 0;
    std::int64_t dbh_n = 0;
};

GroupValue group_value(GroupKey key, const FactTreeMetric &fact, const DimImage &image, const DimSpecies &species) {
    const DateKey date = fact.date_key;
    char buf[32];
    switch (key) {
    case GroupKey::Year:
        return {date.year(), std::to_string(date.year())};
    case GroupKey::Quarter: {
        const int q = (date.month() + 2) / 3;
        std::snprintf(buf, sizeof buf, "%04d-Q%d", date.year(), q);
        return {date.year() * 10 + q, buf};
    }
    case GroupKey::Month:
        std::snprintf(buf, sizeof buf, "%04d-%02d", date.year(), date.month());
        return {date.year() * 100 + date.month(), buf};
    case GroupKey::Date:
        return {date.value(), date.to_iso()};
    case GroupKey::Species:
        return {0, species.code};
    case GroupKey::Platform:
        return {static_cast<std::int64_t>(image.platform), std::string(to_string(image.platform))};
    case GroupKey::ResolutionClass: {
        const auto cls = resolution_class(image.width_px, image.height_px);
        return {static_cast<std::int64_t>(cls), std::string(to_string(cls))};
    }
    case GroupKey::ConservationStatus:
        return {static_cast<std::int64_t>(species.conservation_status),
                std::string(to_string(species.conservation_status))};
    }
    return {};
}

std::string mean_cell(double sum, std::int64_t n) {
    return n ? csv::format_real(sum / static_cast<double>(n)) : std::string();
}

} // namespace

std::string_view to_string(GroupKey key) noexcept {
    switch (key) {
    case GroupKey::Year: return "year";
    case GroupKey::Quarter: return "quarter";
    case GroupKey::Month: return "month";
    case GroupKey::Date: return "date";
    case GroupKey::Species: return "species";
    case GroupKey::Platform: return "platform";
    case GroupKey::ResolutionClass: return "resolution_class";
    case GroupKey::ConservationStatus: return "conservation_status";
    }
    return "";
}

std::string_view to_string(Measure measure) noexcept {
    switch (measure) {
    case Measure::TreeCount: return "tree_count";
    case Measure::MeanConfidence: return "mean_confidence";
    case Measure::MeanHeightM: return "mean_height_m";
    case Measure::MeanDbhCm: return "mean_dbh_cm";
    }
    return "";
}

std::string_view to_string(ResolutionClass cls) noexcept {
    switch (cls) {
    case ResolutionClass::Low: return "low";
    case ResolutionClass::Medium: return "medium";
    case ResolutionClass::High: return "high";
    }
    return "";
}

std::optional<GroupKey> parse_group_key(std::string_view text) noexcept {
    for (auto k : {GroupKey::Year, GroupKey::Quarter, GroupKey::Month, GroupKey::Date, GroupKey::Species,
                   GroupKey::Platform, GroupKey::ResolutionClass, GroupKey::ConservationStatus}) {
        if (text == to_string(k)) {
            return k;
        }
    }
    return std::nullopt;
}

std::optional<Measure> parse_measure(std::string_view text) noexcept {
    for (auto m : {Measure::TreeCount, Measure::MeanConfidence, Measure::MeanHeightM, Measure::MeanDbhCm}) {
        if (text == to_string(m)) {
            return m;
        }
    }
    return std::nullopt;
}

std::optional<Granularity> parse_granularity(std::string_view text) noexcept {
    if (text == "year") {
        return Granularity::Year;
    }
    if (text == "quarter") {
        return Granularity::Quarter;
    }
    if (text == "month") {
        return Granularity::Month;
    }
    return std::nullopt;
}

ResolutionClass resolution_class(std::int64_t width_px, std::int64_t height_px) noexcept {
    const std::int64_t pixels = width_px * height_px;
    if (pixels < 1'000'000) {
        return ResolutionClass::Low;
    }
    return pixels <= 12'000'000 ? ResolutionClass::Medium : ResolutionClass::High;
}

void QuerySpec::validate() const {
    if (group_by.empty()) {
        throw Error(ErrorKind::InvalidSpec, "group_by must name at least one key");
    }
    if (measures.empty()) {
        throw Error(ErrorKind::InvalidSpec, "at least one measure is required");
    }
    for (std::size_t i = 0; i < group_by.size(); ++i) {
        for (std::size_t j = i + 1; j < group_by.size(); ++j) {
            if (group_by[i] == group_by[j]) {
                throw Error(ErrorKind::InvalidSpec, "group_by repeats '" + std::string(to_string(group_by[i])) + "'");
            }
        }
    }
    if (date_from && date_to && *date_to < *date_from) {
        throw Error(ErrorKind::InvalidSpec, "date_from is after date_to");
    }
    for (const auto &d : {date_from, date_to}) {
        if (d && !d->is_valid()) {
            throw Error(ErrorKind::InvalidSpec, "invalid date bound " + std::to_string(d->value()));
        }
    }
}

ResultTable run_query(const Warehouse &wh, const QuerySpec &spec) {
    spec.validate();

    std::map<std::vector<GroupValue>, Accumulator> groups;
    std::vector<GroupValue> key(spec.group_by.size());
    for (const auto &fact : wh.facts()) {
        if (spec.date_from && fact.date_key < *spec.date_from) {
            continue;
        }
        if (spec.date_to && *spec.date_to < fact.date_key) {
            continue;
        }
        if (spec.validation_states && !spec.validation_states->contains(fact.validation)) {
            continue;
        }
        const DimImage *image = wh.find_image(fact.image_key);
        const DimSpecies *species = wh.find_species(fact.species_key);
        if (!image || !species) {
            throw Error(ErrorKind::Integrity, "fact " + std::to_string(fact.fact_id.value) + " has a dangling key");
        }
        if (spec.species_codes && !spec.species_codes->contains(species->code)) {
            continue;
        }
        if (spec.platforms && !spec.platforms->contains(image->platform)) {
            continue;
        }
        if (spec.min_width_px && image->width_px < *spec.min_width_px) {
            continue;
        }
        if (spec.min_height_px && image->height_px < *spec.min_height_px) {
            continue;
        }

        for (std::size_t i = 0; i < spec.group_by.size(); ++i) {
            key[i] = group_value(spec.group_by[i], fact, *image, *species);
        }
        auto &acc = groups[key];
        ++acc.count;
        acc.confidence_sum += fact.confidence;
        ++acc.confidence_n;
        if (fact.height_m) {
            acc.height_sum += *fact.height_m;
            ++acc.height_n;
        }
        if (fact.dbh_cm) {
            acc.dbh_sum += *fact.dbh_cm;
            ++acc.dbh_n;
        }
    }

    ResultTable out;
    for (auto g : spec.group_by) {
        out.columns.emplace_back(to_string(g));
    }
    for (auto m : spec.measures) {
        out.columns.emplace_back(to_string(m));
    }
    out.rows.reserve(groups.size());
    for (const auto &[values, acc] : groups) {
        std::vector<std::string> row;
        row.reserve(out.columns.size());
        for (const auto &v : values) {
            row.push_back(v.text);
        }
        for (auto m : spec.measures) {
            switch (m) {
            case Measure::TreeCount: row.push_back(std::to_string(acc.count)); break;
            case Measure::MeanConfidence: row.push_back(mean_cell(acc.confidence_sum, acc.confidence_n)); break;
            case Measure::MeanHeightM: row.push_back(mean_cell(acc.height_sum, acc.height_n)); break;
            case Measure::MeanDbhCm: row.push_back(mean_cell(acc.dbh_sum, acc.dbh_n)); break;
            }
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

QuerySpec query_spec_from_params(const std::vector<std::pair<std::string, std::string>> &params) {
    const auto split = [](const std::string &value) {
        std::vector<std::string> parts;
        std::size_t start = 0;
        while (start <= value.size()) {
            auto end = value.find(',', start);
            if (end == std::string::npos) {
                end = value.size();
            }
            if (end > start) {
                parts.push_back(value.substr(start, end - start));
            }
            start = end + 1;
        }
        return parts;
    };
    const auto invalid = [](const std::string &name, const std::string &value) {
        return Error(ErrorKind::InvalidSpec, "bad value '" + value + "' for " + name);
    };
    const auto date = [&](const std::string &name, const std::string &value) {
        try {
            return DateKey::parse_iso(value);
        } catch (const Error &) {
            throw invalid(name, value);
        }
    };
    const auto positive_int = [&](const std::string &name, const std::string &value) {
        const auto v = csv::parse_int(value);
        if (!v || *v < 0) {
            throw invalid(name, value);
        }
        return *v;
    };

    QuerySpec spec;
    for (const auto &[name, value] : params) {
        if (name == "group_by") {
            for (const auto &part : split(value)) {
                const auto key = parse_group_key(part);
                if (!key) {
                    throw invalid(name, part);
                }
                spec.group_by.push_back(*key);
            }
        } else if (name == "measures") {
            for (const auto &part : split(value)) {
                const auto m = parse_measure(part);
                if (!m) {
                    throw invalid(name, part);
                }
                spec.measures.insert(*m);
            }
        } else if (name == "date_from") {
            spec.date_from = date(name, value);
        } else if (name == "date_to") {
            spec.date_to = date(name, value);
        } else if (name == "species") {
            if (!spec.species_codes) {
                spec.species_codes.emplace();
            }
            for (const auto &part : split(value)) {
                spec.species_codes->insert(part);
            }
        } else if (name == "platforms") {
            if (!spec.platforms) {
                spec.platforms.emplace();
            }
            for (const auto &part : split(value)) {
                const auto p = parse_platform(part);
                if (!p) {
                    throw invalid(name, part);
                }
                spec.platforms->insert(*p);
            }
        } else if (name == "validation") {
            if (!spec.validation_states) {
                spec.validation_states.emplace();
            }
            for (const auto &part : split(value)) {
                const auto v = parse_validation(part);
                if (!v) {
                    throw invalid(name, part);
                }
                spec.validation_states->insert(*v);
            }
        } else if (name == "min_width_px") {
            spec.min_width_px = positive_int(name, value);
        } else if (name == "min_height_px") {
            spec.min_height_px = positive_int(name, value);
        } else {
            throw Error(ErrorKind::InvalidSpec, "unknown query parameter '" + name + "'");
        }
    }
    if (spec.measures.empty()) {
        spec.measures.insert(Measure::TreeCount);
    }
    spec.validate();
    return spec;
}

ResultTable species_trend(const Warehouse &wh, std::string_view species_code, Granularity granularity) {
    if (!wh.find_species(species_code)) {
        throw Error(ErrorKind::UnknownSpecies, "unknown species code '" + std::string(species_code) + "'");
    }
    QuerySpec spec;
    spec.species_codes = std::set<std::string>{std::string(species_code)};
    switch (granularity) {
    case Granularity::Year: spec.group_by = {GroupKey::Year}; break;
    case Granularity::Quarter: spec.group_by = {GroupKey::Quarter}; break;
    case Granularity::Month: spec.group_by = {GroupKey::Month}; break;
    }
    spec.measures = {Measure::TreeCount};
    return run_query(wh, spec);
}

ResultTable image_usage_report(const Warehouse &wh) {
    std::vector<std::int64_t> facts_per_image(wh.images().size(), 0);
    for (const auto &fact : wh.facts()) {
        const auto idx = fact.image_key.value - 1;
        if (idx >= 0 && idx < static_cast<std::int64_t>(facts_per_image.size())) {
            ++facts_per_image[static_cast<std::size_t>(idx)];
        }
    }
    struct Usage {
        std::int64_t images = 0;
        std::int64_t facts = 0;
    };
    std::map<std::pair<ResolutionClass, Platform>, Usage> groups;
    for (std::size_t i = 0; i < wh.images().size(); ++i) {
        const auto &img = wh.images()[i];
        auto &u = groups[{resolution_class(img.width_px, img.height_px), img.platform}];
        ++u.images;
        u.facts += facts_per_image[i];
    }
    ResultTable out{{"resolution_class", "platform", "images", "facts"}, {}};
    for (const auto &[key, u] : groups) {
        out.rows.push_back({std::string(to_string(key.first)), std::string(to_string(key.second)),
                            std::to_string(u.images), std::to_string(u.facts)});
    }
    return out;
}

} // namespace canopydw
