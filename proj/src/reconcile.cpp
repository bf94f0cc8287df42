#include "canopydw/reconcile.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "canopydw/csv.hpp"
#include "canopydw/error.hpp"
#include "canopydw/table.hpp"

namespace canopydw {

namespace {

struct Candidate {
    double distance;
    std::size_t fact;   ///< index into facts
    std::size_t record; ///< index into records
};

/// Cells of side `radius`. An eligible pair is at most one cell apart, two
/// once floor() rounding at cell borders is allowed for.
struct Grid {
    double cell;
    std::unordered_map<std::int64_t, std::unordered_map<std::int64_t, std::vector<std::size_t>>> cells;

    static std::int64_t coord(double v, double cell) {
        return static_cast<std::int64_t>(std::floor(v / cell));
    }
};

bool grid_usable(std::span<const GeoFact> facts, std::span<const SurveyRecord> records, double radius) {
    constexpr double kLimit = 1e15;
    const auto ok = [&](double v) { return std::abs(v / radius) < kLimit; };
    return std::all_of(facts.begin(), facts.end(), [&](const auto &f) { return ok(f.geo_x) && ok(f.geo_y); }) &&
           std::all_of(records.begin(), records.end(), [&](const auto &r) { return ok(r.geo_x) && ok(r.geo_y); });
}

} // namespace

MatchResult match_detections(std::span<const GeoFact> facts, std::span<const SurveyRecord> records,
                             double radius_m) {
    if (!(radius_m > 0) || !std::isfinite(radius_m)) {
        throw Error(ErrorKind::Range, "match radius must be positive and finite");
    }
    std::unordered_set<std::int64_t> fact_ids;
    for (const auto &f : facts) {
        if (!std::isfinite(f.geo_x) || !std::isfinite(f.geo_y)) {
            throw Error(ErrorKind::MixedUnits, "fact " + std::to_string(f.fact_id.value) + " has a non-finite position");
        }
        if (!fact_ids.insert(f.fact_id.value).second) {
            throw Error(ErrorKind::Duplicate, "fact " + std::to_string(f.fact_id.value) + " given twice");
        }
    }
    std::unordered_set<std::string_view> record_ids;
    for (const auto &r : records) {
        if (!std::isfinite(r.geo_x) || !std::isfinite(r.geo_y)) {
            throw Error(ErrorKind::MixedUnits, "record '" + r.record_id + "' has a non-finite position");
        }
        if (!record_ids.insert(r.record_id).second) {
            throw Error(ErrorKind::Duplicate, "record '" + r.record_id + "' given twice");
        }
    }

    std::vector<Candidate> candidates;
    const auto consider = [&](std::size_t fi, std::size_t ri) {
        const double dx = facts[fi].geo_x - records[ri].geo_x;
        const double dy = facts[fi].geo_y - records[ri].geo_y;
        const double d = std::sqrt(dx * dx + dy * dy);
        if (d <= radius_m) {
            candidates.push_back({d, fi, ri});
        }
    };

    if (grid_usable(facts, records, radius_m)) {
        Grid grid{radius_m, {}};
        for (std::size_t ri = 0; ri < records.size(); ++ri) {
            grid.cells[Grid::coord(records[ri].geo_x, radius_m)][Grid::coord(records[ri].geo_y, radius_m)]
                .push_back(ri);
        }
        for (std::size_t fi = 0; fi < facts.size(); ++fi) {
            const auto cx = Grid::coord(facts[fi].geo_x, radius_m);
            const auto cy = Grid::coord(facts[fi].geo_y, radius_m);
            for (std::int64_t ix = cx - 2; ix <= cx + 2; ++ix) {
                const auto col = grid.cells.find(ix);
                if (col == grid.cells.end()) {
                    continue;
                }
                for (std::int64_t iy = cy - 2; iy <= cy + 2; ++iy) {
                    const auto cell = col->second.find(iy);
                    if (cell == col->second.end()) {
                        continue;
                    }
                    for (std::size_t ri : cell->second) {
                        consider(fi, ri);
                    }
                }
            }
        }
    } else {
        for (std::size_t fi = 0; fi < facts.size(); ++fi) {
            for (std::size_t ri = 0; ri < records.size(); ++ri) {
                consider(fi, ri);
            }
        }
    }

    std::sort(candidates.begin(), candidates.end(), [&](const Candidate &l, const Candidate &r) {
        if (l.distance != r.distance) {
            return l.distance < r.distance;
        }
        if (facts[l.fact].fact_id != facts[r.fact].fact_id) {
            return facts[l.fact].fact_id < facts[r.fact].fact_id;
        }
        return records[l.record].record_id < records[r.record].record_id;
    });

    MatchResult out;
    std::vector<bool> fact_bound(facts.size(), false);
    std::vector<bool> record_bound(records.size(), false);
    for (const auto &c : candidates) {
        if (fact_bound[c.fact] || record_bound[c.record]) {
            continue;
        }
        fact_bound[c.fact] = true;
        record_bound[c.record] = true;
        out.pairs.push_back({facts[c.fact].fact_id, records[c.record].record_id, c.distance});
    }
    for (std::size_t i = 0; i < facts.size(); ++i) {
        if (!fact_bound[i]) {
            out.unmatched_facts.push_back(facts[i].fact_id);
        }
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!record_bound[i]) {
            out.unmatched_records.push_back(records[i].record_id);
        }
    }
    std::sort(out.unmatched_facts.begin(), out.unmatched_facts.end());
    std::sort(out.unmatched_records.begin(), out.unmatched_records.end());
    return out;
}

ValidationMetrics compute_metrics(std::span<const GeoFact> facts, std::span<const SurveyRecord> records,
                                  const MatchResult &match) {
    std::unordered_map<std::int64_t, const GeoFact *> fact_by_id;
    for (const auto &f : facts) {
        fact_by_id.emplace(f.fact_id.value, &f);
    }
    std::unordered_map<std::string_view, const SurveyRecord *> record_by_id;
    for (const auto &r : records) {
        record_by_id.emplace(r.record_id, &r);
    }

    ValidationMetrics m;
    std::map<std::string, std::int64_t> facts_of;
    std::map<std::string, std::int64_t> records_of;
    const auto count_fact = [&](FactId id) {
        const auto it = fact_by_id.find(id.value);
        if (it == fact_by_id.end()) {
            throw Error(ErrorKind::StaleMatch, "fact " + std::to_string(id.value) + " is not among the inputs");
        }
        ++facts_of[it->second->species_code];
        ++m.facts_considered;
        return it->second;
    };
    for (const auto &pair : match.pairs) {
        const auto *fact = count_fact(pair.fact_id);
        const auto it = record_by_id.find(pair.record_id);
        if (it == record_by_id.end()) {
            throw Error(ErrorKind::StaleMatch, "record '" + pair.record_id + "' is not among the inputs");
        }
        ++m.pairs;
        if (fact->species_code == it->second->species_code) {
            ++m.agreeing_pairs;
            ++m.per_species[fact->species_code].tp;
        }
    }
    for (FactId id : match.unmatched_facts) {
        count_fact(id);
    }
    for (const auto &r : records) {
        ++records_of[r.species_code];
    }
    for (const auto &[code, n] : facts_of) {
        m.per_species[code].fp = n - m.per_species[code].tp;
    }
    for (const auto &[code, n] : records_of) {
        m.per_species[code].fn = n - m.per_species[code].tp;
    }
    for (auto &[code, s] : m.per_species) {
        if (s.tp + s.fp > 0) {
            s.precision = static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp);
        }
        if (s.tp + s.fn > 0) {
            s.recall = static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn);
        }
    }
    if (m.pairs > 0) {
        m.overall_accuracy = static_cast<double>(m.agreeing_pairs) / static_cast<double>(m.pairs);
    }
    return m;
}

std::vector<GeoFact> geo_facts(const Warehouse &wh) {
    std::vector<GeoFact> out;
    out.reserve(wh.facts().size());
    for (const auto &f : wh.facts()) {
        const auto *sp = wh.find_species(f.species_key);
        out.push_back({f.fact_id, f.geo_x, f.geo_y, sp ? sp->code : std::string()});
    }
    return out;
}

ValidationMetrics validate_facts(Warehouse &wh, const MatchResult &match, std::span<const SurveyRecord> records) {
    Warehouse::WriteGuard guard(wh);
    const auto require = [&](FactId id) -> const FactTreeMetric & {
        const auto *fact = wh.find_fact(id);
        if (!fact) {
            throw Error(ErrorKind::StaleMatch, "matched fact " + std::to_string(id.value) + " no longer exists");
        }
        return *fact;
    };
    std::unordered_map<std::string_view, const SurveyRecord *> record_by_id;
    for (const auto &r : records) {
        record_by_id.emplace(r.record_id, &r);
    }

    std::vector<GeoFact> considered;
    std::map<FactId, ValidationUpdate> updates;
    const auto species_code = [&](const FactTreeMetric &f) {
        const auto *sp = wh.find_species(f.species_key);
        return sp ? sp->code : std::string();
    };
    for (const auto &pair : match.pairs) {
        const auto &fact = require(pair.fact_id);
        const auto rec = record_by_id.find(pair.record_id);
        if (rec == record_by_id.end()) {
            throw Error(ErrorKind::StaleMatch, "matched record '" + pair.record_id + "' is not among the records");
        }
        const auto code = species_code(fact);
        ValidationUpdate u{Validation::SpeciesMismatch, pair.record_id, fact.height_m, fact.dbh_cm};
        if (code == rec->second->species_code) {
            u.validation = Validation::Confirmed;
            if (!u.height_m) {
                u.height_m = rec->second->height_m;
            }
            if (!u.dbh_cm) {
                u.dbh_cm = rec->second->dbh_cm;
            }
        }
        updates.emplace(pair.fact_id, std::move(u));
        considered.push_back({fact.fact_id, fact.geo_x, fact.geo_y, code});
    }
    for (FactId id : match.unmatched_facts) {
        const auto &fact = require(id);
        updates.emplace(id, ValidationUpdate{Validation::Unmatched, std::nullopt, fact.height_m, fact.dbh_cm});
        considered.push_back({fact.fact_id, fact.geo_x, fact.geo_y, species_code(fact)});
    }

    auto metrics = compute_metrics(considered, records, match);
    wh.rewrite_validation(updates);
    return metrics;
}

std::size_t rewrite_validation(Warehouse &wh, const std::map<FactId, ValidationUpdate> &updates) {
    return wh.rewrite_validation(updates);
}

ValidationMetrics reconcile(Warehouse &wh, std::string_view survey_id, double radius_m) {
    Warehouse::WriteGuard guard(wh);
    std::string id(survey_id);
    if (id.empty()) {
        const auto ids = wh.survey_ids();
        if (ids.size() != 1) {
            throw Error(ErrorKind::InvalidSpec, ids.empty() ? "no survey has been ingested"
                                                            : "several surveys stored; name one to reconcile against");
        }
        id = ids.front();
    }
    const auto records = wh.load_survey(id);
    const auto facts = geo_facts(wh);
    const auto match = match_detections(facts, records, radius_m);
    return validate_facts(wh, match, records);
}

std::string metrics_csv(const ValidationMetrics &m) {
    std::string out = "species_code,tp,fp,fn,precision,recall\n";
    for (const auto &[code, s] : m.per_species) {
        out += csv::join({code, std::to_string(s.tp), std::to_string(s.fp), std::to_string(s.fn),
                          csv::format_optional(s.precision), csv::format_optional(s.recall)});
        out.push_back('\n');
    }
    out += "OVERALL,accuracy=" + (m.overall_accuracy ? csv::format_real(*m.overall_accuracy) : "undefined") + "\n";
    return out;
}

std::string metrics_text(const ValidationMetrics &m) {
    std::vector<std::vector<std::string>> rows;
    const auto fixed = [](const std::optional<double> &v) { return v ? format_fixed(*v, 3) : std::string("-"); };
    for (const auto &[code, s] : m.per_species) {
        rows.push_back({code, std::to_string(s.tp), std::to_string(s.fp), std::to_string(s.fn), fixed(s.precision),
                        fixed(s.recall)});
    }
    std::string out = ResultTable{{"species", "tp", "fp", "fn", "precision", "recall"}, rows}.to_text();
    out += "overall accuracy (matched pairs only): " + fixed(m.overall_accuracy) + " over " +
           std::to_string(m.pairs) + " pairs, " + std::to_string(m.facts_considered) + " facts\n";
    return out;
}

} // namespace canopydw
