#include <gtest/gtest.h>

#include <cmath>

#include "canopydw/error.hpp"
#include "canopydw/ingest.hpp"
#include "canopydw/reconcile.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace canopydw;
using namespace canopydw::testing;

namespace {

constexpr Warehouse::Options kFast{false};

SurveyRecord record(const std::string &id, double x, double y, const std::string &species = "A") {
    SurveyRecord r;
    r.record_id = id;
    r.geo_x = x;
    r.geo_y = y;
    r.species_code = species;
    r.surveyed_date_key = DateKey(20240120);
    return r;
}

ErrorKind kind_of(auto &&fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorKind::Usage;
}

} // namespace

TEST(Match, SingleEligiblePair) {
    const std::vector<GeoFact> facts{{FactId{1}, 0, 0, "A"}};
    const std::vector<SurveyRecord> records{record("r1", 0.5, 0)};
    const auto m = match_detections(facts, records, 2.0);
    ASSERT_EQ(m.pairs.size(), 1u);
    EXPECT_EQ(m.pairs[0], (MatchPair{FactId{1}, "r1", 0.5}));
    EXPECT_TRUE(m.unmatched_facts.empty());
    EXPECT_TRUE(m.unmatched_records.empty());
}

TEST(Match, BeyondRadius) {
    const std::vector<GeoFact> facts{{FactId{1}, 0, 0, "A"}};
    const std::vector<SurveyRecord> records{record("r1", 3, 0)};
    const auto m = match_detections(facts, records, 2.0);
    EXPECT_TRUE(m.pairs.empty());
    EXPECT_EQ(m.unmatched_facts, std::vector<FactId>{FactId{1}});
    EXPECT_EQ(m.unmatched_records, std::vector<std::string>{"r1"});
}

TEST(Match, GlobalMinimumBindsFirst) {
    const std::vector<GeoFact> facts{{FactId{1}, 0, 0, "A"}, {FactId{2}, 1, 0, "A"}};
    const std::vector<SurveyRecord> records{record("r1", 0.6, 0), record("r2", 1.1, 0)};
    const auto m = match_detections(facts, records, 2.0);
    ASSERT_EQ(m.pairs.size(), 2u);
    EXPECT_EQ(m.pairs[0].fact_id, FactId{2});
    EXPECT_EQ(m.pairs[0].record_id, "r2");
    EXPECT_NEAR(m.pairs[0].distance, 0.1, 1e-12);
    EXPECT_EQ(m.pairs[1].fact_id, FactId{1});
    EXPECT_EQ(m.pairs[1].record_id, "r1");
    EXPECT_NEAR(m.pairs[1].distance, 0.6, 1e-12);
    EXPECT_EQ(m, oracle_match(facts, records, 2.0));
}

TEST(Match, TiesPreferLowerFactThenRecord) {
    const std::vector<GeoFact> facts{{FactId{7}, 0, 0, "A"}, {FactId{3}, 2, 0, "A"}};
    const std::vector<SurveyRecord> records{record("b", 1, 0), record("a", 1, 0)};
    const auto m = match_detections(facts, records, 1.0);
    ASSERT_EQ(m.pairs.size(), 2u);
    EXPECT_EQ(m.pairs[0], (MatchPair{FactId{3}, "a", 1.0}));
    EXPECT_EQ(m.pairs[1], (MatchPair{FactId{7}, "b", 1.0}));
}

TEST(Match, RejectsBadInput) {
    const std::vector<GeoFact> facts{{FactId{1}, 0, 0, "A"}};
    const std::vector<SurveyRecord> records{record("r1", 0, 0)};
    EXPECT_EQ(kind_of([&] { match_detections(facts, records, 0); }), ErrorKind::Range);
    EXPECT_EQ(kind_of([&] { match_detections(facts, records, INFINITY); }), ErrorKind::Range);
    const std::vector<GeoFact> nan_fact{{FactId{1}, NAN, 0, "A"}};
    EXPECT_EQ(kind_of([&] { match_detections(nan_fact, records, 1); }), ErrorKind::MixedUnits);
    const std::vector<SurveyRecord> dup{record("r1", 0, 0), record("r1", 1, 1)};
    EXPECT_EQ(kind_of([&] { match_detections(facts, dup, 1); }), ErrorKind::Duplicate);
}

TEST(MatchProperty, AgreesWithExhaustiveGreedy) {
    RandomOps ops(101);
    for (int i = 0; i < 3000; ++i) {
        const auto inst = random_match_instance(ops, 10);
        ASSERT_EQ(match_detections(inst.facts, inst.records, inst.radius_m),
                  oracle_match(inst.facts, inst.records, inst.radius_m))
            << "instance " << i;
    }
}

TEST(MatchProperty, LargeInstancesUseGridSafely) {
    RandomOps ops(5);
    for (int round = 0; round < 5; ++round) {
        std::vector<GeoFact> facts;
        std::vector<SurveyRecord> records;
        for (int i = 0; i < 300; ++i) {
            facts.push_back({FactId{i + 1}, ops.uniform(0, 40), ops.uniform(0, 40), "A"});
            records.push_back(record("r" + std::to_string(i), ops.uniform(0, 40), ops.uniform(0, 40)));
        }
        ASSERT_EQ(match_detections(facts, records, 1.5), oracle_match(facts, records, 1.5));
    }
}

TEST(Metrics, FiftyNineOfHundredAgree) {
    std::vector<GeoFact> facts;
    std::vector<SurveyRecord> records;
    for (int i = 0; i < 100; ++i) {
        facts.push_back({FactId{i + 1}, i * 10.0, 0, "A"});
        records.push_back(record("r" + std::to_string(i), i * 10.0, 0.5, i < 59 ? "A" : "B"));
    }
    const auto match = match_detections(facts, records, 2.0);
    ASSERT_EQ(match.pairs.size(), 100u);
    const auto m = compute_metrics(facts, records, match);
    EXPECT_EQ(m.pairs, 100);
    EXPECT_EQ(m.agreeing_pairs, 59);
    ASSERT_TRUE(m.overall_accuracy);
    EXPECT_EQ(*m.overall_accuracy, 0.59);
}

TEST(Metrics, PerfectAgreement) {
    const std::vector<GeoFact> facts{{FactId{1}, 0, 0, "A"}, {FactId{2}, 10, 0, "B"}};
    const std::vector<SurveyRecord> records{record("r1", 0, 0, "A"), record("r2", 10, 0, "B")};
    const auto m = compute_metrics(facts, records, match_detections(facts, records));
    for (const auto &[code, s] : m.per_species) {
        EXPECT_EQ(s.precision, 1.0) << code;
        EXPECT_EQ(s.recall, 1.0) << code;
    }
}

TEST(Metrics, HandCountedConfusion) {
    // Facts f1(A) pairs r1(A), f2(A) pairs r2(B); r3(A) stays unpaired.
    // A: tp 1, fp 1 (f2), fn 1 (r3). B: tp 0, fp 0, fn 1 (r2).
    const std::vector<GeoFact> facts{{FactId{1}, 0, 0, "A"}, {FactId{2}, 10, 0, "A"}};
    const std::vector<SurveyRecord> records{record("r1", 0, 0, "A"), record("r2", 10, 0, "B"),
                                            record("r3", 50, 0, "A")};
    const auto m = compute_metrics(facts, records, match_detections(facts, records));
    const auto &a = m.per_species.at("A");
    EXPECT_EQ(a.tp, 1);
    EXPECT_EQ(a.fp, 1);
    EXPECT_EQ(a.fn, 1);
    EXPECT_EQ(a.precision, 0.5);
    EXPECT_EQ(a.recall, 0.5);
    const auto &b = m.per_species.at("B");
    EXPECT_EQ(b.tp, 0);
    EXPECT_EQ(b.fp, 0);
    EXPECT_EQ(b.fn, 1);
    EXPECT_FALSE(b.precision);
    EXPECT_EQ(b.recall, 0.0);
    EXPECT_EQ(m.overall_accuracy, 0.5);
}

TEST(Metrics, NothingPairedLeavesAccuracyUndefined) {
    const std::vector<GeoFact> facts{{FactId{1}, 0, 0, "A"}};
    const auto m = compute_metrics(facts, {}, match_detections(facts, {}));
    EXPECT_FALSE(m.overall_accuracy);
    EXPECT_EQ(m.per_species.at("A").fp, 1);
    EXPECT_NE(metrics_csv(m).find("OVERALL,accuracy=undefined"), std::string::npos);
}

TEST(MetricsProperty, ConservationIdentities) {
    RandomOps ops(77);
    for (int i = 0; i < 2000; ++i) {
        const auto inst = random_match_instance(ops, 8);
        const auto match = match_detections(inst.facts, inst.records, inst.radius_m);
        const auto m = compute_metrics(inst.facts, inst.records, match);
        std::int64_t tp = 0, tp_fp = 0, tp_fn = 0;
        for (const auto &[code, s] : m.per_species) {
            tp += s.tp;
            tp_fp += s.tp + s.fp;
            tp_fn += s.tp + s.fn;
        }
        ASSERT_EQ(tp, m.agreeing_pairs);
        ASSERT_EQ(tp_fp, m.facts_considered);
        ASSERT_EQ(tp_fp, static_cast<std::int64_t>(inst.facts.size()));
        ASSERT_EQ(tp_fn, static_cast<std::int64_t>(inst.records.size()));
    }
}

class ReconcileWarehouse : public ::testing::Test {
protected:
    TempDir dir;
    Warehouse wh = Warehouse::open(dir.path(), kFast);

    void SetUp() override {
        const auto classes = register_default_species(wh);
        // Facts land at (50, 62.5), (25, 81.25), (75, 43.75) through the
        // default manifest geotransform.
        const DetectionFiles files{
            {"a.tif", {"0 0.5 0.5 0.1 0.1", "1 0.25 0.25 0.1 0.1", "0 0.75 0.75 0.1 0.1"}}};
        ingest_image_batch(wh, {manifest_row("a.tif", DateKey(20240115))}, files, classes);
        SurveyRecord r1 = record("r1", 50.5, 62.5, "PIAB");
        r1.height_m = 21.5;
        r1.dbh_cm = 33;
        wh.store_survey("plot", {r1, record("r2", 25, 81, "BEPE"), record("r3", 500, 500, "PIAB")});
    }
};

TEST_F(ReconcileWarehouse, AppliesValidationStates) {
    const auto m = reconcile(wh, "", 2.0);
    EXPECT_EQ(m.pairs, 2);
    EXPECT_EQ(m.agreeing_pairs, 1);
    const auto *f1 = wh.find_fact(FactId{1});
    EXPECT_EQ(f1->validation, Validation::Confirmed);
    EXPECT_EQ(f1->matched_record_id, "r1");
    EXPECT_EQ(f1->height_m, 21.5);
    EXPECT_EQ(f1->dbh_cm, 33.0);
    const auto *f2 = wh.find_fact(FactId{2});
    EXPECT_EQ(f2->validation, Validation::SpeciesMismatch);
    EXPECT_EQ(f2->matched_record_id, "r2");
    EXPECT_FALSE(f2->height_m);
    const auto *f3 = wh.find_fact(FactId{3});
    EXPECT_EQ(f3->validation, Validation::Unmatched);
    EXPECT_FALSE(f3->matched_record_id);
    EXPECT_EQ(Warehouse::open(dir.path(), kFast).facts(), wh.facts());
}

TEST_F(ReconcileWarehouse, SurveySelection) {
    wh.store_survey("other", {});
    EXPECT_EQ(kind_of([&] { reconcile(wh, "", 2.0); }), ErrorKind::InvalidSpec);
    EXPECT_EQ(kind_of([&] { reconcile(wh, "missing", 2.0); }), ErrorKind::UnknownId);
    EXPECT_EQ(reconcile(wh, "other", 2.0).pairs, 0);
    EXPECT_EQ(wh.find_fact(FactId{1})->validation, Validation::Unmatched);
}

TEST_F(ReconcileWarehouse, StaleMatchIsRejected) {
    MatchResult stale;
    stale.pairs.push_back({FactId{42}, "r1", 0.1});
    const auto records = wh.load_survey("plot");
    const auto before = wh.facts();
    EXPECT_EQ(kind_of([&] { validate_facts(wh, stale, records); }), ErrorKind::StaleMatch);
    EXPECT_EQ(wh.facts(), before);
}

TEST_F(ReconcileWarehouse, RerunIsStable) {
    reconcile(wh, "plot", 2.0);
    const auto first = wh.facts();
    reconcile(wh, "plot", 2.0);
    EXPECT_EQ(wh.facts(), first);
}
