#include <gtest/gtest.h>

#include <sstream>
#include <thread>

#include "canopydw/cli.hpp"
#include "canopydw/error.hpp"
#include "http_support.hpp"
#include "support.hpp"

using namespace canopydw;
using namespace canopydw::testing;
using nlohmann::json;

namespace {

constexpr const char *kJsonType = "application/json";

class ServiceFixture : public ::testing::Test {
protected:
    TempDir dir;

    void SetUp() override {
        auto wh = Warehouse::open(dir.path(), Warehouse::Options{false});
        register_default_species(wh);
    }

    ServiceConfig config() const {
        ServiceConfig c;
        c.bind_address = "127.0.0.1:0";
        c.warehouse_root = dir.path();
        return c;
    }

    static json image_request(const std::string &name, int detections, DateKey date = DateKey(20240301)) {
        json item{{"manifest", manifest_json(manifest_row(name, date))}, {"detections", json::array()}};
        for (int i = 0; i < detections; ++i) {
            item["detections"].push_back(std::to_string(i % 4) + " 0." + std::to_string(i + 1) + " 0.5 0.05 0.05 0.9");
        }
        return item;
    }

    static json images_body(const std::vector<json> &items) {
        return {{"class_map", {"PIAB", "PISY", "BEPE", "QURO"}}, {"images", items}};
    }
};

std::string cli_csv(const std::filesystem::path &root, std::vector<std::string> args) {
    args.insert(args.begin(), {"--root", root.string(), "--format", "csv"});
    std::ostringstream out, err;
    EXPECT_EQ(run_cli(args, out, err), 0) << err.str();
    return out.str();
}

} // namespace

TEST_F(ServiceFixture, Health) {
    RunningService svc(config());
    auto c = svc.client();
    const auto res = c.Get("/v1/health");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(json::parse(res->body), (json{{"status", "ok"}}));
}

TEST_F(ServiceFixture, IngestImagesIsIdempotent) {
    RunningService svc(config());
    auto c = svc.client();
    const auto body = images_body({image_request("a.tif", 2)}).dump();
    auto res = c.Post("/v1/images", body, kJsonType);
    ASSERT_TRUE(res);
    ASSERT_EQ(res->status, 200) << res->body;
    auto report = json::parse(res->body);
    EXPECT_EQ(report["images_added"], 1);
    EXPECT_EQ(report["facts_added"], 2);

    res = c.Post("/v1/images", body, kJsonType);
    ASSERT_EQ(res->status, 200);
    report = json::parse(res->body);
    EXPECT_EQ(report["images_added"], 0);
    EXPECT_EQ(report["facts_added"], 0);
    EXPECT_EQ(report["rows_skipped"], 3); // the image row and its two detections

    res = c.Get("/v1/stats");
    ASSERT_EQ(res->status, 200);
    const auto stats = json::parse(res->body);
    EXPECT_EQ(stats["rows"][1][0], "Fact Table");
    EXPECT_EQ(stats["rows"][1][1], "2");
}

TEST_F(ServiceFixture, SingleImageFormAndDuplicateNames) {
    RunningService svc(config());
    auto c = svc.client();
    json single = image_request("s.tif", 1);
    single["class_map"] = {"PIAB"};
    auto res = c.Post("/v1/images", single.dump(), kJsonType);
    ASSERT_EQ(res->status, 200) << res->body;
    EXPECT_EQ(json::parse(res->body)["facts_added"], 1);

    res = c.Post("/v1/images", images_body({image_request("d.tif", 1), image_request("d.tif", 1)}).dump(), kJsonType);
    EXPECT_EQ(res->status, 400);
    EXPECT_EQ(json::parse(res->body)["error"], "duplicate");
}

TEST_F(ServiceFixture, BadRequestsAre400) {
    RunningService svc(config());
    auto c = svc.client();
    auto res = c.Post("/v1/images", "{not json", kJsonType);
    EXPECT_EQ(res->status, 400);
    res = c.Post("/v1/images", json{{"images", json::array()}}.dump(), kJsonType);
    EXPECT_EQ(res->status, 400);
    res = c.Get("/v1/query?group_by=decade");
    EXPECT_EQ(res->status, 400);
    EXPECT_EQ(json::parse(res->body)["error"], "invalid-spec");
    res = c.Get("/v1/trend?species=NOPE");
    EXPECT_EQ(res->status, 400);
    res = c.Get("/v1/estimate");
    EXPECT_EQ(res->status, 400);
    EXPECT_EQ(json::parse(res->body)["error"], "empty-warehouse");

    json bad_detection = image_request("x.tif", 0);
    bad_detection["detections"] = {"0 0.5 0.5 0.1 0.1", "0 0.5 zero 0.1 0.1"};
    res = c.Post("/v1/images", images_body({bad_detection}).dump(), kJsonType);
    ASSERT_EQ(res->status, 200);
    const auto report = json::parse(res->body);
    EXPECT_EQ(report["images_added"], 1);
    EXPECT_EQ(report["facts_added"], 0);
    ASSERT_EQ(report["errors"].size(), 1u);
    EXPECT_EQ(report["errors"][0]["file_name"], "x.txt");
    EXPECT_EQ(report["errors"][0]["line"], 2);
}

TEST_F(ServiceFixture, BearerTokenGuardsEverythingButHealth) {
    auto cfg = config();
    cfg.auth_token = "s3cret";
    RunningService svc(cfg);
    auto c = svc.client();
    EXPECT_EQ(c.Get("/v1/health")->status, 200);
    EXPECT_EQ(c.Get("/v1/stats")->status, 401);
    EXPECT_EQ(c.Get("/v1/stats", {{"Authorization", "Bearer wrong"}})->status, 401);
    EXPECT_EQ(c.Get("/v1/stats", {{"Authorization", "Bearer s3cret"}})->status, 200);
    EXPECT_EQ(c.Post("/v1/images", "{}", kJsonType)->status, 401);
}

TEST_F(ServiceFixture, ForeignWriterYields409) {
    RunningService svc(config());
    auto c = svc.client();
    auto other = Warehouse::open(dir.path(), Warehouse::Options{false});
    {
        Warehouse::WriteGuard guard(other);
        const auto res = c.Post("/v1/images", images_body({image_request("a.tif", 1)}).dump(), kJsonType);
        ASSERT_TRUE(res);
        EXPECT_EQ(res->status, 409);
        EXPECT_EQ(json::parse(res->body)["error"], "locked");
    }
    EXPECT_EQ(c.Post("/v1/images", images_body({image_request("a.tif", 1)}).dump(), kJsonType)->status, 200);
}

TEST_F(ServiceFixture, ReadsSeeForeignCommits) {
    RunningService svc(config());
    auto c = svc.client();
    {
        auto other = Warehouse::open(dir.path(), Warehouse::Options{false});
        ingest_image_batch(other, {manifest_row("o.tif", DateKey(20240101))}, {{"o.tif", {"0 0.5 0.5 0.1 0.1"}}},
                           ClassMap({"PIAB"}));
    }
    const auto stats = json::parse(c.Get("/v1/stats")->body);
    EXPECT_EQ(stats["rows"][1][1], "1");
}

TEST_F(ServiceFixture, OversizedBodyIs413) {
    auto cfg = config();
    cfg.max_body_bytes = 1u << 20;
    RunningService svc(cfg);
    auto c = svc.client();
    const auto res = c.Post("/v1/images", std::string((1u << 20) + 16, ' '), kJsonType);
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 413);
}

TEST_F(ServiceFixture, CorruptTableIsOpaque500) {
    RunningService svc(config());
    auto c = svc.client();
    ASSERT_EQ(c.Post("/v1/images", images_body({image_request("a.tif", 1)}).dump(), kJsonType)->status, 200);
    write_text(dir / "dim_species.tbl", "wrong,header\n");
    const auto res = c.Get("/v1/stats");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 500);
    const auto body = json::parse(res->body);
    EXPECT_EQ(body["error"], "internal");
    EXPECT_EQ(body["error_id"].get<std::string>().size(), 16u);
    EXPECT_EQ(body.size(), 2u);
}

TEST_F(ServiceFixture, SurveysAndReconcile) {
    RunningService svc(config());
    auto c = svc.client();
    ASSERT_EQ(c.Post("/v1/images", images_body({image_request("a.tif", 1)}).dump(), kJsonType)->status, 200);
    // The single detection sits at pixel (400, 1500): geo (10, 62.5).
    const json survey{{"survey_id", "plot"},
                      {"rows",
                       {{{"record_id", "R1"},
                         {"geo_x", 10.5},
                         {"geo_y", 62.5},
                         {"species_code", "PIAB"},
                         {"height_m", 18},
                         {"surveyed_date", "2024-03-02"}}}}};
    auto res = c.Post("/v1/surveys", survey.dump(), kJsonType);
    ASSERT_EQ(res->status, 200) << res->body;
    EXPECT_EQ(json::parse(res->body), (json{{"survey_id", "plot"}, {"count", 1}}));

    res = c.Post("/v1/reconcile", json{{"radius_m", 1.0}}.dump(), kJsonType);
    ASSERT_EQ(res->status, 200) << res->body;
    const auto m = json::parse(res->body);
    EXPECT_EQ(m["pairs"], 1);
    EXPECT_EQ(m["overall_accuracy"], 1.0);
    EXPECT_EQ(m["per_species"]["PIAB"]["tp"], 1);

    res = c.Post("/v1/reconcile", json{{"radius_m", -1}}.dump(), kJsonType);
    EXPECT_EQ(res->status, 400);
}

TEST_F(ServiceFixture, ReadEndpointsMatchCliCsv) {
    {
        auto wh = Warehouse::open(dir.path(), Warehouse::Options{false});
        build_reference_warehouse(wh);
    }
    RunningService svc(config());
    auto c = svc.client();
    const auto get = [&](const std::string &path) {
        const auto res = c.Get(path);
        EXPECT_EQ(res->status, 200) << path << " " << res->body;
        return table_json_to_csv(json::parse(res->body));
    };
    EXPECT_EQ(get("/v1/query?group_by=species,platform&measures=tree_count,mean_confidence"),
              cli_csv(dir.path(), {"query", "--group-by", "species,platform", "--measures",
                                   "tree_count,mean_confidence"}));
    EXPECT_EQ(get("/v1/trend?species=PIAB&granularity=month"),
              cli_csv(dir.path(), {"trend", "--species", "PIAB", "--granularity", "month"}));
    EXPECT_EQ(get("/v1/image-usage"), cli_csv(dir.path(), {"image-usage"}));
    EXPECT_EQ(get("/v1/stats"), cli_csv(dir.path(), {"stats"}));
    EXPECT_EQ(get("/v1/estimate"), cli_csv(dir.path(), {"estimate"}));
}

TEST_F(ServiceFixture, ConcurrentClientsLoseNothing) {
    RunningService svc(config());
    constexpr int kClients = 8;
    constexpr int kImages = 10;
    std::vector<std::thread> threads;
    std::vector<int> added(kClients, -1);
    for (int t = 0; t < kClients; ++t) {
        threads.emplace_back([&, t] {
            auto c = svc.client();
            int total = 0;
            for (int i = 0; i < kImages; ++i) {
                const auto name = "c" + std::to_string(t) + "_" + std::to_string(i) + ".tif";
                const auto res = c.Post("/v1/images", images_body({image_request(name, 3)}).dump(), kJsonType);
                if (!res || res->status != 200) {
                    return;
                }
                total += json::parse(res->body)["facts_added"].get<int>();
            }
            added[static_cast<std::size_t>(t)] = total;
        });
    }
    for (auto &t : threads) {
        t.join();
    }
    for (int t = 0; t < kClients; ++t) {
        EXPECT_EQ(added[static_cast<std::size_t>(t)], kImages * 3) << "client " << t;
    }
    const auto wh = Warehouse::open(dir.path());
    EXPECT_EQ(wh.facts().size(), static_cast<std::size_t>(kClients * kImages * 3));
    EXPECT_EQ(wh.images().size(), static_cast<std::size_t>(kClients * kImages));
}

TEST(ServiceConfig, Validation) {
    ServiceConfig c;
    c.bind_address = "nohost";
    EXPECT_THROW(c.validate(), Error);
    c.bind_address = "127.0.0.1:99999";
    EXPECT_THROW(c.validate(), Error);
    c.bind_address = "[::1]:8080";
    EXPECT_NO_THROW(c.validate());
    c.max_body_bytes = 10;
    EXPECT_THROW(c.validate(), Error);
    c.max_body_bytes = 1u << 20;
    c.auth_token = "";
    EXPECT_THROW(c.validate(), Error);
}
