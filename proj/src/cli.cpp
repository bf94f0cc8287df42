#include "canopydw/cli.hpp"

#include <CLI11.hpp>
#include <pthread.h>

#include <algorithm>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "canopydw/capacity.hpp"
#include "canopydw/error.hpp"
#include "canopydw/ingest.hpp"
#include "canopydw/query.hpp"
#include "canopydw/reconcile.hpp"
#include "canopydw/service.hpp"
#include "canopydw/storage.hpp"

#ifndef CANOPYDW_VERSION
#define CANOPYDW_VERSION "unknown"
#endif

namespace canopydw {

namespace {

namespace fs = std::filesystem;

enum class Format { Table, Csv };

struct Options {
    std::string root;
    std::string format = "table";
    double radius_m = kDefaultMatchRadiusM;
    int verbosity = 0;
};

std::string read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot read " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) {
        throw Error(ErrorKind::Io, "cannot read " + path.string());
    }
    return buf.str();
}

void print(std::ostream &out, Format format, const ResultTable &table) {
    out << (format == Format::Csv ? table.to_csv() : table.to_text());
}

void report_issues(std::ostream &err, const IngestReport &report) {
    for (const auto &issue : report.errors) {
        err << issue.file_name;
        if (issue.line != 0) {
            err << ':' << issue.line;
        }
        err << ": " << issue.message << '\n';
    }
}

void print_report(std::ostream &out, Format format, const IngestReport &r) {
    ResultTable t{{"images_added", "facts_added", "rows_skipped", "errors"},
                  {{std::to_string(r.images_added), std::to_string(r.facts_added), std::to_string(r.rows_skipped),
                    std::to_string(r.errors.size())}}};
    print(out, format, t);
}

// Blocks SIGINT and SIGTERM for the calling thread (and threads it spawns)
// and stops `service` when either arrives.
int serve(const ServiceConfig &config, std::ostream &err) {
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    sigset_t previous;
    pthread_sigmask(SIG_BLOCK, &signals, &previous);

    std::optional<Service> service;
    try {
        service.emplace(config);
        const int port = service->bind();
        err << "canopydw: serving " << config.warehouse_root.string() << " on port " << port << '\n';
    } catch (...) {
        pthread_sigmask(SIG_SETMASK, &previous, nullptr);
        throw;
    }
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        service->stop();
    });
    service->run();
    // run() also returns on a listener failure; wake the waiter so it can exit.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    pthread_sigmask(SIG_SETMASK, &previous, nullptr);
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Forest inventory star-schema warehouse", "canopydw"};
    app.require_subcommand(1);
    app.fallthrough();

    Options opt;
    app.add_option("--root", opt.root, "Warehouse directory")->envname("CANOPYDW_ROOT");
    app.add_option("--format", opt.format, "Output format")->check(CLI::IsMember({"table", "csv"}));
    app.add_option("--radius", opt.radius_m, "Match radius in meters for reconcile");
    app.add_flag("-v,--verbose", opt.verbosity, "More diagnostics; repeatable");

    auto *init = app.add_subcommand("init", "Create an empty warehouse");

    auto *species_cmd = app.add_subcommand("ingest-species", "Load a species registry CSV");
    std::string registry_path;
    species_cmd->add_option("registry", registry_path, "Registry CSV")->required();

    auto *images_cmd = app.add_subcommand("ingest-images", "Load an image manifest and its detection files");
    std::string manifest_path;
    std::string detections_dir;
    std::string class_map_path;
    images_cmd->add_option("--manifest", manifest_path, "Image manifest CSV")->required();
    images_cmd->add_option("--detections", detections_dir, "Directory of <image stem>.txt detection files")
        ->required();
    images_cmd->add_option("--class-map", class_map_path, "Class map, one species code per line")->required();

    auto *survey_cmd = app.add_subcommand("ingest-survey", "Load digitized survey records");
    std::string survey_path;
    std::string survey_id;
    survey_cmd->add_option("survey", survey_path, "Survey CSV")->required();
    survey_cmd->add_option("--id", survey_id, "Survey id (default: file stem)");

    auto *reconcile_cmd = app.add_subcommand("reconcile", "Match facts against a survey and score them");
    std::string reconcile_survey;
    reconcile_cmd->add_option("--radius", opt.radius_m, "Match radius in meters");
    reconcile_cmd->add_option("--survey", reconcile_survey, "Survey id (required when several are stored)");

    auto *query_cmd = app.add_subcommand("query", "Aggregate facts");
    std::vector<std::pair<std::string, std::vector<std::string>>> query_flags = {
        {"group_by", {}}, {"measures", {}},  {"date_from", {}},    {"date_to", {}},       {"species", {}},
        {"platforms", {}}, {"validation", {}}, {"min_width_px", {}}, {"min_height_px", {}},
    };
    const char *query_help[] = {
        "year, quarter, month, date, species, platform, resolution_class, conservation_status",
        "tree_count (default), mean_confidence, mean_height_m, mean_dbh_cm",
        "First capture date, YYYY-MM-DD",
        "Last capture date, YYYY-MM-DD",
        "Species codes",
        "uav, satellite, aerial, ground",
        "unvalidated, confirmed, species_mismatch, unmatched",
        "Minimum image width in pixels",
        "Minimum image height in pixels",
    };
    for (std::size_t i = 0; i < query_flags.size(); ++i) {
        auto &[name, values] = query_flags[i];
        std::string flag = "--" + name;
        std::replace(flag.begin(), flag.end(), '_', '-');
        auto *o = query_cmd->add_option(flag, values, query_help[i]);
        if (name.starts_with("date") || name.starts_with("min")) {
            o->expected(1);
        } else {
            o->delimiter(',');
        }
    }

    auto *trend_cmd = app.add_subcommand("trend", "Tree counts of one species over time");
    std::string trend_species;
    std::string granularity = "year";
    trend_cmd->add_option("--species", trend_species, "Species code")->required();
    trend_cmd->add_option("--granularity", granularity, "year, quarter or month")
        ->check(CLI::IsMember({"year", "quarter", "month"}));

    auto *usage_cmd = app.add_subcommand("image-usage", "Images and facts by resolution class and platform");
    auto *stats_cmd = app.add_subcommand("stats", "Row counts and sizes");

    auto *estimate_cmd = app.add_subcommand("estimate", "Project warehouse growth");
    std::int64_t years = 10;
    std::int64_t events_per_year = 4;
    estimate_cmd->add_option("--years", years, "Horizon in years")->check(CLI::NonNegativeNumber);
    estimate_cmd->add_option("--events-per-year", events_per_year, "Ingest events per year")
        ->check(CLI::PositiveNumber);

    auto *serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    ServiceConfig service_config;
    std::optional<std::string> token;
    serve_cmd->add_option("--bind", service_config.bind_address, "host:port");
    serve_cmd->add_option("--max-body-bytes", service_config.max_body_bytes, "Request body limit");
    serve_cmd->add_option("--token", token, "Bearer token required on every endpoint but health")
        ->envname("CANOPYDW_TOKEN");

    auto *version_cmd = app.add_subcommand("version", "Print the version");

    std::vector<std::string> argv_store{"canopydw"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char *> argv;
    for (auto &a : argv_store) {
        argv.push_back(a.data());
    }

    const auto usage = [&](const std::string &message) {
        err << "canopydw: " << message << '\n';
        const CLI::App *shown = &app;
        for (const auto *sub : app.get_subcommands()) {
            shown = sub;
        }
        err << shown->help();
        return 2;
    };

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError &e) {
        return usage(e.what());
    }

    if (version_cmd->parsed()) {
        out << "canopydw " << CANOPYDW_VERSION << '\n';
        return 0;
    }
    if (opt.root.empty()) {
        return usage("--root or CANOPYDW_ROOT is required");
    }
    const Format format = opt.format == "csv" ? Format::Csv : Format::Table;
    const fs::path root(opt.root);

    try {
        if (init->parsed()) {
            Warehouse::open(root);
            if (opt.verbosity > 0) {
                err << "canopydw: initialized " << root.string() << '\n';
            }
            return 0;
        }
        if (!fs::is_directory(root)) {
            throw Error(ErrorKind::Io, "no warehouse at " + root.string() + " (run init first)");
        }
        if (serve_cmd->parsed()) {
            service_config.warehouse_root = root;
            service_config.auth_token = token;
            return serve(service_config, err);
        }

        auto wh = Warehouse::open(root);

        if (species_cmd->parsed()) {
            const auto added = ingest_species_registry(wh, read_file(registry_path));
            print(out, format, {{"species_added"}, {{std::to_string(added)}}});
        } else if (images_cmd->parsed()) {
            const auto class_map = ClassMap::parse(read_file(class_map_path));
            const auto manifest = parse_image_manifest(read_file(manifest_path));
            DetectionFiles detections;
            for (const auto &row : manifest) {
                const fs::path file = fs::path(detections_dir) / detection_file_name(row.file_name);
                auto &lines = detections[row.file_name];
                if (fs::exists(file)) {
                    lines = split_lines(read_file(file));
                } else if (opt.verbosity > 0) {
                    err << "canopydw: " << file.string() << " not found, image has no detections\n";
                }
            }
            const auto report = ingest_image_batch(wh, manifest, detections, class_map);
            print_report(out, format, report);
            report_issues(err, report);
            return report.errors.empty() ? 0 : 1;
        } else if (survey_cmd->parsed()) {
            const auto id = survey_id.empty() ? fs::path(survey_path).stem().string() : survey_id;
            const auto records = ingest_survey(wh, id, read_file(survey_path));
            print(out, format, {{"survey_id", "records"}, {{id, std::to_string(records.size())}}});
        } else if (reconcile_cmd->parsed()) {
            const auto metrics = reconcile(wh, reconcile_survey, opt.radius_m);
            out << (format == Format::Csv ? metrics_csv(metrics) : metrics_text(metrics));
        } else if (query_cmd->parsed()) {
            std::vector<std::pair<std::string, std::string>> params;
            for (const auto &[name, values] : query_flags) {
                for (const auto &v : values) {
                    params.emplace_back(name, v);
                }
            }
            print(out, format, run_query(wh, query_spec_from_params(params)));
        } else if (trend_cmd->parsed()) {
            print(out, format, species_trend(wh, trend_species, *parse_granularity(granularity)));
        } else if (usage_cmd->parsed()) {
            print(out, format, image_usage_report(wh));
        } else if (stats_cmd->parsed()) {
            const auto stats = wh.stats();
            out << (format == Format::Csv ? stats_table(stats).to_csv() : stats_text(stats));
        } else if (estimate_cmd->parsed()) {
            const auto report = estimate_from_warehouse(wh, events_per_year, years);
            out << (format == Format::Csv ? estimate_table(report).to_csv() : estimate_text(report));
        }
        return 0;
    } catch (const Error &e) {
        if (e.kind() == ErrorKind::Usage || e.kind() == ErrorKind::InvalidSpec) {
            return usage(e.what());
        }
        err << "canopydw: " << to_string(e.kind()) << ": " << e.what();
        if (e.line() != 0) {
            err << " (line " << e.line() << ')';
        }
        err << '\n';
        return 1;
    } catch (const std::exception &e) {
        err << "canopydw: " << e.what() << '\n';
        return 1;
    }
}

} // namespace canopydw
