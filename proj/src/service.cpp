#include "canopydw/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "canopydw/capacity.hpp"
#include "canopydw/csv.hpp"
#include "canopydw/error.hpp"
#include "canopydw/ingest.hpp"
#include "canopydw/query.hpp"
#include "canopydw/reconcile.hpp"
#include "canopydw/storage.hpp"

namespace canopydw {

namespace {

using nlohmann::json;

constexpr std::size_t kMinBodyBytes = 1u << 20;
constexpr std::string_view kJson = "application/json";

std::vector<std::string> split_header(std::string_view header) {
    std::vector<std::string> names;
    std::size_t start = 0;
    while (true) {
        const auto comma = header.find(',', start);
        names.emplace_back(header.substr(start, comma - start));
        if (comma == std::string_view::npos) {
            return names;
        }
        start = comma + 1;
    }
}

[[noreturn]] void bad_body(const std::string &message) { throw Error(ErrorKind::Parse, message); }

// Scalar JSON value as the text its CSV cell would hold; null is an empty cell.
std::string cell_text(const json &value, std::string_view field) {
    switch (value.type()) {
    case json::value_t::string:
        return value.get<std::string>();
    case json::value_t::number_integer:
    case json::value_t::number_unsigned:
        return value.dump();
    case json::value_t::number_float:
        return csv::format_real(value.get<double>());
    case json::value_t::null:
        return {};
    default:
        bad_body("field " + std::string(field) + " must be a string or a number");
    }
}

// Orders the members of `object` by `header`, rejecting unknown names.
std::vector<std::string> object_to_fields(const json &object, std::string_view header, std::string_view what) {
    if (!object.is_object()) {
        bad_body(std::string(what) + " must be an object");
    }
    const auto names = split_header(header);
    for (const auto &[key, _] : object.items()) {
        if (std::find(names.begin(), names.end(), key) == names.end()) {
            bad_body("unknown " + std::string(what) + " field " + key);
        }
    }
    std::vector<std::string> fields;
    fields.reserve(names.size());
    for (const auto &name : names) {
        const auto it = object.find(name);
        fields.push_back(it == object.end() ? std::string() : cell_text(*it, name));
    }
    return fields;
}

std::vector<std::string> string_array(const json &body, const char *key) {
    const auto it = body.find(key);
    if (it == body.end()) {
        bad_body(std::string("missing ") + key);
    }
    if (!it->is_array()) {
        bad_body(std::string(key) + " must be an array of strings");
    }
    std::vector<std::string> out;
    for (const auto &v : *it) {
        if (!v.is_string()) {
            bad_body(std::string(key) + " must be an array of strings");
        }
        out.push_back(v.get<std::string>());
    }
    return out;
}

json parse_body(const httplib::Request &req) {
    auto body = json::parse(req.body, nullptr, false);
    if (body.is_discarded()) {
        bad_body("request body is not valid JSON");
    }
    if (!body.is_object()) {
        bad_body("request body must be a JSON object");
    }
    return body;
}

json table_json(const ResultTable &table) { return json{{"columns", table.columns}, {"rows", table.rows}}; }

json report_json(const IngestReport &r) {
    json errors = json::array();
    for (const auto &e : r.errors) {
        errors.push_back({{"file_name", e.file_name}, {"line", e.line}, {"message", e.message}});
    }
    return {{"images_added", r.images_added},
            {"facts_added", r.facts_added},
            {"rows_skipped", r.rows_skipped},
            {"errors", std::move(errors)}};
}

json optional_json(const std::optional<double> &v) { return v ? json(*v) : json(nullptr); }

json metrics_json(const ValidationMetrics &m) {
    json species = json::object();
    for (const auto &[code, s] : m.per_species) {
        species[code] = {{"tp", s.tp},
                         {"fp", s.fp},
                         {"fn", s.fn},
                         {"precision", optional_json(s.precision)},
                         {"recall", optional_json(s.recall)}};
    }
    return {{"overall_accuracy", optional_json(m.overall_accuracy)},
            {"pairs", m.pairs},
            {"agreeing_pairs", m.agreeing_pairs},
            {"facts_considered", m.facts_considered},
            {"per_species", std::move(species)}};
}

std::int64_t int_param(const httplib::Request &req, const char *name, std::int64_t fallback) {
    if (!req.has_param(name)) {
        return fallback;
    }
    const auto v = csv::parse_int(req.get_param_value(name));
    if (!v) {
        throw Error(ErrorKind::InvalidSpec, std::string(name) + " must be an integer");
    }
    return *v;
}

int status_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Locked:
        return 409;
    case ErrorKind::Io:
    case ErrorKind::CorruptTable:
        return 500;
    default:
        return 400;
    }
}

void send_json(httplib::Response &res, int status, const json &body) {
    res.status = status;
    res.set_content(body.dump(), std::string(kJson));
}

std::string new_error_id() {
    static std::mutex mu;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(mu);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
    return buf;
}

void send_internal(httplib::Response &res, const char *what) {
    const auto id = new_error_id();
    std::cerr << "canopydw: internal error " << id << ": " << what << '\n';
    send_json(res, 500, {{"error", "internal"}, {"error_id", id}});
}

std::pair<std::string, int> split_bind(const std::string &address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos || colon == 0) {
        throw Error(ErrorKind::Usage, "bind address must be host:port, got '" + address + "'");
    }
    const auto port = csv::parse_int(std::string_view(address).substr(colon + 1));
    if (!port || *port < 0 || *port > 65535) {
        throw Error(ErrorKind::Usage, "bad port in bind address '" + address + "'");
    }
    auto host = address.substr(0, colon);
    if (host.size() > 2 && host.front() == '[' && host.back() == ']') {
        host = host.substr(1, host.size() - 2);
    }
    return {host, static_cast<int>(*port)};
}

} // namespace

void ServiceConfig::validate() const {
    split_bind(bind_address);
    if (max_body_bytes < kMinBodyBytes) {
        throw Error(ErrorKind::Usage, "max_body_bytes must be at least 1 MiB");
    }
    if (auth_token && auth_token->empty()) {
        throw Error(ErrorKind::Usage, "auth token must not be empty");
    }
}

struct Service::Impl {
    ServiceConfig config;
    Warehouse wh;
    httplib::Server server;
    // Readers share; a writer excludes everyone, including refreshes.
    std::shared_mutex state;
    std::mutex run_mu;
    bool bound = false;
    bool entered = false;
    bool stopped = false;

    Impl(ServiceConfig c) : config(std::move(c)), wh(Warehouse::open(config.warehouse_root)) {}

    template <class Fn>
    void read(httplib::Response &res, Fn &&fn) {
        guarded(res, [&] {
            {
                std::unique_lock lock(state);
                wh.refresh_shared();
            }
            std::shared_lock lock(state);
            fn();
        });
    }

    template <class Fn>
    void write(httplib::Response &res, Fn &&fn) {
        guarded(res, [&] {
            std::unique_lock lock(state);
            Warehouse::WriteGuard guard(wh);
            fn();
        });
    }

    template <class Fn>
    void guarded(httplib::Response &res, Fn &&fn) {
        try {
            fn();
        } catch (const Error &e) {
            if (status_for(e.kind()) == 500) {
                send_internal(res, e.what());
                return;
            }
            json body{{"error", std::string(to_string(e.kind()))}, {"message", e.what()}};
            if (e.line() != 0) {
                body["line"] = e.line();
            }
            send_json(res, status_for(e.kind()), body);
        } catch (const json::exception &e) {
            send_json(res, 400, {{"error", "parse"}, {"message", e.what()}});
        } catch (const std::exception &e) {
            send_internal(res, e.what());
        } catch (...) {
            send_internal(res, "unknown exception");
        }
    }

    void routes();
    void post_images(const httplib::Request &req, httplib::Response &res);
    void post_surveys(const httplib::Request &req, httplib::Response &res);
};

void Service::Impl::post_images(const httplib::Request &req, httplib::Response &res) {
    const auto body = parse_body(req);
    const ClassMap class_map(string_array(body, "class_map"));
    std::vector<json> items;
    if (const auto it = body.find("images"); it != body.end()) {
        if (!it->is_array()) {
            bad_body("images must be an array");
        }
        items.assign(it->begin(), it->end());
    } else {
        items.push_back(body);
    }
    std::vector<ImageManifestRow> manifest;
    DetectionFiles detections;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto &item = items[i];
        if (!item.is_object() || !item.contains("manifest")) {
            bad_body("image " + std::to_string(i + 1) + " lacks a manifest object");
        }
        auto row = parse_manifest_fields(object_to_fields(item["manifest"], kManifestHeader, "manifest"), i + 1);
        auto lines = item.contains("detections") ? string_array(item, "detections") : std::vector<std::string>{};
        if (!detections.emplace(row.file_name, std::move(lines)).second) {
            throw Error(ErrorKind::Duplicate, "image " + row.file_name + " appears twice in one request", i + 1);
        }
        manifest.push_back(std::move(row));
    }
    write(res, [&] { send_json(res, 200, report_json(ingest_image_batch(wh, manifest, detections, class_map))); });
}

void Service::Impl::post_surveys(const httplib::Request &req, httplib::Response &res) {
    const auto body = parse_body(req);
    const auto id = body.find("survey_id");
    if (id == body.end() || !id->is_string() || id->get<std::string>().empty()) {
        bad_body("survey_id must be a non-empty string");
    }
    const auto rows = body.find("rows");
    if (rows == body.end() || !rows->is_array()) {
        bad_body("rows must be an array of objects");
    }
    std::string text(kSurveyCsvHeader);
    text += '\n';
    for (const auto &row : *rows) {
        text += csv::join(object_to_fields(row, kSurveyCsvHeader, "survey"));
        text += '\n';
    }
    const auto survey_id = id->get<std::string>();
    write(res, [&] {
        const auto records = ingest_survey(wh, survey_id, text);
        send_json(res, 200, {{"survey_id", survey_id}, {"count", records.size()}});
    });
}

void Service::Impl::routes() {
    server.set_payload_max_length(config.max_body_bytes);

    if (config.auth_token) {
        const std::string expected = "Bearer " + *config.auth_token;
        server.set_pre_routing_handler([expected](const httplib::Request &req, httplib::Response &res) {
            if (req.path == "/v1/health" || req.get_header_value("Authorization") == expected) {
                return httplib::Server::HandlerResponse::Unhandled;
            }
            res.set_header("WWW-Authenticate", "Bearer");
            send_json(res, 401, {{"error", "unauthorized"}, {"message", "missing or invalid bearer token"}});
            return httplib::Server::HandlerResponse::Handled;
        });
    }

    server.set_exception_handler([](const httplib::Request &, httplib::Response &res, std::exception_ptr ep) {
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception &e) {
            send_internal(res, e.what());
        } catch (...) {
            send_internal(res, "unknown exception");
        }
    });

    server.Get("/v1/health", [](const httplib::Request &, httplib::Response &res) {
        send_json(res, 200, {{"status", "ok"}});
    });

    server.Post("/v1/images", [this](const httplib::Request &req, httplib::Response &res) {
        guarded(res, [&] { post_images(req, res); });
    });

    server.Post("/v1/surveys", [this](const httplib::Request &req, httplib::Response &res) {
        guarded(res, [&] { post_surveys(req, res); });
    });

    server.Post("/v1/reconcile", [this](const httplib::Request &req, httplib::Response &res) {
        guarded(res, [&] {
            const auto body = req.body.empty() ? json::object() : parse_body(req);
            const double radius = body.value("radius_m", kDefaultMatchRadiusM);
            const std::string survey_id = body.value("survey_id", std::string());
            write(res, [&] { send_json(res, 200, metrics_json(reconcile(wh, survey_id, radius))); });
        });
    });

    server.Get("/v1/query", [this](const httplib::Request &req, httplib::Response &res) {
        guarded(res, [&] {
            const auto spec = query_spec_from_params({req.params.begin(), req.params.end()});
            read(res, [&] { send_json(res, 200, table_json(run_query(wh, spec))); });
        });
    });

    server.Get("/v1/trend", [this](const httplib::Request &req, httplib::Response &res) {
        guarded(res, [&] {
            const auto species = req.get_param_value("species");
            const auto granularity = parse_granularity(
                req.has_param("granularity") ? req.get_param_value("granularity") : std::string("year"));
            if (species.empty() || !granularity) {
                throw Error(ErrorKind::InvalidSpec, "trend needs species and granularity year|quarter|month");
            }
            read(res, [&] { send_json(res, 200, table_json(species_trend(wh, species, *granularity))); });
        });
    });

    server.Get("/v1/image-usage", [this](const httplib::Request &, httplib::Response &res) {
        read(res, [&] { send_json(res, 200, table_json(image_usage_report(wh))); });
    });

    server.Get("/v1/stats", [this](const httplib::Request &, httplib::Response &res) {
        read(res, [&] { send_json(res, 200, table_json(stats_table(wh.stats()))); });
    });

    server.Get("/v1/estimate", [this](const httplib::Request &req, httplib::Response &res) {
        guarded(res, [&] {
            const auto years = int_param(req, "years", 10);
            const auto events = int_param(req, "events_per_year", 4);
            read(res, [&] { send_json(res, 200, table_json(estimate_table(estimate_from_warehouse(wh, events, years)))); });
        });
    });
}

Service::Service(ServiceConfig config) {
    config.validate();
    impl_ = std::make_unique<Impl>(std::move(config));
    impl_->routes();
}

Service::~Service() { stop(); }

const ServiceConfig &Service::config() const noexcept { return impl_->config; }

int Service::bind() {
    std::lock_guard lock(impl_->run_mu);
    const auto [host, port] = split_bind(impl_->config.bind_address);
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
        if (bound < 0) {
            throw Error(ErrorKind::Io, "cannot bind " + impl_->config.bind_address);
        }
    } else if (!impl_->server.bind_to_port(host, port)) {
        throw Error(ErrorKind::Io, "cannot bind " + impl_->config.bind_address);
    }
    impl_->bound = true;
    return bound;
}

void Service::run() {
    {
        std::unique_lock lock(impl_->run_mu);
        if (impl_->stopped) {
            return;
        }
        if (!impl_->bound) {
            lock.unlock();
            bind();
            lock.lock();
            if (impl_->stopped) {
                return;
            }
        }
        impl_->entered = true;
    }
    impl_->server.listen_after_bind();
}

void Service::stop() {
    if (!impl_) {
        return;
    }
    bool entered = false;
    {
        std::lock_guard lock(impl_->run_mu);
        impl_->stopped = true;
        entered = impl_->entered;
    }
    if (entered) {
        impl_->server.wait_until_ready();
        impl_->server.stop();
    }
}

} // namespace canopydw
