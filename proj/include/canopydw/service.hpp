#pragma once

// HTTP/1.1 JSON interface over one warehouse.
//
//   GET  /v1/health                      liveness, never authenticated
//   POST /v1/images                      manifest rows + detection lines + class map
//   POST /v1/surveys                     survey rows under a survey id
//   POST /v1/reconcile                   radius_m, survey_id
//   GET  /v1/query                       query parameters, see query_spec_from_params
//   GET  /v1/trend?species=&granularity=
//   GET  /v1/image-usage
//   GET  /v1/stats
//   GET  /v1/estimate?years=&events_per_year=
//
// Tabular endpoints answer {"columns": [...], "rows": [[...], ...]} with the
// cells exactly as the CSV output renders them.
//
// Reads run concurrently; mutations run one at a time and additionally take
// the warehouse LOCK, so a writer in another process yields 409.

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace canopydw {

struct ServiceConfig {
    std::string bind_address = "127.0.0.1:8080"; ///< host:port, port 0 picks a free port
    std::filesystem::path warehouse_root;
    std::size_t max_body_bytes = 64u << 20;
    std::optional<std::string> auth_token; ///< expected as `Authorization: Bearer <token>`

    /// Throws Usage for a malformed bind address or a body limit below 1 MiB.
    void validate() const;
};

class Service {
public:
    /// Opens the warehouse. Throws like Warehouse::open and
    /// ServiceConfig::validate.
    explicit Service(ServiceConfig config);
    Service(const Service &) = delete;
    Service &operator=(const Service &) = delete;
    ~Service();

    /// Binds the listening socket and returns the bound port. Throws Io.
    int bind();

    /// Serves until stop(). Binds first if bind() was not called.
    void run();

    /// Safe from any thread, including before run() starts looping.
    void stop();

    const ServiceConfig &config() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace canopydw
