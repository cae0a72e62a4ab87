#ifndef TRAJINSPECT_SERVICE_HPP
#define TRAJINSPECT_SERVICE_HPP

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "trajinspect/bundle.hpp"

namespace trajinspect {

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

/// Error body for every non-success response.
nlohmann::json api_error(std::string_view code, std::string_view message);

/// The JSON API over one study bundle, independent of any transport.
/// Artifacts are read-only after construction; cases are the only mutable
/// state, and every case write reaches disk before the call returns.
class StudyService {
public:
    /// Loads and verifies the bundle; throws if it is invalid.
    explicit StudyService(std::filesystem::path bundle_dir);
    ~StudyService();
    StudyService(const StudyService&) = delete;
    StudyService& operator=(const StudyService&) = delete;

    /// Dispatches one request. `path` excludes the query string. Never throws.
    ApiResponse handle(std::string_view method, std::string_view path,
                       const std::map<std::string, std::string>& query, std::string_view body);

    const Study& study() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// HTTP/1.1 front end for a StudyService.
class HttpServer {
public:
    explicit HttpServer(std::shared_ptr<StudyService> service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds the socket; port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void listen();
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace trajinspect

#endif  // TRAJINSPECT_SERVICE_HPP
