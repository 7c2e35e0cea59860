#include "syncog/services.hpp"

#include <atomic>

#include <fmt/format.h>
#include <httplib.h>

namespace syncog::services {

namespace {

std::atomic<std::uint64_t> g_requests{0};

class HttpTransport : public Transport {
 public:
  HttpResponse post(const HttpRequest& request) override {
    const auto scheme = request.url.find("://");
    if (scheme == std::string::npos)
      throw TransportFailure(TransportFailure::Reason::Unreachable, "URL has no scheme: " + request.url);
    const auto slash = request.url.find('/', scheme + 3);
    const std::string origin = request.url.substr(0, slash);
    const std::string path = slash == std::string::npos ? "/" : request.url.substr(slash);

    httplib::Client client(origin);
    if (!client.is_valid())
      throw TransportFailure(TransportFailure::Reason::Unreachable, "invalid endpoint " + origin);
    const auto secs = static_cast<time_t>(request.timeout_s);
    const auto usecs = static_cast<time_t>((request.timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);

    ++g_requests;
    auto result = client.Post(path, headers, request.body, request.content_type);
    if (!result) {
      const auto err = result.error();
      const auto reason = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                              ? TransportFailure::Reason::Timeout
                              : TransportFailure::Reason::Unreachable;
      throw TransportFailure(reason, fmt::format("{}: {}", origin, httplib::to_string(err)));
    }
    HttpResponse out;
    out.status = result->status;
    out.body = result->body;
    out.content_type = result->get_header_value("Content-Type");
    return out;
  }
};

}  // namespace

std::shared_ptr<Transport> make_http_transport() { return std::make_shared<HttpTransport>(); }

std::uint64_t network_requests_issued() { return g_requests.load(); }

}  // namespace syncog::services
