#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace scimine {

using Headers = std::vector<std::pair<std::string, std::string>>;

/// POST hook: (url, JSON body, extra headers) -> (status, body).
/// Throws Error(Network) when no response was received.
using HttpPost =
    std::function<std::pair<int, std::string>(const std::string& url, const std::string& body,
                                              const Headers& headers)>;

HttpPost default_http_post(int timeout_seconds = 60);

/// Splits "http://host:port/prefix" into origin and path prefix (no trailing slash).
std::pair<std::string, std::string> split_url(const std::string& url);

}  // namespace scimine
