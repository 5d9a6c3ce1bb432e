#include "scimine/http.hpp"

#include "scimine/error.hpp"

#include "httplib.h"

namespace scimine {

std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

HttpPost default_http_post(int timeout_seconds) {
  return [timeout_seconds](const std::string& url, const std::string& body,
                           const Headers& headers) -> std::pair<int, std::string> {
    auto [origin, path] = split_url(url);
    httplib::Client client(origin);
    client.set_connection_timeout(timeout_seconds, 0);
    client.set_read_timeout(timeout_seconds, 0);
    client.set_write_timeout(timeout_seconds, 0);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path.empty() ? "/" : path, h, body, "application/json");
    if (!res) throw Error(ErrorCode::Network, "POST " + url + ": " + httplib::to_string(res.error()));
    return {res->status, res->body};
  };
}

}  // namespace scimine
