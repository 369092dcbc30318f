#include "internal/http.hpp"

#include <httplib.h>

namespace guardian::internal {

namespace {

struct SplitUrl {
  std::string origin;
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw HttpError("malformed URL (no scheme): " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         std::chrono::milliseconds timeout,
                         const std::map<std::string, std::string>& headers) {
  const SplitUrl target = split_url(url);
  httplib::Client client(target.origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);

  auto res = client.Post(target.path, h, body.dump(), "application/json");
  if (!res) {
    throw HttpError("POST " + url + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw HttpError("POST " + url + " returned HTTP " + std::to_string(res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw HttpError("POST " + url + " returned invalid JSON: " + e.what());
  }
}

}  // namespace guardian::internal
