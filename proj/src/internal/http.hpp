#pragma once

#include <chrono>
#include <map>
#include <string>

#include <json.hpp>

namespace guardian::internal {

struct HttpError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// POSTs a JSON body and parses a JSON reply. Throws HttpError on transport
/// failure, non-200 status or unparsable body.
nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         std::chrono::milliseconds timeout,
                         const std::map<std::string, std::string>& headers = {});

}  // namespace guardian::internal
