#include "guardian/embedder.hpp"

#include <cctype>
#include <cmath>

#include "guardian/rng.hpp"
#include "internal/http.hpp"

namespace guardian::embedding {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text, bool lowercase) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(lowercase ? static_cast<char>(std::tolower(c)) : ch);
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<double> embed(const EmbeddingConfig& cfg, std::string_view text) {
  if (cfg.dim < 8) throw std::invalid_argument("EmbeddingConfig: dim must be >= 8");
  std::vector<double> out(cfg.dim, 0.0);
  for (const auto& token : tokenize(text, cfg.lowercase)) {
    const std::uint64_t base = fnv1a(token);
    const std::uint64_t bucket_hash = splitmix64(base ^ cfg.hash_seed);
    const std::uint64_t sign_hash = splitmix64(bucket_hash ^ 0xa5a5a5a5a5a5a5a5ULL);
    out[bucket_hash % cfg.dim] += (sign_hash >> 63) ? -1.0 : 1.0;
  }
  double norm = 0.0;
  for (double v : out) norm += v * v;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& v : out) v /= norm;
  }
  return out;
}

HashingEmbedder::HashingEmbedder(EmbeddingConfig cfg) : cfg_(cfg) {
  if (cfg_.dim < 8) throw std::invalid_argument("EmbeddingConfig: dim must be >= 8");
}

std::vector<double> HashingEmbedder::embed(std::string_view text) const {
  return embedding::embed(cfg_, text);
}

RemoteEmbedder::RemoteEmbedder(std::string url, std::size_t dim, std::chrono::milliseconds timeout)
    : url_(std::move(url)), dim_(dim), timeout_(timeout) {}

std::vector<double> RemoteEmbedder::embed(std::string_view text) const {
  nlohmann::json reply;
  try {
    reply = internal::post_json(url_, {{"text", std::string(text)}}, timeout_);
  } catch (const internal::HttpError& e) {
    throw EmbeddingError(std::string("remote embedder: ") + e.what());
  }
  if (!reply.is_object() || !reply.contains("vector") || !reply["vector"].is_array()) {
    throw EmbeddingError("remote embedder: reply lacks a \"vector\" array");
  }
  std::vector<double> out;
  for (const auto& v : reply["vector"]) {
    if (!v.is_number()) throw EmbeddingError("remote embedder: non-numeric vector entry");
    out.push_back(v.get<double>());
    if (!std::isfinite(out.back())) throw EmbeddingError("remote embedder: non-finite entry");
  }
  if (out.size() != dim_) {
    throw EmbeddingError("remote embedder: expected " + std::to_string(dim_) + " values, got " +
                         std::to_string(out.size()));
  }
  return out;
}

}  // namespace guardian::embedding
