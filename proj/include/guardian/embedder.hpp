#pragma once

#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace guardian::embedding {

struct EmbeddingConfig {
  std::size_t dim = 64;
  std::uint64_t hash_seed = 0x5eed'0f'6a7d'1a40ULL;
  bool lowercase = true;
};

class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Text to fixed-width vector.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> embed(std::string_view text) const = 0;
};

std::vector<std::string> tokenize(std::string_view text, bool lowercase);

/// Signed feature hashing of alphanumeric tokens, L2-normalized.
std::vector<double> embed(const EmbeddingConfig& cfg, std::string_view text);

class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(EmbeddingConfig cfg = {});
  std::size_t dim() const override { return cfg_.dim; }
  std::vector<double> embed(std::string_view text) const override;
  const EmbeddingConfig& config() const { return cfg_; }

 private:
  EmbeddingConfig cfg_;
};

/// Delegates to an HTTP service: POST {"text": ...} -> {"vector": [...]}.
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(std::string url, std::size_t dim,
                 std::chrono::milliseconds timeout = std::chrono::seconds(30));
  std::size_t dim() const override { return dim_; }
  std::vector<double> embed(std::string_view text) const override;

 private:
  std::string url_;
  std::size_t dim_;
  std::chrono::milliseconds timeout_;
};

}  // namespace guardian::embedding
