#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace masked_irl {

/// Frozen text encoder: same text, same vector, forever.
class LanguageEncoder {
 public:
  virtual ~LanguageEncoder() = default;
  virtual int dim() const = 0;
  virtual Eigen::VectorXd encode(std::string_view text) const = 0;
  /// Short identifier written into checkpoints, e.g. "hash:512".
  virtual std::string id() const = 0;
};

/// Feature-hashing encoder over lowercase word unigrams and bigrams. Each
/// n-gram adds +-1 to one of `dim` buckets (FNV-1a); the result is
/// L2-normalized. Articles are kept so "the laptop" and "laptop" differ.
class HashEncoder final : public LanguageEncoder {
 public:
  explicit HashEncoder(int dim = 512);
  int dim() const override { return dim_; }
  Eigen::VectorXd encode(std::string_view text) const override;
  std::string id() const override { return "hash:" + std::to_string(dim_); }

 private:
  int dim_;
};

/// Looks up precomputed embeddings (e.g. from a pretrained sentence
/// encoder) in a line-delimited JSON file of {"text", "E", "vector"}
/// records. Unknown text throws ValidationError.
class EmbeddingCacheEncoder final : public LanguageEncoder {
 public:
  explicit EmbeddingCacheEncoder(const std::filesystem::path& path);
  EmbeddingCacheEncoder(std::map<std::string, Eigen::VectorXd> table, int dim);

  int dim() const override { return dim_; }
  Eigen::VectorXd encode(std::string_view text) const override;
  std::string id() const override { return "cache:" + std::to_string(dim_); }

 private:
  std::map<std::string, Eigen::VectorXd, std::less<>> table_;
  int dim_ = 0;
};

}  // namespace masked_irl
