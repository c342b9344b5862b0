#include "masked_irl/encoder.hpp"

#include <cctype>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "masked_irl/errors.hpp"
#include "masked_irl/rng.hpp"

namespace masked_irl {

namespace {

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string w;
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isalnum(c)) {
      w.push_back(static_cast<char>(std::tolower(c)));
    } else if (!w.empty()) {
      out.push_back(std::move(w));
      w.clear();
    }
  }
  if (!w.empty()) out.push_back(std::move(w));
  return out;
}

}  // namespace

HashEncoder::HashEncoder(int dim) : dim_(dim) {
  if (dim <= 0) throw ValidationError("encoder dimension must be positive");
}

Eigen::VectorXd HashEncoder::encode(std::string_view text) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
  const auto tokens = words(text);
  auto add = [&](const std::string& gram) {
    const std::uint64_t h = fnv1a64(gram);
    const auto bucket = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_));
    v(bucket) += (h >> 63) ? 1.0 : -1.0;
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add("1:" + tokens[i]);
    if (i + 1 < tokens.size()) add("2:" + tokens[i] + " " + tokens[i + 1]);
  }
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return v;
}

EmbeddingCacheEncoder::EmbeddingCacheEncoder(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open embedding cache " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto record = nlohmann::json::parse(line);
    const int e = record.at("E").get<int>();
    const auto values = record.at("vector").get<std::vector<double>>();
    if (static_cast<int>(values.size()) != e) {
      throw ValidationError("embedding cache record length disagrees with its E field");
    }
    if (dim_ == 0) dim_ = e;
    if (e != dim_) throw ValidationError("embedding cache mixes dimensions");
    table_[record.at("text").get<std::string>()] =
        Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  }
  if (dim_ == 0) throw ValidationError("embedding cache " + path.string() + " is empty");
}

EmbeddingCacheEncoder::EmbeddingCacheEncoder(std::map<std::string, Eigen::VectorXd> table, int dim)
    : table_(table.begin(), table.end()), dim_(dim) {
  for (const auto& [text, v] : table_) {
    if (v.size() != dim_) throw ValidationError("embedding for \"" + text + "\" has the wrong length");
  }
}

Eigen::VectorXd EmbeddingCacheEncoder::encode(std::string_view text) const {
  const auto it = table_.find(text);
  if (it == table_.end()) {
    throw ValidationError("no cached embedding for \"" + std::string(text) + "\"");
  }
  return it->second;
}

}  // namespace masked_irl
