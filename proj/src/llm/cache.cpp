#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "masked_irl/errors.hpp"
#include "masked_irl/llm.hpp"

namespace masked_irl {

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

}  // namespace

std::string sha256_hex(std::string_view text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

AnnotationCache::AnnotationCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(*path_);
  if (!in) return;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("key")) {
      throw ValidationError("annotation cache " + path_->string() + ": bad record on line " +
                            std::to_string(line_no));
    }
    Record r{j.at("key").get<std::string>(), j.value("family", ""), j.value("raw", ""),
             j.value("parsed", nlohmann::json()), j.value("timestamp", "")};
    records_[r.key] = std::move(r);
  }
}

std::string AnnotationCache::make_key(std::string_view family, std::string_view model, std::string_view system,
                                      std::string_view user) {
  // Length-prefixed fields, so no field boundary can be forged.
  std::string material;
  for (std::string_view part : {family, model, system, user}) {
    material += std::to_string(part.size());
    material += ':';
    material += part;
  }
  return sha256_hex(material);
}

std::optional<AnnotationCache::Record> AnnotationCache::find(const std::string& key) const {
  std::lock_guard lock(mutex_);
  const auto it = records_.find(key);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

void AnnotationCache::store(Record record) {
  std::lock_guard lock(mutex_);
  if (record.timestamp.empty()) record.timestamp = utc_timestamp();
  if (path_) {
    std::ofstream out(*path_, std::ios::app);
    if (!out) throw ValidationError("cannot append to annotation cache " + path_->string());
    const nlohmann::json j{{"key", record.key},
                           {"family", record.family},
                           {"raw", record.raw},
                           {"parsed", record.parsed},
                           {"timestamp", record.timestamp}};
    out << j.dump() << '\n';
  }
  records_[record.key] = std::move(record);
}

std::size_t AnnotationCache::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

}  // namespace masked_irl
