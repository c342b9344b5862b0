#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "masked_irl/core.hpp"
#include "masked_irl/preferences.hpp"

namespace masked_irl {

/// Prompt templates. Placeholders are [instruction], [ref_desc] and
/// [demo_desc].
namespace prompts {
std::string_view mask_system();
std::string_view mask_user();
std::string_view disambiguation_system();
std::string_view disambiguation_user();
}  // namespace prompts

struct Prompt {
  std::string family;  // "mask" or "disambiguation"
  std::string system;
  std::string user;
};

/// Header line of element names, then one line per timestep with the 19
/// values in layout order, fixed 3 decimals, space separated.
std::string render_trajectory_text(const Trajectory& trajectory);

/// Inverse of render_trajectory_text, reading the header and 21 rows that
/// start at `text`. Values are only as precise as the rendering.
Trajectory::States parse_trajectory_text(std::string_view text);

Prompt build_mask_prompt(std::string_view instruction);
/// Throws ValidationError unless demo and reference share config, start and goal.
Prompt build_disambiguation_prompt(std::string_view instruction, const Trajectory& demo,
                                   const Trajectory& reference);

/// Last balanced JSON object (or array) in `text`, if any parses.
std::optional<nlohmann::json> last_json_object(std::string_view text);
std::optional<nlohmann::json> last_json_array(std::string_view text);

/// Needs exactly the keys eef_pos(3), eef_rot(9), human(3), laptop(3),
/// table(1) with 0/1 entries. Throws ParseError otherwise.
StateMask parse_mask_response(std::string_view text);
/// Strings of the last JSON array, tagged disambiguated, with canonical
/// forms attached when they parse. More than two are truncated to two.
/// Throws ParseError on no array, non-strings or an empty list.
std::vector<Instruction> parse_disambiguation_response(std::string_view text);

struct ChatRequest {
  std::string system;
  std::string user;
  std::string model;
  double temperature = 0.0;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  /// Returns the assistant text. Throws AnnotationError when the provider
  /// cannot answer.
  virtual std::string complete(const ChatRequest& request) = 0;
  /// Model id recorded in cache keys.
  virtual std::string model() const = 0;
  virtual MaskProvenance provenance() const { return MaskProvenance::kLlm; }
};

/// Cache-only provider: every call fails, so only cache hits succeed.
class ReplayProvider final : public ChatProvider {
 public:
  explicit ReplayProvider(std::string model) : model_(std::move(model)) {}
  std::string complete(const ChatRequest& request) override;
  std::string model() const override { return model_; }

 private:
  std::string model_;
};

/// Offline stand-in for a chat model. It reads the instruction and the
/// trajectories back out of the prompt text and answers like an oracle,
/// then corrupts the answer: each mask bit flips with p_flip, and with
/// p_miss the strongest disambiguation candidate is dropped. Noise is seeded
/// by (seed, prompt), so the same prompt always gets the same answer.
class MockAnnotator final : public ChatProvider {
 public:
  struct Options {
    double p_flip = 0.0;
    double p_miss = 0.0;
    std::uint64_t seed = 0;
    double threshold = 0.05;  // minimum mean closeness difference
    int max_candidates = 2;
  };

  explicit MockAnnotator(Options options);
  std::string complete(const ChatRequest& request) override;
  std::string model() const override;
  MaskProvenance provenance() const override { return MaskProvenance::kMock; }

  /// Mask implied by an instruction before corruption. Ambiguous relation
  /// fragments attend to every object they could mean; unparseable text
  /// attends to everything.
  static StateMask instruction_mask(std::string_view instruction);
  /// Candidate (feature, sign) pairs before corruption, strongest first.
  std::vector<std::pair<FeatureId, int>> candidates(std::string_view instruction, const Trajectory& demo,
                                                    const Trajectory& reference) const;

 private:
  std::string answer_mask(const ChatRequest& request) const;
  std::string answer_disambiguation(const ChatRequest& request) const;

  Options options_;
};

/// OpenAI-compatible chat-completions client over HTTP(S).
class HttpChatProvider final : public ChatProvider {
 public:
  struct Options {
    std::string base_url = "https://api.openai.com";  // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string api_key;
    std::string model;
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};  // doubles per retry
    std::chrono::seconds timeout{120};
  };

  explicit HttpChatProvider(Options options);
  std::string complete(const ChatRequest& request) override;
  std::string model() const override { return options_.model; }

  /// Environment variable holding the API key.
  static constexpr const char* kApiKeyVariable = "MASKED_IRL_API_KEY";
  /// Builds options from the environment; throws ValidationError when the
  /// key is missing.
  static Options from_environment(std::string model, std::string base_url = {});

 private:
  Options options_;
};

/// Append-only JSONL cache of provider answers keyed by a SHA-256 of
/// (family, model, system text, user text).
class AnnotationCache {
 public:
  struct Record {
    std::string key;
    std::string family;
    std::string raw;
    nlohmann::json parsed;
    std::string timestamp;
  };

  /// In-memory only.
  AnnotationCache() = default;
  /// Loads `path` if it exists and appends new records to it.
  explicit AnnotationCache(std::filesystem::path path);

  static std::string make_key(std::string_view family, std::string_view model, std::string_view system,
                              std::string_view user);

  std::optional<Record> find(const std::string& key) const;
  void store(Record record);
  std::size_t size() const;

 private:
  std::optional<std::filesystem::path> path_;
  mutable std::mutex mutex_;
  std::map<std::string, Record> records_;
};

/// Hex SHA-256 of `text`.
std::string sha256_hex(std::string_view text);

struct LlmClient {
  ChatProvider* provider = nullptr;
  AnnotationCache* cache = nullptr;  // optional
  double temperature = 0.0;
  int attempts = 3;  // parse retries
  int round = 0;     // annotation round; rounds after the first get their own cache keys

  /// Model id as recorded in cache keys.
  std::string cache_model() const;
};

/// Cached; retries parse failures, then throws AnnotationError.
StateMask predict_mask(std::string_view instruction, const LlmClient& client);
/// Cached; retries parse failures, then throws AnnotationError.
std::vector<Instruction> disambiguate(const Instruction& instruction, const Trajectory& demo,
                                      const Trajectory& reference, const LlmClient& client);

}  // namespace masked_irl
