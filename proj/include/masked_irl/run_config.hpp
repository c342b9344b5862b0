#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "masked_irl/dataset.hpp"
#include "masked_irl/encoder.hpp"
#include "masked_irl/llm.hpp"
#include "masked_irl/preferences.hpp"
#include "masked_irl/training.hpp"

namespace masked_irl {

enum class PreferencePool { kSparseDistance, kAll };
enum class ProviderKind { kOracle, kMock, kReplay, kLive };
enum class EvalInstruction { kClear, kTraining };

std::string_view to_string(PreferencePool p);
std::string_view to_string(ProviderKind p);
std::string_view to_string(EvalInstruction e);

/// Everything one run needs. Stored as a flat `key = value` file; see
/// RunConfig::keys() for the list.
struct RunConfig {
  std::uint64_t seed = 0;

  // world
  int train_configs = 4;
  int test_configs = 4;
  int pairs = 3;
  int perturbed = 5;

  // preferences and demonstrations
  PreferencePool preference_pool = PreferencePool::kSparseDistance;
  int train_preferences = 6;
  int test_preferences = 0;  // disjoint from the train ones; used for fine-tuning
  int demos_per_preference = 10;
  DemoSelection demo_selection = DemoSelection::kBest;
  double demo_temperature = 1.0;
  InstructionMode instruction_mode = InstructionMode::kClear;

  // annotation
  ProviderKind provider = ProviderKind::kOracle;
  double mock_p_flip = 0.0;
  double mock_p_miss = 0.0;
  std::string llm_model = "gpt-4o";
  std::string llm_base_url = "https://api.openai.com";
  double llm_temperature = 0.0;
  int annotation_rounds = 1;
  bool disambiguate = true;

  // training
  TrainMode mode = TrainMode::kMaskedIrl;
  double lambda = 10.0;
  double learning_rate = 1e-3;
  int batch_size = 64;
  int epochs = 300;
  int fine_tune_epochs = 0;
  int negatives = 8;
  int mask_draws = 1;
  Precision precision = Precision::kFloat32;
  int checkpoint_every = 0;
  std::string encoder = "hash";  // "hash" or "cache"
  int embed_dim = 512;
  std::string embedding_cache;   // JSONL file for encoder = cache

  // evaluation
  EvalInstruction eval_instruction = EvalInstruction::kClear;
  int eval_pairs = 1000;
  int variance_draws = 5;
  std::string label;  // method name in reports; defaults to the mode

  std::filesystem::path out = "runs/desk";

  /// All keys in file order.
  static const std::vector<std::string>& keys();
  /// Throws ValidationError for an unknown key or a malformed value.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;

  /// Checks ranges and cross-field constraints; throws ValidationError.
  void validate() const;

  TrainConfig train_config() const;
  TrainConfig fine_tune_config() const;
  DemoSpec demo_spec() const;
  std::string method_label() const;
  std::shared_ptr<const LanguageEncoder> make_encoder() const;

  /// Every key, one `key = value` line each.
  std::string to_text() const;
};

/// Parses `key = value` lines; `#` starts a comment. Later keys win.
RunConfig parse_run_config(std::string_view text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

/// Named sub-seeds of the master seed.
std::uint64_t stage_seed(const RunConfig& config, std::string_view stage);

}  // namespace masked_irl
