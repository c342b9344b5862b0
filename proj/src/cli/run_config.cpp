#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "masked_irl/errors.hpp"
#include "masked_irl/evaluation.hpp"
#include "masked_irl/run_config.hpp"

namespace masked_irl {

std::string_view to_string(PreferencePool p) { return p == PreferencePool::kAll ? "all" : "sparse_distance"; }

std::string_view to_string(ProviderKind p) {
  switch (p) {
    case ProviderKind::kOracle: return "oracle";
    case ProviderKind::kMock: return "mock";
    case ProviderKind::kReplay: return "replay";
    case ProviderKind::kLive: return "live";
  }
  return "oracle";
}

std::string_view to_string(EvalInstruction e) { return e == EvalInstruction::kClear ? "clear" : "training"; }

namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw ValidationError("bad value for " + std::string(key) + ": \"" + std::string(value) + "\"");
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || end != value.data() + value.size()) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value);
}

template <class E>
E parse_enum(std::string_view key, std::string_view value, std::initializer_list<E> options) {
  for (E e : options) {
    if (to_string(e) == value) return e;
  }
  bad_value(key, value);
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

#define INT_FIELD(name)                                                                     \
  Field {                                                                                   \
    #name, [](const RunConfig& c) { return std::to_string(c.name); },                      \
        [](RunConfig& c, std::string_view v) { c.name = parse_number<int>(#name, v); }      \
  }
#define DOUBLE_FIELD(name)                                                                  \
  Field {                                                                                   \
    #name, [](const RunConfig& c) { return format_number(c.name); },                       \
        [](RunConfig& c, std::string_view v) { c.name = parse_number<double>(#name, v); }   \
  }
#define STRING_FIELD(name)                                                                  \
  Field {                                                                                   \
    #name, [](const RunConfig& c) { return c.name; },                                      \
        [](RunConfig& c, std::string_view v) { c.name = std::string(v); }                  \
  }
#define ENUM_FIELD(name, ...)                                                               \
  Field {                                                                                   \
    #name, [](const RunConfig& c) { return std::string(to_string(c.name)); },              \
        [](RunConfig& c, std::string_view v) { c.name = parse_enum(#name, v, {__VA_ARGS__}); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      Field{"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
            [](RunConfig& c, std::string_view v) { c.seed = parse_number<std::uint64_t>("seed", v); }},
      INT_FIELD(train_configs),
      INT_FIELD(test_configs),
      INT_FIELD(pairs),
      INT_FIELD(perturbed),
      ENUM_FIELD(preference_pool, PreferencePool::kSparseDistance, PreferencePool::kAll),
      INT_FIELD(train_preferences),
      INT_FIELD(test_preferences),
      INT_FIELD(demos_per_preference),
      ENUM_FIELD(demo_selection, DemoSelection::kBest, DemoSelection::kBoltzmann),
      DOUBLE_FIELD(demo_temperature),
      ENUM_FIELD(instruction_mode, InstructionMode::kClear, InstructionMode::kReferentOmitted,
                 InstructionMode::kExpressionOmitted),
      ENUM_FIELD(provider, ProviderKind::kOracle, ProviderKind::kMock, ProviderKind::kReplay, ProviderKind::kLive),
      DOUBLE_FIELD(mock_p_flip),
      DOUBLE_FIELD(mock_p_miss),
      STRING_FIELD(llm_model),
      STRING_FIELD(llm_base_url),
      DOUBLE_FIELD(llm_temperature),
      INT_FIELD(annotation_rounds),
      Field{"disambiguate", [](const RunConfig& c) { return std::string(c.disambiguate ? "true" : "false"); },
            [](RunConfig& c, std::string_view v) { c.disambiguate = parse_bool("disambiguate", v); }},
      ENUM_FIELD(mode, TrainMode::kMaskedIrl, TrainMode::kExplicitMask, TrainMode::kLcRl),
      DOUBLE_FIELD(lambda),
      DOUBLE_FIELD(learning_rate),
      INT_FIELD(batch_size),
      INT_FIELD(epochs),
      INT_FIELD(fine_tune_epochs),
      INT_FIELD(negatives),
      INT_FIELD(mask_draws),
      ENUM_FIELD(precision, Precision::kFloat32, Precision::kFloat64),
      INT_FIELD(checkpoint_every),
      STRING_FIELD(encoder),
      INT_FIELD(embed_dim),
      STRING_FIELD(embedding_cache),
      ENUM_FIELD(eval_instruction, EvalInstruction::kClear, EvalInstruction::kTraining),
      INT_FIELD(eval_pairs),
      INT_FIELD(variance_draws),
      STRING_FIELD(label),
      Field{"out", [](const RunConfig& c) { return c.out.string(); },
            [](RunConfig& c, std::string_view v) { c.out = std::filesystem::path(std::string(v)); }},
  };
  return table;
}

const Field& field(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw ValidationError("unknown config key: " + std::string(key));
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
  }();
  return names;
}

void RunConfig::set(std::string_view key, std::string_view value) { field(key).set(*this, trim(value)); }

std::string RunConfig::get(std::string_view key) const { return field(key).get(*this); }

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
  };
  require(train_configs >= 1 && test_configs >= 1, "need at least one train and one test config");
  require(pairs >= 1 && perturbed >= 1, "need at least one pair and one perturbation");
  require(train_preferences >= 1 && test_preferences >= 0, "need at least one train preference");
  const std::size_t pool =
      preference_pool == PreferencePool::kAll ? enumerate_preferences().size() : sparse_distance_preferences().size();
  require(static_cast<std::size_t>(train_preferences + test_preferences) <= pool,
          "train + test preferences exceed the " + std::string(to_string(preference_pool)) + " pool of " +
              std::to_string(pool));
  require(demos_per_preference >= 1 && demos_per_preference <= train_configs * pairs,
          "demos_per_preference must be in [1, train_configs * pairs]");
  require(demo_temperature > 0.0, "demo_temperature must be positive");
  require(mock_p_flip >= 0.0 && mock_p_flip <= 1.0 && mock_p_miss >= 0.0 && mock_p_miss <= 1.0,
          "mock probabilities must be in [0, 1]");
  require(annotation_rounds >= 1, "annotation_rounds must be at least 1");
  require(fine_tune_epochs >= 0, "fine_tune_epochs must be non-negative");
  require(encoder == "hash" || encoder == "cache", "encoder must be hash or cache");
  require(encoder != "cache" || !embedding_cache.empty(), "encoder = cache needs embedding_cache");
  require(embed_dim >= 1, "embed_dim must be positive");
  require(eval_pairs >= 1 && variance_draws >= 2, "eval_pairs >= 1 and variance_draws >= 2 required");
  train_config().validate();
}

TrainConfig RunConfig::train_config() const {
  TrainConfig c;
  c.mode = mode;
  c.lambda = lambda;
  c.learning_rate = learning_rate;
  c.batch_size = batch_size;
  c.epochs = epochs;
  c.negatives = negatives;
  c.mask_draws = mask_draws;
  c.seed = stage_seed(*this, "train");
  c.checkpoint_every = checkpoint_every;
  c.precision = precision;
  return c;
}

TrainConfig RunConfig::fine_tune_config() const {
  TrainConfig c = train_config();
  c.epochs = fine_tune_epochs;
  c.seed = stage_seed(*this, "fine_tune");
  return c;
}

DemoSpec RunConfig::demo_spec() const {
  return DemoSpec{demos_per_preference, demo_selection, demo_temperature, instruction_mode};
}

std::string RunConfig::method_label() const { return label.empty() ? std::string(to_string(mode)) : label; }

std::shared_ptr<const LanguageEncoder> RunConfig::make_encoder() const {
  if (encoder == "cache") return std::make_shared<EmbeddingCacheEncoder>(embedding_cache);
  return std::make_shared<HashEncoder>(embed_dim);
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  for (const auto& f : fields()) out << f.key << " = " << f.get(*this) << '\n';
  return out.str();
}

RunConfig parse_run_config(std::string_view text, RunConfig base) {
  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError("config line " + std::to_string(line_no) + " is not key = value");
    }
    base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str(), std::move(base));
}

std::uint64_t stage_seed(const RunConfig& config, std::string_view stage) {
  return derive_seed(config.seed, fnv1a64(stage));
}

}  // namespace masked_irl
