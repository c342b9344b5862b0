#include "masked_irl/preferences.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "masked_irl/errors.hpp"

namespace masked_irl {

namespace {

using namespace layout;

constexpr std::array<int, 2> kTableIdx{kEefZ, kTableZ};
constexpr std::array<int, 4> kHumanIdx{kEefX, kEefY, kHumanX, kHumanY};
constexpr std::array<int, 4> kLaptopIdx{kEefX, kEefY, kLaptopX, kLaptopY};
constexpr std::array<int, 6> kFaceIdx{kEefX, kEefY, kEefZ, kHumanX, kHumanY, kHumanZ};
// World z component of the local x-axis: R_zx.
constexpr std::array<int, 1> kOrientIdx{rotation(2, 0)};

constexpr bool is_distance_feature(FeatureId f) {
  return f == FeatureId::kTable || f == FeatureId::kHuman || f == FeatureId::kLaptop;
}

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

struct Templates {
  std::string_view positive;
  std::string_view negative;
  std::string_view referent;  // empty when the feature has no ambiguous form
};

const Templates& templates(FeatureId f) {
  static const std::array<Templates, kFeatureCount> table{{
      {"Stay close to the table", "Stay away from the table", "The table"},
      {"Stay close to the human", "Stay away from the human", "The human"},
      {"Stay close to the laptop", "Stay away from the laptop", "The laptop"},
      {"Keep the mug near my face", "Keep the mug away from my face", ""},
      {"Keep the mug upright", "Tilt the mug", ""},
  }};
  return table[static_cast<std::size_t>(f)];
}

constexpr std::string_view kCloseFragment = "Stay close";
constexpr std::string_view kAwayFragment = "Stay away";

/// Lowercase words with punctuation removed and articles dropped.
std::string normalize_clause(std::string_view clause) {
  std::vector<std::string> words;
  std::string word;
  auto flush = [&] {
    if (!word.empty() && word != "the" && word != "a" && word != "an") words.push_back(word);
    word.clear();
  };
  for (char raw : clause) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isalnum(c) || c == '\'') {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

const std::map<std::string, std::pair<int, int>>& clause_lookup() {
  static const auto lookup = [] {
    std::map<std::string, std::pair<int, int>> m;
    for (FeatureId f : kAllFeatures) {
      const auto& t = templates(f);
      m[normalize_clause(t.positive)] = {static_cast<int>(f), +1};
      m[normalize_clause(t.negative)] = {static_cast<int>(f), -1};
    }
    return m;
  }();
  return lookup;
}

std::vector<std::string_view> split_clauses(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t begin = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '.' || text[i] == ';' || text[i] == '\n' || text[i] == '!') {
      out.push_back(text.substr(begin, i - begin));
      begin = i + 1;
    }
  }
  return out;
}

}  // namespace

std::string_view feature_name(FeatureId f) {
  switch (f) {
    case FeatureId::kTable: return "table";
    case FeatureId::kHuman: return "human";
    case FeatureId::kLaptop: return "laptop";
    case FeatureId::kFace: return "face";
    case FeatureId::kOrient: return "orient";
  }
  return "table";
}

std::span<const int> relevant_indices(FeatureId f) {
  switch (f) {
    case FeatureId::kTable: return kTableIdx;
    case FeatureId::kHuman: return kHumanIdx;
    case FeatureId::kLaptop: return kLaptopIdx;
    case FeatureId::kFace: return kFaceIdx;
    case FeatureId::kOrient: return kOrientIdx;
  }
  return {};
}

double closeness(FeatureId f, const StateVector& s) {
  switch (f) {
    case FeatureId::kTable:
      return clip01(1.0 - std::abs(s[kEefZ] - s[kTableZ]) / closeness_scale::kVertical);
    case FeatureId::kHuman:
      return clip01(1.0 - std::hypot(s[kEefX] - s[kHumanX], s[kEefY] - s[kHumanY]) /
                              closeness_scale::kPlanar);
    case FeatureId::kLaptop:
      return clip01(1.0 - std::hypot(s[kEefX] - s[kLaptopX], s[kEefY] - s[kLaptopY]) /
                              closeness_scale::kPlanar);
    case FeatureId::kFace: {
      const double dz = s[kEefZ] - (s[kHumanZ] + closeness_scale::kFaceHeight);
      const double d = std::sqrt(std::pow(s[kEefX] - s[kHumanX], 2) +
                                 std::pow(s[kEefY] - s[kHumanY], 2) + dz * dz);
      return clip01(1.0 - d / closeness_scale::kSpatial);
    }
    case FeatureId::kOrient:
      return clip01((1.0 + s[rotation(2, 0)]) / 2.0);
  }
  return 0.0;
}

double gt_reward(const PreferenceWeights& w, const StateVector& state) {
  double r = 0.0;
  for (FeatureId f : kAllFeatures) {
    const int wi = w[static_cast<int>(f)];
    if (wi != 0) r += wi * closeness(f, state);
  }
  return r;
}

double gt_return(const PreferenceWeights& w, const Trajectory& trajectory) {
  double total = 0.0;
  for (const auto& s : trajectory.states()) total += gt_reward(w, s);
  return total;
}

std::array<double, kFeatureCount> mean_closeness(const Trajectory& trajectory) {
  std::array<double, kFeatureCount> sums{};
  for (const auto& s : trajectory.states()) {
    for (FeatureId f : kAllFeatures) sums[static_cast<std::size_t>(f)] += closeness(f, s);
  }
  for (double& v : sums) v /= kTrajectoryLength;
  return sums;
}

StateMask oracle_mask(const PreferenceWeights& w) {
  StateMask m;
  m.provenance = MaskProvenance::kOracle;
  for (FeatureId f : kAllFeatures) {
    if (w[static_cast<int>(f)] == 0) continue;
    for (int i : relevant_indices(f)) m.bits[static_cast<std::size_t>(i)] = 1;
  }
  return m;
}

std::vector<PreferenceWeights> enumerate_preferences() {
  std::vector<PreferenceWeights> out;
  std::array<int, kFeatureCount> w{};
  for (int code = 0; code < 243; ++code) {
    int rest = code;
    for (int i = kFeatureCount - 1; i >= 0; --i) {
      w[static_cast<std::size_t>(i)] = rest % 3 - 1;
      rest /= 3;
    }
    if (std::all_of(w.begin(), w.end(), [](int v) { return v == 0; })) continue;
    out.emplace_back(w);
  }
  return out;
}

std::vector<PreferenceWeights> sparse_distance_preferences() {
  std::vector<PreferenceWeights> out;
  for (FeatureId f : {FeatureId::kTable, FeatureId::kHuman, FeatureId::kLaptop}) {
    for (int sign : {+1, -1}) {
      std::array<int, kFeatureCount> w{};
      w[static_cast<std::size_t>(f)] = sign;
      out.emplace_back(w);
    }
  }
  return out;
}

std::string_view to_string(Density d) {
  switch (d) {
    case Density::kSparse: return "sparse";
    case Density::kMedium: return "medium";
    case Density::kDense: return "dense";
  }
  return "sparse";
}

Density classify_density(const PreferenceWeights& w) {
  const int n = w.active_count();
  if (n <= 2) return Density::kSparse;
  if (n == 3) return Density::kMedium;
  return Density::kDense;
}

std::string_view to_string(InstructionMode m) {
  switch (m) {
    case InstructionMode::kClear: return "clear";
    case InstructionMode::kReferentOmitted: return "referent_omitted";
    case InstructionMode::kExpressionOmitted: return "expression_omitted";
  }
  return "clear";
}

InstructionMode instruction_mode_from_string(std::string_view s) {
  if (s == "clear") return InstructionMode::kClear;
  if (s == "referent_omitted") return InstructionMode::kReferentOmitted;
  if (s == "expression_omitted") return InstructionMode::kExpressionOmitted;
  throw ValidationError("unknown instruction mode: " + std::string(s));
}

std::string_view clause_template(FeatureId f, int sign) {
  const auto& t = templates(f);
  return sign > 0 ? t.positive : t.negative;
}

CanonicalForm canonical_form(const PreferenceWeights& w) {
  CanonicalForm form;
  for (int i = 0; i < kFeatureCount; ++i) {
    if (w[i] != 0) form.emplace_back(i, w[i]);
  }
  return form;
}

Instruction render_instruction_subset(const PreferenceWeights& w, unsigned feature_subset) {
  Instruction ins;
  ins.ambiguity = Ambiguity::kClear;
  CanonicalForm form;
  for (FeatureId f : kAllFeatures) {
    const int i = static_cast<int>(f);
    if (w[i] == 0 || (feature_subset & (1u << i)) == 0) continue;
    if (!ins.text.empty()) ins.text += ". ";
    ins.text += clause_template(f, w[i]);
    form.emplace_back(i, w[i]);
  }
  if (form.empty()) throw ValidationError("instruction subset selects no active feature");
  ins.canonical = std::move(form);
  return ins;
}

Instruction render_instruction(const PreferenceWeights& w, InstructionMode mode) {
  if (mode == InstructionMode::kClear) return render_instruction_subset(w, 0x1fu);

  if (w.active_count() != 1) {
    throw ValidationError("ambiguous instructions need exactly one active feature, got " +
                          w.to_string());
  }
  FeatureId active = FeatureId::kTable;
  for (FeatureId f : kAllFeatures) {
    if (w[static_cast<int>(f)] != 0) active = f;
  }
  if (!is_distance_feature(active)) {
    throw ValidationError("ambiguous instructions are limited to table, human and laptop");
  }
  const int sign = w[static_cast<int>(active)];
  Instruction ins;
  if (mode == InstructionMode::kReferentOmitted) {
    ins.text = std::string(sign > 0 ? kCloseFragment : kAwayFragment);
    ins.ambiguity = Ambiguity::kReferentOmitted;
  } else {
    ins.text = std::string(templates(active).referent);
    ins.ambiguity = Ambiguity::kExpressionOmitted;
  }
  return ins;
}

CanonicalForm parse_instruction(std::string_view text) {
  const auto& lookup = clause_lookup();
  std::map<int, int> found;
  for (std::string_view raw : split_clauses(text)) {
    const std::string clause = normalize_clause(raw);
    if (clause.empty()) continue;
    const auto it = lookup.find(clause);
    if (it == lookup.end()) return {};
    const auto [feature, sign] = it->second;
    const auto [pos, inserted] = found.emplace(feature, sign);
    if (!inserted && pos->second != sign) return {};  // contradictory clauses
  }
  return CanonicalForm(found.begin(), found.end());
}

std::optional<Fragment> parse_fragment(std::string_view text) {
  std::string norm;
  for (std::string_view raw : split_clauses(text)) {
    const std::string clause = normalize_clause(raw);
    if (clause.empty()) continue;
    if (!norm.empty()) return std::nullopt;  // fragments are single clauses
    norm = clause;
  }
  if (norm == normalize_clause(kCloseFragment)) return Fragment{+1, std::nullopt};
  if (norm == normalize_clause(kAwayFragment)) return Fragment{-1, std::nullopt};
  for (FeatureId f : kAllFeatures) {
    const auto& t = templates(f);
    if (!t.referent.empty() && norm == normalize_clause(t.referent)) return Fragment{std::nullopt, f};
  }
  return std::nullopt;
}

std::vector<FeatureId> fragment_features(const Fragment& fragment) {
  if (fragment.feature) return {*fragment.feature};
  return {FeatureId::kTable, FeatureId::kHuman, FeatureId::kLaptop};
}

}  // namespace masked_irl
