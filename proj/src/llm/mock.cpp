#include <algorithm>
#include <charconv>
#include <cmath>

#include "masked_irl/errors.hpp"
#include "masked_irl/llm.hpp"
#include "masked_irl/rng.hpp"

namespace masked_irl {

namespace {

constexpr std::string_view kMaskMarker = "Language Instruction: ";
constexpr std::string_view kCommandMarker = "Language Command: ";
constexpr std::string_view kCommandEnd = " — user's explanation";
constexpr std::string_view kDemoMarker = "Demonstration: ";
constexpr std::string_view kReferenceMarker = "Reference Trajectory: ";

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string_view after(std::string_view text, std::string_view marker) {
  const auto pos = text.find(marker);
  if (pos == std::string_view::npos) {
    throw AnnotationError("mock annotator: prompt lacks \"" + std::string(marker) + "\"");
  }
  return text.substr(pos + marker.size());
}

std::string mask_json(const StateMask& mask) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& block : layout::kBlocks) {
    auto arr = nlohmann::json::array();
    for (int i = 0; i < block.size; ++i) arr.push_back(mask.bits[static_cast<std::size_t>(block.offset + i)]);
    j[std::string(block.name)] = arr;
  }
  return j.dump();
}

std::vector<std::pair<FeatureId, int>> rank_candidates(const Fragment& fragment, const Trajectory::States& demo,
                                                       const Trajectory::States& reference, double threshold,
                                                       int max_candidates) {
  struct Scored {
    FeatureId feature;
    int sign;
    double magnitude;
  };
  std::vector<Scored> scored;
  for (FeatureId f : fragment_features(fragment)) {
    double d = 0.0;
    for (int t = 0; t < kTrajectoryLength; ++t) {
      d += closeness(f, demo[static_cast<std::size_t>(t)]) - closeness(f, reference[static_cast<std::size_t>(t)]);
    }
    d /= kTrajectoryLength;
    if (std::abs(d) < threshold) continue;
    const int sign = d > 0.0 ? +1 : -1;
    if (fragment.sign && *fragment.sign != sign) continue;
    scored.push_back({f, sign, std::abs(d)});
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const Scored& a, const Scored& b) { return a.magnitude > b.magnitude; });
  if (static_cast<int>(scored.size()) > max_candidates) scored.resize(static_cast<std::size_t>(max_candidates));
  std::vector<std::pair<FeatureId, int>> out;
  for (const auto& s : scored) out.emplace_back(s.feature, s.sign);
  return out;
}

}  // namespace

MockAnnotator::MockAnnotator(Options options) : options_(options) {
  if (options_.p_flip < 0.0 || options_.p_flip > 1.0 || options_.p_miss < 0.0 || options_.p_miss > 1.0) {
    throw ValidationError("mock probabilities must lie in [0, 1]");
  }
  if (options_.max_candidates < 1) throw ValidationError("mock needs max_candidates >= 1");
}

std::string MockAnnotator::model() const {
  return "mock:seed=" + std::to_string(options_.seed) + ":p_flip=" + shortest(options_.p_flip) +
         ":p_miss=" + shortest(options_.p_miss);
}

StateMask MockAnnotator::instruction_mask(std::string_view instruction) {
  const CanonicalForm form = parse_instruction(instruction);
  if (!form.empty()) {
    std::array<int, kFeatureCount> w{};
    for (const auto& [feature, sign] : form) w[static_cast<std::size_t>(feature)] = sign;
    return oracle_mask(PreferenceWeights(w));
  }
  if (const auto fragment = parse_fragment(instruction)) {
    StateMask mask;
    for (FeatureId f : fragment_features(*fragment)) {
      for (int i : relevant_indices(f)) mask.bits[static_cast<std::size_t>(i)] = 1;
    }
    return mask;
  }
  return StateMask::all_ones(MaskProvenance::kMock);
}

std::vector<std::pair<FeatureId, int>> MockAnnotator::candidates(std::string_view instruction,
                                                                 const Trajectory& demo,
                                                                 const Trajectory& reference) const {
  const auto fragment = parse_fragment(instruction);
  if (!fragment) return {};
  // Go through the rendered text so this matches what the prompt carries.
  return rank_candidates(*fragment, parse_trajectory_text(render_trajectory_text(demo)),
                         parse_trajectory_text(render_trajectory_text(reference)), options_.threshold,
                         options_.max_candidates);
}

std::string MockAnnotator::complete(const ChatRequest& request) {
  if (request.user.find(kMaskMarker) != std::string::npos) return answer_mask(request);
  if (request.user.find(kCommandMarker) != std::string::npos) return answer_disambiguation(request);
  throw AnnotationError("mock annotator: unrecognized prompt");
}

std::string MockAnnotator::answer_mask(const ChatRequest& request) const {
  std::string_view instruction = after(request.user, kMaskMarker);
  instruction = instruction.substr(0, instruction.find('\n'));
  StateMask mask = instruction_mask(instruction);
  Rng rng(derive_seed(options_.seed, fnv1a64(request.user), 0));
  for (auto& bit : mask.bits) {
    if (rng.bernoulli(options_.p_flip)) bit = bit ? 0 : 1;
  }
  return mask_json(mask);
}

std::string MockAnnotator::answer_disambiguation(const ChatRequest& request) const {
  std::string_view instruction = after(request.user, kCommandMarker);
  instruction = instruction.substr(0, instruction.find(kCommandEnd));
  const auto fragment = parse_fragment(instruction);
  nlohmann::json out = nlohmann::json::array();
  if (fragment) {
    const auto demo = parse_trajectory_text(after(request.user, kDemoMarker));
    const auto reference = parse_trajectory_text(after(request.system, kReferenceMarker));
    auto ranked = rank_candidates(*fragment, demo, reference, options_.threshold, options_.max_candidates);
    Rng rng(derive_seed(options_.seed, fnv1a64(request.user), 1));
    if (!ranked.empty() && rng.bernoulli(options_.p_miss)) ranked.erase(ranked.begin());
    for (const auto& [f, sign] : ranked) out.push_back(std::string(clause_template(f, sign)));
  }
  return out.dump();
}

std::string ReplayProvider::complete(const ChatRequest&) {
  throw AnnotationError("replay provider has no cached answer for this prompt (model " + model_ + ")");
}

}  // namespace masked_irl
