#include "masked_irl/errors.hpp"
#include "masked_irl/llm.hpp"

namespace masked_irl {

namespace {

void check_client(const LlmClient& client) {
  if (client.provider == nullptr) throw ValidationError("LLM client has no provider");
  if (client.attempts < 1) throw ValidationError("LLM client needs at least one attempt");
}

/// Runs the provider until `parse` succeeds, at most client.attempts times.
template <class Parse>
auto query(const LlmClient& client, const Prompt& prompt, Parse parse) {
  const ChatRequest request{prompt.system, prompt.user, client.provider->model(), client.temperature};
  std::string last_error, last_raw;
  for (int attempt = 0; attempt < client.attempts; ++attempt) {
    std::string raw = client.provider->complete(request);
    try {
      return std::make_pair(parse(raw), std::move(raw));
    } catch (const ParseError& e) {
      last_error = e.what();
      last_raw = e.raw();
    }
  }
  if (last_raw.size() > 300) last_raw = last_raw.substr(0, 300) + "...";
  throw AnnotationError(prompt.family + " query failed after " + std::to_string(client.attempts) +
                        " attempts: " + last_error + "; last response: " + last_raw);
}

}  // namespace

std::string LlmClient::cache_model() const {
  const std::string model = provider != nullptr ? provider->model() : std::string();
  return round == 0 ? model : model + "#round=" + std::to_string(round);
}

StateMask predict_mask(std::string_view instruction, const LlmClient& client) {
  check_client(client);
  const Prompt prompt = build_mask_prompt(instruction);
  const std::string key =
      AnnotationCache::make_key(prompt.family, client.cache_model(), prompt.system, prompt.user);
  if (client.cache != nullptr) {
    if (const auto hit = client.cache->find(key)) {
      StateMask mask;
      const auto& bits = hit->parsed.at("bits");
      for (int i = 0; i < kStateDim; ++i) mask.bits[static_cast<std::size_t>(i)] = bits.at(static_cast<std::size_t>(i)).get<int>() ? 1 : 0;
      mask.provenance = mask_provenance_from_string(hit->parsed.at("provenance").get<std::string>());
      return mask;
    }
  }
  auto [mask, raw] = query(client, prompt, [](const std::string& r) { return parse_mask_response(r); });
  mask.provenance = client.provider->provenance();
  if (client.cache != nullptr) {
    nlohmann::json bits = nlohmann::json::array();
    for (auto b : mask.bits) bits.push_back(static_cast<int>(b));
    client.cache->store({key, prompt.family, raw,
                         nlohmann::json{{"bits", bits}, {"provenance", std::string(to_string(mask.provenance))}},
                         {}});
  }
  return mask;
}

std::vector<Instruction> disambiguate(const Instruction& instruction, const Trajectory& demo,
                                      const Trajectory& reference, const LlmClient& client) {
  check_client(client);
  if (!instruction.is_ambiguous()) {
    throw ValidationError("only ambiguous instructions are disambiguated: \"" + instruction.text + "\"");
  }
  const Prompt prompt = build_disambiguation_prompt(instruction.text, demo, reference);
  const std::string key =
      AnnotationCache::make_key(prompt.family, client.cache_model(), prompt.system, prompt.user);
  if (client.cache != nullptr) {
    if (const auto hit = client.cache->find(key)) return parse_disambiguation_response(hit->parsed.dump());
  }
  auto [result, raw] =
      query(client, prompt, [](const std::string& r) { return parse_disambiguation_response(r); });
  if (client.cache != nullptr) {
    nlohmann::json texts = nlohmann::json::array();
    for (const auto& i : result) texts.push_back(i.text);
    client.cache->store({key, prompt.family, raw, texts, {}});
  }
  return result;
}

}  // namespace masked_irl
