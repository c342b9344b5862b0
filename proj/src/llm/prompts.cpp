#include <algorithm>
#include <charconv>
#include <cmath>
#include <iostream>

#include "masked_irl/errors.hpp"
#include "masked_irl/llm.hpp"

namespace masked_irl {

namespace {

constexpr std::string_view kInstructionToken = "[instruction]";
constexpr std::string_view kReferenceToken = "[ref_desc]";
constexpr std::string_view kDemoToken = "[demo_desc]";

std::string substitute(std::string_view text, std::string_view token, std::string_view value) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t hit = text.find(token, pos);
    out.append(text.substr(pos, hit == std::string_view::npos ? std::string_view::npos : hit - pos));
    if (hit == std::string_view::npos) return out;
    out.append(value);
    pos = hit + token.size();
  }
}

void append_fixed3(std::string& out, double v) {
  // Values that round to zero print as 0.000, never -0.000.
  if (std::abs(v) < 0.0005) v = 0.0;
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 3);
  out.append(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

/// Index one past the bracket matching text[open], honoring JSON strings.
std::optional<std::size_t> matching_close(std::string_view text, std::size_t open) {
  const char o = text[open];
  const char c = o == '{' ? '}' : ']';
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_string) {
      if (ch == '\\') {
        ++i;
      } else if (ch == '"') {
        in_string = false;
      }
      continue;
    }
    if (ch == '"') {
      in_string = true;
    } else if (ch == o) {
      ++depth;
    } else if (ch == c) {
      if (--depth == 0) return i + 1;
    }
  }
  return std::nullopt;
}

std::optional<nlohmann::json> last_json(std::string_view text, char open) {
  std::optional<nlohmann::json> best;
  std::size_t best_end = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != open) continue;
    const auto end = matching_close(text, i);
    if (!end || (best && *end <= best_end)) continue;
    auto parsed = nlohmann::json::parse(text.substr(i, *end - i), nullptr, false);
    if (parsed.is_discarded()) continue;
    best = std::move(parsed);
    best_end = *end;
  }
  return best;
}

}  // namespace

std::string render_trajectory_text(const Trajectory& trajectory) {
  std::string out;
  const auto& names = layout::element_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out.append(names[i]);
  }
  out.push_back('\n');
  for (const StateVector& s : trajectory.states()) {
    for (int i = 0; i < kStateDim; ++i) {
      if (i > 0) out.push_back(' ');
      append_fixed3(out, s[i]);
    }
    out.push_back('\n');
  }
  return out;
}

Trajectory::States parse_trajectory_text(std::string_view text) {
  const std::string raw(text.substr(0, std::min<std::size_t>(text.size(), 200)));
  std::size_t pos = text.find_first_not_of(" \t\r\n");
  auto next_line = [&]() -> std::string_view {
    if (pos == std::string_view::npos || pos >= text.size()) throw ParseError("trajectory text ends early", raw);
    const std::size_t end = text.find('\n', pos);
    const std::string_view line = text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = end == std::string_view::npos ? text.size() : end + 1;
    return trim(line);
  };

  std::string header;
  for (std::size_t i = 0; i < layout::element_names().size(); ++i) {
    if (i > 0) header.push_back(' ');
    header.append(layout::element_names()[i]);
  }
  if (next_line() != header) throw ParseError("trajectory text has no element header", raw);

  Trajectory::States states;
  for (auto& state : states) {
    const std::string_view line = next_line();
    std::array<double, kStateDim> values{};
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (auto& v : values) {
      while (p < end && *p == ' ') ++p;
      const auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) throw ParseError("bad number in trajectory row", std::string(line));
      p = res.ptr;
    }
    while (p < end && *p == ' ') ++p;
    if (p != end) throw ParseError("trajectory row has more than 19 values", std::string(line));
    state = StateVector::from_span(values);
  }
  return states;
}

Prompt build_mask_prompt(std::string_view instruction) {
  if (trim(instruction).empty()) throw ValidationError("mask prompt needs a non-empty instruction");
  return Prompt{"mask", std::string(prompts::mask_system()),
                substitute(prompts::mask_user(), kInstructionToken, instruction)};
}

Prompt build_disambiguation_prompt(std::string_view instruction, const Trajectory& demo,
                                   const Trajectory& reference) {
  if (trim(instruction).empty()) throw ValidationError("disambiguation prompt needs a non-empty instruction");
  if (!(demo.config() == reference.config())) {
    throw ValidationError("demo and reference trajectories come from different configs");
  }
  if (!(demo.start() == reference.start()) || !(demo.goal() == reference.goal())) {
    throw ValidationError("demo and reference trajectories do not share start and goal");
  }
  const std::string ref = "\n" + render_trajectory_text(reference);
  const std::string dem = "\n" + render_trajectory_text(demo);
  std::string user = substitute(prompts::disambiguation_user(), kDemoToken, dem);
  user = substitute(user, kInstructionToken, instruction);
  return Prompt{"disambiguation", substitute(prompts::disambiguation_system(), kReferenceToken, ref),
                std::move(user)};
}

std::optional<nlohmann::json> last_json_object(std::string_view text) { return last_json(text, '{'); }
std::optional<nlohmann::json> last_json_array(std::string_view text) { return last_json(text, '['); }

StateMask parse_mask_response(std::string_view text) {
  const std::string raw(text);
  const auto json = last_json_object(text);
  if (!json) throw ParseError("no JSON object in mask response", raw);
  StateMask mask;
  mask.provenance = MaskProvenance::kLlm;
  std::size_t seen = 0;
  for (const auto& block : layout::kBlocks) {
    const auto it = json->find(std::string(block.name));
    if (it == json->end()) throw ParseError("mask response lacks key " + std::string(block.name), raw);
    ++seen;
    if (!it->is_array() || it->size() != static_cast<std::size_t>(block.size)) {
      throw ParseError("mask key " + std::string(block.name) + " needs " + std::to_string(block.size) + " entries",
                       raw);
    }
    for (int i = 0; i < block.size; ++i) {
      const auto& v = (*it)[static_cast<std::size_t>(i)];
      if (!v.is_number() || (v.get<double>() != 0.0 && v.get<double>() != 1.0)) {
        throw ParseError("mask entries must be 0 or 1", raw);
      }
      mask.bits[static_cast<std::size_t>(block.offset + i)] = v.get<double>() == 1.0 ? 1 : 0;
    }
  }
  if (json->size() != seen) throw ParseError("mask response has unexpected keys", raw);
  return mask;
}

std::vector<Instruction> parse_disambiguation_response(std::string_view text) {
  const std::string raw(text);
  const auto json = last_json_array(text);
  if (!json) throw ParseError("no JSON array in disambiguation response", raw);
  if (json->empty()) throw ParseError("disambiguation response is an empty list", raw);
  std::vector<Instruction> out;
  for (const auto& item : *json) {
    if (!item.is_string()) throw ParseError("disambiguation entries must be strings", raw);
    Instruction ins{item.get<std::string>(), Ambiguity::kDisambiguated, std::nullopt};
    if (auto form = parse_instruction(ins.text); !form.empty()) ins.canonical = std::move(form);
    out.push_back(std::move(ins));
  }
  if (out.size() > 2) {
    std::clog << "warning: disambiguation response lists " << out.size() << " commands; keeping the first 2\n";
    out.resize(2);
  }
  return out;
}

}  // namespace masked_irl
