#pragma once

#include <array>
#include <string>
#include <string_view>

#include <json.hpp>

#include "hasc/core.hpp"

namespace hasc {

enum class Pooling { att, avg, max };

enum Aspect : int { kUpload = 0, kSocial = 1, kCreator = 2 };
inline constexpr int kNumAspects = 3;
inline constexpr std::array<std::string_view, kNumAspects> kAspectNames = {"upload", "social", "creator"};

inline std::string_view to_string(Pooling p) {
  switch (p) {
    case Pooling::att: return "att";
    case Pooling::avg: return "avg";
    case Pooling::max: return "max";
  }
  return "?";
}

inline Pooling parse_pooling(std::string_view s) {
  if (s == "att" || s == "ATT") return Pooling::att;
  if (s == "avg" || s == "AVG") return Pooling::avg;
  if (s == "max" || s == "MAX") return Pooling::max;
  throw Error("unknown pooling \"" + std::string(s) + "\" (expected att, avg or max)");
}

// Which inputs feed the two bottom attention networks. Base embeddings are
// always present.
struct InputMask {
  bool aux = true;
  bool social = true;
  bool content = true;
  bool style = true;

  friend bool operator==(const InputMask&, const InputMask&) = default;
};

struct AttentionMode {
  Pooling bottom = Pooling::att;
  Pooling top = Pooling::att;
  std::array<bool, kNumAspects> aspects = {true, true, true};
  InputMask inputs;
  // Feed q_a rather than q_{C_i} to the aspect network for the creator aspect.
  bool creator_input_is_user = false;

  bool any_aspect() const { return aspects[0] || aspects[1] || aspects[2]; }

  static AttentionMode bpr() {
    AttentionMode m;
    m.aspects = {false, false, false};
    return m;
  }

  friend bool operator==(const AttentionMode&, const AttentionMode&) = default;
};

// "att,avg" -> bottom ATT, top AVG.
inline void parse_pooling_pair(std::string_view s, AttentionMode& mode) {
  const auto comma = s.find(',');
  if (comma == std::string_view::npos) throw Error("mode must look like bottom,top (e.g. att,att)");
  mode.bottom = parse_pooling(s.substr(0, comma));
  mode.top = parse_pooling(s.substr(comma + 1));
}

// "u+s+c", "u", "none", "all" -> aspect mask.
inline std::array<bool, kNumAspects> parse_aspects(std::string_view s) {
  std::array<bool, kNumAspects> out = {false, false, false};
  if (s == "none") return out;
  if (s == "all") return {true, true, true};
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto plus = s.find('+', start);
    const auto tok = s.substr(start, plus == std::string_view::npos ? std::string_view::npos : plus - start);
    if (tok == "u" || tok == "U" || tok == "upload") {
      out[kUpload] = true;
    } else if (tok == "s" || tok == "S" || tok == "social") {
      out[kSocial] = true;
    } else if (tok == "c" || tok == "C" || tok == "creator") {
      out[kCreator] = true;
    } else {
      throw Error("unknown aspect \"" + std::string(tok) + "\" (expected u, s, c, all or none)");
    }
    if (plus == std::string_view::npos) break;
    start = plus + 1;
  }
  return out;
}

// "base+aux+soc+vis_c+vis_s"; "vis_cs" enables both visual inputs.
inline InputMask parse_inputs(std::string_view s) {
  InputMask m{false, false, false, false};
  bool base = false;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto plus = s.find('+', start);
    const auto tok = s.substr(start, plus == std::string_view::npos ? std::string_view::npos : plus - start);
    if (tok == "base") {
      base = true;
    } else if (tok == "aux") {
      m.aux = true;
    } else if (tok == "soc") {
      m.social = true;
    } else if (tok == "vis_c") {
      m.content = true;
    } else if (tok == "vis_s") {
      m.style = true;
    } else if (tok == "vis_cs") {
      m.content = m.style = true;
    } else if (tok == "all") {
      m = InputMask{};
      base = true;
    } else {
      throw Error("unknown input embedding \"" + std::string(tok) + "\"");
    }
    if (plus == std::string_view::npos) break;
    start = plus + 1;
  }
  if (!base) throw Error("input embeddings must include base");
  return m;
}

inline std::string aspects_label(const std::array<bool, kNumAspects>& a) {
  std::string out;
  const char* letters[] = {"U", "S", "C"};
  for (int l = 0; l < kNumAspects; ++l) {
    if (!a[static_cast<std::size_t>(l)]) continue;
    if (!out.empty()) out += "+";
    out += letters[l];
  }
  return out.empty() ? "none" : out;
}

inline std::string inputs_label(const InputMask& m) {
  std::string out = "base";
  if (m.aux) out += "+aux";
  if (m.social) out += "+soc";
  if (m.content && m.style) {
    out += "+vis_cs";
  } else if (m.content) {
    out += "+vis_c";
  } else if (m.style) {
    out += "+vis_s";
  }
  return out;
}

inline nlohmann::ordered_json to_json(const AttentionMode& m) {
  nlohmann::ordered_json j;
  j["bottom"] = to_string(m.bottom);
  j["top"] = to_string(m.top);
  j["aspects"] = aspects_label(m.aspects);
  j["inputs"] = inputs_label(m.inputs);
  j["creator_input_is_user"] = m.creator_input_is_user;
  return j;
}

inline AttentionMode attention_mode_from_json(const nlohmann::json& j) {
  AttentionMode m;
  m.bottom = parse_pooling(j.at("bottom").get<std::string>());
  m.top = parse_pooling(j.at("top").get<std::string>());
  m.aspects = parse_aspects(j.at("aspects").get<std::string>());
  m.inputs = parse_inputs(j.at("inputs").get<std::string>());
  m.creator_input_is_user = j.value("creator_input_is_user", false);
  return m;
}

}  // namespace hasc
