#pragma once

// Extraction of squeezes, verdicts and votes from free-form model replies.

#include <regex>
#include <string>

#include "craft/error.hpp"
#include "craft/grid.hpp"

namespace craft {

namespace detail {

// Markdown emphasis and code marks around cells are common in replies.
inline std::string strip_markup(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char ch : text)
    if (ch != '*' && ch != '`' && ch != '_') out += ch;
  return out;
}

}  // namespace detail

/// Every `SQUEEZE <cell> AND <cell> [AT <strength>]` occurrence, in order,
/// canonicalized. In fixed mode any stated strength is replaced by the fixed
/// one; in varied mode a missing strength means medium.
inline Trajectory parse_trajectory(const std::string& text, const GridSpec& grid,
                                   SqueezeMode mode = SqueezeMode::fixed) {
  static const std::regex re(R"(\bsqueeze\s+([a-z]+\d+)\s+and\s+([a-z]+\d+)(?:\s+at\s+(min|medium|max)\b)?)",
                             std::regex::icase | std::regex::ECMAScript);
  const std::string clean = detail::strip_markup(text);
  Trajectory out;
  for (auto it = std::sregex_iterator(clean.begin(), clean.end(), re); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    SqueezeAction act;
    act.a = parse_cell(m[1].str(), grid);
    act.b = parse_cell(m[2].str(), grid);
    if (act.a == act.b) throw ParseError("squeeze uses cell " + format_cell(act.a) + " twice");
    if (mode == SqueezeMode::fixed) {
      act.strength = Strength::fixed;
    } else {
      act.strength = m[3].matched ? parse_strength(m[3].str()) : default_strength(mode);
    }
    out.push_back(canonicalize(act));
  }
  if (out.empty()) throw ParseError("no line of the form 'SQUEEZE <cell> AND <cell>' found");
  return out;
}

struct TerminationDecision {
  bool stop = false;
  std::string rationale;
};

/// The last STOP or CONTINUE token decides; the whole reply is the rationale.
inline TerminationDecision parse_verdict(const std::string& text) {
  static const std::regex re(R"(\b(stop|continue)\b)", std::regex::icase | std::regex::ECMAScript);
  const std::string clean = detail::strip_markup(text);
  std::string last;
  for (auto it = std::sregex_iterator(clean.begin(), clean.end(), re); it != std::sregex_iterator(); ++it)
    last = (*it)[1].str();
  if (last.empty()) throw ParseError("reply contains neither STOP nor CONTINUE");
  return {std::toupper(static_cast<unsigned char>(last[0])) == 'S', text};
}

/// Zero-based index from the last `VOTE: k` line, with k in 1..count.
inline std::size_t parse_vote(const std::string& text, std::size_t count) {
  static const std::regex re(R"(\bvote\s*:?\s*#?(\d+))", std::regex::icase | std::regex::ECMAScript);
  const std::string clean = detail::strip_markup(text);
  std::string last;
  for (auto it = std::sregex_iterator(clean.begin(), clean.end(), re); it != std::sregex_iterator(); ++it)
    last = (*it)[1].str();
  if (last.empty()) throw ParseError("no 'VOTE: <number>' line found");
  const unsigned long k = last.size() > 6 ? 0 : std::stoul(last);
  if (k < 1 || k > count)
    throw ParseError("vote " + last + " is outside 1.." + std::to_string(count));
  return k - 1;
}

}  // namespace craft
