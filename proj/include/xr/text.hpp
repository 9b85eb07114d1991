#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace xr {

inline std::string trim(std::string_view s) {
  const char* ws = " \t\r\n\f\v";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

inline std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto nl = s.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.emplace_back(s.substr(start));
      break;
    }
    lines.emplace_back(s.substr(start, nl - start));
    start = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
  }
  return lines;
}

// First whitespace-delimited token, lowercased, leading/trailing
// non-alphanumerics stripped. Used for True/False verdict normalization.
inline std::string normalized_first_token(std::string_view reply) {
  std::size_t b = reply.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  std::size_t e = reply.find_first_of(" \t\r\n", b);
  std::string tok(reply.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b));
  std::size_t lo = 0, hi = tok.size();
  auto alnum = [](char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
  };
  while (lo < hi && !alnum(tok[lo])) ++lo;
  while (hi > lo && !alnum(tok[hi - 1])) --hi;
  return to_lower(tok.substr(lo, hi - lo));
}

}  // namespace xr
