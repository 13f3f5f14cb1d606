#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "wynn/types.hpp"

namespace wynn::protocol {

// Text line protocol shared by the interactive session and replay files:
//   artifact -> user:  SUGGEST <n> <x_1> ... <x_k>
//   user -> artifact:  OBSERVE <y>   |   QUIT
//   artifact -> user:  ESTIMATE <theta_1> ... <theta_p>   |   ERR <reason>
// Blank lines and lines starting with '#' are ignored.

struct Observe {
  double value;
};
struct Quit {};
struct Skip {};
struct Malformed {
  std::string reason;
};

using Command = std::variant<Observe, Quit, Skip, Malformed>;

/// Shortest representation that parses back to the same double; locale
/// independent.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline Command parse_line(std::string_view line) {
  const auto tokens = split_ws(line);
  if (tokens.empty() || tokens.front().front() == '#') return Skip{};
  if (tokens.front() == "QUIT") {
    if (tokens.size() != 1) return Malformed{"QUIT takes no arguments"};
    return Quit{};
  }
  if (tokens.front() == "OBSERVE") {
    if (tokens.size() != 2) return Malformed{"OBSERVE expects exactly one value"};
    double v = 0.0;
    if (!parse_double(tokens[1], v)) return Malformed{"not a finite decimal number: " + std::string(tokens[1])};
    return Observe{v};
  }
  return Malformed{"unknown command: " + std::string(tokens.front())};
}

inline std::string join_vector(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += format_double(v(i));
  }
  return s;
}

inline std::string suggest_line(long n, const Vector& x) { return "SUGGEST " + std::to_string(n) + " " + join_vector(x); }
inline std::string estimate_line(const Vector& theta) { return "ESTIMATE " + join_vector(theta); }

}  // namespace wynn::protocol
