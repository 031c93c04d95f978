#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cctype>
#include <string>

#include "gwsnake/errors.hpp"

namespace gwsnake {

using BigInt = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

inline double to_double(const Rat& r) { return r.template convert_to<double>(); }

inline std::string to_string(const Rat& r) { return r.str(); }

// Parses "p/q" or a bare integer.  Used for exact offspring weights; decimal
// input goes through the float path instead.
inline Rat parse_rational(const std::string& token) {
  auto bad = [&]() -> ParseError {
    return ParseError("not a rational literal: '" + token + "'");
  };
  if (token.empty()) throw bad();
  auto is_int = [](const std::string& s) {
    if (s.empty()) return false;
    std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
  };
  auto slash = token.find('/');
  if (slash == std::string::npos) {
    if (!is_int(token)) throw bad();
    return Rat(BigInt(token));
  }
  std::string num = token.substr(0, slash);
  std::string den = token.substr(slash + 1);
  if (!is_int(num) || !is_int(den)) throw bad();
  BigInt d(den);
  if (d == 0) throw ParseError("zero denominator in '" + token + "'");
  return Rat(BigInt(num), d);
}

}  // namespace gwsnake
