// SPDX-License-Identifier: Apache-2.0
#include "medre/utf8.hpp"

#include <stdexcept>

namespace medre::utf8 {

namespace {

// Length of the sequence starting at s[i], or 0 when it is not valid UTF-8.
std::size_t sequence_length(std::string_view s, std::size_t i, char32_t &cp) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  std::size_t n = 0;
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  } else if ((b0 & 0xE0) == 0xC0) {
    n = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    n = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    n = 4;
    cp = b0 & 0x07;
  } else {
    return 0;
  }
  if (i + n > s.size())
    return 0;
  for (std::size_t k = 1; k < n; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80)
      return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  return n;
}

} // namespace

std::u32string decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    char32_t cp = 0;
    const std::size_t n = sequence_length(s, i, cp);
    if (n == 0) {
      out.push_back(U'�');
      ++i;
    } else {
      out.push_back(cp);
      i += n;
    }
  }
  return out;
}

std::string encode(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

std::size_t length(std::string_view s) { return Index(s).size(); }

Index::Index(std::string_view s) : text_(s) {
  byte_at_.reserve(s.size() + 1);
  for (std::size_t i = 0; i < s.size();) {
    byte_at_.push_back(i);
    char32_t cp = 0;
    const std::size_t n = sequence_length(s, i, cp);
    i += n == 0 ? 1 : n;
  }
  byte_at_.push_back(s.size());
}

std::string_view Index::slice(std::size_t cp_begin, std::size_t cp_end) const {
  if (cp_begin > cp_end || cp_end > size())
    throw std::out_of_range("utf8::Index::slice: range out of bounds");
  const std::size_t b = byte_at_[cp_begin];
  return text_.substr(b, byte_at_[cp_end] - b);
}

} // namespace medre::utf8
