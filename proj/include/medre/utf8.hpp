// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace medre::utf8 {

/// Decodes UTF-8 into code points. Invalid bytes decode to U+FFFD one byte at
/// a time so offsets stay total.
std::u32string decode(std::string_view s);

std::string encode(std::u32string_view s);

/// Number of code points in s.
std::size_t length(std::string_view s);

/// Maps code point offsets to byte offsets for one string.
class Index {
public:
  explicit Index(std::string_view s);

  std::size_t size() const { return byte_at_.size() - 1; }
  std::size_t byte_offset(std::size_t cp) const { return byte_at_.at(cp); }
  std::string_view slice(std::size_t cp_begin, std::size_t cp_end) const;

private:
  std::string_view text_;
  std::vector<std::size_t> byte_at_;
};

} // namespace medre::utf8
