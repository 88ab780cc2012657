#pragma once

#include <string>
#include <string_view>

namespace useq {

/// Finite alphabet; a letter is represented by its index as a double sample value.
struct Alphabet {
  std::string name;
  std::string letters;

  /// Index of `c`, or -1 when absent.
  int index_of(char c) const {
    auto pos = letters.find(c);
    return pos == std::string::npos ? -1 : static_cast<int>(pos);
  }
  int size() const { return static_cast<int>(letters.size()); }
  bool operator==(const Alphabet& o) const { return letters == o.letters; }
};

/// Resolves "binary", "dna" or "{letters}"; throws ConfigError otherwise.
Alphabet parse_alphabet(std::string_view name);

}  // namespace useq
