#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <vector>

namespace sigauth {

// Derives a 64-bit seed from integer words and an optional label.
// std::seed_seq's mixing is fully specified by the standard, so the result
// is the same on every conforming platform.
inline std::uint64_t derive_seed(std::initializer_list<std::uint64_t> words,
                                 std::string_view label = {}) {
  std::vector<std::uint32_t> material;
  material.reserve(words.size() * 2 + label.size() + 1);
  for (std::uint64_t w : words) {
    material.push_back(static_cast<std::uint32_t>(w & 0xffffffffu));
    material.push_back(static_cast<std::uint32_t>(w >> 32));
  }
  material.push_back(static_cast<std::uint32_t>(label.size()));
  for (char c : label) material.push_back(static_cast<unsigned char>(c));
  std::seed_seq seq(material.begin(), material.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

using Rng = std::mt19937_64;

}  // namespace sigauth
