#include "scenario_ddc/rng.hpp"

namespace scenario_ddc {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) noexcept {
  return mix64(mix64(parent) ^ mix64(index ^ 0xD1B54A32D192ED03ULL));
}

std::uint64_t derive_seed(std::uint64_t parent,
                          std::initializer_list<std::uint64_t> path) noexcept {
  std::uint64_t s = parent;
  for (auto i : path) s = derive_seed(s, i);
  return s;
}

}  // namespace scenario_ddc
