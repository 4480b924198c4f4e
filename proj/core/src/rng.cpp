#include "sgdclt/rng.hpp"

#include <array>

namespace sgdclt {

namespace {

std::mt19937_64 seeded_engine(std::uint64_t master_seed, std::uint64_t stream) {
  // std::seed_seq's mixing is specified exactly by the standard.
  const std::array<std::uint32_t, 4> words{
      static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace

Rng::Rng(std::uint64_t master_seed, std::uint64_t stream)
    : engine_(seeded_engine(master_seed, stream)) {}

}  // namespace sgdclt
