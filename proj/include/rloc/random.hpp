#pragma once

#include <cstdint>
#include <random>

namespace rloc {

using Rng = std::mt19937_64;

/// Named sub-streams for seed derivation, so that trials and epochs draw from
/// independent generators regardless of execution order.
enum class SeedStream : std::uint64_t {
  kExperience = 1,
  kCentres = 2,
  kLearning = 3,
  kSimulation = 4,
};

/// Derives a child seed from (master, stream, index, subindex) with SplitMix64
/// finalisation. Pure function: parallel and serial runs see the same seeds.
std::uint64_t derive_seed(std::uint64_t master, SeedStream stream, std::uint64_t index = 0,
                          std::uint64_t subindex = 0);

inline Rng make_rng(std::uint64_t master, SeedStream stream, std::uint64_t index = 0,
                    std::uint64_t subindex = 0) {
  return Rng(derive_seed(master, stream, index, subindex));
}

}  // namespace rloc
