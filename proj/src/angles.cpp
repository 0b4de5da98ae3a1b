#include "rloc/angles.hpp"

#include <cmath>

#include "rloc/random.hpp"

namespace rloc {

double wrap_angle(double angle) {
  double wrapped = std::remainder(angle, 2.0 * kPi);  // [-pi, pi]
  if (wrapped <= -kPi) wrapped += 2.0 * kPi;
  return wrapped;
}

double angle_difference(double a, double b) { return wrap_angle(a - b); }

State state_error(const State& x, const State& reference, const PeriodicMask& periodic) {
  State e = x - reference;
  for (int i = 0; i < kStateDim; ++i) {
    if (periodic[i]) e[i] = wrap_angle(e[i]);
  }
  return e;
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, SeedStream stream, std::uint64_t index,
                          std::uint64_t subindex) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  h = splitmix64(h ^ index);
  h = splitmix64(h ^ subindex);
  return h;
}

}  // namespace rloc
