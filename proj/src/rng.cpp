#include "mfac/rng.hpp"

namespace mfac {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix_key(const StreamKey& key) {
  std::uint64_t h = splitmix64(key.seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(key.purpose));
  h = splitmix64(h ^ key.a);
  h = splitmix64(h ^ key.b);
  h = splitmix64(h ^ key.c);
  return h;
}

}  // namespace mfac
