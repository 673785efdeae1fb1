#pragma once

#include <cstdint>
#include <random>

namespace mfac {

// Purpose tags for random streams. Every draw in the solver comes from a
// stream keyed by (seed, purpose, a, b, c), so results do not depend on the
// order in which parallel work is scheduled.
enum class Stream : std::uint64_t {
  kWeights = 1,
  kInitialState,
  kSynthetic,
  kLmcInit,
  kLmc,
  kSimulation,
  kLatinHypercube,
  kDiagnostics,
  kEvaluation,
  kSubsample,
};

struct StreamKey {
  std::uint64_t seed = 0;
  Stream purpose = Stream::kWeights;
  std::uint64_t a = 0;
  std::uint64_t b = 0;
  std::uint64_t c = 0;

  StreamKey with(std::uint64_t a_, std::uint64_t b_ = 0, std::uint64_t c_ = 0) const {
    return StreamKey{seed, purpose, a_, b_, c_};
  }
};

std::uint64_t mix_key(const StreamKey& key);

inline std::mt19937_64 make_stream(const StreamKey& key) {
  return std::mt19937_64(mix_key(key));
}

}  // namespace mfac
