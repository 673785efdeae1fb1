#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mfac/core.hpp"
#include "mfac/neural.hpp"
#include "mfac/rng.hpp"

namespace mfac {

struct LmcConfig {
  std::size_t steps = 300;
  double step_size = 0.05;

  double horizon() const { return static_cast<double>(steps) * step_size; }
  void validate() const;
};

// x -> estimated grad log density at x.
using ScoreField = std::function<void(std::span<const double> x, std::span<double> out)>;

// Runs L <- L + (h/2) S(L) + sqrt(h) xi from each initial particle and returns
// the terminal particles. Particle m draws from stream key.with(key.a, key.b, m).
// Throws NumericalError naming the particle if |L| exceeds 1e6.
ParticleEnsemble lmc_sample(const ScoreField& score, const ParticleEnsemble& init,
                            const LmcConfig& cfg, const StreamKey& key);
ParticleEnsemble lmc_sample(const Mlp& score, const ParticleEnsemble& init, const LmcConfig& cfg,
                            const StreamKey& key);

// One LMC ensemble per time step, driven by that step's score network. Chains
// start from `warm` (the previous iteration's output) when given, otherwise
// from i.i.d. N(0, I). `iteration` keys the random streams.
std::vector<ParticleEnsemble> measures_for_iteration(const std::vector<Mlp>& scores,
                                                     const LmcConfig& cfg,
                                                     const std::vector<ParticleEnsemble>* warm,
                                                     std::size_t chains, std::uint64_t seed,
                                                     std::uint64_t iteration);

}  // namespace mfac
