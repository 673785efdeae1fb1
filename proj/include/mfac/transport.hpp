#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mfac/core.hpp"
#include "mfac/rng.hpp"

namespace mfac {

// Row m is matched to column perm[m].
struct Assignment {
  std::vector<std::size_t> perm;
  double cost = 0.0;
};

// Exact minimum-cost assignment for an n x n row-major cost matrix
// (shortest augmenting paths with potentials, O(n^3)).
Assignment hungarian(std::span<const double> costs, std::size_t n);

// Squared-Euclidean optimal matching; T(source[m]) = target[perm[m]].
Assignment ot_match(EnsembleView source, EnsembleView target);

// Q_m = lambda * target[perm[m]] + (1 - lambda) * source[m].
ParticleEnsemble otgp_apply(EnsembleView source, EnsembleView target, const Assignment& match,
                            double lambda);

// Moves the LMC samples a fraction lambda = dtau * beta_mu of the way along
// the optimal matching towards the target samples.
ParticleEnsemble otgp_update(EnsembleView lmc, EnsembleView target, double dtau, double beta_mu);

// Empirical W2 between two ensembles. Sets larger than max_points are
// subsampled without replacement (seeded); the smaller set size wins.
double w2_empirical(EnsembleView a, EnsembleView b, std::size_t max_points = 200,
                    std::uint64_t seed = 0);

// (h/2) * sum over steps of W2(measures[j], samples[j])^2.
double w2_gap(std::span<const ParticleEnsemble> measures,
              std::span<const ParticleEnsemble> samples, double step, std::uint64_t seed = 0);

}  // namespace mfac
