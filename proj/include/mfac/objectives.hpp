#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "mfac/core.hpp"
#include "mfac/models.hpp"
#include "mfac/netstack.hpp"
#include "mfac/simulate.hpp"

namespace mfac {

// Box center +- half_width in which actor targets are sampled.
struct ActorRegion {
  std::vector<double> center;
  std::vector<double> half_width;
};

// Centered at the empirical mean with half-width 3 population SDs per
// coordinate; zero widths are widened to 1e-3.
ActorRegion actor_region(EnsembleView states);

// n points, one per stratum of an n-way partition in every coordinate.
ParticleEnsemble latin_hypercube(std::size_t n, const ActorRegion& region, std::mt19937_64& rng);

// (1/N) sum_m [div S(Q_m) + |S(Q_m)|^2 / 2]. Gradients are overwritten.
double score_loss_and_grads(const Mlp& score, EnsembleView samples, std::span<double> grads);

struct CriticGrads {
  std::vector<double> v0;
  std::vector<std::vector<double>> grad_v;
};

// Shooting residual per path:
//   V0(X_0) - sum_j f_j h + sum_j G(t_j, X_j) . (sigma sqrt(h) xi)_j - g(X_T)
// using the costs and diffusion increments stored in the batch.
std::vector<double> shooting_residuals(const Mlp& v0, const std::vector<Mlp>& grad_v,
                                       const TrajectoryBatch& traj, double step);

// Mean squared shooting residual. When grads is non-null it is resized and
// overwritten with the gradient in every critic parameter.
double critic_loss_and_grads(const Mlp& v0, const std::vector<Mlp>& grad_v,
                             const TrajectoryBatch& traj, double step, CriticGrads* grads);

// Regression targets A_old(chi) + beta_a dtau grad_alpha H(t, chi, mu, A_old(chi), G(chi)).
ParticleEnsemble actor_targets(const MfgModel& model, double t, const Mlp& actor_old,
                               const Mlp& grad_v, const Measure& mu, EnsembleView points,
                               double beta_a, double dtau);

// (1/N) sum_m |A(chi_m) - target_m|^2 for one time step. Gradients overwritten.
double actor_loss_and_grads(const Mlp& actor, EnsembleView points, EnsembleView targets,
                            std::span<double> grads);

}  // namespace mfac
