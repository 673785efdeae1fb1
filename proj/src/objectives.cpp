#include "mfac/objectives.hpp"

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mfac {

ActorRegion actor_region(EnsembleView states) {
  require(states.size() >= 2, "actor_region: need at least two paths");
  ActorRegion region{empirical_mean(states), empirical_sd(states)};
  for (double& w : region.half_width) {
    w *= 3.0;
    if (w == 0.0) w = 1e-3;
  }
  return region;
}

ParticleEnsemble latin_hypercube(std::size_t n, const ActorRegion& region, std::mt19937_64& rng) {
  require(n >= 1, "latin_hypercube: need at least one point");
  const std::size_t d = region.center.size();
  require(region.half_width.size() == d, "latin_hypercube: region dimension mismatch");
  ParticleEnsemble out(n, d);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::size_t> strata(n);
  for (std::size_t i = 0; i < d; ++i) {
    std::iota(strata.begin(), strata.end(), 0);
    std::shuffle(strata.begin(), strata.end(), rng);
    const double lo = region.center[i] - region.half_width[i];
    const double width = 2.0 * region.half_width[i];
    for (std::size_t m = 0; m < n; ++m) {
      const double u = (static_cast<double>(strata[m]) + unif(rng)) / static_cast<double>(n);
      out[m][i] = lo + width * u;
    }
  }
  return out;
}

double score_loss_and_grads(const Mlp& score, EnsembleView samples, std::span<double> grads) {
  require(score.in_dim() == score.out_dim(), "score loss: network must be square");
  require(samples.dim() == score.in_dim(), "score loss: sample dimension mismatch");
  require(!samples.empty(), "score loss: no samples");
  require(grads.size() == score.param_count(), "score loss: gradient buffer has wrong size");
  std::fill(grads.begin(), grads.end(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  std::vector<double> s(score.out_dim()), up(score.out_dim());
  double loss = 0.0;
  for (std::size_t m = 0; m < samples.size(); ++m) {
    const auto x = samples[m];
    score.forward(x, s);
    double sq = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      sq += s[i] * s[i];
      up[i] = s[i] * inv_n;
    }
    loss += score.divergence(x) + 0.5 * sq;
    score.divergence_backward(x, inv_n, grads);
    score.backward(x, up, grads);
  }
  loss *= inv_n;
  if (!std::isfinite(loss)) throw NumericalError("score loss is not finite");
  return loss;
}

std::vector<double> shooting_residuals(const Mlp& v0, const std::vector<Mlp>& grad_v,
                                       const TrajectoryBatch& traj, double step) {
  const std::size_t steps = traj.steps();
  require(grad_v.size() == steps, "critic loss: need one gradient network per step");
  require(traj.diffusion.size() == steps && traj.running_cost.size() == steps,
          "critic loss: trajectory is missing its increments");
  const std::size_t n_paths = traj.paths();
  std::vector<double> res(n_paths);
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n_paths),
                    [&](const tbb::blocked_range<std::size_t>& r) {
                      std::vector<double> g(traj.states[0].dim()), v(1);
                      for (std::size_t m = r.begin(); m < r.end(); ++m) {
                        v0.forward(traj.states[0][m], v);
                        double acc = v[0];
                        for (std::size_t j = 0; j < steps; ++j) {
                          grad_v[j].forward(traj.states[j][m], g);
                          const auto dw = traj.diffusion[j][m];
                          double dot = 0.0;
                          for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * dw[i];
                          acc += dot - traj.running_cost[j][m] * step;
                        }
                        res[m] = acc - traj.terminal_cost[m];
                      }
                    });
  return res;
}

double critic_loss_and_grads(const Mlp& v0, const std::vector<Mlp>& grad_v,
                             const TrajectoryBatch& traj, double step, CriticGrads* grads) {
  const auto res = shooting_residuals(v0, grad_v, traj, step);
  const std::size_t n_paths = res.size();
  require(n_paths > 0, "critic loss: empty batch");
  const double inv_n = 1.0 / static_cast<double>(n_paths);
  double loss = 0.0;
  for (double r : res) loss += r * r;
  loss *= inv_n;
  if (!std::isfinite(loss)) throw NumericalError("critic loss is not finite");
  if (!grads) return loss;

  const std::size_t steps = grad_v.size();
  grads->v0.assign(v0.param_count(), 0.0);
  grads->grad_v.assign(steps, std::vector<double>(grad_v.empty() ? 0 : grad_v[0].param_count()));
  std::vector<double> up(1);
  for (std::size_t m = 0; m < n_paths; ++m) {
    up[0] = 2.0 * res[m] * inv_n;
    v0.backward(traj.states[0][m], up, grads->v0);
  }
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, steps),
                    [&](const tbb::blocked_range<std::size_t>& r) {
                      std::vector<double> u(traj.states[0].dim());
                      for (std::size_t j = r.begin(); j < r.end(); ++j) {
                        auto& gj = grads->grad_v[j];
                        for (std::size_t m = 0; m < n_paths; ++m) {
                          const auto dw = traj.diffusion[j][m];
                          const double s = 2.0 * res[m] * inv_n;
                          for (std::size_t i = 0; i < u.size(); ++i) u[i] = s * dw[i];
                          grad_v[j].backward(traj.states[j][m], u, gj);
                        }
                      }
                    });
  return loss;
}

ParticleEnsemble actor_targets(const MfgModel& model, double t, const Mlp& actor_old,
                               const Mlp& grad_v, const Measure& mu, EnsembleView points,
                               double beta_a, double dtau) {
  const std::size_t n = model.control_dim();
  ParticleEnsemble out(points.size(), n);
  std::vector<double> g(model.state_dim()), dh(n);
  for (std::size_t m = 0; m < points.size(); ++m) {
    const auto x = points[m];
    auto y = out[m];
    actor_old.forward(x, y);
    grad_v.forward(x, g);
    model.grad_alpha_hamiltonian(t, x, mu, y, g, dh);
    for (std::size_t i = 0; i < n; ++i) y[i] += beta_a * dtau * dh[i];
  }
  return out;
}

double actor_loss_and_grads(const Mlp& actor, EnsembleView points, EnsembleView targets,
                            std::span<double> grads) {
  require(points.size() == targets.size() && !points.empty(),
          "actor loss: points and targets differ in count");
  require(targets.dim() == actor.out_dim(), "actor loss: target dimension mismatch");
  require(grads.size() == actor.param_count(), "actor loss: gradient buffer has wrong size");
  std::fill(grads.begin(), grads.end(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(points.size());
  std::vector<double> a(actor.out_dim()), up(actor.out_dim());
  double loss = 0.0;
  for (std::size_t m = 0; m < points.size(); ++m) {
    actor.forward(points[m], a);
    const auto y = targets[m];
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double e = a[i] - y[i];
      loss += e * e;
      up[i] = 2.0 * e * inv_n;
    }
    actor.backward(points[m], up, grads);
  }
  loss *= inv_n;
  if (!std::isfinite(loss)) throw NumericalError("actor loss is not finite");
  return loss;
}

}  // namespace mfac
