#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "mfac/core.hpp"
#include "mfac/models.hpp"
#include "mfac/netstack.hpp"
#include "mfac/rng.hpp"

namespace mfac {

// Simulated paths, time-major: states[j] holds all paths at node j
// (j = 0..N_T), the other per-step arrays have N_T entries. `noise` keeps the
// standard normal draws, `diffusion` the realized sigma*sqrt(h)*xi, and the
// costs are those incurred along the way under the measures that were used.
struct TrajectoryBatch {
  TrajectoryBatch() = default;
  TrajectoryBatch(std::size_t paths, std::size_t steps, std::size_t state_dim,
                  std::size_t control_dim, std::size_t noise_dim);

  std::size_t paths() const { return states.empty() ? 0 : states[0].size(); }
  std::size_t steps() const { return controls.size(); }

  std::vector<ParticleEnsemble> states;
  std::vector<ParticleEnsemble> controls;
  std::vector<ParticleEnsemble> noise;
  std::vector<ParticleEnsemble> diffusion;
  std::vector<std::vector<double>> running_cost;
  std::vector<double> terminal_cost;
};

// i.i.d. draws from the product Gaussian; particle m uses its own stream.
ParticleEnsemble sample_initial(const GaussianLaw& law, std::size_t count, const StreamKey& key);

// Standard normal increments, one ensemble per step; path m draws all of its
// steps from stream key.with(key.a, m).
std::vector<ParticleEnsemble> draw_increments(std::size_t paths, std::size_t steps,
                                              std::size_t noise_dim, const StreamKey& key);

// Supplies the measure argument at step j (or at the horizon) given the
// part of the batch simulated so far. Controls at step j are already filled
// in when the running provider is called.
using MeasureProvider = std::function<EnsembleView(std::size_t step, const TrajectoryBatch&)>;

// Euler-Maruyama: X_{j+1} = X_j + b h + sigma sqrt(h) xi_j, alpha_j = policy(j, X_j).
// Throws NumericalError naming the path and step if a state leaves the
// finite range.
TrajectoryBatch simulate_with(const MfgModel& model, const TimeGrid& grid, const Policy& policy,
                              const ParticleEnsemble& initial,
                              std::span<const ParticleEnsemble> increments,
                              const MeasureProvider& running, const MeasureProvider& terminal);

// Measures given per step (the score-driven flow during training). The
// terminal measure is the simulated X_T ensemble for state coupling and the
// last given measure for action coupling.
TrajectoryBatch simulate(const MfgModel& model, const TimeGrid& grid, const Policy& policy,
                         std::span<const ParticleEnsemble> measures,
                         const ParticleEnsemble& initial,
                         std::span<const ParticleEnsemble> increments);

// Coupled through the batch's own empirical measure: the states at step j,
// or the controls at step j for action coupling.
TrajectoryBatch simulate_self_coupled(const MfgModel& model, const TimeGrid& grid,
                                      const Policy& policy, const ParticleEnsemble& initial,
                                      std::span<const ParticleEnsemble> increments);

// CSV with columns path, t, x_1..x_d, alpha_1..alpha_n (alpha empty at T).
void write_trajectories_csv(const std::filesystem::path& path, const TrajectoryBatch& batch,
                            const TimeGrid& grid, std::size_t max_paths);

}  // namespace mfac
