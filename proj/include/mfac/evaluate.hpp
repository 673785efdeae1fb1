#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mfac/baselines.hpp"
#include "mfac/models.hpp"
#include "mfac/netstack.hpp"
#include "mfac/simulate.hpp"

namespace mfac {

struct MetricsReport {
  double rev = 0.0;
  double rmse_x = 0.0;
  double rmse_alpha = 0.0;
  double rmse_m = 0.0;
  std::size_t n_test = 0;
  double j_hat = 0.0;
  double j_check = 0.0;
  double j_hat_se = 0.0;    // MC standard errors of the two cost estimates
  double j_check_se = 0.0;
};

// Per-path cost: sum_j f_j h + g, using the costs stored in the batch.
std::vector<double> path_costs(const TrajectoryBatch& traj, double step);

// Mean of path_costs.
double evaluate_cost(const TrajectoryBatch& traj, double step);

// Recomputes costs of `traj` under the given measures (one per step plus a
// terminal one) and returns their mean.
double evaluate_cost(const MfgModel& model, const TrajectoryBatch& traj,
                     std::span<const ParticleEnsemble> measures, const EnsembleView& terminal,
                     const TimeGrid& grid);

// Relative errors of the `check` paths against the `hat` (reference) paths,
// over all paths and the training steps. Population means are taken on the
// coupling space (states, or controls for action coupling).
MetricsReport compare_paths(const TrajectoryBatch& hat, const TrajectoryBatch& check,
                            MeasureSpace coupling, double step);

// Simulates the baseline and the actor under common Brownian increments and
// common initial states; each system is coupled through its own batch.
MetricsReport evaluate(const Policy& actor, const MfgModel& model, const BaselineLQ& baseline,
                       std::size_t n_test, std::uint64_t seed);

// Same comparison, but the actor's system is driven by the given
// (score-generated) measures instead of its own batch.
MetricsReport evaluate_tilde(const Policy& actor, const MfgModel& model,
                             const BaselineLQ& baseline, std::span<const ParticleEnsemble> measures,
                             std::size_t n_test, std::uint64_t seed);

}  // namespace mfac
