#include "mfac/evaluate.hpp"

#include <cmath>
#include <stdexcept>

namespace mfac {

std::vector<double> path_costs(const TrajectoryBatch& traj, double step) {
  std::vector<double> cost(traj.paths());
  for (std::size_t m = 0; m < cost.size(); ++m) {
    double c = 0.0;
    for (std::size_t j = 0; j < traj.steps(); ++j) c += traj.running_cost[j][m] * step;
    cost[m] = c + traj.terminal_cost[m];
  }
  return cost;
}

double evaluate_cost(const TrajectoryBatch& traj, double step) {
  const auto c = path_costs(traj, step);
  require(!c.empty(), "evaluate_cost: empty batch");
  double s = 0.0;
  for (double v : c) s += v;
  return s / static_cast<double>(c.size());
}

double evaluate_cost(const MfgModel& model, const TrajectoryBatch& traj,
                     std::span<const ParticleEnsemble> measures, const EnsembleView& terminal,
                     const TimeGrid& grid) {
  require(measures.size() == traj.steps(), "evaluate_cost: need one measure per step");
  require(traj.paths() > 0, "evaluate_cost: empty batch");
  double total = 0.0;
  for (std::size_t j = 0; j < traj.steps(); ++j) {
    const Measure mu(measures[j]);
    double s = 0.0;
    for (std::size_t m = 0; m < traj.paths(); ++m)
      s += model.running_cost(grid.at(j), traj.states[j][m], mu, traj.controls[j][m]);
    total += s * grid.step();
  }
  const Measure mu_T(terminal);
  for (std::size_t m = 0; m < traj.paths(); ++m)
    total += model.terminal_cost(traj.states[traj.steps()][m], mu_T);
  return total / static_cast<double>(traj.paths());
}

namespace {

double ratio(double num, double den) {
  if (!(den > 0.0)) throw std::invalid_argument("degenerate denominator");
  return std::sqrt(num / den);
}

void mean_and_se(const std::vector<double>& v, double& mean, double& se) {
  const double n = static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += x;
  mean = s / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  se = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
}

}  // namespace

MetricsReport compare_paths(const TrajectoryBatch& hat, const TrajectoryBatch& check,
                            MeasureSpace coupling, double step) {
  require(hat.paths() == check.paths() && hat.steps() == check.steps(),
          "compare: batches differ in shape");
  require(hat.paths() >= 2, "compare: need at least two paths");
  double nx = 0, dx = 0, na = 0, da = 0, nm = 0, dm = 0;
  for (std::size_t j = 0; j < hat.steps(); ++j) {
    const auto& xh = hat.states[j].data();
    const auto& xc = check.states[j].data();
    for (std::size_t k = 0; k < xh.size(); ++k) {
      nx += (xh[k] - xc[k]) * (xh[k] - xc[k]);
      dx += xh[k] * xh[k];
    }
    const auto& ah = hat.controls[j].data();
    const auto& ac = check.controls[j].data();
    for (std::size_t k = 0; k < ah.size(); ++k) {
      na += (ah[k] - ac[k]) * (ah[k] - ac[k]);
      da += ah[k] * ah[k];
    }
    const auto& mh = coupling == MeasureSpace::kState ? hat.states[j] : hat.controls[j];
    const auto& mc = coupling == MeasureSpace::kState ? check.states[j] : check.controls[j];
    const auto meanh = empirical_mean(mh), meanc = empirical_mean(mc);
    for (std::size_t i = 0; i < meanh.size(); ++i) {
      nm += (meanh[i] - meanc[i]) * (meanh[i] - meanc[i]);
      dm += meanh[i] * meanh[i];
    }
  }
  MetricsReport r;
  r.n_test = hat.paths();
  r.rmse_x = ratio(nx, dx);
  r.rmse_alpha = ratio(na, da);
  r.rmse_m = ratio(nm, dm);
  mean_and_se(path_costs(hat, step), r.j_hat, r.j_hat_se);
  mean_and_se(path_costs(check, step), r.j_check, r.j_check_se);
  if (r.j_hat == 0.0) throw std::invalid_argument("degenerate denominator");
  r.rev = std::abs(r.j_hat - r.j_check) / std::abs(r.j_hat);
  return r;
}

namespace {

struct CommonNoise {
  ParticleEnsemble initial;
  std::vector<ParticleEnsemble> increments;
};

CommonNoise common_noise(const MfgModel& model, const TimeGrid& grid, std::size_t n,
                         std::uint64_t seed) {
  require(n >= 2, "evaluate: need at least two test paths");
  const StreamKey key{seed, Stream::kEvaluation};
  return {sample_initial(model.initial_law(), n, key.with(0)),
          draw_increments(n, grid.steps(), model.noise_dim(), key.with(1))};
}

}  // namespace

MetricsReport evaluate(const Policy& actor, const MfgModel& model, const BaselineLQ& baseline,
                       std::size_t n_test, std::uint64_t seed) {
  const TimeGrid& grid = baseline.grid();
  const auto noise = common_noise(model, grid, n_test, seed);
  const auto hat = baseline_simulate(baseline, model, noise.initial, noise.increments,
                                     BaselineCoupling::kEmpirical);
  const auto check = simulate_self_coupled(model, grid, actor, noise.initial, noise.increments);
  return compare_paths(hat, check, model.coupling(), grid.step());
}

MetricsReport evaluate_tilde(const Policy& actor, const MfgModel& model,
                             const BaselineLQ& baseline, std::span<const ParticleEnsemble> measures,
                             std::size_t n_test, std::uint64_t seed) {
  const TimeGrid& grid = baseline.grid();
  const auto noise = common_noise(model, grid, n_test, seed);
  const auto hat = baseline_simulate(baseline, model, noise.initial, noise.increments,
                                     BaselineCoupling::kEmpirical);
  const auto tilde = simulate(model, grid, actor, measures, noise.initial, noise.increments);
  return compare_paths(hat, tilde, model.coupling(), grid.step());
}

}  // namespace mfac
