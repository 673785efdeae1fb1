#include "mfac/simulate.hpp"

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include "mfac/io.hpp"

namespace mfac {

TrajectoryBatch::TrajectoryBatch(std::size_t paths, std::size_t steps, std::size_t state_dim,
                                 std::size_t control_dim, std::size_t noise_dim) {
  states.assign(steps + 1, ParticleEnsemble(paths, state_dim));
  controls.assign(steps, ParticleEnsemble(paths, control_dim));
  noise.assign(steps, ParticleEnsemble(paths, noise_dim));
  diffusion.assign(steps, ParticleEnsemble(paths, state_dim));
  running_cost.assign(steps, std::vector<double>(paths, 0.0));
  terminal_cost.assign(paths, 0.0);
}

ParticleEnsemble sample_initial(const GaussianLaw& law, std::size_t count, const StreamKey& key) {
  require(count > 0, "sample_initial: need at least one particle");
  const std::size_t d = law.mean.size();
  ParticleEnsemble out(count, d);
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, count),
                    [&](const tbb::blocked_range<std::size_t>& r) {
                      for (std::size_t m = r.begin(); m < r.end(); ++m) {
                        auto rng = make_stream(key.with(key.a, m));
                        std::normal_distribution<double> normal;
                        auto p = out[m];
                        for (std::size_t i = 0; i < d; ++i)
                          p[i] = law.mean[i] + law.sd[i] * normal(rng);
                      }
                    });
  return out;
}

std::vector<ParticleEnsemble> draw_increments(std::size_t paths, std::size_t steps,
                                              std::size_t noise_dim, const StreamKey& key) {
  std::vector<ParticleEnsemble> out(steps, ParticleEnsemble(paths, noise_dim));
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, paths),
                    [&](const tbb::blocked_range<std::size_t>& r) {
                      for (std::size_t m = r.begin(); m < r.end(); ++m) {
                        auto rng = make_stream(key.with(key.a, m));
                        std::normal_distribution<double> normal;
                        for (std::size_t j = 0; j < steps; ++j) {
                          auto xi = out[j][m];
                          for (std::size_t i = 0; i < noise_dim; ++i) xi[i] = normal(rng);
                        }
                      }
                    });
  return out;
}

namespace {

bool all_finite(std::span<const double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

TrajectoryBatch simulate_with(const MfgModel& model, const TimeGrid& grid, const Policy& policy,
                              const ParticleEnsemble& initial,
                              std::span<const ParticleEnsemble> increments,
                              const MeasureProvider& running, const MeasureProvider& terminal) {
  const std::size_t n_paths = initial.size();
  const std::size_t steps = grid.steps();
  const std::size_t d = model.state_dim(), n = model.control_dim(), nn = model.noise_dim();
  require(n_paths > 0, "simulate: empty batch");
  require(initial.dim() == d, "simulate: initial states have the wrong dimension");
  require(increments.size() == steps, "simulate: need one increment ensemble per step");
  for (const auto& inc : increments)
    require(inc.size() == n_paths && inc.dim() == nn, "simulate: increment shape mismatch");

  TrajectoryBatch batch(n_paths, steps, d, n, nn);
  batch.states[0] = initial;
  const double h = grid.step();
  const double sqrt_h = std::sqrt(h);

  for (std::size_t j = 0; j < steps; ++j) {
    const double t = grid.at(j);
    batch.noise[j] = increments[j];
    tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n_paths),
                      [&](const tbb::blocked_range<std::size_t>& r) {
                        for (std::size_t m = r.begin(); m < r.end(); ++m) {
                          auto a = batch.controls[j][m];
                          policy(j, batch.states[j][m], a);
                          if (!all_finite(a))
                            throw NumericalError("simulate: non-finite control at path " +
                                                 std::to_string(m) + ", step " +
                                                 std::to_string(j));
                        }
                      });
    const Measure mu(running(j, batch));
    tbb::parallel_for(
        tbb::blocked_range<std::size_t>(0, n_paths),
        [&](const tbb::blocked_range<std::size_t>& r) {
          std::vector<double> b(d), sig(d * nn);
          for (std::size_t m = r.begin(); m < r.end(); ++m) {
            const auto x = batch.states[j][m];
            const auto a = batch.controls[j][m];
            const auto xi = batch.noise[j][m];
            model.drift(t, x, mu, a, b);
            model.diffusion(t, x, mu, sig);
            batch.running_cost[j][m] = model.running_cost(t, x, mu, a);
            auto dw = batch.diffusion[j][m];
            auto next = batch.states[j + 1][m];
            for (std::size_t i = 0; i < d; ++i) {
              double s = 0.0;
              for (std::size_t k = 0; k < nn; ++k) s += sig[i * nn + k] * xi[k];
              dw[i] = s * sqrt_h;
              next[i] = x[i] + b[i] * h + dw[i];
            }
            if (!all_finite(next) || !std::isfinite(batch.running_cost[j][m]))
              throw NumericalError("simulate: state blew up at path " + std::to_string(m) +
                                   ", step " + std::to_string(j + 1));
          }
        });
  }

  const Measure mu_T(terminal(steps, batch));
  tbb::parallel_for(tbb::blocked_range<std::size_t>(0, n_paths),
                    [&](const tbb::blocked_range<std::size_t>& r) {
                      for (std::size_t m = r.begin(); m < r.end(); ++m)
                        batch.terminal_cost[m] = model.terminal_cost(batch.states[steps][m], mu_T);
                    });
  return batch;
}

TrajectoryBatch simulate(const MfgModel& model, const TimeGrid& grid, const Policy& policy,
                         std::span<const ParticleEnsemble> measures,
                         const ParticleEnsemble& initial,
                         std::span<const ParticleEnsemble> increments) {
  require(measures.size() == grid.steps(), "simulate: need one measure per step");
  for (const auto& mu : measures)
    require(mu.dim() == model.measure_dim(), "simulate: measure has the wrong dimension");
  const MeasureProvider running = [&](std::size_t j, const TrajectoryBatch&) {
    return measures[j].view();
  };
  const MeasureProvider terminal = [&](std::size_t j, const TrajectoryBatch& b) {
    return model.coupling() == MeasureSpace::kState ? b.states[j].view()
                                                    : measures.back().view();
  };
  return simulate_with(model, grid, policy, initial, increments, running, terminal);
}

TrajectoryBatch simulate_self_coupled(const MfgModel& model, const TimeGrid& grid,
                                      const Policy& policy, const ParticleEnsemble& initial,
                                      std::span<const ParticleEnsemble> increments) {
  const bool action = model.coupling() == MeasureSpace::kAction;
  const MeasureProvider running = [action](std::size_t j, const TrajectoryBatch& b) {
    return action ? b.controls[j].view() : b.states[j].view();
  };
  const MeasureProvider terminal = [action](std::size_t j, const TrajectoryBatch& b) {
    return action ? b.controls[j - 1].view() : b.states[j].view();
  };
  return simulate_with(model, grid, policy, initial, increments, running, terminal);
}

void write_trajectories_csv(const std::filesystem::path& path, const TrajectoryBatch& batch,
                            const TimeGrid& grid, std::size_t max_paths) {
  CsvWriter csv(path);
  const std::size_t d = batch.states[0].dim();
  const std::size_t n = batch.controls.empty() ? 0 : batch.controls[0].dim();
  std::vector<std::string> header{"path", "t"};
  for (std::size_t i = 0; i < d; ++i) header.push_back("x_" + std::to_string(i + 1));
  for (std::size_t i = 0; i < n; ++i) header.push_back("alpha_" + std::to_string(i + 1));
  csv.header(header);
  const std::size_t count = std::min(max_paths, batch.paths());
  for (std::size_t m = 0; m < count; ++m) {
    for (std::size_t j = 0; j <= batch.steps(); ++j) {
      csv.field(static_cast<long long>(m)).field(grid.at(j));
      for (double v : batch.states[j][m]) csv.field(v);
      for (std::size_t i = 0; i < n; ++i) {
        if (j < batch.steps()) csv.field(batch.controls[j][m][i]);
        else csv.empty_field();
      }
      csv.end_row();
    }
  }
}

}  // namespace mfac
