#include "mfac/trainer.hpp"

#include <tbb/blocked_range.h>
#include <tbb/parallel_for.h>

#include <chrono>
#include <cmath>

#include "mfac/evaluate.hpp"
#include "mfac/io.hpp"
#include "mfac/objectives.hpp"
#include "mfac/simulate.hpp"
#include "mfac/transport.hpp"

namespace mfac {

void TrainConfig::validate() const {
  std::visit([](const auto& p) { p.validate(); }, model);
  require(std::isfinite(horizon) && horizon > 0.0, "config: horizon must be positive");
  require(steps >= 1, "config: need at least one time step");
  require(hidden >= 1, "config: hidden width must be positive");
  require(k_end >= 1, "config: k_end must be at least 1");
  require(n_s >= 1 && n_c >= 1 && n_a >= 1, "config: epoch counts must be at least 1");
  require(n_batch >= 2, "config: n_batch must be at least 2");
  require(std::isfinite(dtau) && dtau > 0.0, "config: dtau must be positive");
  require(std::isfinite(beta_a) && beta_a >= 0.0, "config: beta_a must be nonnegative");
  const double lambda = dtau * beta_mu;
  require(lambda > 0.0 && lambda <= 1.0, "config: dtau * beta_mu must lie in (0, 1]");
  actor_lr.validate();
  critic_lr.validate();
  score_lr.validate();
  lmc.validate();
  require(diagnostics.critic_every >= 0 && diagnostics.actor_every >= 0,
          "config: diagnostic cadences must be nonnegative");
  require(diagnostics.n_eval >= 2, "config: diagnostics.n_eval must be at least 2");
}

namespace {

bool due(int every, int k) { return every > 0 && (k == 1 || k % every == 0); }

double terminal_spread(const MfgModel& model, const TrajectoryBatch& traj) {
  const auto sd = empirical_sd(traj.states.back());
  const std::size_t first = model.name() == "flocking" ? 3 : 0;
  double s = 0.0;
  for (std::size_t i = first; i < sd.size(); ++i) s += sd[i];
  return s / static_cast<double>(sd.size() - first);
}

template <class F>
auto run_stage(int k, const char* stage, std::vector<std::string>& trace, F&& body) {
  trace.emplace_back(stage);
  try {
    return body();
  } catch (const TrainingError&) {
    throw;
  } catch (const std::exception& e) {
    throw TrainingError(k, stage, e.what());
  }
}

}  // namespace

double lyapunov_critic(const NetStack& stack, const MfgModel& model, const TimeGrid& grid,
                       std::span<const ParticleEnsemble> measures, std::size_t n_eval,
                       const StreamKey& key) {
  const auto x0 = sample_initial(model.initial_law(), n_eval, key.with(key.a, 0));
  const auto xi = draw_increments(n_eval, grid.steps(), model.noise_dim(), key.with(key.a, 1));
  const auto traj = simulate(model, grid, actor_policy(stack.actor), measures, x0, xi);
  return critic_loss_and_grads(stack.v0, stack.grad_v, traj, grid.step(), nullptr);
}

double lyapunov_actor(const Policy& actor, const MfgModel& model, const BaselineLQ& baseline,
                      std::span<const ParticleEnsemble> measures, std::size_t n_eval,
                      const StreamKey& key) {
  const TimeGrid& grid = baseline.grid();
  require(measures.size() == grid.steps(), "lyapunov_actor: need one measure per step");
  std::vector<double> mean_path(grid.steps() + 1);
  for (std::size_t j = 0; j < grid.steps(); ++j) mean_path[j] = empirical_mean(measures[j])[0];
  mean_path.back() = mean_path[grid.steps() - 1];
  const ConditionalControl best(baseline, mean_path);

  const auto x0 = sample_initial(model.initial_law(), n_eval, key.with(key.a, 2));
  const auto xi = draw_increments(n_eval, grid.steps(), model.noise_dim(), key.with(key.a, 3));
  const MeasureProvider frozen = [&](std::size_t j, const TrajectoryBatch&) {
    return measures[std::min(j, measures.size() - 1)].view();
  };
  const auto a = simulate_with(model, grid, actor, x0, xi, frozen, frozen);
  const auto b = simulate_with(model, grid, conditional_policy(best, grid), x0, xi, frozen, frozen);
  return evaluate_cost(a, grid.step()) - evaluate_cost(b, grid.step());
}

TrainResult train(const TrainConfig& cfg, const IterationCallback& on_iteration) {
  cfg.validate();
  const ModelPtr model_ptr = make_model(cfg.model);
  const MfgModel& model = *model_ptr;
  const TimeGrid grid(cfg.horizon, cfg.steps);
  const auto baseline = make_baseline(cfg.model, grid);
  const std::size_t N = cfg.n_batch;
  const std::size_t steps = grid.steps();
  const double h = grid.step();
  const double lambda = cfg.dtau * cfg.beta_mu;
  const bool action = model.coupling() == MeasureSpace::kAction;

  TrainResult result;
  result.stack = NetStack(NetDims{steps, model.state_dim(), model.control_dim(),
                                  model.measure_dim(), cfg.hidden});
  NetStack& stack = result.stack;
  stack.initialize(cfg.seed);

  // Synthetic samples Q^1: draws from mu_0 (pushed through the initial actor
  // when the measure lives on controls).
  std::vector<ParticleEnsemble> synthetic(steps);
  tbb::parallel_for(std::size_t{0}, steps, [&](std::size_t t) {
    auto x = sample_initial(model.initial_law(), N, StreamKey{cfg.seed, Stream::kSynthetic, t});
    if (!action) {
      synthetic[t] = std::move(x);
      return;
    }
    ParticleEnsemble a(N, model.control_dim());
    for (std::size_t m = 0; m < N; ++m) stack.actor[t].forward(x[m], a[m]);
    synthetic[t] = std::move(a);
  });

  std::vector<ParticleEnsemble> lmc;
  for (int k = 1; k <= cfg.k_end; ++k) {
    const auto start = std::chrono::steady_clock::now();
    IterationRecord rec;
    rec.k = k;
    const double lr_s = lr_at(cfg.score_lr, k);
    const double lr_c = lr_at(cfg.critic_lr, k);
    const double lr_a = lr_at(cfg.actor_lr, k);
    const auto uk = static_cast<std::uint64_t>(k);

    rec.score_loss = run_stage(k, "score", result.trace, [&] {
      std::vector<double> losses(steps);
      tbb::parallel_for(std::size_t{0}, steps, [&](std::size_t t) {
        Mlp& net = stack.score[t];
        std::vector<double> g(net.param_count());
        for (int e = 0; e < cfg.n_s; ++e) {
          losses[t] = score_loss_and_grads(net, synthetic[t], g);
          adam_step(stack.score_opt[t], net.params(), g, lr_s);
        }
      });
      double s = 0.0;
      for (double v : losses) s += v;
      return s / static_cast<double>(steps);
    });

    run_stage(k, "lmc", result.trace, [&] {
      lmc = measures_for_iteration(stack.score, cfg.lmc, lmc.empty() ? nullptr : &lmc, N,
                                   cfg.seed, uk);
      return 0;
    });

    const TrajectoryBatch traj = run_stage(k, "simulate", result.trace, [&] {
      const auto x0 =
          sample_initial(model.initial_law(), N, StreamKey{cfg.seed, Stream::kInitialState, uk});
      const auto xi =
          draw_increments(N, steps, model.noise_dim(), StreamKey{cfg.seed, Stream::kSimulation, uk});
      return simulate(model, grid, actor_policy(stack.actor), lmc, x0, xi);
    });

    // Diagnostics see the networks and measures of this iteration before
    // the critic and actor move.
    try {
      const StreamKey dkey{cfg.seed, Stream::kDiagnostics, uk};
      rec.terminal_spread = terminal_spread(model, traj);
      if (due(cfg.diagnostics.critic_every, k))
        rec.lyap_critic = lyapunov_critic(stack, model, grid, lmc, cfg.diagnostics.n_eval, dkey);
      if (baseline && due(cfg.diagnostics.actor_every, k))
        rec.lyap_actor = lyapunov_actor(actor_policy(stack.actor), model, *baseline, lmc,
                                        cfg.diagnostics.n_eval, dkey);
    } catch (const std::exception& e) {
      throw TrainingError(k, "diagnostics", e.what());
    }

    rec.w2_gap = run_stage(k, "otgp", result.trace, [&] {
      std::vector<double> cost(steps);
      tbb::parallel_for(std::size_t{0}, steps, [&](std::size_t t) {
        const ParticleEnsemble& target = action ? traj.controls[t] : traj.states[t];
        const Assignment match = ot_match(lmc[t], target);
        synthetic[t] = otgp_apply(lmc[t], target, match, lambda);
        cost[t] = match.cost / static_cast<double>(N);
      });
      double s = 0.0;
      for (double c : cost) s += c;
      return 0.5 * h * s;
    });

    rec.critic_loss = run_stage(k, "critic", result.trace, [&] {
      CriticGrads g;
      double loss = 0.0;
      for (int e = 0; e < cfg.n_c; ++e) {
        loss = critic_loss_and_grads(stack.v0, stack.grad_v, traj, h, &g);
        adam_step(stack.v0_opt, stack.v0.params(), g.v0, lr_c);
        for (std::size_t t = 0; t < steps; ++t)
          adam_step(stack.grad_v_opt[t], stack.grad_v[t].params(), g.grad_v[t], lr_c);
      }
      return loss;
    });

    rec.actor_loss = run_stage(k, "actor", result.trace, [&] {
      std::vector<double> losses(steps);
      tbb::parallel_for(std::size_t{0}, steps, [&](std::size_t t) {
        const ActorRegion region = actor_region(traj.states[t]);
        auto rng = make_stream(StreamKey{cfg.seed, Stream::kLatinHypercube, uk, t});
        const ParticleEnsemble chi = latin_hypercube(N, region, rng);
        const Mlp frozen = stack.actor[t];
        const ParticleEnsemble targets =
            actor_targets(model, grid.at(t), frozen, stack.grad_v[t], Measure(lmc[t]), chi,
                          cfg.beta_a, cfg.dtau);
        Mlp& net = stack.actor[t];
        std::vector<double> g(net.param_count());
        for (int e = 0; e < cfg.n_a; ++e) {
          losses[t] = actor_loss_and_grads(net, chi, targets, g);
          adam_step(stack.actor_opt[t], net.params(), g, lr_a);
        }
      });
      double s = 0.0;
      for (double v : losses) s += v;
      return s;
    });

    rec.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(rec);
    if (on_iteration) on_iteration(rec);
  }
  result.measures = std::move(lmc);
  return result;
}

void write_history_csv(const std::string& path, const std::vector<IterationRecord>& history) {
  CsvWriter csv(path);
  csv.header({"k", "score_loss", "critic_loss", "actor_loss", "lyap_actor", "lyap_critic",
              "w2_gap", "terminal_spread"});
  for (const auto& r : history) {
    csv.field(static_cast<long long>(r.k)).field(r.score_loss).field(r.critic_loss);
    csv.field(r.actor_loss);
    if (r.lyap_actor) csv.field(*r.lyap_actor);
    else csv.empty_field();
    if (r.lyap_critic) csv.field(*r.lyap_critic);
    else csv.empty_field();
    csv.field(r.w2_gap).field(r.terminal_spread);
    csv.end_row();
  }
}

void write_timing_csv(const std::string& path, const std::vector<IterationRecord>& history) {
  CsvWriter csv(path);
  csv.header({"k", "wall_time"});
  for (const auto& r : history) {
    csv.field(static_cast<long long>(r.k)).field(r.wall_time);
    csv.end_row();
  }
}

}  // namespace mfac
