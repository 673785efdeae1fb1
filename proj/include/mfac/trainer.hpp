#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfac/baselines.hpp"
#include "mfac/langevin.hpp"
#include "mfac/models.hpp"
#include "mfac/netstack.hpp"
#include "mfac/neural.hpp"

namespace mfac {

struct DiagnosticsConfig {
  int critic_every = 1;
  int actor_every = 10;
  std::size_t n_eval = 1000;
};

struct TrainConfig {
  ModelParams model = SystemicRiskParams{};
  double horizon = 1.0;
  std::size_t steps = 50;
  std::size_t hidden = 64;

  int k_end = 250;
  double dtau = 0.5;
  double beta_a = 1.0;
  double beta_mu = 1.5;
  int n_s = 5;
  int n_c = 5;
  int n_a = 5;
  std::size_t n_batch = 500;

  LrSchedule actor_lr{0.005, {150, 200}, 0.1};
  LrSchedule critic_lr{0.01, {150, 200}, 0.1};
  LrSchedule score_lr{0.0015, {150, 200}, 0.85};

  LmcConfig lmc;
  std::uint64_t seed = 0;
  DiagnosticsConfig diagnostics;

  void validate() const;
};

// One row of the training history. Diagnostics not computed at an
// iteration are empty.
struct IterationRecord {
  int k = 0;
  double score_loss = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  std::optional<double> lyap_actor;
  std::optional<double> lyap_critic;
  double w2_gap = 0.0;
  // Mean per-coordinate SD at T of the simulated batch: velocities for
  // flocking, the state otherwise.
  double terminal_spread = 0.0;
  double wall_time = 0.0;
};

// Stage names in the order each iteration runs them.
inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"score", "lmc", "simulate", "otgp", "critic",
                                              "actor"};
  return names;
}

class TrainingError : public std::runtime_error {
 public:
  TrainingError(int iteration, std::string stage, const std::string& what)
      : std::runtime_error("iteration " + std::to_string(iteration) + ", stage " + stage + ": " +
                           what),
        iteration_(iteration),
        stage_(std::move(stage)) {}

  int iteration() const { return iteration_; }
  const std::string& stage() const { return stage_; }

 private:
  int iteration_;
  std::string stage_;
};

struct TrainResult {
  NetStack stack;
  std::vector<IterationRecord> history;
  std::vector<std::string> trace;
  std::vector<ParticleEnsemble> measures;  // last LMC flow
};

using IterationCallback = std::function<void(const IterationRecord&)>;

TrainResult train(const TrainConfig& cfg, const IterationCallback& on_iteration = {});

// Critic loss on a fresh batch simulated under the given actor and measures.
double lyapunov_critic(const NetStack& stack, const MfgModel& model, const TimeGrid& grid,
                       std::span<const ParticleEnsemble> measures, std::size_t n_eval,
                       const StreamKey& key);

// J[actor] - J[best response], both under the frozen measure flow with
// common noise. The best response uses only the flow's mean path.
double lyapunov_actor(const Policy& actor, const MfgModel& model, const BaselineLQ& baseline,
                      std::span<const ParticleEnsemble> measures, std::size_t n_eval,
                      const StreamKey& key);

void write_history_csv(const std::string& path, const std::vector<IterationRecord>& history);
void write_timing_csv(const std::string& path, const std::vector<IterationRecord>& history);

}  // namespace mfac
