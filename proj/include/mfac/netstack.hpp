#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mfac/neural.hpp"

namespace mfac {

struct NetDims {
  std::size_t steps = 0;        // N_T
  std::size_t state_dim = 0;    // d
  std::size_t control_dim = 0;  // n
  std::size_t score_dim = 0;    // dimension of the space the measure lives on
  std::size_t hidden = 64;

  bool operator==(const NetDims&) const = default;
};

// One actor, critic-gradient and score network per training time step, plus
// the critic's initial-value network, each with its own Adam state.
class NetStack {
 public:
  NetStack() = default;
  explicit NetStack(const NetDims& dims);

  const NetDims& dims() const { return dims_; }

  // Fresh random weights, deterministic in seed. Actor, critic and value
  // nets get an identity-padded skip; score nets start at -I so the initial
  // score field is confining.
  void initialize(std::uint64_t seed);

  std::vector<Mlp> actor;
  std::vector<Mlp> grad_v;
  std::vector<Mlp> score;
  Mlp v0;

  std::vector<AdamState> actor_opt;
  std::vector<AdamState> grad_v_opt;
  std::vector<AdamState> score_opt;
  AdamState v0_opt;

 private:
  NetDims dims_;
};

// Writes all weights as JSON: a header with dims and model id, then per role
// and time step the matrices in row-major order. Optimizer state is not saved.
void save_checkpoint(const NetStack& stack, const std::string& model_id,
                     const std::filesystem::path& path);

struct LoadedCheckpoint {
  NetStack stack;
  std::string model_id;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Feedback control evaluated at training step j.
using Policy =
    std::function<void(std::size_t step, std::span<const double> x, std::span<double> alpha)>;

// The returned policy borrows the actor networks; keep the stack alive.
Policy actor_policy(const std::vector<Mlp>& actor);

}  // namespace mfac
