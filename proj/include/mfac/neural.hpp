#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace mfac {

// How the skip map Wskip starts out. kIdentity pads with zeros when the
// input and output dimensions differ.
enum class SkipInit { kIdentity, kNegativeIdentity, kZero };

// One hidden layer with ReLU plus a linear skip path:
//   y = W2 relu(W1 x + b1) + b2 + Wskip x
// Parameters live in a single flat vector laid out as W1, b1, W2, b2, Wskip
// (matrices row-major), so optimizers and checkpoints see one array.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim);

  std::size_t in_dim() const { return in_; }
  std::size_t hidden_dim() const { return hidden_; }
  std::size_t out_dim() const { return out_; }
  std::size_t param_count() const { return params_.size(); }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const { return hidden_ * in_; }
  std::size_t w2_offset() const { return b1_offset() + hidden_; }
  std::size_t b2_offset() const { return w2_offset() + out_ * hidden_; }
  std::size_t wskip_offset() const { return b2_offset() + out_; }

  double& w1(std::size_t j, std::size_t i) { return params_[j * in_ + i]; }
  double& b1(std::size_t j) { return params_[b1_offset() + j]; }
  double& w2(std::size_t o, std::size_t j) { return params_[w2_offset() + o * hidden_ + j]; }
  double& b2(std::size_t o) { return params_[b2_offset() + o]; }
  double& wskip(std::size_t o, std::size_t i) { return params_[wskip_offset() + o * in_ + i]; }

  void forward(std::span<const double> x, std::span<double> out) const;
  std::vector<double> forward(std::span<const double> x) const;

  // Adds d(upstream . forward(x))/dtheta into param_grads. If input_grad is
  // non-empty it is overwritten with d(upstream . forward(x))/dx.
  void backward(std::span<const double> x, std::span<const double> upstream,
                std::span<double> param_grads, std::span<double> input_grad = {}) const;

  // Trace of the input Jacobian; requires in_dim == out_dim.
  double divergence(std::span<const double> x) const;
  // Adds scale * d divergence(x)/dtheta into param_grads. The ReLU mask is
  // held fixed.
  void divergence_backward(std::span<const double> x, double scale,
                           std::span<double> param_grads) const;

 private:
  void check_input(std::span<const double> x) const;

  std::size_t in_ = 0;
  std::size_t hidden_ = 0;
  std::size_t out_ = 0;
  std::vector<double> params_;
};

// W1, W2 ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
void initialize(Mlp& net, std::mt19937_64& rng, SkipInit skip);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// Bias-corrected Adam update in place. Throws NumericalError with
// "non-finite gradient" if any gradient entry is NaN or infinite.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr);

// Piecewise-constant decay: base * gamma^(number of milestones <= k).
struct LrSchedule {
  double base = 1e-3;
  std::vector<int> milestones;
  double gamma = 1.0;

  void validate() const;
};

double lr_at(const LrSchedule& schedule, int k);

}  // namespace mfac
