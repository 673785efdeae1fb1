#include "mfac/neural.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mfac/core.hpp"

namespace mfac {

Mlp::Mlp(std::size_t in_dim, std::size_t hidden_dim, std::size_t out_dim)
    : in_(in_dim), hidden_(hidden_dim), out_(out_dim) {
  require(in_dim > 0 && hidden_dim > 0 && out_dim > 0, "mlp: dimensions must be positive");
  params_.assign(hidden_ * in_ + hidden_ + out_ * hidden_ + out_ + out_ * in_, 0.0);
}

void Mlp::check_input(std::span<const double> x) const {
  if (x.size() != in_)
    throw std::invalid_argument("mlp: input has dimension " + std::to_string(x.size()) +
                                ", expected " + std::to_string(in_));
}

void Mlp::forward(std::span<const double> x, std::span<double> out) const {
  check_input(x);
  require(out.size() == out_, "mlp: output buffer has wrong dimension");
  const double* w1 = params_.data();
  const double* b1 = w1 + b1_offset();
  const double* w2 = w1 + w2_offset();
  const double* b2 = w1 + b2_offset();
  const double* ws = w1 + wskip_offset();
  for (std::size_t o = 0; o < out_; ++o) {
    double acc = b2[o];
    for (std::size_t i = 0; i < in_; ++i) acc += ws[o * in_ + i] * x[i];
    out[o] = acc;
  }
  for (std::size_t j = 0; j < hidden_; ++j) {
    double z = b1[j];
    for (std::size_t i = 0; i < in_; ++i) z += w1[j * in_ + i] * x[i];
    if (z <= 0.0) continue;
    for (std::size_t o = 0; o < out_; ++o) out[o] += w2[o * hidden_ + j] * z;
  }
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  std::vector<double> out(out_);
  forward(x, out);
  return out;
}

void Mlp::backward(std::span<const double> x, std::span<const double> upstream,
                   std::span<double> param_grads, std::span<double> input_grad) const {
  check_input(x);
  require(upstream.size() == out_, "mlp: upstream has wrong dimension");
  require(param_grads.size() == params_.size(), "mlp: gradient buffer has wrong size");
  const bool want_input = !input_grad.empty();
  require(!want_input || input_grad.size() == in_, "mlp: input gradient has wrong dimension");

  const double* w1 = params_.data();
  const double* b1 = w1 + b1_offset();
  const double* w2 = w1 + w2_offset();
  const double* ws = w1 + wskip_offset();
  double* g = param_grads.data();
  double* gb1 = g + b1_offset();
  double* gw2 = g + w2_offset();
  double* gb2 = g + b2_offset();
  double* gws = g + wskip_offset();

  if (want_input) std::fill(input_grad.begin(), input_grad.end(), 0.0);
  for (std::size_t o = 0; o < out_; ++o) {
    const double u = upstream[o];
    gb2[o] += u;
    for (std::size_t i = 0; i < in_; ++i) {
      gws[o * in_ + i] += u * x[i];
      if (want_input) input_grad[i] += ws[o * in_ + i] * u;
    }
  }
  for (std::size_t j = 0; j < hidden_; ++j) {
    double z = b1[j];
    for (std::size_t i = 0; i < in_; ++i) z += w1[j * in_ + i] * x[i];
    if (z <= 0.0) continue;
    double dz = 0.0;
    for (std::size_t o = 0; o < out_; ++o) {
      gw2[o * hidden_ + j] += upstream[o] * z;
      dz += upstream[o] * w2[o * hidden_ + j];
    }
    gb1[j] += dz;
    for (std::size_t i = 0; i < in_; ++i) {
      g[j * in_ + i] += dz * x[i];
      if (want_input) input_grad[i] += dz * w1[j * in_ + i];
    }
  }
}

double Mlp::divergence(std::span<const double> x) const {
  check_input(x);
  require(in_ == out_, "mlp: divergence needs a square network");
  const double* w1 = params_.data();
  const double* b1 = w1 + b1_offset();
  const double* w2 = w1 + w2_offset();
  const double* ws = w1 + wskip_offset();
  double div = 0.0;
  for (std::size_t i = 0; i < in_; ++i) div += ws[i * in_ + i];
  for (std::size_t j = 0; j < hidden_; ++j) {
    double z = b1[j];
    for (std::size_t i = 0; i < in_; ++i) z += w1[j * in_ + i] * x[i];
    if (z <= 0.0) continue;
    for (std::size_t i = 0; i < in_; ++i) div += w2[i * hidden_ + j] * w1[j * in_ + i];
  }
  return div;
}

void Mlp::divergence_backward(std::span<const double> x, double scale,
                              std::span<double> param_grads) const {
  check_input(x);
  require(in_ == out_, "mlp: divergence needs a square network");
  require(param_grads.size() == params_.size(), "mlp: gradient buffer has wrong size");
  const double* w1 = params_.data();
  const double* b1 = w1 + b1_offset();
  const double* w2 = w1 + w2_offset();
  double* g = param_grads.data();
  double* gw2 = g + w2_offset();
  double* gws = g + wskip_offset();
  for (std::size_t i = 0; i < in_; ++i) gws[i * in_ + i] += scale;
  for (std::size_t j = 0; j < hidden_; ++j) {
    double z = b1[j];
    for (std::size_t i = 0; i < in_; ++i) z += w1[j * in_ + i] * x[i];
    if (z <= 0.0) continue;
    for (std::size_t i = 0; i < in_; ++i) {
      gw2[i * hidden_ + j] += scale * w1[j * in_ + i];
      g[j * in_ + i] += scale * w2[i * hidden_ + j];
    }
  }
}

void initialize(Mlp& net, std::mt19937_64& rng, SkipInit skip) {
  auto& p = net.params();
  std::fill(p.begin(), p.end(), 0.0);
  const double r1 = 1.0 / std::sqrt(static_cast<double>(net.in_dim()));
  const double r2 = 1.0 / std::sqrt(static_cast<double>(net.hidden_dim()));
  std::uniform_real_distribution<double> u1(-r1, r1), u2(-r2, r2);
  for (std::size_t k = 0; k < net.hidden_dim() * net.in_dim(); ++k) p[k] = u1(rng);
  for (std::size_t k = 0; k < net.out_dim() * net.hidden_dim(); ++k)
    p[net.w2_offset() + k] = u2(rng);
  if (skip == SkipInit::kZero) return;
  const double diag = skip == SkipInit::kIdentity ? 1.0 : -1.0;
  for (std::size_t i = 0; i < std::min(net.in_dim(), net.out_dim()); ++i) net.wskip(i, i) = diag;
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
               double lr) {
  require(params.size() == grads.size(), "adam: parameter/gradient size mismatch");
  if (state.m.empty()) state = AdamState(params.size());
  require(state.m.size() == params.size(), "adam: state size mismatch");
  for (double g : grads)
    if (!std::isfinite(g)) throw NumericalError("non-finite gradient");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * grads[k];
    state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * grads[k] * grads[k];
    const double mhat = state.m[k] / c1;
    const double vhat = state.v[k] / c2;
    params[k] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

void LrSchedule::validate() const {
  require(std::isfinite(base) && base > 0.0, "schedule: learning rate must be positive");
  require(gamma > 0.0 && gamma <= 1.0, "schedule: gamma must lie in (0, 1]");
  for (std::size_t i = 1; i < milestones.size(); ++i)
    require(milestones[i] > milestones[i - 1], "schedule: milestones must be strictly increasing");
}

double lr_at(const LrSchedule& schedule, int k) {
  double lr = schedule.base;
  for (int m : schedule.milestones)
    if (m <= k) lr *= schedule.gamma;
  return lr;
}

}  // namespace mfac
