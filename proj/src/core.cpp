#include "mfac/core.hpp"

#include <cmath>

namespace mfac {

void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

TimeGrid::TimeGrid(double horizon, std::size_t steps)
    : horizon_(horizon), steps_(steps) {
  require(std::isfinite(horizon) && horizon > 0.0, "time grid: horizon must be positive");
  require(steps > 0, "time grid: need at least one step");
  step_ = horizon / static_cast<double>(steps);
}

std::vector<double> TimeGrid::points() const {
  std::vector<double> pts(steps_);
  for (std::size_t j = 0; j < steps_; ++j) pts[j] = at(j);
  return pts;
}

EnsembleView::EnsembleView(std::span<const double> data, std::size_t dim)
    : data_(data), dim_(dim) {
  require(dim > 0 || data.empty(), "ensemble: zero dimension");
  require(dim == 0 || data.size() % dim == 0, "ensemble: data size is not a multiple of dim");
}

ParticleEnsemble::ParticleEnsemble(std::size_t count, std::size_t dim)
    : dim_(dim), data_(count * dim, 0.0) {}

ParticleEnsemble::ParticleEnsemble(std::size_t dim, std::vector<double> data)
    : dim_(dim), data_(std::move(data)) {
  require(dim > 0, "ensemble: zero dimension");
  require(data_.size() % dim == 0, "ensemble: data size is not a multiple of dim");
}

ParticleEnsemble::ParticleEnsemble(EnsembleView view)
    : dim_(view.dim()), data_(view.data().begin(), view.data().end()) {}

std::vector<double> empirical_mean(EnsembleView ens) {
  if (ens.empty()) throw std::invalid_argument("empty measure");
  std::vector<double> mean(ens.dim(), 0.0);
  for (std::size_t m = 0; m < ens.size(); ++m) {
    auto p = ens[m];
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += p[i];
  }
  for (double& v : mean) v /= static_cast<double>(ens.size());
  return mean;
}

std::vector<double> empirical_sd(EnsembleView ens) {
  const auto mean = empirical_mean(ens);
  std::vector<double> var(ens.dim(), 0.0);
  for (std::size_t m = 0; m < ens.size(); ++m) {
    auto p = ens[m];
    for (std::size_t i = 0; i < var.size(); ++i) {
      const double d = p[i] - mean[i];
      var[i] += d * d;
    }
  }
  for (double& v : var) v = std::sqrt(v / static_cast<double>(ens.size()));
  return var;
}

Measure::Measure(EnsembleView particles)
    : particles_(particles), mean_(empirical_mean(particles)) {}

}  // namespace mfac
