#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfac {

// Raised when a numerical procedure produces non-finite values or diverges.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Uniform partition of [0, T] into N_T steps. The training grid is
// {0, h, ..., (N_T - 1)h}; node N_T (= T) is only reached by the state.
class TimeGrid {
 public:
  TimeGrid() = default;
  TimeGrid(double horizon, std::size_t steps);

  double horizon() const { return horizon_; }
  std::size_t steps() const { return steps_; }
  double step() const { return step_; }

  // Node j in [0, steps()]; node steps() is the horizon.
  double at(std::size_t j) const {
    return j == steps_ ? horizon_ : static_cast<double>(j) * step_;
  }
  std::vector<double> points() const;

 private:
  double horizon_ = 1.0;
  std::size_t steps_ = 1;
  double step_ = 1.0;
};

// Non-owning view of `size()` particles in R^dim, stored row-major.
class EnsembleView {
 public:
  EnsembleView() = default;
  EnsembleView(std::span<const double> data, std::size_t dim);

  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return data_.empty(); }
  std::span<const double> operator[](std::size_t i) const {
    return data_.subspan(i * dim_, dim_);
  }
  std::span<const double> data() const { return data_; }

 private:
  std::span<const double> data_;
  std::size_t dim_ = 0;
};

// Owning set of particles: the empirical-measure representation.
class ParticleEnsemble {
 public:
  ParticleEnsemble() = default;
  ParticleEnsemble(std::size_t count, std::size_t dim);
  ParticleEnsemble(std::size_t dim, std::vector<double> data);
  explicit ParticleEnsemble(EnsembleView view);

  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  bool empty() const { return data_.empty(); }

  std::span<double> operator[](std::size_t i) {
    return std::span<double>(data_).subspan(i * dim_, dim_);
  }
  std::span<const double> operator[](std::size_t i) const {
    return std::span<const double>(data_).subspan(i * dim_, dim_);
  }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  EnsembleView view() const { return EnsembleView(data_, dim_); }
  operator EnsembleView() const { return view(); }

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

std::vector<double> empirical_mean(EnsembleView ens);

// Population SD per coordinate (divides by N).
std::vector<double> empirical_sd(EnsembleView ens);

// An empirical measure together with the summaries the models consume.
// The particles are borrowed, never copied.
class Measure {
 public:
  explicit Measure(EnsembleView particles);

  const EnsembleView& particles() const { return particles_; }
  std::span<const double> mean() const { return mean_; }

 private:
  EnsembleView particles_;
  std::vector<double> mean_;
};

void require(bool condition, const std::string& message);

}  // namespace mfac
