#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mfac/core.hpp"

namespace mfac {

// Which population the mean-field coupling looks at: the law of states, or
// (for extended MFGs) the law of the controls.
enum class MeasureSpace { kState, kAction };

// Product Gaussian initial law, given per coordinate.
struct GaussianLaw {
  std::vector<double> mean;
  std::vector<double> sd;
};

// A mean-field game: dynamics, costs and the control gradient of the
// Hamiltonian H(t, x, mu, alpha, p) = b^T p - f, evaluated at p = -G where G
// approximates the value gradient. Models are immutable once built.
class MfgModel {
 public:
  MfgModel(std::string name, std::size_t state_dim, std::size_t control_dim,
           std::size_t noise_dim, MeasureSpace coupling, GaussianLaw initial);
  virtual ~MfgModel() = default;

  const std::string& name() const { return name_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t control_dim() const { return control_dim_; }
  std::size_t noise_dim() const { return noise_dim_; }
  MeasureSpace coupling() const { return coupling_; }
  std::size_t measure_dim() const {
    return coupling_ == MeasureSpace::kState ? state_dim_ : control_dim_;
  }
  const GaussianLaw& initial_law() const { return initial_; }

  virtual void drift(double t, std::span<const double> x, const Measure& mu,
                     std::span<const double> alpha, std::span<double> out) const = 0;
  // Row-major d x n' matrix.
  virtual void diffusion(double t, std::span<const double> x, const Measure& mu,
                         std::span<double> out) const = 0;
  virtual double running_cost(double t, std::span<const double> x, const Measure& mu,
                              std::span<const double> alpha) const = 0;
  virtual double terminal_cost(std::span<const double> x, const Measure& mu) const = 0;
  // -grad_alpha f - (grad_alpha b)^T G
  virtual void grad_alpha_hamiltonian(double t, std::span<const double> x, const Measure& mu,
                                      std::span<const double> alpha, std::span<const double> G,
                                      std::span<double> out) const = 0;

 private:
  std::string name_;
  std::size_t state_dim_;
  std::size_t control_dim_;
  std::size_t noise_dim_;
  MeasureSpace coupling_;
  GaussianLaw initial_;
};

using ModelPtr = std::shared_ptr<const MfgModel>;

// Interbank lending model: dX = [a(mean - X) + alpha] dt + sigma dW.
struct SystemicRiskParams {
  double a = 0.1;
  double sigma = 0.5;
  double q = 0.5;
  double epsilon = 1.0;
  double c = 1.0;
  double init_mean = 1.0;
  double init_var = 1.0;

  void validate() const;
};

// Optimal execution with interaction through the mean trading rate.
struct OptimalExecutionParams {
  double c_alpha = 0.5;
  double c_x = 1.0;
  double c_g = 1.0;
  double gamma = 1.0;
  double sigma = 0.5;
  double init_mean = 1.0;
  double init_var = 1.0;

  void validate() const;
};

// Cucker-Smale flocking in R^3; matrices are row-major 3x3.
struct FlockingParams {
  std::array<double, 9> C{0.1, 0, 0, 0, 0.1, 0, 0, 0, 0.1};
  std::array<double, 9> R{0.5, 0, 0, 0, 0.5, 0, 0, 0, 0.5};
  std::array<double, 9> Q{1, 0, 0, 0, 1, 0, 0, 0, 1};
  double beta = 0.2;
  std::array<double, 3> position_mean{0, 0, 0};
  std::array<double, 3> velocity_mean{1, 1, 1};
  double position_var = 1.0;
  double velocity_var = 1.0;

  void validate() const;
};

using ModelParams = std::variant<SystemicRiskParams, OptimalExecutionParams, FlockingParams>;

ModelPtr make_systemic_risk(const SystemicRiskParams& p);
ModelPtr make_optimal_execution(const OptimalExecutionParams& p);
ModelPtr make_flocking(const FlockingParams& p);
ModelPtr make_model(const ModelParams& p);

std::string model_id(const ModelParams& p);

// Average over the ensemble of w(|s - s'|)(v' - v), w(r) = (1 + r^2)^(-beta),
// for x = (s, v) in R^6.
std::array<double, 3> flocking_interaction(std::span<const double> x, EnsembleView ens,
                                           double beta);

}  // namespace mfac
