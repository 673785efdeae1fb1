#include "mfac/models.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace mfac {

MfgModel::MfgModel(std::string name, std::size_t state_dim, std::size_t control_dim,
                   std::size_t noise_dim, MeasureSpace coupling, GaussianLaw initial)
    : name_(std::move(name)),
      state_dim_(state_dim),
      control_dim_(control_dim),
      noise_dim_(noise_dim),
      coupling_(coupling),
      initial_(std::move(initial)) {
  require(initial_.mean.size() == state_dim_ && initial_.sd.size() == state_dim_,
          "model: initial law dimension mismatch");
}

void SystemicRiskParams::validate() const {
  for (double v : {a, sigma, q, epsilon, c, init_mean, init_var})
    require(std::isfinite(v), "systemic risk: non-finite parameter");
  require(a >= 0.0 && q >= 0.0 && c >= 0.0, "systemic risk: a, q, c must be nonnegative");
  require(sigma > 0.0, "systemic risk: sigma must be positive");
  require(q * q <= epsilon, "systemic risk: need q^2 <= epsilon");
  require(init_var >= 0.0, "systemic risk: negative initial variance");
}

void OptimalExecutionParams::validate() const {
  for (double v : {c_alpha, c_x, c_g, gamma, sigma, init_mean, init_var})
    require(std::isfinite(v), "optimal execution: non-finite parameter");
  require(c_alpha > 0.0 && c_x > 0.0 && c_g > 0.0 && gamma > 0.0 && sigma > 0.0,
          "optimal execution: c_alpha, c_x, c_g, gamma, sigma must be positive");
  require(init_var >= 0.0, "optimal execution: negative initial variance");
}

namespace {

Eigen::Matrix3d as_matrix(const std::array<double, 9>& a) {
  Eigen::Matrix3d m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = a[static_cast<std::size_t>(3 * i + j)];
  return m;
}

void require_psd(const std::array<double, 9>& a, const char* what) {
  const Eigen::Matrix3d m = as_matrix(a);
  require(m.allFinite(), std::string("flocking: non-finite ") + what);
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12,
          std::string("flocking: ") + what + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m);
  require(es.eigenvalues().minCoeff() >= -1e-12,
          std::string("flocking: ") + what + " must be positive semi-definite");
}

}  // namespace

void FlockingParams::validate() const {
  require_psd(R, "R");
  require_psd(Q, "Q");
  for (double v : C) require(std::isfinite(v), "flocking: non-finite C");
  require(std::isfinite(beta) && beta >= 0.0, "flocking: beta must be >= 0");
  require(position_var >= 0.0 && velocity_var >= 0.0, "flocking: negative initial variance");
}

namespace {

class SystemicRisk final : public MfgModel {
 public:
  explicit SystemicRisk(const SystemicRiskParams& p)
      : MfgModel("systemic_risk", 1, 1, 1, MeasureSpace::kState,
                 GaussianLaw{{p.init_mean}, {std::sqrt(p.init_var)}}),
        p_(p) {}

  void drift(double, std::span<const double> x, const Measure& mu,
             std::span<const double> alpha, std::span<double> out) const override {
    out[0] = p_.a * (mu.mean()[0] - x[0]) + alpha[0];
  }
  void diffusion(double, std::span<const double>, const Measure&,
                 std::span<double> out) const override {
    out[0] = p_.sigma;
  }
  double running_cost(double, std::span<const double> x, const Measure& mu,
                      std::span<const double> alpha) const override {
    const double gap = mu.mean()[0] - x[0];
    return 0.5 * alpha[0] * alpha[0] - p_.q * alpha[0] * gap + 0.5 * p_.epsilon * gap * gap;
  }
  double terminal_cost(std::span<const double> x, const Measure& mu) const override {
    const double gap = x[0] - mu.mean()[0];
    return 0.5 * p_.c * gap * gap;
  }
  void grad_alpha_hamiltonian(double, std::span<const double> x, const Measure& mu,
                              std::span<const double> alpha, std::span<const double> G,
                              std::span<double> out) const override {
    out[0] = -G[0] - alpha[0] + p_.q * (mu.mean()[0] - x[0]);
  }

 private:
  SystemicRiskParams p_;
};

// The measure argument lives on the action space.
class OptimalExecution final : public MfgModel {
 public:
  explicit OptimalExecution(const OptimalExecutionParams& p)
      : MfgModel("optimal_execution", 1, 1, 1, MeasureSpace::kAction,
                 GaussianLaw{{p.init_mean}, {std::sqrt(p.init_var)}}),
        p_(p) {}

  void drift(double, std::span<const double>, const Measure&, std::span<const double> alpha,
             std::span<double> out) const override {
    out[0] = alpha[0];
  }
  void diffusion(double, std::span<const double>, const Measure&,
                 std::span<double> out) const override {
    out[0] = p_.sigma;
  }
  double running_cost(double, std::span<const double> x, const Measure& mu,
                      std::span<const double> alpha) const override {
    return 0.5 * p_.c_alpha * alpha[0] * alpha[0] + 0.5 * p_.c_x * x[0] * x[0] -
           p_.gamma * x[0] * mu.mean()[0];
  }
  double terminal_cost(std::span<const double> x, const Measure&) const override {
    return 0.5 * p_.c_g * x[0] * x[0];
  }
  void grad_alpha_hamiltonian(double, std::span<const double>, const Measure&,
                              std::span<const double> alpha, std::span<const double> G,
                              std::span<double> out) const override {
    out[0] = -G[0] - p_.c_alpha * alpha[0];
  }

 private:
  OptimalExecutionParams p_;
};

// State (s, v) in R^6, control = acceleration in R^3.
class Flocking final : public MfgModel {
 public:
  explicit Flocking(const FlockingParams& p)
      : MfgModel("flocking", 6, 3, 3, MeasureSpace::kState, initial_law(p)), p_(p) {}

  void drift(double, std::span<const double> x, const Measure&, std::span<const double> alpha,
             std::span<double> out) const override {
    for (std::size_t i = 0; i < 3; ++i) {
      out[i] = x[3 + i];
      out[3 + i] = alpha[i];
    }
  }
  void diffusion(double, std::span<const double>, const Measure&,
                 std::span<double> out) const override {
    std::fill(out.begin(), out.begin() + 9, 0.0);
    std::copy(p_.C.begin(), p_.C.end(), out.begin() + 9);
  }
  double running_cost(double, std::span<const double> x, const Measure& mu,
                      std::span<const double> alpha) const override {
    const auto I = flocking_interaction(x, mu.particles(), p_.beta);
    return quad(p_.R, alpha.data()) + quad(p_.Q, I.data());
  }
  double terminal_cost(std::span<const double>, const Measure&) const override { return 0.0; }
  void grad_alpha_hamiltonian(double, std::span<const double>, const Measure&,
                              std::span<const double> alpha, std::span<const double> G,
                              std::span<double> out) const override {
    for (std::size_t i = 0; i < 3; ++i) {
      double r = 0.0;
      for (std::size_t j = 0; j < 3; ++j)
        r += (p_.R[3 * i + j] + p_.R[3 * j + i]) * alpha[j];
      out[i] = -r - G[3 + i];
    }
  }

 private:
  static GaussianLaw initial_law(const FlockingParams& p) {
    GaussianLaw law;
    for (double m : p.position_mean) law.mean.push_back(m);
    for (double m : p.velocity_mean) law.mean.push_back(m);
    law.sd.assign(3, std::sqrt(p.position_var));
    law.sd.resize(6, std::sqrt(p.velocity_var));
    return law;
  }
  static double quad(const std::array<double, 9>& A, const double* v) {
    double s = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) s += v[i] * A[3 * i + j] * v[j];
    return s;
  }

  FlockingParams p_;
};

}  // namespace

std::array<double, 3> flocking_interaction(std::span<const double> x, EnsembleView ens,
                                           double beta) {
  require(x.size() == 6 && ens.dim() == 6, "flocking interaction: particles must be 6-dimensional");
  require(!ens.empty(), "empty measure");
  std::array<double, 3> acc{0.0, 0.0, 0.0};
  for (std::size_t m = 0; m < ens.size(); ++m) {
    auto y = ens[m];
    double r2 = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      const double d = x[i] - y[i];
      r2 += d * d;
    }
    const double w = beta == 0.0 ? 1.0 : std::pow(1.0 + r2, -beta);
    for (std::size_t i = 0; i < 3; ++i) acc[i] += w * (y[3 + i] - x[3 + i]);
  }
  const double inv = 1.0 / static_cast<double>(ens.size());
  for (double& v : acc) v *= inv;
  return acc;
}

ModelPtr make_systemic_risk(const SystemicRiskParams& p) {
  p.validate();
  return std::make_shared<SystemicRisk>(p);
}

ModelPtr make_optimal_execution(const OptimalExecutionParams& p) {
  p.validate();
  return std::make_shared<OptimalExecution>(p);
}

ModelPtr make_flocking(const FlockingParams& p) {
  p.validate();
  return std::make_shared<Flocking>(p);
}

ModelPtr make_model(const ModelParams& p) {
  return std::visit(
      [](const auto& params) -> ModelPtr {
        using T = std::decay_t<decltype(params)>;
        if constexpr (std::is_same_v<T, SystemicRiskParams>) return make_systemic_risk(params);
        else if constexpr (std::is_same_v<T, OptimalExecutionParams>)
          return make_optimal_execution(params);
        else return make_flocking(params);
      },
      p);
}

std::string model_id(const ModelParams& p) {
  switch (p.index()) {
    case 0: return "systemic_risk";
    case 1: return "optimal_execution";
    default: return "flocking";
  }
}

}  // namespace mfac
