#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "mfac/core.hpp"
#include "mfac/models.hpp"
#include "mfac/netstack.hpp"
#include "mfac/simulate.hpp"

namespace mfac {

enum class BaselineKind { kSystemicRisk, kOptimalExecution };

// Roots of the scalar Riccati right-hand side, eta' = A (eta - plus)(eta - minus).
struct RiccatiRoots {
  double plus = 0.0;
  double minus = 0.0;
};

RiccatiRoots systemic_roots(const SystemicRiskParams& p);
RiccatiRoots execution_etabar_roots(const OptimalExecutionParams& p);

// Closed-form Riccati solutions at time t on [0, T].
double systemic_eta(const SystemicRiskParams& p, double horizon, double t);
double execution_eta(const OptimalExecutionParams& p, double horizon, double t);
double execution_etabar(const OptimalExecutionParams& p, double horizon, double t);

// Closed-form linear-quadratic equilibrium tabulated on a grid refined by
// `kRefine` relative to the time grid; values between fine nodes are
// linearly interpolated.
//
// Systemic risk: eta, xi (value v = eta/2 (x-m)^2 + xi), mean m, state var.
// Execution: eta, xi, zeta (v = eta/2 x^2 + xi x + zeta), etabar, p = E[X],
// m = mean of the controls, state and action variances.
class BaselineLQ {
 public:
  static constexpr std::size_t kRefine = 10;

  BaselineKind kind() const { return kind_; }
  const TimeGrid& grid() const { return grid_; }
  const SystemicRiskParams& systemic() const { return sys_; }
  const OptimalExecutionParams& execution() const { return exe_; }

  const std::vector<double>& fine_times() const { return t_; }
  const std::vector<double>& fine_eta() const { return eta_; }

  double eta(double t) const { return interp(eta_, t); }
  double xi(double t) const { return interp(xi_, t); }
  double zeta(double t) const { return interp(zeta_, t); }
  double etabar(double t) const { return interp(etabar_, t); }
  double state_mean(double t) const { return interp(p_, t); }
  double mean(double t) const { return interp(m_, t); }  // the coupling mean
  double state_var(double t) const { return interp(var_, t); }
  double action_var(double t) const { return interp(action_var_, t); }

  // Equilibrium feedback control; throws if t is outside [0, T].
  double equilibrium_control(double t, double x) const;

  // Expected equilibrium cost, i.e. the value function integrated against mu_0.
  double initial_value() const;

  // |central difference - ODE right-hand side| of the closed-form eta (and
  // etabar) at each grid node.
  std::vector<double> riccati_residuals() const;

  friend BaselineLQ baseline_systemic(const SystemicRiskParams& p, const TimeGrid& grid);
  friend BaselineLQ baseline_execution(const OptimalExecutionParams& p, const TimeGrid& grid);

 private:
  double interp(const std::vector<double>& col, double t) const;

  BaselineKind kind_ = BaselineKind::kSystemicRisk;
  TimeGrid grid_;
  SystemicRiskParams sys_;
  OptimalExecutionParams exe_;
  std::vector<double> t_, eta_, xi_, zeta_, etabar_, p_, m_, var_, action_var_;
};

BaselineLQ baseline_systemic(const SystemicRiskParams& p, const TimeGrid& grid);
BaselineLQ baseline_execution(const OptimalExecutionParams& p, const TimeGrid& grid);

// Empty for models without a closed form (flocking).
std::optional<BaselineLQ> make_baseline(const ModelParams& params, const TimeGrid& grid);

// Best response to a given flow of coupling means m_t (state mean for
// systemic risk, mean control for execution), tabulated at the grid nodes
// 0..N_T. Systemic risk: q(m - x) - (eta x + rho); execution:
// -(eta x + xi)/c_alpha, with the linear coefficient solved by quadrature.
class ConditionalControl {
 public:
  ConditionalControl(const BaselineLQ& baseline, std::vector<double> mean_path);

  double operator()(double t, double x) const;
  // rho (systemic) or xi (execution) at t.
  double offset(double t) const;

 private:
  const BaselineLQ* base_;
  std::vector<double> t_, offset_, mean_;
};

// Feedback policy on the grid nodes.
Policy baseline_policy(const BaselineLQ& baseline);
Policy conditional_policy(const ConditionalControl& control, const TimeGrid& grid);

enum class BaselineCoupling {
  kClosedForm,  // model sees the tabulated mean flow
  kEmpirical,   // model sees the batch's own empirical measure
};

// Euler-Maruyama under the equilibrium control. The control always uses the
// closed-form mean; `coupling` picks the measure fed to drift and costs.
TrajectoryBatch baseline_simulate(const BaselineLQ& baseline, const MfgModel& model,
                                  const ParticleEnsemble& initial,
                                  std::span<const ParticleEnsemble> increments,
                                  BaselineCoupling coupling);

// Sets every actor network to the (affine) equilibrium control at its node.
void load_baseline_actor(const BaselineLQ& baseline, NetStack& stack);

// CSV: t, eta, xi, m, var[, etabar, zeta, p, action_var], residual.
void write_baseline_csv(const std::filesystem::path& path, const BaselineLQ& baseline);

}  // namespace mfac
