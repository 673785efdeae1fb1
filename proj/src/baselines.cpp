#include "mfac/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mfac/io.hpp"

namespace mfac {

namespace {

// Solution of eta' = A (eta - plus)(eta - minus), eta(T) = terminal, at
// time-to-go u.
double riccati_closed_form(double A, const RiccatiRoots& r, double terminal, double u) {
  if (terminal == r.minus) return r.minus;
  const double K = (terminal - r.plus) / (terminal - r.minus);
  const double E = K * std::exp(-A * (r.plus - r.minus) * u);
  const double denom = 1.0 - E;
  if (std::abs(denom) < 1e-14) throw NumericalError("riccati closed form: vanishing denominator");
  return (r.plus - r.minus * E) / denom;
}

double check_time(double horizon, double t) {
  if (!(t >= -1e-12 && t <= horizon + 1e-12))
    throw std::invalid_argument("time " + std::to_string(t) + " outside [0, T]");
  return std::clamp(t, 0.0, horizon);
}

// Running trapezoid integral of f on a uniform grid with step h.
std::vector<double> cumtrapz(const std::vector<double>& f, double h) {
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t i = 1; i < f.size(); ++i) out[i] = out[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
  return out;
}

// Tail integral int_t^T f on the same grid.
std::vector<double> tail_trapz(const std::vector<double>& f, double h) {
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t i = f.size() - 1; i-- > 0;) out[i] = out[i + 1] + 0.5 * h * (f[i] + f[i + 1]);
  return out;
}

std::vector<double> fine_times(const TimeGrid& grid) {
  const std::size_t M = grid.steps() * BaselineLQ::kRefine;
  std::vector<double> t(M + 1);
  for (std::size_t i = 0; i <= M; ++i)
    t[i] = i == M ? grid.horizon() : grid.horizon() * static_cast<double>(i) / static_cast<double>(M);
  return t;
}

double interp_uniform(const std::vector<double>& col, double horizon, double t) {
  const std::size_t M = col.size() - 1;
  const double s = t / horizon * static_cast<double>(M);
  const std::size_t i = std::min(static_cast<std::size_t>(s), M - 1);
  const double w = s - static_cast<double>(i);
  if (w == 0.0) return col[i];
  return col[i] + w * (col[i + 1] - col[i]);
}

// Solves y' = k y + src backwards from y(T) = terminal on the fine grid.
std::vector<double> linear_backward(const std::vector<double>& k, const std::vector<double>& src,
                                    double terminal, double h) {
  const auto K = cumtrapz(k, h);
  std::vector<double> weighted(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) weighted[i] = std::exp(-K[i]) * src[i];
  const auto I = tail_trapz(weighted, h);
  const double KT = K.back();
  std::vector<double> y(k.size());
  for (std::size_t i = 0; i < k.size(); ++i)
    y[i] = std::exp(K[i]) * (std::exp(-KT) * terminal - I[i]);
  return y;
}

}  // namespace

RiccatiRoots systemic_roots(const SystemicRiskParams& p) {
  const double s = p.a + p.q;
  const double root = std::sqrt(s * s + (p.epsilon - p.q * p.q));
  return {-s + root, -s - root};
}

RiccatiRoots execution_etabar_roots(const OptimalExecutionParams& p) {
  const double root = std::sqrt(p.gamma * p.gamma + 4.0 * p.c_alpha * p.c_x);
  return {(p.gamma + root) / 2.0, (p.gamma - root) / 2.0};
}

double systemic_eta(const SystemicRiskParams& p, double horizon, double t) {
  return riccati_closed_form(1.0, systemic_roots(p), p.c, horizon - t);
}

double execution_eta(const OptimalExecutionParams& p, double horizon, double t) {
  const double r = std::sqrt(p.c_alpha * p.c_x);
  return riccati_closed_form(1.0 / p.c_alpha, {r, -r}, p.c_g, horizon - t);
}

double execution_etabar(const OptimalExecutionParams& p, double horizon, double t) {
  return riccati_closed_form(1.0 / p.c_alpha, execution_etabar_roots(p), p.c_g, horizon - t);
}

double BaselineLQ::interp(const std::vector<double>& col, double t) const {
  require(!col.empty(), "baseline: quantity not tabulated for this model");
  return interp_uniform(col, grid_.horizon(), check_time(grid_.horizon(), t));
}

BaselineLQ baseline_systemic(const SystemicRiskParams& p, const TimeGrid& grid) {
  p.validate();
  BaselineLQ b;
  b.kind_ = BaselineKind::kSystemicRisk;
  b.grid_ = grid;
  b.sys_ = p;
  b.t_ = fine_times(grid);
  const double T = grid.horizon();
  const double h = T / static_cast<double>(b.t_.size() - 1);
  const std::size_t M = b.t_.size();
  b.eta_.resize(M);
  for (std::size_t i = 0; i < M; ++i) b.eta_[i] = systemic_eta(p, T, b.t_[i]);

  const auto tail = tail_trapz(b.eta_, h);
  b.xi_.resize(M);
  for (std::size_t i = 0; i < M; ++i) b.xi_[i] = 0.5 * p.sigma * p.sigma * tail[i];

  b.m_.assign(M, p.init_mean);
  b.p_ = b.m_;

  std::vector<double> k(M);
  for (std::size_t i = 0; i < M; ++i) k[i] = p.a + p.q + b.eta_[i];
  const auto K = cumtrapz(k, h);
  std::vector<double> e2k(M);
  for (std::size_t i = 0; i < M; ++i) e2k[i] = std::exp(2.0 * K[i]);
  const auto acc = cumtrapz(e2k, h);
  b.var_.resize(M);
  for (std::size_t i = 0; i < M; ++i)
    b.var_[i] = std::exp(-2.0 * K[i]) * (p.init_var + p.sigma * p.sigma * acc[i]);
  return b;
}

BaselineLQ baseline_execution(const OptimalExecutionParams& p, const TimeGrid& grid) {
  p.validate();
  BaselineLQ b;
  b.kind_ = BaselineKind::kOptimalExecution;
  b.grid_ = grid;
  b.exe_ = p;
  b.t_ = fine_times(grid);
  const double T = grid.horizon();
  const double h = T / static_cast<double>(b.t_.size() - 1);
  const std::size_t M = b.t_.size();
  const double ca = p.c_alpha;
  b.eta_.resize(M);
  b.etabar_.resize(M);
  for (std::size_t i = 0; i < M; ++i) {
    b.eta_[i] = execution_eta(p, T, b.t_[i]);
    b.etabar_[i] = execution_etabar(p, T, b.t_[i]);
  }

  const auto Ebar = cumtrapz(b.etabar_, h);
  b.p_.resize(M);
  b.xi_.resize(M);
  b.m_.resize(M);
  for (std::size_t i = 0; i < M; ++i) {
    b.p_[i] = std::exp(-Ebar[i] / ca) * p.init_mean;
    b.xi_[i] = b.p_[i] * (b.etabar_[i] - b.eta_[i]);
    b.m_[i] = -b.p_[i] * b.etabar_[i] / ca;
  }

  std::vector<double> dzeta(M);
  for (std::size_t i = 0; i < M; ++i)
    dzeta[i] = 0.5 * p.sigma * p.sigma * b.eta_[i] - b.xi_[i] * b.xi_[i] / (2.0 * ca);
  b.zeta_ = tail_trapz(dzeta, h);

  const auto E = cumtrapz(b.eta_, h);
  std::vector<double> e2(M);
  for (std::size_t i = 0; i < M; ++i) e2[i] = std::exp(2.0 * E[i] / ca);
  const auto acc = cumtrapz(e2, h);
  b.var_.resize(M);
  b.action_var_.resize(M);
  for (std::size_t i = 0; i < M; ++i) {
    b.var_[i] = std::exp(-2.0 * E[i] / ca) * (p.init_var + p.sigma * p.sigma * acc[i]);
    b.action_var_[i] = b.eta_[i] * b.eta_[i] / (ca * ca) * b.var_[i];
  }
  return b;
}

std::optional<BaselineLQ> make_baseline(const ModelParams& params, const TimeGrid& grid) {
  if (const auto* s = std::get_if<SystemicRiskParams>(&params)) return baseline_systemic(*s, grid);
  if (const auto* e = std::get_if<OptimalExecutionParams>(&params))
    return baseline_execution(*e, grid);
  return std::nullopt;
}

double BaselineLQ::equilibrium_control(double t, double x) const {
  if (kind_ == BaselineKind::kSystemicRisk) {
    const double k = sys_.q + eta(t);
    return k * mean(t) + (-k) * x;
  }
  const double ca = exe_.c_alpha;
  return (-xi(t) / ca) + (-eta(t) / ca) * x;
}

double BaselineLQ::initial_value() const {
  if (kind_ == BaselineKind::kSystemicRisk) return 0.5 * eta_[0] * sys_.init_var + xi_[0];
  const double m0 = exe_.init_mean;
  return 0.5 * eta_[0] * (exe_.init_var + m0 * m0) + xi_[0] * m0 + zeta_[0];
}

std::vector<double> BaselineLQ::riccati_residuals() const {
  const double T = grid_.horizon();
  const double d = 1e-5;
  std::vector<double> out(grid_.steps() + 1);
  // Second-order stencils throughout; one-sided at the ends of [0, T].
  auto deriv = [&](auto&& f, double t) {
    if (t - d < 0.0) return (-3.0 * f(t) + 4.0 * f(t + d) - f(t + 2.0 * d)) / (2.0 * d);
    if (t + d > T) return (3.0 * f(t) - 4.0 * f(t - d) + f(t - 2.0 * d)) / (2.0 * d);
    return (f(t + d) - f(t - d)) / (2.0 * d);
  };
  for (std::size_t j = 0; j <= grid_.steps(); ++j) {
    const double t = grid_.at(j);
    if (kind_ == BaselineKind::kSystemicRisk) {
      const auto& p = sys_;
      auto f = [&](double s) { return systemic_eta(p, T, s); };
      const double e = f(t);
      const double rhs = e * e + 2.0 * (p.a + p.q) * e - (p.epsilon - p.q * p.q);
      out[j] = std::abs(deriv(f, t) - rhs);
    } else {
      const auto& p = exe_;
      auto f = [&](double s) { return execution_eta(p, T, s); };
      auto fb = [&](double s) { return execution_etabar(p, T, s); };
      const double e = f(t), eb = fb(t);
      const double r1 = std::abs(deriv(f, t) - (e * e / p.c_alpha - p.c_x));
      const double r2 =
          std::abs(deriv(fb, t) - (eb * eb / p.c_alpha - p.gamma * eb / p.c_alpha - p.c_x));
      out[j] = std::max(r1, r2);
    }
  }
  return out;
}

ConditionalControl::ConditionalControl(const BaselineLQ& baseline, std::vector<double> mean_path)
    : base_(&baseline) {
  const TimeGrid& grid = baseline.grid();
  require(mean_path.size() == grid.steps() + 1,
          "conditional control: mean path needs one value per grid node including T");
  t_ = baseline.fine_times();
  const std::size_t M = t_.size();
  const double h = grid.horizon() / static_cast<double>(M - 1);
  mean_.resize(M);
  for (std::size_t i = 0; i < M; ++i) mean_[i] = interp_uniform(mean_path, grid.horizon(), t_[i]);
  const auto& eta = baseline.fine_eta();
  std::vector<double> k(M), src(M);
  double terminal = 0.0;
  if (baseline.kind() == BaselineKind::kSystemicRisk) {
    const auto& p = baseline.systemic();
    for (std::size_t i = 0; i < M; ++i) {
      k[i] = p.a + p.q + eta[i];
      src[i] = (p.epsilon - p.q * p.q - (p.a + p.q) * eta[i]) * mean_[i];
    }
    terminal = -p.c * mean_.back();
  } else {
    const auto& p = baseline.execution();
    for (std::size_t i = 0; i < M; ++i) {
      k[i] = eta[i] / p.c_alpha;
      src[i] = p.gamma * mean_[i];
    }
  }
  offset_ = linear_backward(k, src, terminal, h);
}

double ConditionalControl::offset(double t) const {
  const double T = base_->grid().horizon();
  return interp_uniform(offset_, T, check_time(T, t));
}

double ConditionalControl::operator()(double t, double x) const {
  const double T = base_->grid().horizon();
  t = check_time(T, t);
  const double eta = base_->eta(t);
  const double off = interp_uniform(offset_, T, t);
  if (base_->kind() == BaselineKind::kSystemicRisk) {
    const double m = interp_uniform(mean_, T, t);
    return base_->systemic().q * (m - x) - (eta * x + off);
  }
  return -(eta * x + off) / base_->execution().c_alpha;
}

Policy baseline_policy(const BaselineLQ& baseline) {
  return [&baseline](std::size_t step, std::span<const double> x, std::span<double> alpha) {
    alpha[0] = baseline.equilibrium_control(baseline.grid().at(step), x[0]);
  };
}

Policy conditional_policy(const ConditionalControl& control, const TimeGrid& grid) {
  return [&control, grid](std::size_t step, std::span<const double> x, std::span<double> alpha) {
    alpha[0] = control(grid.at(step), x[0]);
  };
}

TrajectoryBatch baseline_simulate(const BaselineLQ& baseline, const MfgModel& model,
                                  const ParticleEnsemble& initial,
                                  std::span<const ParticleEnsemble> increments,
                                  BaselineCoupling coupling) {
  require(model.state_dim() == 1 && model.control_dim() == 1,
          "baseline: closed forms exist only for scalar models");
  const TimeGrid& grid = baseline.grid();
  const Policy policy = baseline_policy(baseline);
  if (coupling == BaselineCoupling::kEmpirical)
    return simulate_self_coupled(model, grid, policy, initial, increments);
  // A single particle at the tabulated mean carries the closed-form flow.
  std::vector<double> means(grid.steps() + 1);
  for (std::size_t j = 0; j <= grid.steps(); ++j) means[j] = baseline.mean(grid.at(j));
  const MeasureProvider flow = [&means](std::size_t j, const TrajectoryBatch&) {
    return EnsembleView(std::span<const double>(&means[j], 1), 1);
  };
  return simulate_with(model, grid, policy, initial, increments, flow, flow);
}

void load_baseline_actor(const BaselineLQ& baseline, NetStack& stack) {
  const auto& d = stack.dims();
  require(d.state_dim == 1 && d.control_dim == 1, "baseline actor: scalar networks required");
  require(d.steps == baseline.grid().steps(), "baseline actor: grid mismatch");
  for (std::size_t j = 0; j < d.steps; ++j) {
    Mlp& net = stack.actor[j];
    std::fill(net.params().begin(), net.params().end(), 0.0);
    const double t = baseline.grid().at(j);
    if (baseline.kind() == BaselineKind::kSystemicRisk) {
      const double k = baseline.systemic().q + baseline.eta(t);
      net.b2(0) = k * baseline.mean(t);
      net.wskip(0, 0) = -k;
    } else {
      const double ca = baseline.execution().c_alpha;
      net.b2(0) = -baseline.xi(t) / ca;
      net.wskip(0, 0) = -baseline.eta(t) / ca;
    }
  }
}

void write_baseline_csv(const std::filesystem::path& path, const BaselineLQ& baseline) {
  const bool exe = baseline.kind() == BaselineKind::kOptimalExecution;
  CsvWriter csv(path);
  std::vector<std::string> header{"t", "eta", "xi", "m", "var"};
  if (exe) header.insert(header.end(), {"etabar", "zeta", "p", "action_var"});
  header.push_back("residual");
  csv.header(header);
  const auto res = baseline.riccati_residuals();
  const TimeGrid& grid = baseline.grid();
  for (std::size_t j = 0; j <= grid.steps(); ++j) {
    const double t = grid.at(j);
    csv.field(t).field(baseline.eta(t)).field(baseline.xi(t)).field(baseline.mean(t));
    csv.field(baseline.state_var(t));
    if (exe) {
      csv.field(baseline.etabar(t)).field(baseline.zeta(t)).field(baseline.state_mean(t));
      csv.field(baseline.action_var(t));
    }
    csv.field(res[j]);
    csv.end_row();
  }
}

}  // namespace mfac
