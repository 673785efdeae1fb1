#include <doctest.h>

#include <cmath>

#include "mfac/baselines.hpp"
#include "mfac/evaluate.hpp"
#include "mfac/netstack.hpp"
#include "oracles.hpp"

using namespace mfac;

namespace {

const TimeGrid kGrid(1.0, 50);

// f = f_value, g = g_value everywhere, zero drift and unit noise.
class ConstantCostModel final : public MfgModel {
 public:
  ConstantCostModel(double f, double g)
      : MfgModel("constant", 1, 1, 1, MeasureSpace::kState, GaussianLaw{{0.0}, {1.0}}),
        f_(f),
        g_(g) {}
  void drift(double, std::span<const double>, const Measure&, std::span<const double>,
             std::span<double> out) const override {
    out[0] = 0.0;
  }
  void diffusion(double, std::span<const double>, const Measure&,
                 std::span<double> out) const override {
    out[0] = 1.0;
  }
  double running_cost(double, std::span<const double>, const Measure&,
                      std::span<const double>) const override {
    return f_;
  }
  double terminal_cost(std::span<const double>, const Measure&) const override { return g_; }
  void grad_alpha_hamiltonian(double, std::span<const double>, const Measure&,
                              std::span<const double>, std::span<const double>,
                              std::span<double> out) const override {
    out[0] = 0.0;
  }

 private:
  double f_, g_;
};

Policy shifted(const BaselineLQ& b, double shift) {
  return [&b, shift](std::size_t j, std::span<const double> x, std::span<double> a) {
    a[0] = b.equilibrium_control(b.grid().at(j), x[0]) + shift;
  };
}

}  // namespace

TEST_CASE("evaluate_cost trivial cases") {
  auto run = [](double f, double g) {
    ConstantCostModel model(f, g);
    auto x0 = sample_initial(model.initial_law(), 10, {0, Stream::kInitialState});
    auto xi = draw_increments(10, 50, 1, {0, Stream::kSimulation});
    Policy zero = [](std::size_t, std::span<const double>, std::span<double> a) { a[0] = 0.0; };
    auto traj = simulate_self_coupled(model, kGrid, zero, x0, xi);
    const double stored = evaluate_cost(traj, kGrid.step());
    std::vector<ParticleEnsemble> measures(traj.states.begin(), traj.states.end() - 1);
    const double recomputed = evaluate_cost(model, traj, measures, traj.states.back(), kGrid);
    CHECK(stored == doctest::Approx(recomputed).epsilon(1e-14));
    return stored;
  };
  CHECK(run(0.0, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(run(1.0, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("baseline as actor reproduces the baseline exactly") {
  for (const auto& params : {ModelParams{SystemicRiskParams{}}, ModelParams{OptimalExecutionParams{}}}) {
    auto b = *make_baseline(params, kGrid);
    auto model = make_model(params);
    NetStack stack(NetDims{50, 1, 1, 1, 64});
    stack.initialize(0);
    load_baseline_actor(b, stack);
    const auto r = evaluate(actor_policy(stack.actor), *model, b, 2000, 3);
    CAPTURE(model->name());
    CHECK(r.rev <= 1e-6);
    CHECK(r.rmse_x <= 1e-6);
    CHECK(r.rmse_alpha <= 1e-6);
    CHECK(r.rmse_m <= 1e-6);
    CHECK(r.n_test == 2000);
  }
}

TEST_CASE("constant control offset gives the closed-form RMSE_alpha") {
  auto b = baseline_systemic({}, kGrid);
  auto model = make_systemic_risk({});
  auto x0 = sample_initial(model->initial_law(), 500, {4, Stream::kInitialState});
  auto xi = draw_increments(500, 50, 1, {4, Stream::kSimulation});
  auto hat = baseline_simulate(b, *model, x0, xi, BaselineCoupling::kEmpirical);
  TrajectoryBatch check = hat;
  for (auto& c : check.controls)
    for (double& v : c.data()) v += 0.1;
  double ss = 0.0;
  std::size_t count = 0;
  for (const auto& c : hat.controls)
    for (double v : c.data()) {
      ss += v * v;
      ++count;
    }
  const double rms = std::sqrt(ss / static_cast<double>(count));
  const auto r = compare_paths(hat, check, model->coupling(), kGrid.step());
  CHECK(std::abs(r.rmse_alpha - 0.1 / rms) <= 1e-9);
  CHECK(r.rmse_x == 0.0);
}

TEST_CASE("metric invariants") {
  auto b = baseline_systemic({}, kGrid);
  auto model = make_systemic_risk({});
  auto x0 = sample_initial(model->initial_law(), 300, {5, Stream::kInitialState});
  auto xi = draw_increments(300, 50, 1, {5, Stream::kSimulation});
  auto hat = baseline_simulate(b, *model, x0, xi, BaselineCoupling::kEmpirical);
  auto check = simulate_self_coupled(*model, kGrid, shifted(b, 0.2), x0, xi);

  SUBCASE("REV of a batch against itself is zero") {
    CHECK(compare_paths(hat, hat, model->coupling(), kGrid.step()).rev == 0.0);
  }
  SUBCASE("RMSE_X is scale invariant") {
    auto scale = [](TrajectoryBatch t, double s) {
      for (auto& e : t.states)
        for (double& v : e.data()) v *= s;
      return t;
    };
    const double base = compare_paths(hat, check, model->coupling(), kGrid.step()).rmse_x;
    const double scaled =
        compare_paths(scale(hat, -3.0), scale(check, -3.0), model->coupling(), kGrid.step()).rmse_x;
    CHECK(scaled == doctest::Approx(base).epsilon(1e-12));
  }
  SUBCASE("degenerate denominator") {
    TrajectoryBatch zero = hat;
    for (auto& e : zero.states) std::fill(e.data().begin(), e.data().end(), 0.0);
    CHECK_THROWS_WITH(compare_paths(zero, check, model->coupling(), kGrid.step()),
                      "degenerate denominator");
  }
}

TEST_CASE("RMSE_alpha is monotone in the control offset") {
  auto b = baseline_systemic({}, kGrid);
  auto model = make_systemic_risk({});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto small = evaluate(shifted(b, 0.05), *model, b, 200, seed);
    const auto large = evaluate(shifted(b, 0.1), *model, b, 200, seed);
    CHECK(large.rmse_alpha >= small.rmse_alpha);
  }
}
