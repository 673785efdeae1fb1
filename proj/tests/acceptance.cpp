// Acceptance checks for the solver. Each criterion prints one PASS/FAIL line.
// Training runs are cached under --cache keyed by a hash of the full
// configuration, so criteria that share a run train it once.

#include <tbb/global_control.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mfac/baselines.hpp"
#include "mfac/config.hpp"
#include "mfac/evaluate.hpp"
#include "mfac/io.hpp"
#include "mfac/langevin.hpp"
#include "mfac/netstack.hpp"
#include "mfac/objectives.hpp"
#include "mfac/trainer.hpp"
#include "mfac/transport.hpp"
#include "oracles.hpp"

using namespace mfac;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Thresholds.
constexpr std::size_t kNTest = 10000;
constexpr double kSystemicRev = 0.01, kSystemicX = 0.02, kSystemicAlpha = 0.08,
                 kSystemicM = 0.03;
constexpr double kExecutionRev = 0.05, kExecutionX = 0.08, kExecutionAlpha = 0.12,
                 kExecutionM = 0.12;
constexpr double kDecayR2 = 0.7, kDecayFinalFraction = 0.10;
constexpr int kDecayFrom = 10, kDecayTo = 100;
constexpr std::size_t kSmoothWindow = 10;
constexpr double kSmallBetaMu = 0.01, kBetaMuRatio = 2.0;
constexpr int kFrozenIterations = 100;
constexpr double kFrozenFraction = 0.05;
constexpr double kPropertySeconds = 120.0;
constexpr int kDeterminismIterations = 10;
constexpr int kFlockingIterations = 50;
constexpr int kSeeds = 3;

std::string g_cache;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

TrainConfig config(const std::string& name) {
  return load_config(fs::path(MFAC_CONFIG_DIR) / (name + ".json"));
}

std::vector<IterationRecord> read_history(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<IterationRecord> out;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() < 8) f.resize(8);
    auto opt = [](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return std::stod(s);
    };
    IterationRecord r;
    r.k = std::stoi(f[0]);
    r.score_loss = std::stod(f[1]);
    r.critic_loss = std::stod(f[2]);
    r.actor_loss = std::stod(f[3]);
    r.lyap_actor = opt(f[4]);
    r.lyap_critic = opt(f[5]);
    r.w2_gap = std::stod(f[6]);
    r.terminal_spread = std::stod(f[7]);
    out.push_back(r);
  }
  return out;
}

struct Run {
  std::vector<IterationRecord> history;
  std::optional<MetricsReport> metrics;
};

MetricsReport metrics_from(const json& j) {
  MetricsReport r;
  r.rev = j.at("rev");
  r.rmse_x = j.at("rmse_x");
  r.rmse_alpha = j.at("rmse_alpha");
  r.rmse_m = j.at("rmse_m");
  r.n_test = j.at("n_test");
  r.j_hat = j.at("j_hat");
  r.j_check = j.at("j_check");
  return r;
}

// Trains (or loads) the run for cfg and evaluates it on n_test paths when the
// model has a baseline.
Run cached_run(const TrainConfig& cfg, std::size_t n_test) {
  const json key = {{"config", config_to_json(cfg)}, {"n_test", n_test}};
  const fs::path dir =
      fs::path(g_cache) / (model_id(cfg.model) + "-" + sha256_text(key.dump()).substr(0, 16));
  const fs::path done = dir / "done";
  if (!fs::exists(done)) {
    fs::create_directories(dir);
    std::fprintf(stderr, "training %s seed %llu for %d iterations -> %s\n",
                 model_id(cfg.model).c_str(), static_cast<unsigned long long>(cfg.seed),
                 cfg.k_end, dir.string().c_str());
    const auto result = train(cfg, [](const IterationRecord& r) {
      if (r.k % 25 == 0)
        std::fprintf(stderr, "  k=%d w2_gap=%.4g (%.2fs)\n", r.k, r.w2_gap, r.wall_time);
    });
    write_history_csv((dir / "history.csv").string(), result.history);
    save_checkpoint(result.stack, model_id(cfg.model), dir / "checkpoint.json");
    const TimeGrid grid(cfg.horizon, cfg.steps);
    const auto baseline = make_baseline(cfg.model, grid);
    json m = json::object();
    if (baseline && n_test > 0) {
      const auto model = make_model(cfg.model);
      const auto r = evaluate(actor_policy(result.stack.actor), *model, *baseline, n_test, cfg.seed);
      m = {{"rev", r.rev},       {"rmse_x", r.rmse_x}, {"rmse_alpha", r.rmse_alpha},
           {"rmse_m", r.rmse_m}, {"n_test", r.n_test}, {"j_hat", r.j_hat},
           {"j_check", r.j_check}};
    }
    write_text_atomic(dir / "metrics.json", m.dump(2));
    write_text_atomic(dir / "config.json", key.dump(2));
    write_text_atomic(done, utc_now() + "\n");
  }
  Run run;
  run.history = read_history(dir / "history.csv");
  const json m = json::parse(read_text(dir / "metrics.json"));
  if (!m.empty()) run.metrics = metrics_from(m);
  return run;
}

TrainConfig systemic_run_config() {
  TrainConfig cfg = config("systemic_risk");
  cfg.k_end = 250;
  cfg.n_batch = 250;
  cfg.seed = 0;
  return cfg;
}

Outcome reproduction(const std::string& name, double rev, double x, double alpha, double m) {
  TrainConfig cfg = config(name);
  cfg.k_end = 250;
  cfg.n_batch = 250;
  cfg.seed = 0;
  const auto r = *cached_run(cfg, kNTest).metrics;
  Outcome o;
  o.pass = r.rev <= rev && r.rmse_x <= x && r.rmse_alpha <= alpha && r.rmse_m <= m;
  o.detail = "REV " + fmt("%.3f%%", 100 * r.rev) + " (<= " + fmt("%g%%", 100 * rev) + "), RMSE_X " +
             fmt("%.3f%%", 100 * r.rmse_x) + " (<= " + fmt("%g%%", 100 * x) + "), RMSE_alpha " +
             fmt("%.3f%%", 100 * r.rmse_alpha) + " (<= " + fmt("%g%%", 100 * alpha) +
             "), RMSE_M " + fmt("%.3f%%", 100 * r.rmse_m) + " (<= " + fmt("%g%%", 100 * m) + ")";
  return o;
}

Outcome criterion1() {
  return reproduction("systemic_risk", kSystemicRev, kSystemicX, kSystemicAlpha, kSystemicM);
}

Outcome criterion2() {
  return reproduction("optimal_execution", kExecutionRev, kExecutionX, kExecutionAlpha,
                      kExecutionM);
}

// Checks one diagnostic series for log-linear decay and overall reduction.
bool decay_ok(const std::vector<double>& series, const std::string& name, std::string& detail) {
  const auto smooth = oracle::smooth(series, kSmoothWindow);
  std::vector<double> ks, logs;
  for (int k = kDecayFrom; k <= kDecayTo && k <= static_cast<int>(smooth.size()); ++k) {
    ks.push_back(k);
    logs.push_back(std::log(smooth[static_cast<std::size_t>(k - 1)]));
  }
  const auto fit = oracle::fit_line(ks, logs);
  const double peak = *std::max_element(series.begin(), series.end());
  const double fraction = series.back() / peak;
  const bool ok = fit.slope < 0 && fit.r2 >= kDecayR2 && fraction <= kDecayFinalFraction;
  detail += name + ": slope " + fmt("%.4g", fit.slope) + ", R2 " + fmt("%.3f", fit.r2) +
            ", final/max " + fmt("%.4g", fraction) + "; ";
  return ok;
}

Outcome criterion3() {
  const auto run = cached_run(systemic_run_config(), kNTest);
  std::vector<double> critic, gap;
  for (const auto& r : run.history) {
    if (r.lyap_critic) critic.push_back(*r.lyap_critic);
    gap.push_back(r.w2_gap);
  }
  Outcome o;
  if (critic.size() != run.history.size()) {
    o.detail = "lyap_critic was not recorded at every iteration";
    return o;
  }
  const bool a = decay_ok(critic, "lyap_critic", o.detail);
  const bool b = decay_ok(gap, "w2_gap", o.detail);
  o.pass = a && b;
  return o;
}

Outcome criterion4() {
  Outcome o;
  double small_sum = 0.0, ref_sum = 0.0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    TrainConfig cfg = systemic_run_config();
    cfg.seed = static_cast<std::uint64_t>(seed);
    const double ref = cached_run(cfg, kNTest).metrics->rmse_x;
    cfg.beta_mu = kSmallBetaMu;
    const double small = cached_run(cfg, kNTest).metrics->rmse_x;
    small_sum += small;
    ref_sum += ref;
    o.detail += "seed " + std::to_string(seed) + ": " + fmt("%.3f%%", 100 * small) + " vs " +
                fmt("%.3f%%", 100 * ref) + "; ";
  }
  const double ratio = small_sum / ref_sum;
  o.pass = ratio >= kBetaMuRatio;
  o.detail += "mean RMSE_X ratio " + fmt("%.2f", ratio) + " (>= " + fmt("%g", kBetaMuRatio) + ")";
  return o;
}

Outcome criterion5() {
  TrainConfig cfg = systemic_run_config();
  cfg.k_end = kFrozenIterations;
  cfg.beta_a = 0.0;
  const auto run = cached_run(cfg, 0);
  const double first = run.history.front().w2_gap, last = run.history.back().w2_gap;
  Outcome o;
  o.pass = last <= kFrozenFraction * first;
  o.detail = "w2_gap " + fmt("%.4g", first) + " -> " + fmt("%.4g", last) + " (ratio " +
             fmt("%.4f", last / first) + ", <= " + fmt("%g", kFrozenFraction) + ")";
  return o;
}

// Property suite. Each check returns an empty string on success.
using Check = std::function<std::string()>;

Mlp random_net(std::size_t in, std::size_t hidden, std::size_t out, std::mt19937_64& rng) {
  Mlp net(in, hidden, out);
  std::normal_distribution<double> z(0.0, 0.5);
  for (double& p : net.params()) p = z(rng);
  return net;
}

double kink_margin(const Mlp& net, std::span<const double> x) {
  const auto& p = net.params();
  double margin = INFINITY;
  for (std::size_t j = 0; j < net.hidden_dim(); ++j) {
    double a = p[net.b1_offset() + j];
    for (std::size_t i = 0; i < net.in_dim(); ++i) a += p[j * net.in_dim() + i] * x[i];
    margin = std::min(margin, std::abs(a));
  }
  return margin;
}

std::string check_gradients() {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z;
  int nets = 0;
  double worst = 0.0, worst_div = 0.0;
  while (nets < 50) {
    const std::size_t d = 1 + static_cast<std::size_t>(nets % 6);
    Mlp net = random_net(d, 16, d, rng);
    std::vector<double> x(d), u(d);
    for (double& v : x) v = z(rng);
    for (double& v : u) v = z(rng);
    if (kink_margin(net, x) < 1e-3) continue;
    std::vector<double> grads(net.param_count(), 0.0), gx(d);
    net.backward(x, u, grads, gx);
    auto dot = [&](const Mlp& n, const std::vector<double>& at) {
      const auto y = n.forward(at);
      double s = 0.0;
      for (std::size_t o = 0; o < d; ++o) s += u[o] * y[o];
      return s;
    };
    for (std::size_t k = 0; k < net.param_count(); ++k) {
      const double fd = oracle::central_difference(
          [&](const std::vector<double>& theta) {
            Mlp n = net;
            n.params() = theta;
            return dot(n, x);
          },
          net.params(), k, 1e-5);
      worst = std::max(worst, std::min(oracle::rel_err(grads[k], fd), std::abs(grads[k] - fd)));
    }
    for (std::size_t i = 0; i < d; ++i) {
      const double fd = oracle::central_difference(
          [&](const std::vector<double>& at) { return dot(net, at); }, x, i, 1e-5);
      worst = std::max(worst, std::min(oracle::rel_err(gx[i], fd), std::abs(gx[i] - fd)));
    }
    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      trace += oracle::central_difference(
          [&](const std::vector<double>& at) { return net.forward(at)[i]; }, x, i, 1e-6);
    worst_div = std::max(worst_div, std::abs(net.divergence(x) - trace));
    ++nets;
  }
  if (worst > 1e-5) return "backprop error " + fmt("%.3g", worst);
  if (worst_div > 1e-5) return "divergence error " + fmt("%.3g", worst_div);
  return "";
}

std::string check_hungarian() {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 6);
    std::vector<double> c(n * n);
    for (double& v : c) v = u(rng);
    if (hungarian(c, n).cost != oracle::brute_force_assignment(c, n))
      return "cost differs from brute force at trial " + std::to_string(trial);
  }
  return "";
}

std::string check_riccati() {
  const std::size_t n = 2000;
  SystemicRiskParams sp;
  const double k = sp.a + sp.q, r = sp.epsilon - sp.q * sp.q;
  const auto ref = oracle::rk4_backward(
      [&](double, double y) { return y * y + 2 * k * y - r; }, 1.0, sp.c, n);
  OptimalExecutionParams ep;
  const auto eta = oracle::rk4_backward(
      [&](double, double y) { return (y * y - ep.c_alpha * ep.c_x) / ep.c_alpha; }, 1.0, ep.c_g, n);
  const auto bar = oracle::rk4_backward(
      [&](double, double y) { return (y * y - ep.gamma * y - ep.c_alpha * ep.c_x) / ep.c_alpha; },
      1.0, ep.c_g, n);
  double err = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n);
    err = std::max(err, std::abs(systemic_eta(sp, 1.0, t) - ref[i]));
    err = std::max(err, std::abs(execution_eta(ep, 1.0, t) - eta[i]));
    err = std::max(err, std::abs(execution_etabar(ep, 1.0, t) - bar[i]));
  }
  return err <= 1e-6 ? "" : "max abs error " + fmt("%.3g", err);
}

std::string check_conditional_control() {
  // The systemic equilibrium mean is constant in time.
  const TimeGrid grid(1.0, 50);
  const auto b = baseline_systemic({}, grid);
  ConditionalControl cc(b, std::vector<double>(grid.steps() + 1, b.mean(0.0)));
  double err = 0.0;
  for (std::size_t j = 0; j <= grid.steps(); ++j)
    for (double x : {-2.0, -0.5, 0.0, 1.0, 3.0})
      err = std::max(err, std::abs(cc(grid.at(j), x) - b.equilibrium_control(grid.at(j), x)));
  return err <= 1e-6 ? "" : "max gap " + fmt("%.3g", err);
}

std::string check_lmc() {
  ParticleEnsemble init(5000, 1);
  for (double& v : init.data()) v = 3.0;
  const ScoreField score = [](std::span<const double> x, std::span<double> out) { out[0] = -x[0]; };
  const auto out = lmc_sample(score, init, LmcConfig{}, {13, Stream::kLmc});
  const double mean = oracle::mean(out.data()), var = oracle::variance(out.data());
  if (std::abs(mean) > 0.05 || var < 0.9 || var > 1.1)
    return "mean " + fmt("%.4f", mean) + ", variance " + fmt("%.4f", var);
  return "";
}

std::string check_score_matching() {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> z(1.0, 1.0);
  ParticleEnsemble samples(5000, 1);
  for (double& v : samples.data()) v = z(rng);
  Mlp net(1, 64, 1);
  initialize(net, rng, SkipInit::kNegativeIdentity);
  AdamState opt(net.param_count());
  std::vector<double> grads(net.param_count());
  for (int i = 0; i < 500; ++i) {
    score_loss_and_grads(net, samples, grads);
    adam_step(opt, net.params(), grads, 1.5e-3);
  }
  double err = 0.0;
  const int n = 401;
  for (int i = 0; i < n; ++i) {
    const double x = -1.0 + 4.0 * i / (n - 1);
    err += std::abs(net.forward(std::vector<double>{x})[0] - (1.0 - x));
  }
  err /= n;
  return err <= 0.1 ? "" : "mean abs error " + fmt("%.4f", err);
}

std::string check_latin_hypercube() {
  std::mt19937_64 rng(15);
  const ActorRegion region{{0.0, 1.0, -3.0}, {1.0, 0.5, 2.0}};
  const std::size_t n = 250;
  const auto pts = latin_hypercube(n, region, rng);
  for (std::size_t i = 0; i < 3; ++i) {
    std::vector<int> count(n, 0);
    const double lo = region.center[i] - region.half_width[i];
    const double width = 2 * region.half_width[i] / static_cast<double>(n);
    for (std::size_t m = 0; m < n; ++m) {
      const double k = std::floor((pts[m][i] - lo) / width);
      if (k < 0 || k >= static_cast<double>(n)) return "point outside the region";
      ++count[static_cast<std::size_t>(k)];
    }
    for (int c : count)
      if (c != 1) return "stratum count " + std::to_string(c) + " in coordinate " + std::to_string(i);
  }
  return "";
}

std::string check_otgp_endpoints() {
  std::mt19937_64 rng(16);
  std::normal_distribution<double> z;
  ParticleEnsemble src(30, 2), dst(30, 2);
  for (double& v : src.data()) v = z(rng);
  for (double& v : dst.data()) v = z(rng) + 1.0;
  const auto match = ot_match(src, dst);
  const auto zero = otgp_apply(src, dst, match, 0.0);
  const auto one = otgp_apply(src, dst, match, 1.0);
  for (std::size_t m = 0; m < 30; ++m)
    for (std::size_t i = 0; i < 2; ++i)
      if (zero[m][i] != src[m][i] || one[m][i] != dst[match.perm[m]][i])
        return "endpoint mismatch at particle " + std::to_string(m);
  return "";
}

std::string check_baseline_actor() {
  const TimeGrid grid(1.0, 50);
  for (const auto& params :
       {ModelParams{SystemicRiskParams{}}, ModelParams{OptimalExecutionParams{}}}) {
    const auto b = *make_baseline(params, grid);
    const auto model = make_model(params);
    NetStack stack(NetDims{50, 1, 1, 1, 64});
    stack.initialize(0);
    load_baseline_actor(b, stack);
    const auto r = evaluate(actor_policy(stack.actor), *model, b, 2000, 17);
    if (r.rev > 1e-6) return model->name() + " REV " + fmt("%.3g", r.rev);
  }
  return "";
}

Outcome criterion6() {
  const std::vector<std::pair<std::string, Check>> checks{
      {"gradients", check_gradients},
      {"hungarian", check_hungarian},
      {"riccati", check_riccati},
      {"conditional control", check_conditional_control},
      {"lmc", check_lmc},
      {"score matching", check_score_matching},
      {"latin hypercube", check_latin_hypercube},
      {"otgp endpoints", check_otgp_endpoints},
      {"baseline actor", check_baseline_actor},
  };
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  o.pass = true;
  int passed = 0;
  for (const auto& [name, check] : checks) {
    std::string err;
    try {
      err = check();
    } catch (const std::exception& e) {
      err = std::string("threw: ") + e.what();
    }
    if (err.empty()) ++passed;
    else {
      o.pass = false;
      o.detail += name + ": " + err + "; ";
    }
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (seconds > kPropertySeconds) o.pass = false;
  o.detail += std::to_string(passed) + "/" + std::to_string(checks.size()) + " checks in " +
              fmt("%.1fs", seconds) + " (<= " + fmt("%gs", kPropertySeconds) + ")";
  return o;
}

Outcome criterion7() {
  TrainConfig cfg = systemic_run_config();
  cfg.k_end = kDeterminismIterations;
  const fs::path dir = fs::path(g_cache) / "determinism";
  fs::create_directories(dir);
  std::string text[2];
  {
    tbb::global_control one(tbb::global_control::max_allowed_parallelism, 1);
    for (int i = 0; i < 2; ++i) {
      const fs::path path = dir / ("history_" + std::to_string(i) + ".csv");
      write_history_csv(path.string(), train(cfg).history);
      text[i] = read_text(path);
    }
  }
  Outcome o;
  o.pass = !text[0].empty() && text[0] == text[1];
  o.detail = std::to_string(kDeterminismIterations) + "-iteration histories " +
             (o.pass ? "byte-identical" : "differ") + " (" + std::to_string(text[0].size()) +
             " bytes)";
  return o;
}

Outcome criterion8() {
  Outcome o;
  o.pass = true;
  for (int seed = 0; seed < kSeeds; ++seed) {
    TrainConfig cfg = config("flocking");
    cfg.k_end = kFlockingIterations;
    cfg.seed = static_cast<std::uint64_t>(seed);
    const auto run = cached_run(cfg, 0);
    bool finite = static_cast<int>(run.history.size()) == kFlockingIterations;
    for (const auto& r : run.history)
      for (double v : {r.score_loss, r.critic_loss, r.actor_loss, r.w2_gap, r.terminal_spread})
        finite = finite && std::isfinite(v);
    const double first = run.history.front().terminal_spread;
    const double last = run.history.back().terminal_spread;
    const bool ok = finite && last < first;
    o.pass = o.pass && ok;
    o.detail += "seed " + std::to_string(seed) + ": spread " + fmt("%.4f", first) + " -> " +
                fmt("%.4f", last) + (finite ? "" : ", non-finite losses") + "; ";
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mfac acceptance checks"};
  std::vector<int> criteria;
  std::string cache = "acceptance_cache";
  app.add_option("--criterion", criteria, "criteria to run (default: all)")
      ->check(CLI::Range(1, 8));
  app.add_option("--cache", cache, "directory for cached training runs");
  CLI11_PARSE(app, argc, argv);
  g_cache = cache;
  fs::create_directories(g_cache);
  if (criteria.empty()) criteria = {1, 2, 3, 4, 5, 6, 7, 8};

  const std::vector<std::pair<std::string, std::function<Outcome()>>> table{
      {"systemic-risk reproduction", criterion1},
      {"optimal-execution reproduction", criterion2},
      {"Lyapunov decay", criterion3},
      {"beta_mu sensitivity", criterion4},
      {"frozen-actor distribution decay", criterion5},
      {"property suite", criterion6},
      {"determinism", criterion7},
      {"flocking smoke run", criterion8},
  };
  bool all = true;
  for (int c : criteria) {
    const auto& [name, run] = table[static_cast<std::size_t>(c - 1)];
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    std::printf("criterion %d %s: %s | %s\n", c, name.c_str(), o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
