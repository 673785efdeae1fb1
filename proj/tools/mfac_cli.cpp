// mfac: train, evaluate and tabulate baselines for mean-field games.
//
// Exit codes: 0 ok, 2 usage/config errors, 3 runtime failures.

#include <tbb/global_control.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <thread>

#include "mfac/baselines.hpp"
#include "mfac/config.hpp"
#include "mfac/evaluate.hpp"
#include "mfac/io.hpp"
#include "mfac/netstack.hpp"
#include "mfac/trainer.hpp"

#ifndef MFAC_BUILD_ID
#define MFAC_BUILD_ID "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mfac;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kRuntime = 3;

// Thrown for problems the user has to fix in the invocation.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

json metrics_json(const MetricsReport& r) {
  return {{"rev", r.rev},       {"rmse_x", r.rmse_x},         {"rmse_alpha", r.rmse_alpha},
          {"rmse_m", r.rmse_m}, {"n_test", r.n_test},         {"j_hat", r.j_hat},
          {"j_check", r.j_check}, {"j_hat_se", r.j_hat_se}, {"j_check_se", r.j_check_se}};
}

std::string mc_note(std::size_t n_test) {
  if (n_test >= 25000) return "";
  return "n_test = " + std::to_string(n_test) +
         " is below the default 25000; Monte Carlo error bars are correspondingly wider";
}

void write_json(const fs::path& path, const json& doc) {
  write_text_atomic(path, doc.dump(2) + "\n");
}

json provenance(const TrainConfig& cfg) {
  return {{"seed", cfg.seed},
          {"config_hash", sha256_text(config_to_json(cfg).dump())},
          {"build_id", MFAC_BUILD_ID}};
}

json checksums(const fs::path& dir, const std::vector<std::string>& names) {
  json out = json::object();
  for (const auto& n : names)
    if (fs::exists(dir / n)) out[n] = sha256_file(dir / n);
  return out;
}

// Histograms of the reference and the evaluated states at t = 0, T/2, T.
void write_histograms(const fs::path& path, const TrajectoryBatch* hat,
                      const TrajectoryBatch& check, const TimeGrid& grid) {
  constexpr std::size_t kBins = 40;
  CsvWriter csv(path);
  csv.header({"t", "coordinate", "bin_lo", "bin_hi", "count_hat", "count_check"});
  const std::size_t d = check.states[0].dim();
  for (std::size_t j : {std::size_t{0}, grid.steps() / 2, grid.steps()}) {
    for (std::size_t i = 0; i < d; ++i) {
      double lo = INFINITY, hi = -INFINITY;
      auto scan = [&](const TrajectoryBatch& b) {
        for (std::size_t m = 0; m < b.paths(); ++m) {
          lo = std::min(lo, b.states[j][m][i]);
          hi = std::max(hi, b.states[j][m][i]);
        }
      };
      scan(check);
      if (hat) scan(*hat);
      if (hi <= lo) hi = lo + 1.0;
      const double w = (hi - lo) / kBins;
      auto count = [&](const TrajectoryBatch& b) {
        std::vector<long long> c(kBins, 0);
        for (std::size_t m = 0; m < b.paths(); ++m) {
          auto k = static_cast<std::size_t>((b.states[j][m][i] - lo) / w);
          ++c[std::min(k, kBins - 1)];
        }
        return c;
      };
      const auto cc = count(check);
      const auto ch = hat ? count(*hat) : std::vector<long long>();
      for (std::size_t k = 0; k < kBins; ++k) {
        csv.field(grid.at(j)).field(static_cast<long long>(i + 1));
        csv.field(lo + w * static_cast<double>(k)).field(lo + w * static_cast<double>(k + 1));
        if (hat) csv.field(ch[k]);
        else csv.empty_field();
        csv.field(cc[k]);
        csv.end_row();
      }
    }
  }
}

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool strict = false;
  std::optional<int> k_end;
  std::optional<std::size_t> n_batch;
  std::size_t n_test = 25000;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, int threads) {
  TrainConfig cfg = load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.k_end) cfg.k_end = *a.k_end;
  if (a.n_batch) cfg.n_batch = *a.n_batch;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const fs::path out(a.out);
  fs::create_directories(out);
  const std::string started = utc_now();
  write_json(out / "config.json", config_to_json(cfg));

  const auto result = train(cfg, [&](const IterationRecord& r) {
    if (a.quiet) return;
    std::fprintf(stderr, "k=%d score=%.4g critic=%.4g actor=%.4g w2_gap=%.4g (%.2fs)\n", r.k,
                 r.score_loss, r.critic_loss, r.actor_loss, r.w2_gap, r.wall_time);
  });
  write_history_csv((out / "history.csv").string(), result.history);
  write_timing_csv((out / "timing.csv").string(), result.history);
  const std::string id = model_id(cfg.model);
  save_checkpoint(result.stack, id, out / "checkpoint.json");

  const ModelPtr model = make_model(cfg.model);
  const TimeGrid grid(cfg.horizon, cfg.steps);
  const auto baseline = make_baseline(cfg.model, grid);
  if (baseline && a.n_test > 0) {
    const auto report =
        evaluate(actor_policy(result.stack.actor), *model, *baseline, a.n_test, cfg.seed);
    json m = metrics_json(report);
    m["provenance"] = provenance(cfg);
    write_json(out / "metrics.json", m);
  }

  json manifest = {{"command", "train"},
                   {"config", config_to_json(cfg)},
                   {"seed", cfg.seed},
                   {"started", started},
                   {"finished", utc_now()},
                   {"output_dir", fs::absolute(out).string()},
                   {"threads", threads},
                   {"strict_determinism", a.strict},
                   {"build_id", MFAC_BUILD_ID},
                   {"artifacts", checksums(out, {"config.json", "history.csv", "timing.csv",
                                                 "checkpoint.json", "metrics.json"})}};
  if (baseline && a.n_test > 0 && !mc_note(a.n_test).empty()) manifest["note"] = mc_note(a.n_test);
  write_json(out / "manifest.json", manifest);
  return kOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string config;
  std::size_t n_test = 25000;
  std::string out;
  bool no_baseline = false;
  std::optional<std::uint64_t> seed;
};

int cmd_eval(const EvalArgs& a, int threads) {
  TrainConfig cfg = load_config(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.n_test < 2) throw UsageError("--n-test must be at least 2");
  const ModelPtr model = make_model(cfg.model);
  const TimeGrid grid(cfg.horizon, cfg.steps);
  const auto loaded = load_checkpoint(a.checkpoint);
  const auto& d = loaded.stack.dims();
  if (d.steps != grid.steps() || d.state_dim != model->state_dim() ||
      d.control_dim != model->control_dim() || d.score_dim != model->measure_dim())
    throw UsageError("checkpoint dimensions do not match the configured model");
  const auto baseline = make_baseline(cfg.model, grid);
  if (!baseline && !a.no_baseline)
    throw UsageError("model has no closed-form baseline; pass --no-baseline");

  const fs::path out(a.out);
  fs::create_directories(out);
  const std::string started = utc_now();
  const Policy actor = actor_policy(loaded.stack.actor);
  const StreamKey key{cfg.seed, Stream::kEvaluation};
  const auto x0 = sample_initial(model->initial_law(), a.n_test, key.with(0));
  const auto xi = draw_increments(a.n_test, grid.steps(), model->noise_dim(), key.with(1));
  const auto check = simulate_self_coupled(*model, grid, actor, x0, xi);

  json m;
  std::optional<TrajectoryBatch> hat;
  if (baseline && !a.no_baseline) {
    hat = baseline_simulate(*baseline, *model, x0, xi, BaselineCoupling::kEmpirical);
    m = metrics_json(compare_paths(*hat, check, model->coupling(), grid.step()));
  } else {
    m = {{"n_test", a.n_test}, {"j_check", evaluate_cost(check, grid.step())}};
  }
  m["provenance"] = provenance(cfg);
  write_json(out / "metrics.json", m);
  write_histograms(out / "histograms.csv", hat ? &*hat : nullptr, check, grid);

  json manifest = {{"command", "eval"},
                   {"config", config_to_json(cfg)},
                   {"checkpoint", fs::absolute(a.checkpoint).string()},
                   {"seed", cfg.seed},
                   {"n_test", a.n_test},
                   {"started", started},
                   {"finished", utc_now()},
                   {"output_dir", fs::absolute(out).string()},
                   {"threads", threads},
                   {"build_id", MFAC_BUILD_ID},
                   {"artifacts", checksums(out, {"metrics.json", "histograms.csv"})}};
  if (!mc_note(a.n_test).empty()) manifest["note"] = mc_note(a.n_test);
  write_json(out / "manifest.json", manifest);
  return kOk;
}

struct BaselineArgs {
  std::string model;
  std::string params;
  std::string out;
  double horizon = 1.0;
  std::size_t steps = 50;
};

int cmd_baseline(const BaselineArgs& a) {
  if (a.model == "flocking") throw UsageError("no closed-form baseline for flocking");
  if (a.model != "systemic_risk" && a.model != "optimal_execution")
    throw UsageError("unknown model '" + a.model + "'");
  json model_doc = {{"name", a.model}};
  if (!a.params.empty()) {
    try {
      model_doc["params"] = json::parse(read_text(a.params));
    } catch (const json::exception& e) {
      throw ConfigError("params " + a.params + ": " + e.what());
    }
  }
  const ModelParams params = model_from_json(model_doc);
  const TimeGrid grid(a.horizon, a.steps);
  const auto baseline = make_baseline(params, grid);
  const ModelPtr model = make_model(params);

  const fs::path out(a.out);
  fs::create_directories(out);
  write_baseline_csv(out / "baseline.csv", *baseline);
  const auto res = baseline->riccati_residuals();
  write_json(out / "residuals.json",
             {{"max_residual", *std::max_element(res.begin(), res.end())},
              {"residuals", res},
              {"initial_value", baseline->initial_value()}});

  // The equilibrium control is affine in x, so it fits the actor exactly.
  NetStack stack(NetDims{grid.steps(), 1, 1, model->measure_dim(), 64});
  stack.initialize(0);
  load_baseline_actor(*baseline, stack);
  save_checkpoint(stack, a.model, out / "baseline_actor.json");

  json manifest = {{"command", "baseline"},
                   {"model", model_to_json(params)},
                   {"grid", {{"horizon", a.horizon}, {"steps", a.steps}}},
                   {"finished", utc_now()},
                   {"output_dir", fs::absolute(out).string()},
                   {"build_id", MFAC_BUILD_ID},
                   {"artifacts", checksums(out, {"baseline.csv", "residuals.json",
                                                 "baseline_actor.json"})}};
  write_json(out / "manifest.json", manifest);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mean-field actor-critic solver"};
  app.require_subcommand(1);
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "run the actor-critic training loop");
  train_cmd->add_option("--config", ta.config, "config file (JSON)")->required();
  train_cmd->add_option("--seed", ta.seed, "overrides the config seed");
  train_cmd->add_option("--out", ta.out, "output directory")->required();
  train_cmd->add_flag("--strict-determinism", ta.strict,
                      "ordered reductions (always on; recorded in the manifest)");
  train_cmd->add_option("--k-end", ta.k_end, "overrides the iteration count");
  train_cmd->add_option("--n-batch", ta.n_batch, "overrides the batch size");
  train_cmd->add_option("--n-test", ta.n_test, "evaluation paths after training (0: skip)");
  train_cmd->add_flag("--quiet", ta.quiet, "no per-iteration progress");

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint against the baseline");
  eval_cmd->add_option("--checkpoint", ea.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--config", ea.config, "config file (JSON)")->required();
  eval_cmd->add_option("--n-test", ea.n_test, "number of test paths");
  eval_cmd->add_option("--out", ea.out, "output directory")->required();
  eval_cmd->add_option("--seed", ea.seed, "overrides the config seed");
  eval_cmd->add_flag("--no-baseline", ea.no_baseline, "skip the closed-form comparison");

  BaselineArgs ba;
  auto* base_cmd = app.add_subcommand("baseline", "tabulate a closed-form equilibrium");
  base_cmd->add_option("--model", ba.model, "systemic_risk | optimal_execution")->required();
  base_cmd->add_option("--params", ba.params, "model parameters (JSON object)");
  base_cmd->add_option("--out", ba.out, "output directory")->required();
  base_cmd->add_option("--horizon", ba.horizon, "time horizon T");
  base_cmd->add_option("--steps", ba.steps, "grid steps N_T");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  tbb::global_control limit(tbb::global_control::max_allowed_parallelism,
                            static_cast<std::size_t>(threads));
  try {
    if (*train_cmd) return cmd_train(ta, threads);
    if (*eval_cmd) return cmd_eval(ea, threads);
    return cmd_baseline(ba);
  } catch (const TrainingError& e) {
    std::cerr << "training aborted: " << e.what() << '\n';
    return kRuntime;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kRuntime;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kRuntime;
  }
}
