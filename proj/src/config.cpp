#include "mfac/config.hpp"

#include <fstream>
#include <set>

namespace mfac {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where, std::set<std::string> allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items())
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
void read(const json& obj, const std::string& where, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

void read_count(const json& obj, const std::string& where, const char* key, std::size_t& out) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(where + "." + key + ": expected a nonnegative integer");
  out = v.get<std::size_t>();
}

void read_int(const json& obj, const std::string& where, const char* key, int& out) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  out = v.get<int>();
}

void read_matrix3(const json& obj, const std::string& where, const char* key,
                  std::array<double, 9>& out) {
  if (!obj.contains(key)) return;
  const auto& m = obj.at(key);
  if (!m.is_array() || m.size() != 3) throw ConfigError(where + "." + key + ": expected 3x3");
  for (std::size_t i = 0; i < 3; ++i) {
    if (!m[i].is_array() || m[i].size() != 3)
      throw ConfigError(where + "." + key + ": expected 3x3");
    for (std::size_t j = 0; j < 3; ++j) {
      if (!m[i][j].is_number()) throw ConfigError(where + "." + key + ": expected numbers");
      out[3 * i + j] = m[i][j].get<double>();
    }
  }
}

json matrix3(const std::array<double, 9>& a) {
  return json::array({{a[0], a[1], a[2]}, {a[3], a[4], a[5]}, {a[6], a[7], a[8]}});
}

void read_schedule(const json& obj, const std::string& where, LrSchedule& s) {
  check_keys(obj, where, {"lr", "gamma", "milestones"});
  read(obj, where, "lr", s.base);
  read(obj, where, "gamma", s.gamma);
  read(obj, where, "milestones", s.milestones);
}

json schedule_json(const LrSchedule& s) {
  return {{"lr", s.base}, {"gamma", s.gamma}, {"milestones", s.milestones}};
}

}  // namespace

ModelParams model_from_json(const json& doc) {
  check_keys(doc, "model", {"name", "params"});
  if (!doc.contains("name") || !doc.at("name").is_string())
    throw ConfigError("model.name: missing");
  const auto name = doc.at("name").get<std::string>();
  const json params = doc.contains("params") ? doc.at("params") : json::object();
  const std::string w = "model.params";
  if (name == "systemic_risk") {
    SystemicRiskParams p;
    check_keys(params, w, {"a", "sigma", "q", "epsilon", "c", "init_mean", "init_var"});
    read(params, w, "a", p.a);
    read(params, w, "sigma", p.sigma);
    read(params, w, "q", p.q);
    read(params, w, "epsilon", p.epsilon);
    read(params, w, "c", p.c);
    read(params, w, "init_mean", p.init_mean);
    read(params, w, "init_var", p.init_var);
    return p;
  }
  if (name == "optimal_execution") {
    OptimalExecutionParams p;
    check_keys(params, w, {"c_alpha", "c_x", "c_g", "gamma", "sigma", "init_mean", "init_var"});
    read(params, w, "c_alpha", p.c_alpha);
    read(params, w, "c_x", p.c_x);
    read(params, w, "c_g", p.c_g);
    read(params, w, "gamma", p.gamma);
    read(params, w, "sigma", p.sigma);
    read(params, w, "init_mean", p.init_mean);
    read(params, w, "init_var", p.init_var);
    return p;
  }
  if (name == "flocking") {
    FlockingParams p;
    check_keys(params, w, {"C", "R", "Q", "beta", "position_mean", "velocity_mean",
                           "position_var", "velocity_var"});
    read_matrix3(params, w, "C", p.C);
    read_matrix3(params, w, "R", p.R);
    read_matrix3(params, w, "Q", p.Q);
    read(params, w, "beta", p.beta);
    read(params, w, "position_mean", p.position_mean);
    read(params, w, "velocity_mean", p.velocity_mean);
    read(params, w, "position_var", p.position_var);
    read(params, w, "velocity_var", p.velocity_var);
    return p;
  }
  throw ConfigError("model.name: unknown model '" + name + "'");
}

json model_to_json(const ModelParams& params) {
  if (const auto* p = std::get_if<SystemicRiskParams>(&params))
    return {{"name", "systemic_risk"},
            {"params",
             {{"a", p->a},
              {"sigma", p->sigma},
              {"q", p->q},
              {"epsilon", p->epsilon},
              {"c", p->c},
              {"init_mean", p->init_mean},
              {"init_var", p->init_var}}}};
  if (const auto* p = std::get_if<OptimalExecutionParams>(&params))
    return {{"name", "optimal_execution"},
            {"params",
             {{"c_alpha", p->c_alpha},
              {"c_x", p->c_x},
              {"c_g", p->c_g},
              {"gamma", p->gamma},
              {"sigma", p->sigma},
              {"init_mean", p->init_mean},
              {"init_var", p->init_var}}}};
  const auto& p = std::get<FlockingParams>(params);
  return {{"name", "flocking"},
          {"params",
           {{"C", matrix3(p.C)},
            {"R", matrix3(p.R)},
            {"Q", matrix3(p.Q)},
            {"beta", p.beta},
            {"position_mean", p.position_mean},
            {"velocity_mean", p.velocity_mean},
            {"position_var", p.position_var},
            {"velocity_var", p.velocity_var}}}};
}

TrainConfig config_from_json(const json& doc) {
  TrainConfig cfg;
  check_keys(doc, "config",
             {"model", "grid", "network", "training", "optimizer", "lmc", "diagnostics", "seed"});
  if (doc.contains("model")) cfg.model = model_from_json(doc.at("model"));
  if (doc.contains("grid")) {
    const auto& g = doc.at("grid");
    check_keys(g, "grid", {"horizon", "steps"});
    read(g, "grid", "horizon", cfg.horizon);
    read_count(g, "grid", "steps", cfg.steps);
  }
  if (doc.contains("network")) {
    const auto& n = doc.at("network");
    check_keys(n, "network", {"hidden"});
    read_count(n, "network", "hidden", cfg.hidden);
  }
  if (doc.contains("training")) {
    const auto& t = doc.at("training");
    const std::string w = "training";
    check_keys(t, w, {"k_end", "dtau", "beta_a", "beta_mu", "n_batch", "epochs"});
    read_int(t, w, "k_end", cfg.k_end);
    read(t, w, "dtau", cfg.dtau);
    read(t, w, "beta_a", cfg.beta_a);
    read(t, w, "beta_mu", cfg.beta_mu);
    read_count(t, w, "n_batch", cfg.n_batch);
    if (t.contains("epochs")) {
      const auto& e = t.at("epochs");
      check_keys(e, "training.epochs", {"score", "critic", "actor"});
      read_int(e, "training.epochs", "score", cfg.n_s);
      read_int(e, "training.epochs", "critic", cfg.n_c);
      read_int(e, "training.epochs", "actor", cfg.n_a);
    }
  }
  if (doc.contains("optimizer")) {
    const auto& o = doc.at("optimizer");
    check_keys(o, "optimizer", {"actor", "critic", "score"});
    if (o.contains("actor")) read_schedule(o.at("actor"), "optimizer.actor", cfg.actor_lr);
    if (o.contains("critic")) read_schedule(o.at("critic"), "optimizer.critic", cfg.critic_lr);
    if (o.contains("score")) read_schedule(o.at("score"), "optimizer.score", cfg.score_lr);
  }
  if (doc.contains("lmc")) {
    const auto& l = doc.at("lmc");
    check_keys(l, "lmc", {"steps", "step_size"});
    read_count(l, "lmc", "steps", cfg.lmc.steps);
    read(l, "lmc", "step_size", cfg.lmc.step_size);
  }
  if (doc.contains("diagnostics")) {
    const auto& d = doc.at("diagnostics");
    check_keys(d, "diagnostics", {"critic_every", "actor_every", "n_eval"});
    read_int(d, "diagnostics", "critic_every", cfg.diagnostics.critic_every);
    read_int(d, "diagnostics", "actor_every", cfg.diagnostics.actor_every);
    read_count(d, "diagnostics", "n_eval", cfg.diagnostics.n_eval);
  }
  if (doc.contains("seed")) {
    const auto& s = doc.at("seed");
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      throw ConfigError("seed: expected a nonnegative integer");
    cfg.seed = s.get<std::uint64_t>();
  }
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

json config_to_json(const TrainConfig& cfg) {
  return {{"model", model_to_json(cfg.model)},
          {"grid", {{"horizon", cfg.horizon}, {"steps", cfg.steps}}},
          {"network", {{"hidden", cfg.hidden}}},
          {"training",
           {{"k_end", cfg.k_end},
            {"dtau", cfg.dtau},
            {"beta_a", cfg.beta_a},
            {"beta_mu", cfg.beta_mu},
            {"n_batch", cfg.n_batch},
            {"epochs", {{"score", cfg.n_s}, {"critic", cfg.n_c}, {"actor", cfg.n_a}}}}},
          {"optimizer",
           {{"actor", schedule_json(cfg.actor_lr)},
            {"critic", schedule_json(cfg.critic_lr)},
            {"score", schedule_json(cfg.score_lr)}}},
          {"lmc", {{"steps", cfg.lmc.steps}, {"step_size", cfg.lmc.step_size}}},
          {"diagnostics",
           {{"critic_every", cfg.diagnostics.critic_every},
            {"actor_every", cfg.diagnostics.actor_every},
            {"n_eval", cfg.diagnostics.n_eval}}},
          {"seed", cfg.seed}};
}

}  // namespace mfac
