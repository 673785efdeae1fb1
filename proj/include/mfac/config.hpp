#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "mfac/models.hpp"
#include "mfac/trainer.hpp"

namespace mfac {

// Raised for malformed or invalid configuration; the CLI maps it to exit 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Config document layout (every section optional, unknown keys rejected):
//   model:       { name, params: {...} }
//   grid:        { horizon, steps }
//   network:     { hidden }
//   training:    { k_end, dtau, beta_a, beta_mu, n_batch, epochs: { score, critic, actor } }
//   optimizer:   { actor|critic|score: { lr, gamma, milestones } }
//   lmc:         { steps, step_size }
//   diagnostics: { critic_every, actor_every, n_eval }
//   seed
TrainConfig config_from_json(const nlohmann::json& doc);
TrainConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const TrainConfig& cfg);

// Model section alone, as accepted under "model".
ModelParams model_from_json(const nlohmann::json& doc);
nlohmann::json model_to_json(const ModelParams& params);

}  // namespace mfac
