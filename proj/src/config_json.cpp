#include "iclcp/config_json.hpp"

#include <algorithm>
#include <string>

#include "iclcp/errors.hpp"

namespace iclcp {
namespace {

template <typename T>
void read_optional(const nlohmann::json& j, const char* key, T& out, const char* section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(section) + "." + key + ": " + e.what());
  }
}

}  // namespace

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                         const char* section) {
  if (!j.is_object()) throw ConfigError(std::string(section) + " must be a JSON object");
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) throw ConfigError("unknown key '" + item.key() + "' in " + section);
  }
}

void to_json(nlohmann::json& j, const GenConfig& cfg) {
  j = nlohmann::json{{"d", cfg.d},           {"n", cfg.n},
                     {"a", cfg.a},           {"sigma_w", cfg.sigma_w},
                     {"sigma_n", cfg.sigma_n}, {"seed", cfg.seed}};
}

void from_json(const nlohmann::json& j, GenConfig& cfg) {
  reject_unknown_keys(j, {"d", "n", "a", "sigma_w", "sigma_n", "seed"}, "gen");
  read_optional(j, "d", cfg.d, "gen");
  read_optional(j, "n", cfg.n, "gen");
  read_optional(j, "a", cfg.a, "gen");
  read_optional(j, "sigma_w", cfg.sigma_w, "gen");
  read_optional(j, "sigma_n", cfg.sigma_n, "gen");
  read_optional(j, "seed", cfg.seed, "gen");
}

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
  j = nlohmann::json{{"steps", cfg.steps},
                     {"batch_size", cfg.batch_size},
                     {"learning_rate", cfg.learning_rate},
                     {"adam_beta1", cfg.adam_beta1},
                     {"adam_beta2", cfg.adam_beta2},
                     {"adam_eps", cfg.adam_eps},
                     {"layers", cfg.layers},
                     {"log_every", cfg.log_every},
                     {"gen", cfg.gen}};
  j["flop_budget"] = cfg.flop_budget ? nlohmann::json(*cfg.flop_budget) : nlohmann::json(nullptr);
  j["init_scale"] = cfg.init_scale ? nlohmann::json(*cfg.init_scale) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
  reject_unknown_keys(j,
                      {"steps", "batch_size", "learning_rate", "adam_beta1", "adam_beta2",
                       "adam_eps", "flop_budget", "init_scale", "layers", "log_every", "gen"},
                      "train");
  read_optional(j, "steps", cfg.steps, "train");
  read_optional(j, "batch_size", cfg.batch_size, "train");
  read_optional(j, "learning_rate", cfg.learning_rate, "train");
  read_optional(j, "adam_beta1", cfg.adam_beta1, "train");
  read_optional(j, "adam_beta2", cfg.adam_beta2, "train");
  read_optional(j, "adam_eps", cfg.adam_eps, "train");
  read_optional(j, "layers", cfg.layers, "train");
  read_optional(j, "log_every", cfg.log_every, "train");
  if (j.contains("flop_budget") && !j.at("flop_budget").is_null()) {
    double v = 0.0;
    read_optional(j, "flop_budget", v, "train");
    cfg.flop_budget = v;
  }
  if (j.contains("init_scale") && !j.at("init_scale").is_null()) {
    double v = 0.0;
    read_optional(j, "init_scale", v, "train");
    cfg.init_scale = v;
  }
  if (j.contains("gen")) from_json(j.at("gen"), cfg.gen);
}

}  // namespace iclcp
