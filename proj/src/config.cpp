#include "lrr/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lrr/env.hpp"
#include "lrr/rng.hpp"

namespace lrr {

namespace {

using nlohmann::json;

const std::set<std::string>& reward_modes() {
  static const std::set<std::string> modes = {"lrr_gaussian", "lrr_skew", "mse_rd", "sparse",
                                              "oracle_dense"};
  return modes;
}

class Reader {
 public:
  explicit Reader(const json& doc) : doc_(doc) {}

  template <class T>
  void read(const char* key, T& out) {
    auto it = doc_.find(key);
    if (it == doc_.end()) return;
    seen_.insert(key);
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("config key '") + key + "': wrong type");
    }
  }

  void read_optional_double(const char* key, std::optional<double>& out) {
    auto it = doc_.find(key);
    if (it == doc_.end()) return;
    seen_.insert(key);
    if (it->is_null()) {
      out.reset();
      return;
    }
    if (!it->is_number()) {
      throw ConfigError(std::string("config key '") + key + "': wrong type");
    }
    out = it->get<double>();
  }

  void reject_unknown() const {
    for (auto it = doc_.begin(); it != doc_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError("unknown config key '" + it.key() + "'");
      }
    }
  }

 private:
  const json& doc_;
  std::set<std::string> seen_;
};

void require_range(bool ok, const char* key, const char* what) {
  if (!ok) throw ConfigError(std::string("config key '") + key + "': " + what);
}

void validate(const ExperimentConfig& c) {
  bool known_env = false;
  for (const auto& name : registered_env_names()) known_env |= (name == c.environment);
  require_range(known_env, "environment", "unknown environment name");
  require_range(reward_modes().count(c.reward_mode) != 0, "reward_mode",
                "must be one of lrr_gaussian, lrr_skew, mse_rd, sparse, oracle_dense");
  require_range(c.learning_rate > 0.0, "learning_rate", "must be > 0");
  require_range(c.gamma > 0.0 && c.gamma <= 1.0, "gamma", "must be in (0, 1]");
  require_range(c.polyak > 0.0 && c.polyak <= 1.0, "polyak", "must be in (0, 1]");
  require_range(c.alpha_init > 0.0, "alpha_init", "must be > 0");
  require_range(c.hidden_layers >= 1, "hidden_layers", "must be >= 1");
  require_range(c.hidden_units >= 1, "hidden_units", "must be >= 1");
  require_range(c.grad_steps_per_env_step >= 0, "grad_steps_per_env_step", "must be >= 0");
  require_range(c.replay_capacity >= 1, "replay_capacity", "must be >= 1");
  require_range(c.sac_batch >= 1, "sac_batch", "must be >= 1");
  require_range(c.reward_batch >= 1, "reward_batch", "must be >= 1");
  require_range(c.reward_updates_per_episode >= 0, "reward_updates_per_episode",
                "must be >= 0");
  require_range(c.reward_buffer_trajectories >= 1, "reward_buffer_trajectories",
                "must be >= 1");
  require_range(c.horizon >= 1, "horizon", "must be >= 1");
  require_range(c.total_env_steps >= 0, "total_env_steps", "must be >= 0");
  require_range(c.start_steps >= 0, "start_steps", "must be >= 0");
  require_range(!c.seeds.empty(), "seeds", "must list at least one seed");
  require_range(!c.output_dir.empty(), "output_dir", "must be non-empty");
  require_range(c.relabel_mode == "on_insert" || c.relabel_mode == "on_sample",
                "relabel_mode", "must be on_insert or on_sample");
  require_range(c.eval_interval >= 1, "eval_interval", "must be >= 1");
  require_range(c.eval_episodes >= 1, "eval_episodes", "must be >= 1");
  require_range(c.sigma_min > 0.0, "sigma_min", "must be > 0");
  require_range(c.sigma_max > c.sigma_min, "sigma_max", "must be > sigma_min");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  std::string body = text;
  if (body.find_first_not_of(" \t\r\n") == std::string::npos) body = "{}";
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  ExperimentConfig c;
  Reader r(doc);
  r.read("environment", c.environment);
  r.read("reward_mode", c.reward_mode);
  r.read("learning_rate", c.learning_rate);
  r.read("gamma", c.gamma);
  r.read("polyak", c.polyak);
  r.read("alpha_init", c.alpha_init);
  r.read_optional_double("target_entropy", c.target_entropy);
  r.read("hidden_layers", c.hidden_layers);
  r.read("hidden_units", c.hidden_units);
  r.read("grad_steps_per_env_step", c.grad_steps_per_env_step);
  r.read("replay_capacity", c.replay_capacity);
  r.read("sac_batch", c.sac_batch);
  r.read("reward_batch", c.reward_batch);
  r.read("reward_updates_per_episode", c.reward_updates_per_episode);
  r.read("reward_buffer_trajectories", c.reward_buffer_trajectories);
  r.read("horizon", c.horizon);
  r.read("total_env_steps", c.total_env_steps);
  r.read("start_steps", c.start_steps);
  r.read("seeds", c.seeds);
  r.read("output_dir", c.output_dir);
  r.read("shared_noise", c.shared_noise);
  r.read("relabel_mode", c.relabel_mode);
  r.read("dump_trajectories", c.dump_trajectories);
  r.read("eval_interval", c.eval_interval);
  r.read("eval_episodes", c.eval_episodes);
  r.read("sigma_min", c.sigma_min);
  r.read("sigma_max", c.sigma_max);
  r.reject_unknown();
  validate(c);
  return c;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_config_file: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  json doc;  // nlohmann objects keep keys sorted, which makes this canonical
  doc["environment"] = c.environment;
  doc["reward_mode"] = c.reward_mode;
  doc["learning_rate"] = c.learning_rate;
  doc["gamma"] = c.gamma;
  doc["polyak"] = c.polyak;
  doc["alpha_init"] = c.alpha_init;
  if (c.target_entropy.has_value()) {
    doc["target_entropy"] = *c.target_entropy;
  }
  doc["hidden_layers"] = c.hidden_layers;
  doc["hidden_units"] = c.hidden_units;
  doc["grad_steps_per_env_step"] = c.grad_steps_per_env_step;
  doc["replay_capacity"] = c.replay_capacity;
  doc["sac_batch"] = c.sac_batch;
  doc["reward_batch"] = c.reward_batch;
  doc["reward_updates_per_episode"] = c.reward_updates_per_episode;
  doc["reward_buffer_trajectories"] = c.reward_buffer_trajectories;
  doc["horizon"] = c.horizon;
  doc["total_env_steps"] = c.total_env_steps;
  doc["start_steps"] = c.start_steps;
  doc["seeds"] = c.seeds;
  doc["output_dir"] = c.output_dir;
  doc["shared_noise"] = c.shared_noise;
  doc["relabel_mode"] = c.relabel_mode;
  doc["dump_trajectories"] = c.dump_trajectories;
  doc["eval_interval"] = c.eval_interval;
  doc["eval_episodes"] = c.eval_episodes;
  doc["sigma_min"] = c.sigma_min;
  doc["sigma_max"] = c.sigma_max;
  return doc.dump(2) + "\n";
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  return detail::fnv1a64(serialize_config(config));
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

}  // namespace lrr
