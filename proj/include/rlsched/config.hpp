#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rlsched/agent.hpp"
#include "rlsched/env.hpp"
#include "rlsched/errors.hpp"

namespace rlsched {

// Full run configuration. Profile "paper" carries the full-scale defaults;
// profile "desk" shrinks episode and step counts and raises p_prio so that
// priority events show up in reasonable time, leaving the problem size
// untouched.
struct RunConfig {
  std::string profile = "paper";
  SimConfig sim;
  AgentConfig agent;
  double initial_epsilon = 1.0;
  double epsilon_zero_fraction = 0.5;
  int hidden_layers = 3;
  int hidden_width = 128;
  int episodes = 30;
  int steps_per_episode = 10000;
  int eval_episodes = 5;
  int eval_steps = 200000;
  int eval_repetitions = 3;
  std::uint64_t eval_seed_base = 90001;
  double augmented_p_prio = 0.2;
  std::vector<int> gem_memory_sizes = {512, 8192, 65536};
  std::string forget_ewc = "ewc1e6";
  std::string forget_gem = "gem8192";

  bool operator==(const RunConfig&) const = default;

  void validate() const {
    sim.validate();
    agent.validate();
    std::string problems;
    const auto bad = [&problems](const char* msg) {
      if (!problems.empty()) problems += "; ";
      problems += msg;
    };
    if (!(initial_epsilon >= 0.0 && initial_epsilon <= 1.0))
      bad("initial_epsilon must be in [0, 1]");
    if (!(epsilon_zero_fraction > 0.0 && epsilon_zero_fraction <= 1.0))
      bad("epsilon_zero_fraction must be in (0, 1]");
    if (hidden_layers < 1) bad("hidden_layers must be >= 1");
    if (hidden_width < 1) bad("hidden_width must be >= 1");
    if (episodes < 1) bad("episodes must be >= 1");
    if (steps_per_episode < 1) bad("steps_per_episode must be >= 1");
    if (eval_episodes < 1) bad("eval_episodes must be >= 1");
    if (eval_steps < 1) bad("eval_steps must be >= 1");
    if (eval_repetitions < 1) bad("eval_repetitions must be >= 1");
    if (!(augmented_p_prio >= 0.0 && augmented_p_prio <= 1.0))
      bad("augmented_p_prio must be in [0, 1]");
    for (const int m : gem_memory_sizes)
      if (m < 1) {
        bad("gem_memory_sizes entries must be >= 1");
        break;
      }
    if (!problems.empty()) throw ConfigError(problems);
  }
};

inline RunConfig default_config(std::string_view profile) {
  RunConfig cfg;
  if (profile == "paper") return cfg;
  if (profile == "desk") {
    cfg.profile = "desk";
    cfg.sim.p_prio = 1e-3;
    cfg.episodes = 10;
    cfg.steps_per_episode = 5000;
    cfg.eval_episodes = 3;
    cfg.eval_steps = 50000;
    return cfg;
  }
  throw ConfigError("unknown profile '" + std::string(profile) + "'");
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string format_int_list(const std::vector<int>& values) {
  std::string out;
  for (const int v : values) {
    if (!out.empty()) out += ",";
    out += std::to_string(v);
  }
  return out;
}

struct ConfigKeys {
  std::map<std::string, std::function<bool(RunConfig&, const std::string&)>> setters;
  std::vector<std::pair<std::string, std::function<std::string(const RunConfig&)>>> getters;

  template <typename Parse, typename Get>
  void add(const std::string& key, Parse parse, Get get) {
    setters[key] = std::move(parse);
    getters.emplace_back(key, std::move(get));
  }
};

inline bool parse_double_value(const std::string& text, double& out) {
  char* end = nullptr;
  out = std::strtod(text.c_str(), &end);
  return end && *end == '\0' && end != text.c_str();
}

inline bool parse_int_value(const std::string& text, long long& out) {
  char* end = nullptr;
  out = std::strtoll(text.c_str(), &end, 10);
  return end && *end == '\0' && end != text.c_str();
}

inline bool parse_uint_value(const std::string& text, std::uint64_t& out) {
  if (!text.empty() && text[0] == '-') return false;
  char* end = nullptr;
  out = std::strtoull(text.c_str(), &end, 10);
  return end && *end == '\0' && end != text.c_str();
}

inline bool parse_int_list_value(const std::string& text, std::vector<int>& out) {
  out.clear();
  if (text.empty()) return true;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string item =
        text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    long long v = 0;
    if (!parse_int_value(item, v)) return false;
    out.push_back(static_cast<int>(v));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return true;
}

inline const ConfigKeys& config_keys() {
  static const ConfigKeys keys = [] {
    ConfigKeys k;
    const auto add_double = [&k](const std::string& key, double RunConfig::* field) {
      k.add(
          key,
          [field](RunConfig& c, const std::string& v) {
            return parse_double_value(v, c.*field);
          },
          [field](const RunConfig& c) { return format_double(c.*field); });
    };
    const auto add_sim_double = [&k](const std::string& key, double SimConfig::* field) {
      k.add(
          key,
          [field](RunConfig& c, const std::string& v) {
            return parse_double_value(v, c.sim.*field);
          },
          [field](const RunConfig& c) { return format_double(c.sim.*field); });
    };
    const auto add_int = [&k](const std::string& key, int RunConfig::* field) {
      k.add(
          key,
          [field](RunConfig& c, const std::string& v) {
            long long out = 0;
            if (!parse_int_value(v, out)) return false;
            c.*field = static_cast<int>(out);
            return true;
          },
          [field](const RunConfig& c) { return std::to_string(c.*field); });
    };
    const auto add_sim_int = [&k](const std::string& key, int SimConfig::* field) {
      k.add(
          key,
          [field](RunConfig& c, const std::string& v) {
            long long out = 0;
            if (!parse_int_value(v, out)) return false;
            c.sim.*field = static_cast<int>(out);
            return true;
          },
          [field](const RunConfig& c) { return std::to_string(c.sim.*field); });
    };
    const auto add_agent_int = [&k](const std::string& key, int AgentConfig::* field) {
      k.add(
          key,
          [field](RunConfig& c, const std::string& v) {
            long long out = 0;
            if (!parse_int_value(v, out)) return false;
            c.agent.*field = static_cast<int>(out);
            return true;
          },
          [field](const RunConfig& c) { return std::to_string(c.agent.*field); });
    };
    const auto add_agent_double = [&k](const std::string& key, double AgentConfig::* field) {
      k.add(
          key,
          [field](RunConfig& c, const std::string& v) {
            return parse_double_value(v, c.agent.*field);
          },
          [field](const RunConfig& c) { return format_double(c.agent.*field); });
    };
    const auto add_string = [&k](const std::string& key, std::string RunConfig::* field) {
      k.add(
          key,
          [field](RunConfig& c, const std::string& v) {
            c.*field = v;
            return true;
          },
          [field](const RunConfig& c) { return c.*field; });
    };

    // profile is handled before the table is applied; emitted first.
    k.add(
        "profile", [](RunConfig&, const std::string&) { return true; },
        [](const RunConfig& c) { return c.profile; });
    add_sim_int("num_users", &SimConfig::num_users);
    add_sim_int("num_resources", &SimConfig::num_resources);
    add_sim_double("p_job", &SimConfig::p_job);
    add_sim_double("p_prio", &SimConfig::p_prio);
    add_sim_double("snr_db", &SimConfig::snr_db);
    add_sim_double("rayleigh_scale", &SimConfig::rayleigh_scale);
    add_sim_int("max_job_size", &SimConfig::max_job_size);
    add_sim_int("max_delay", &SimConfig::max_delay);
    add_sim_double("weight_sumrate", &SimConfig::weight_sumrate);
    add_sim_double("weight_timeout", &SimConfig::weight_timeout);
    add_sim_double("weight_prio", &SimConfig::weight_prio);
    k.add(
        "rng_seed",
        [](RunConfig& c, const std::string& v) { return parse_uint_value(v, c.sim.rng_seed); },
        [](const RunConfig& c) { return std::to_string(c.sim.rng_seed); });
    add_agent_int("batch_size", &AgentConfig::batch_size);
    add_agent_int("buffer_capacity", &AgentConfig::buffer_capacity);
    add_agent_double("learning_rate_actor", &AgentConfig::learning_rate_actor);
    add_agent_double("learning_rate_critic", &AgentConfig::learning_rate_critic);
    add_double("initial_epsilon", &RunConfig::initial_epsilon);
    add_double("epsilon_zero_fraction", &RunConfig::epsilon_zero_fraction);
    add_int("hidden_layers", &RunConfig::hidden_layers);
    add_int("hidden_width", &RunConfig::hidden_width);
    add_int("episodes", &RunConfig::episodes);
    add_int("steps_per_episode", &RunConfig::steps_per_episode);
    add_int("eval_episodes", &RunConfig::eval_episodes);
    add_int("eval_steps", &RunConfig::eval_steps);
    add_int("eval_repetitions", &RunConfig::eval_repetitions);
    k.add(
        "eval_seed_base",
        [](RunConfig& c, const std::string& v) {
          return parse_uint_value(v, c.eval_seed_base);
        },
        [](const RunConfig& c) { return std::to_string(c.eval_seed_base); });
    add_double("augmented_p_prio", &RunConfig::augmented_p_prio);
    k.add(
        "gem_memory_sizes",
        [](RunConfig& c, const std::string& v) {
          return parse_int_list_value(v, c.gem_memory_sizes);
        },
        [](const RunConfig& c) { return format_int_list(c.gem_memory_sizes); });
    add_string("forget_ewc", &RunConfig::forget_ewc);
    add_string("forget_gem", &RunConfig::forget_gem);
    return k;
  }();
  return keys;
}

inline std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

}  // namespace detail

// Plain-text key = value format, one pair per line, '#' starts a comment.
// Unknown keys, malformed values, and constraint violations are all reported
// at once.
inline RunConfig parse_config(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<std::string> errors;
  std::string profile = "paper";
  std::istringstream lines{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line.erase(comment);
    const std::string stripped = detail::trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    std::string key = detail::trim(stripped.substr(0, eq));
    std::string value = detail::trim(stripped.substr(eq + 1));
    if (key == "profile") profile = value;
    pairs.emplace_back(std::move(key), std::move(value));
  }

  RunConfig cfg;
  try {
    cfg = default_config(profile);
  } catch (const ConfigError& e) {
    errors.push_back(e.what());
  }
  const auto& keys = detail::config_keys();
  for (const auto& [key, value] : pairs) {
    const auto it = keys.setters.find(key);
    if (it == keys.setters.end()) {
      errors.push_back("unknown key '" + key + "'");
      continue;
    }
    if (!it->second(cfg, value))
      errors.push_back("key '" + key + "': cannot parse value '" + value + "'");
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    errors.push_back(e.what());
  }
  if (!errors.empty()) {
    std::string joined;
    for (const std::string& e : errors) {
      if (!joined.empty()) joined += "\n";
      joined += e;
    }
    throw ConfigError(joined);
  }
  return cfg;
}

// Emits every key; parse(emit(cfg)) == cfg.
inline std::string emit_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, get] : detail::config_keys().getters)
    out += key + " = " + get(cfg) + "\n";
  return out;
}

}  // namespace rlsched
