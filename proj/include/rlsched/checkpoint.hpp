#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "rlsched/agent.hpp"
#include "rlsched/continual.hpp"
#include "rlsched/errors.hpp"

// All multi-byte fields are little-endian; doubles are raw IEEE-754 binary64.
// Byte-level layouts are documented in docs/formats.md.
static_assert(std::endian::native == std::endian::little,
              "checkpoint files are little-endian; big-endian hosts are unsupported");

namespace rlsched {

namespace detail {

inline constexpr std::uint32_t kFormatVersion = 1;

inline void write_bytes(std::ostream& out, const void* data, std::size_t size) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

inline void read_bytes(std::istream& in, void* data, std::size_t size) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  if (!in) throw ConfigError("checkpoint: unexpected end of file");
}

template <typename T>
void write_pod(std::ostream& out, T value) {
  write_bytes(out, &value, sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value;
  read_bytes(in, &value, sizeof(T));
  return value;
}

inline void write_f64_vector(std::ostream& out, const std::vector<double>& v) {
  write_pod<std::uint64_t>(out, v.size());
  write_bytes(out, v.data(), v.size() * sizeof(double));
}

inline std::vector<double> read_f64_vector(std::istream& in) {
  const auto n = read_pod<std::uint64_t>(in);
  std::vector<double> v(n);
  read_bytes(in, v.data(), n * sizeof(double));
  return v;
}

inline void write_magic(std::ostream& out, const char magic[8]) {
  write_bytes(out, magic, 8);
  write_pod<std::uint32_t>(out, kFormatVersion);
}

inline void check_magic(std::istream& in, const char magic[8], const std::string& what) {
  char found[8];
  read_bytes(in, found, 8);
  if (std::memcmp(found, magic, 8) != 0)
    throw ConfigError("not a " + what + " file (bad magic)");
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kFormatVersion)
    throw ConfigError(what + ": unsupported format version " + std::to_string(version));
}

inline void write_netspec(std::ostream& out, const NetSpec& spec) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(spec.layer_sizes.size()));
  for (const int s : spec.layer_sizes) write_pod<std::int32_t>(out, s);
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(spec.hidden_activation));
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(spec.output_activation));
}

inline NetSpec read_netspec(std::istream& in) {
  NetSpec spec;
  const auto n = read_pod<std::uint32_t>(in);
  spec.layer_sizes.resize(n);
  for (auto& s : spec.layer_sizes) s = read_pod<std::int32_t>(in);
  spec.hidden_activation = static_cast<HiddenActivation>(read_pod<std::uint8_t>(in));
  spec.output_activation = static_cast<OutputActivation>(read_pod<std::uint8_t>(in));
  spec.validate();
  return spec;
}

inline void write_adam(std::ostream& out, const AdamState& adam) {
  write_f64_vector(out, adam.first_moment);
  write_f64_vector(out, adam.second_moment);
  write_pod<std::int64_t>(out, adam.step_count);
  write_pod<double>(out, adam.learning_rate);
  write_pod<double>(out, adam.beta1);
  write_pod<double>(out, adam.beta2);
  write_pod<double>(out, adam.epsilon);
}

inline AdamState read_adam(std::istream& in) {
  AdamState adam;
  adam.first_moment = read_f64_vector(in);
  adam.second_moment = read_f64_vector(in);
  adam.step_count = read_pod<std::int64_t>(in);
  adam.learning_rate = read_pod<double>(in);
  adam.beta1 = read_pod<double>(in);
  adam.beta2 = read_pod<double>(in);
  adam.epsilon = read_pod<double>(in);
  return adam;
}

inline void write_transitions(std::ostream& out, const std::vector<Transition>& samples) {
  const std::uint32_t sdim = samples.empty() ? 0 : static_cast<std::uint32_t>(samples[0].state.size());
  const std::uint32_t adim = samples.empty() ? 0 : static_cast<std::uint32_t>(samples[0].action.size());
  write_pod<std::uint32_t>(out, sdim);
  write_pod<std::uint32_t>(out, adim);
  write_pod<std::uint64_t>(out, samples.size());
  for (const Transition& t : samples) {
    write_bytes(out, t.state.data(), sdim * sizeof(double));
    write_bytes(out, t.action.data(), adim * sizeof(double));
    write_pod<double>(out, t.reward);
  }
}

inline std::vector<Transition> read_transitions(std::istream& in) {
  const auto sdim = read_pod<std::uint32_t>(in);
  const auto adim = read_pod<std::uint32_t>(in);
  const auto count = read_pod<std::uint64_t>(in);
  std::vector<Transition> samples(count);
  for (Transition& t : samples) {
    t.state.resize(sdim);
    read_bytes(in, t.state.data(), sdim * sizeof(double));
    t.action.resize(adim);
    read_bytes(in, t.action.data(), adim * sizeof(double));
    t.reward = read_pod<double>(in);
  }
  return samples;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  return in;
}

}  // namespace detail

// Single network: header, NetSpec, parameters in canonical order.
inline void save_net(const std::filesystem::path& path, const NetSpec& spec,
                     const ParamVector& params) {
  if (params.size() != spec.param_count())
    throw ContractError("save_net: parameter count does not match spec");
  auto out = detail::open_out(path);
  detail::write_magic(out, "RLSCNET1");
  detail::write_netspec(out, spec);
  detail::write_f64_vector(out, params);
  if (!out) throw ConfigError("write failed for " + path.string());
}

inline std::pair<NetSpec, ParamVector> load_net(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  detail::check_magic(in, "RLSCNET1", "network checkpoint");
  NetSpec spec = detail::read_netspec(in);
  ParamVector params = detail::read_f64_vector(in);
  if (params.size() != spec.param_count())
    throw ConfigError("network checkpoint: parameter count does not match spec");
  return {std::move(spec), std::move(params)};
}

// Everything a run leaves behind: the agent (both nets, both Adam states,
// schedule position) plus whichever continual-learning state the variant
// carries. The replay buffer is intentionally not persisted.
struct AgentBundle {
  Agent agent;
  std::optional<EwcAnchor> ewc;
  std::optional<GemMemory> gem;
};

inline void save_agent_bundle(const std::filesystem::path& path, const AgentBundle& bundle) {
  auto out = detail::open_out(path);
  detail::write_magic(out, "RLSCAGT1");
  std::uint32_t flags = 0;
  if (bundle.ewc) flags |= 1u;
  if (bundle.gem) flags |= 2u;
  detail::write_pod<std::uint32_t>(out, flags);
  detail::write_netspec(out, bundle.agent.actor_spec);
  detail::write_f64_vector(out, bundle.agent.actor_params);
  detail::write_netspec(out, bundle.agent.critic_spec);
  detail::write_f64_vector(out, bundle.agent.critic_params);
  detail::write_adam(out, bundle.agent.actor_adam);
  detail::write_adam(out, bundle.agent.critic_adam);
  detail::write_pod<double>(out, bundle.agent.schedule.initial_epsilon);
  detail::write_pod<double>(out, bundle.agent.schedule.zero_fraction);
  detail::write_pod<std::int32_t>(out, bundle.agent.schedule.total_episodes);
  detail::write_pod<std::int32_t>(out, bundle.agent.episodes_completed);
  detail::write_pod<std::int32_t>(out, bundle.agent.batch_size);
  if (bundle.ewc) {
    detail::write_pod<double>(out, bundle.ewc->weight);
    detail::write_f64_vector(out, bundle.ewc->anchor_params);
    detail::write_f64_vector(out, bundle.ewc->fisher);
  }
  if (bundle.gem) detail::write_transitions(out, bundle.gem->samples);
  if (!out) throw ConfigError("write failed for " + path.string());
}

inline AgentBundle load_agent_bundle(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  detail::check_magic(in, "RLSCAGT1", "agent checkpoint");
  const auto flags = detail::read_pod<std::uint32_t>(in);
  AgentBundle bundle;
  bundle.agent.actor_spec = detail::read_netspec(in);
  bundle.agent.actor_params = detail::read_f64_vector(in);
  bundle.agent.critic_spec = detail::read_netspec(in);
  bundle.agent.critic_params = detail::read_f64_vector(in);
  bundle.agent.actor_adam = detail::read_adam(in);
  bundle.agent.critic_adam = detail::read_adam(in);
  bundle.agent.schedule.initial_epsilon = detail::read_pod<double>(in);
  bundle.agent.schedule.zero_fraction = detail::read_pod<double>(in);
  bundle.agent.schedule.total_episodes = detail::read_pod<std::int32_t>(in);
  bundle.agent.episodes_completed = detail::read_pod<std::int32_t>(in);
  bundle.agent.batch_size = detail::read_pod<std::int32_t>(in);
  if (flags & 1u) {
    EwcAnchor anchor;
    anchor.weight = detail::read_pod<double>(in);
    anchor.anchor_params = detail::read_f64_vector(in);
    anchor.fisher = detail::read_f64_vector(in);
    bundle.ewc = std::move(anchor);
  }
  if (flags & 2u) bundle.gem = GemMemory{detail::read_transitions(in)};
  return bundle;
}

// Priority-stage artifacts stored next to the prio_only checkpoint: the
// actor anchor with its Fisher diagonal (anchoring weight applied later by
// the consuming variant) and one retained-sample memory per configured size.
inline void save_ewc_artifact(const std::filesystem::path& path, const ParamVector& anchor_params,
                              const std::vector<double>& fisher) {
  auto out = detail::open_out(path);
  detail::write_magic(out, "RLSCEWC1");
  detail::write_f64_vector(out, anchor_params);
  detail::write_f64_vector(out, fisher);
  if (!out) throw ConfigError("write failed for " + path.string());
}

inline std::pair<ParamVector, std::vector<double>> load_ewc_artifact(
    const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  detail::check_magic(in, "RLSCEWC1", "anchor artifact");
  ParamVector params = detail::read_f64_vector(in);
  std::vector<double> fisher = detail::read_f64_vector(in);
  if (fisher.size() != params.size())
    throw ConfigError("anchor artifact: fisher length does not match parameters");
  return {std::move(params), std::move(fisher)};
}

inline void save_gem_artifact(const std::filesystem::path& path, const GemMemory& memory) {
  auto out = detail::open_out(path);
  detail::write_magic(out, "RLSCGEM1");
  detail::write_transitions(out, memory.samples);
  if (!out) throw ConfigError("write failed for " + path.string());
}

inline GemMemory load_gem_artifact(const std::filesystem::path& path) {
  auto in = detail::open_in(path);
  detail::check_magic(in, "RLSCGEM1", "memory artifact");
  return GemMemory{detail::read_transitions(in)};
}

}  // namespace rlsched
