#pragma once

// JSON and CSV serialization for the model types, plus atomic file output.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#if __has_include("json.hpp")
#include "json.hpp"
#else
#include <nlohmann/json.hpp>
#endif

#include "fefet/crossbar.hpp"
#include "fefet/device_model.hpp"
#include "fefet/errors.hpp"
#include "fefet/snn.hpp"
#include "fefet/synapse.hpp"

namespace fefet {

using json = nlohmann::json;

// Like FEFET_JSON_ENUM, but an unknown name is an error instead
// of silently mapping to the first enumerator.
#define FEFET_JSON_ENUM(ENUM_TYPE, ...)                                                          \
  inline void to_json(json& j, const ENUM_TYPE& e) {                                             \
    static const std::pair<ENUM_TYPE, const char*> m[] = __VA_ARGS__;                            \
    for (const auto& [v, name] : m)                                                              \
      if (v == e) {                                                                              \
        j = name;                                                                                \
        return;                                                                                  \
      }                                                                                          \
    j = nullptr;                                                                                 \
  }                                                                                              \
  inline void from_json(const json& j, ENUM_TYPE& e) {                                           \
    static const std::pair<ENUM_TYPE, const char*> m[] = __VA_ARGS__;                            \
    if (j.is_string())                                                                           \
      for (const auto& [v, name] : m)                                                            \
        if (j.get_ref<const std::string&>() == name) {                                           \
          e = v;                                                                                 \
          return;                                                                                \
        }                                                                                        \
    throw json::other_error::create(501, "unknown value " + j.dump() + " for " #ENUM_TYPE, &j); \
  }

// ---------------------------------------------------------------------------
// Enumerations

FEFET_JSON_ENUM(PulseProtocol::ResetMode, {{PulseProtocol::ResetMode::Kernel, "kernel"},
                                                        {PulseProtocol::ResetMode::Deterministic, "deterministic"}})
FEFET_JSON_ENUM(PulseProtocol::DeviceSampling,
                             {{PulseProtocol::DeviceSampling::PerCurve, "per_curve"},
                              {PulseProtocol::DeviceSampling::PerTrial, "per_trial"}})
FEFET_JSON_ENUM(SynapseKind, {{SynapseKind::TriState, "tri_state"}, {SynapseKind::Binary, "binary"}})
FEFET_JSON_ENUM(WeightInit, {{WeightInit::Zeros, "zeros"}, {WeightInit::Random, "random"}})

// ---------------------------------------------------------------------------
// Parameter structs. Missing keys keep their defaults; unknown keys are
// rejected by the config layer, not here.

namespace detail {

template <typename T>
void get_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

}  // namespace detail

inline void to_json(json& j, const DeviceParams& p) {
  j = json{{"n_domains", p.n_domains},     {"t_fe_nm", p.t_fe_nm},   {"divider_kappa", p.divider_kappa},
           {"tau0_s", p.tau0_s},           {"alpha", p.alpha},       {"ea_mean", p.ea_mean},
           {"ea_sigma", p.ea_sigma},       {"beta", p.beta},         {"vth_high", p.vth_high},
           {"vth_low", p.vth_low},         {"state_bounds", p.state_bounds}, {"device_seed", p.device_seed}};
}

inline void from_json(const json& j, DeviceParams& p) {
  using detail::get_opt;
  get_opt(j, "n_domains", p.n_domains);
  get_opt(j, "t_fe_nm", p.t_fe_nm);
  get_opt(j, "divider_kappa", p.divider_kappa);
  get_opt(j, "tau0_s", p.tau0_s);
  get_opt(j, "alpha", p.alpha);
  get_opt(j, "ea_mean", p.ea_mean);
  get_opt(j, "ea_sigma", p.ea_sigma);
  get_opt(j, "beta", p.beta);
  get_opt(j, "vth_high", p.vth_high);
  get_opt(j, "vth_low", p.vth_low);
  get_opt(j, "state_bounds", p.state_bounds);
  get_opt(j, "device_seed", p.device_seed);
}

inline void to_json(json& j, const PulseProtocol& p) {
  j = json{{"program_width_s", p.program_width_s}, {"steps_per_pulse", p.steps_per_pulse},
           {"reset_amplitude_v", p.reset_amplitude_v}, {"reset_width_s", p.reset_width_s},
           {"reset_mode", p.reset_mode}, {"sampling", p.sampling}};
}

inline void from_json(const json& j, PulseProtocol& p) {
  using detail::get_opt;
  get_opt(j, "program_width_s", p.program_width_s);
  get_opt(j, "steps_per_pulse", p.steps_per_pulse);
  get_opt(j, "reset_amplitude_v", p.reset_amplitude_v);
  get_opt(j, "reset_width_s", p.reset_width_s);
  get_opt(j, "reset_mode", p.reset_mode);
  get_opt(j, "sampling", p.sampling);
}

inline void to_json(json& j, const SwitchCurves& c) {
  j = json{{"voltages", c.voltages}, {"p_s0_to_s1", c.p_s0_to_s1}, {"p_s0_to_s2", c.p_s0_to_s2}, {"trials", c.trials}};
}

inline void from_json(const json& j, SwitchCurves& c) {
  j.at("voltages").get_to(c.voltages);
  j.at("p_s0_to_s1").get_to(c.p_s0_to_s1);
  j.at("p_s0_to_s2").get_to(c.p_s0_to_s2);
  j.at("trials").get_to(c.trials);
  c.validate();
}

inline void to_json(json& j, const NeuronParams& p) {
  j = json{{"v_rest", p.v_rest},
           {"v_reset", p.v_reset},
           {"v_thresh_base", p.v_thresh_base},
           {"tau_mem_ms", p.tau_mem_ms},
           {"refractory_ms", p.refractory_ms},
           {"theta_plus", p.theta_plus},
           {"theta_decay_ms", p.theta_decay_ms},
           {"inhibition_strength", p.inhibition_strength},
           {"input_gain", p.input_gain}};
}

inline void from_json(const json& j, NeuronParams& p) {
  using detail::get_opt;
  get_opt(j, "v_rest", p.v_rest);
  get_opt(j, "v_reset", p.v_reset);
  get_opt(j, "v_thresh_base", p.v_thresh_base);
  get_opt(j, "tau_mem_ms", p.tau_mem_ms);
  get_opt(j, "refractory_ms", p.refractory_ms);
  get_opt(j, "theta_plus", p.theta_plus);
  get_opt(j, "theta_decay_ms", p.theta_decay_ms);
  get_opt(j, "inhibition_strength", p.inhibition_strength);
  get_opt(j, "input_gain", p.input_gain);
}

inline void to_json(json& j, const LearnRuleParams& p) {
  j = json{{"timing_threshold_ms", p.timing_threshold_ms},
           {"stdp_window_ms", p.stdp_window_ms},
           {"depression_enabled", p.depression_enabled},
           {"depression_prob", p.depression_prob},
           {"anticausal_depression", p.anticausal_depression}};
}

inline void from_json(const json& j, LearnRuleParams& p) {
  using detail::get_opt;
  get_opt(j, "timing_threshold_ms", p.timing_threshold_ms);
  get_opt(j, "stdp_window_ms", p.stdp_window_ms);
  get_opt(j, "depression_enabled", p.depression_enabled);
  get_opt(j, "depression_prob", p.depression_prob);
  get_opt(j, "anticausal_depression", p.anticausal_depression);
}

inline void to_json(json& j, const EncoderParams& p) {
  j = json{{"duration_ms", p.duration_ms},   {"dt_ms", p.dt_ms},
           {"max_rate_hz", p.max_rate_hz},   {"min_spikes", p.min_spikes},
           {"rate_boost_hz", p.rate_boost_hz}, {"max_presentations", p.max_presentations}};
}

inline void from_json(const json& j, EncoderParams& p) {
  using detail::get_opt;
  get_opt(j, "duration_ms", p.duration_ms);
  get_opt(j, "dt_ms", p.dt_ms);
  get_opt(j, "max_rate_hz", p.max_rate_hz);
  get_opt(j, "min_spikes", p.min_spikes);
  get_opt(j, "rate_boost_hz", p.rate_boost_hz);
  get_opt(j, "max_presentations", p.max_presentations);
}

inline void to_json(json& j, const NetworkConfig& c) {
  j = json{{"n_input", c.n_input}, {"n_exc", c.n_exc},   {"neuron", c.neuron},          {"rule", c.rule},
           {"encoder", c.encoder}, {"init", c.init},     {"init_s2_prob", c.init_s2_prob}};
}

inline void from_json(const json& j, NetworkConfig& c) {
  using detail::get_opt;
  get_opt(j, "n_input", c.n_input);
  get_opt(j, "n_exc", c.n_exc);
  get_opt(j, "neuron", c.neuron);
  get_opt(j, "rule", c.rule);
  get_opt(j, "encoder", c.encoder);
  get_opt(j, "init", c.init);
  get_opt(j, "init_s2_prob", c.init_s2_prob);
}

// ---------------------------------------------------------------------------
// Synapse models and crossbar checkpoints

inline void to_json(json& j, const SynapseModel& m) {
  json table = json::object();
  for (std::size_t s = 0; s < kStates; ++s) {
    json per_level = json::object();
    for (std::size_t l = 0; l < kLevels; ++l)
      per_level[std::string(to_string(static_cast<PulseLevel>(l)))] = m.table()[s][l];
    table[std::string(to_string(static_cast<SynapseState>(s)))] = per_level;
  }
  j = json{{"kind", m.kind()},
           {"weight_map", m.weight_map()},
           {"amplitudes", {{"weak_v", m.amplitudes().weak_v},
                           {"strong_v", m.amplitudes().strong_v},
                           {"reset_v", m.amplitudes().reset_v}}},
           {"transition", table}};
}

inline SynapseModel synapse_model_from_json(const json& j) {
  TransitionTable t{};
  const auto& table = j.at("transition");
  for (std::size_t s = 0; s < kStates; ++s) {
    const auto& per_level = table.at(std::string(to_string(static_cast<SynapseState>(s))));
    for (std::size_t l = 0; l < kLevels; ++l)
      per_level.at(std::string(to_string(static_cast<PulseLevel>(l)))).get_to(t[s][l]);
  }
  PulseAmplitudes a;
  const auto& amps = j.at("amplitudes");
  amps.at("weak_v").get_to(a.weak_v);
  amps.at("strong_v").get_to(a.strong_v);
  amps.at("reset_v").get_to(a.reset_v);
  return SynapseModel(j.at("kind").get<SynapseKind>(), j.at("weight_map").get<std::array<double, kStates>>(), t, a);
}

// Checkpoint: dimensions, models, and one digit per cell for state and kind.
inline json crossbar_to_json(const CrossbarArray& arr) {
  std::string states(arr.states().size(), '0'), kinds(arr.kinds().size(), '0');
  for (std::size_t i = 0; i < states.size(); ++i) {
    states[i] = static_cast<char>('0' + arr.states()[i]);
    kinds[i] = static_cast<char>('0' + arr.kinds()[i]);
  }
  return json{{"rows", arr.rows()},
              {"cols", arr.cols()},
              {"models", {{"tri_state", arr.model(SynapseKind::TriState)}, {"binary", arr.model(SynapseKind::Binary)}}},
              {"states", states},
              {"kinds", kinds}};
}

inline CrossbarArray crossbar_from_json(const json& j) {
  CrossbarArray arr(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                    synapse_model_from_json(j.at("models").at("tri_state")),
                    synapse_model_from_json(j.at("models").at("binary")));
  const auto s = j.at("states").get<std::string>();
  const auto k = j.at("kinds").get<std::string>();
  std::vector<std::uint8_t> states(s.size()), kinds(k.size());
  for (std::size_t i = 0; i < s.size(); ++i) states[i] = static_cast<std::uint8_t>(s[i] - '0');
  for (std::size_t i = 0; i < k.size(); ++i) kinds[i] = static_cast<std::uint8_t>(k[i] - '0');
  arr.assign(std::move(states), std::move(kinds));
  return arr;
}

// ---------------------------------------------------------------------------
// Files

// Writes to <path>.tmp and renames over <path>, so readers never see a
// partially written file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(DataError::Kind::Io, "cannot open " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw DataError(DataError::Kind::Io, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(DataError::Kind::Format, path.string() + ": " + e.what());
  }
}

inline std::string format_double(double v, int precision = 6) {
  std::ostringstream ss;
  ss << std::setprecision(precision) << v;
  return ss.str();
}

// voltage,p_s0_s1,p_s0_s2,trials. Lines starting with '#' are comments.
inline std::string curves_to_csv(const SwitchCurves& c, const std::string& header_comment = {}) {
  std::ostringstream ss;
  if (!header_comment.empty()) ss << "# " << header_comment << "\n";
  ss << "voltage,p_s0_s1,p_s0_s2,trials\n";
  for (std::size_t i = 0; i < c.size(); ++i) {
    ss << std::fixed << std::setprecision(4) << c.voltages[i] << "," << std::setprecision(6) << c.p_s0_to_s1[i] << ","
       << c.p_s0_to_s2[i] << "," << c.trials[i] << "\n";
  }
  return ss.str();
}

inline SwitchCurves curves_from_csv(const std::string& text) {
  SwitchCurves c;
  std::istringstream in(text);
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "voltage,p_s0_s1,p_s0_s2,trials")
        throw DataError(DataError::Kind::Format, "curves CSV: unexpected header '" + line + "'");
      header = true;
      continue;
    }
    double v = 0, a = 0, b = 0;
    int n = 0;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%d%c", &v, &a, &b, &n, &tail) != 4)
      throw DataError(DataError::Kind::Format, "curves CSV: malformed row at line " + std::to_string(lineno));
    c.voltages.push_back(v);
    c.p_s0_to_s1.push_back(a);
    c.p_s0_to_s2.push_back(b);
    c.trials.push_back(n);
  }
  if (!header) throw DataError(DataError::Kind::Format, "curves CSV: missing header");
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw DataError(DataError::Kind::Format, std::string("curves CSV: ") + e.what());
  }
  return c;
}

inline SwitchCurves load_curves_csv(const std::filesystem::path& path) { return curves_from_csv(read_file(path)); }

}  // namespace fefet
