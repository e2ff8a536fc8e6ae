#pragma once

// Batch experiments: one JSON config in, CSV/JSON/PGM files out. A run is a
// pure function of the effective config; every output carries the config hash
// and seed.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include "fefet/calibration.hpp"
#include "fefet/crossbar.hpp"
#include "fefet/data.hpp"
#include "fefet/device_model.hpp"
#include "fefet/errors.hpp"
#include "fefet/io.hpp"
#include "fefet/snn.hpp"
#include "fefet/synapse.hpp"

namespace fefet {

enum class ExperimentKind { Calibrate, Curves, DomainSweep, TrainEval, BinaryFractionSweep };

FEFET_JSON_ENUM(ExperimentKind, {{ExperimentKind::Calibrate, "calibrate"},
                                              {ExperimentKind::Curves, "curves"},
                                              {ExperimentKind::DomainSweep, "domain-sweep"},
                                              {ExperimentKind::TrainEval, "train-eval"},
                                              {ExperimentKind::BinaryFractionSweep, "binary-fraction-sweep"}})
FEFET_JSON_ENUM(PlateauObservable, {{PlateauObservable::Modal, "modal"},
                                                 {PlateauObservable::Median, "median"},
                                                 {PlateauObservable::Mean, "mean"}})

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Calibrate: return "calibrate";
    case ExperimentKind::Curves: return "curves";
    case ExperimentKind::DomainSweep: return "domain-sweep";
    case ExperimentKind::TrainEval: return "train-eval";
    case ExperimentKind::BinaryFractionSweep: return "binary-fraction-sweep";
  }
  return "?";
}

struct GridConfig {
  double lo = 2.0;
  double hi = 4.0;
  double step = 0.02;
  std::vector<double> voltages() const { return voltage_grid(lo, hi, step); }
};

struct SynapseConfig {
  double v_weak = 2.82;
  double v_strong = 3.6;
  double v_reset = -4.0;
  std::array<double, kStates> weight_map{0.0, 0.5, 1.0};
  int curve_trials = 500;  // trials per voltage for the curves the tables are read from
};

struct DataConfig {
  std::string images = "data/mnist10k-images-idx3-ubyte.gz";
  std::string labels = "data/mnist10k-labels-idx1-ubyte.gz";
  std::size_t n_train = 1000;
  std::size_t n_test = 1000;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::TrainEval;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  int jobs = 1;

  // Device. When device_file is set its parameters replace `device` at load;
  // set it to "" to use the inline values.
  std::string device_file = "data/calibrated_device.json";
  DeviceParams device{};
  PulseProtocol protocol{};
  GridConfig grid{};

  // calibrate / curves
  std::string target_curves = "data/reference_switch_curves.csv";
  int curve_trials = 500;
  CalibrationOptions calibration{100, 1, NelderMeadOptions{600, 1e-7, 1e-4, 0.15, 2}, 1};

  // domain-sweep
  std::vector<int> domain_counts{1, 2, 5, 10, 20, 50, 100, 200};
  int sweep_trials = 100;
  PlateauObservable plateau_observable = PlateauObservable::Modal;
  double plateau_gap = 0.1;
  int plateau_min_run = 3;

  // train-eval / binary-fraction-sweep
  SynapseConfig synapse{};
  NetworkConfig network{};
  DataConfig data{};
  double binary_fraction = 0.0;
  std::vector<double> binary_fractions{0.0, 0.25, 0.5, 0.75, 1.0};
  int repeats = 3;
  std::size_t checkpoint_every = 0;  // patterns between crossbar checkpoints; 0 = final only
  bool write_train_log = true;

  void validate() const;
};

// ---------------------------------------------------------------------------
// JSON

inline void to_json(json& j, const GridConfig& g) { j = json{{"lo", g.lo}, {"hi", g.hi}, {"step", g.step}}; }
inline void from_json(const json& j, GridConfig& g) {
  detail::get_opt(j, "lo", g.lo);
  detail::get_opt(j, "hi", g.hi);
  detail::get_opt(j, "step", g.step);
}

inline void to_json(json& j, const SynapseConfig& s) {
  j = json{{"v_weak", s.v_weak},
           {"v_strong", s.v_strong},
           {"v_reset", s.v_reset},
           {"weight_map", s.weight_map},
           {"curve_trials", s.curve_trials}};
}
inline void from_json(const json& j, SynapseConfig& s) {
  detail::get_opt(j, "v_weak", s.v_weak);
  detail::get_opt(j, "v_strong", s.v_strong);
  detail::get_opt(j, "v_reset", s.v_reset);
  detail::get_opt(j, "weight_map", s.weight_map);
  detail::get_opt(j, "curve_trials", s.curve_trials);
}

inline void to_json(json& j, const DataConfig& d) {
  j = json{{"images", d.images}, {"labels", d.labels}, {"n_train", d.n_train}, {"n_test", d.n_test}};
}
inline void from_json(const json& j, DataConfig& d) {
  detail::get_opt(j, "images", d.images);
  detail::get_opt(j, "labels", d.labels);
  detail::get_opt(j, "n_train", d.n_train);
  detail::get_opt(j, "n_test", d.n_test);
}

inline void to_json(json& j, const NelderMeadOptions& o) {
  j = json{{"max_evaluations", o.max_evaluations},
           {"f_tolerance", o.f_tolerance},
           {"x_tolerance", o.x_tolerance},
           {"initial_step", o.initial_step},
           {"restarts", o.restarts}};
}
inline void from_json(const json& j, NelderMeadOptions& o) {
  detail::get_opt(j, "max_evaluations", o.max_evaluations);
  detail::get_opt(j, "f_tolerance", o.f_tolerance);
  detail::get_opt(j, "x_tolerance", o.x_tolerance);
  detail::get_opt(j, "initial_step", o.initial_step);
  detail::get_opt(j, "restarts", o.restarts);
}

// jobs lives at the top level of the experiment config.
inline void to_json(json& j, const CalibrationOptions& o) {
  j = json{{"trials", o.trials}, {"seed", o.seed}, {"optimizer", o.optimizer}};
}
inline void from_json(const json& j, CalibrationOptions& o) {
  detail::get_opt(j, "trials", o.trials);
  detail::get_opt(j, "seed", o.seed);
  detail::get_opt(j, "optimizer", o.optimizer);
}

inline void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"experiment", c.experiment},
           {"seed", c.seed},
           {"out_dir", c.out_dir},
           {"jobs", c.jobs},
           {"device_file", c.device_file},
           {"device", c.device},
           {"protocol", c.protocol},
           {"grid", c.grid},
           {"target_curves", c.target_curves},
           {"curve_trials", c.curve_trials},
           {"calibration", c.calibration},
           {"domain_counts", c.domain_counts},
           {"sweep_trials", c.sweep_trials},
           {"plateau_observable", c.plateau_observable},
           {"plateau_gap", c.plateau_gap},
           {"plateau_min_run", c.plateau_min_run},
           {"synapse", c.synapse},
           {"network", c.network},
           {"data", c.data},
           {"binary_fraction", c.binary_fraction},
           {"binary_fractions", c.binary_fractions},
           {"repeats", c.repeats},
           {"checkpoint_every", c.checkpoint_every},
           {"write_train_log", c.write_train_log}};
}

inline void from_json(const json& j, ExperimentConfig& c) {
  using detail::get_opt;
  get_opt(j, "experiment", c.experiment);
  get_opt(j, "seed", c.seed);
  get_opt(j, "out_dir", c.out_dir);
  get_opt(j, "jobs", c.jobs);
  get_opt(j, "device_file", c.device_file);
  get_opt(j, "device", c.device);
  get_opt(j, "protocol", c.protocol);
  get_opt(j, "grid", c.grid);
  get_opt(j, "target_curves", c.target_curves);
  get_opt(j, "curve_trials", c.curve_trials);
  get_opt(j, "calibration", c.calibration);
  get_opt(j, "domain_counts", c.domain_counts);
  get_opt(j, "sweep_trials", c.sweep_trials);
  get_opt(j, "plateau_observable", c.plateau_observable);
  get_opt(j, "plateau_gap", c.plateau_gap);
  get_opt(j, "plateau_min_run", c.plateau_min_run);
  get_opt(j, "synapse", c.synapse);
  get_opt(j, "network", c.network);
  get_opt(j, "data", c.data);
  get_opt(j, "binary_fraction", c.binary_fraction);
  get_opt(j, "binary_fractions", c.binary_fractions);
  get_opt(j, "repeats", c.repeats);
  get_opt(j, "checkpoint_every", c.checkpoint_every);
  get_opt(j, "write_train_log", c.write_train_log);
}

namespace detail {

// Every key in `given` must exist in `reference` (the serialized defaults);
// nested objects are checked recursively.
inline void check_known_keys(const json& given, const json& reference, const std::string& where) {
  if (!given.is_object()) return;
  for (auto it = given.begin(); it != given.end(); ++it) {
    const auto ref = reference.find(it.key());
    const std::string path = where.empty() ? it.key() : where + "." + it.key();
    if (ref == reference.end()) throw ConfigError("unknown config key '" + path + "'");
    if (it.value().is_object() && ref->is_object()) check_known_keys(it.value(), *ref, path);
  }
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
  auto bad = [](const std::string& m) { throw ConfigError(m); };
  try {
    device.validate();
    protocol.validate();
    network.validate();
  } catch (const InvalidArgument& e) {
    bad(e.what());
  }
  if (jobs < 1) bad("jobs must be >= 1");
  if (!(grid.step > 0) || !(grid.hi >= grid.lo)) bad("grid: need step > 0 and hi >= lo");
  if (curve_trials < 1 || sweep_trials < 1 || synapse.curve_trials < 1 || calibration.trials < 1)
    bad("trial counts must be >= 1");
  if (domain_counts.empty()) bad("domain_counts must not be empty");
  for (int n : domain_counts)
    if (n < 1) bad("domain_counts entries must be >= 1");
  if (!(plateau_gap > 0) || plateau_min_run < 1) bad("plateau rule: need gap > 0 and min_run >= 1");
  if (!(synapse.v_strong > synapse.v_weak)) bad("synapse: v_strong must exceed v_weak");
  if (!(synapse.weight_map[0] < synapse.weight_map[1] && synapse.weight_map[1] < synapse.weight_map[2]))
    bad("synapse: weight_map must be strictly increasing");
  if (binary_fraction < 0 || binary_fraction > 1) bad("binary_fraction must lie in [0, 1]");
  if (binary_fractions.empty()) bad("binary_fractions must not be empty");
  for (double f : binary_fractions)
    if (f < 0 || f > 1) bad("binary_fractions entries must lie in [0, 1]");
  if (repeats < 1) bad("repeats must be >= 1");
  if (data.n_train < 1 || data.n_test < 1) bad("data: n_train and n_test must be >= 1");
}

// Parses a config document. Unknown keys and type errors are ConfigErrors; a
// device_file is read and replaces the inline device parameters.
inline ExperimentConfig config_from_json(const json& doc, const std::filesystem::path& base_dir = {}) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  json j = doc;
  j.erase("config_hash");  // stamped on emitted configs; informational only
  detail::check_known_keys(j, json(ExperimentConfig{}), "");
  ExperimentConfig c;
  try {
    c = j.get<ExperimentConfig>();
    if (!c.device_file.empty()) {
      std::filesystem::path p(c.device_file);
      if (p.is_relative() && !base_dir.empty() && !std::filesystem::exists(p)) p = base_dir / p;
      const json dj = read_json(p);
      c.device = (dj.contains("device") ? dj.at("device") : dj).get<DeviceParams>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const DataError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(j, path.parent_path());
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Hash of everything that can change results; out_dir and jobs are excluded.
inline std::string config_hash(const ExperimentConfig& c) {
  json j = c;
  j.erase("out_dir");
  j.erase("jobs");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

// ---------------------------------------------------------------------------
// Runners

struct RunContext {
  ExperimentConfig cfg;
  std::string hash;
  std::filesystem::path out;
  std::ostream* log = nullptr;

  explicit RunContext(ExperimentConfig c, std::ostream* l = nullptr)
      : cfg(std::move(c)), hash(config_hash(cfg)), out(cfg.out_dir), log(l) {}

  std::string header() const { return "config_hash=" + hash + " seed=" + std::to_string(cfg.seed); }

  void note(const std::string& m) const {
    if (log) *log << "[" << to_string(cfg.experiment) << "] " << m << std::endl;
  }

  void write_csv(const std::string& name, const std::string& body) const {
    write_file_atomic(out / name, "# " + header() + "\n" + body);
  }

  void write_json(const std::string& name, json j) const {
    j["config_hash"] = hash;
    j["seed"] = cfg.seed;
    write_file_atomic(out / name, j.dump(2) + "\n");
  }
};

struct SynapsePair {
  SwitchCurves curves;
  SynapseModel tri;
  SynapseModel binary;
};

// Tables are read off freshly simulated curves of the configured device.
inline SynapsePair build_synapses(const ExperimentConfig& cfg) {
  const auto grid = cfg.grid.voltages();
  SynapsePair p;
  p.curves = accumulative_curves(cfg.device, cfg.protocol, grid, cfg.synapse.curve_trials,
                                 derive_seed(cfg.seed, {0xc0, 0x5e}), cfg.jobs);
  p.tri = from_device_curves(p.curves, cfg.synapse.v_weak, cfg.synapse.v_strong, cfg.synapse.weight_map,
                             cfg.synapse.v_reset);
  p.binary = matched_binary(p.tri);
  return p;
}

// Target rows inside the model's voltage span, model interpolated onto them.
inline std::pair<SwitchCurves, SwitchCurves> overlap_with_target(const SwitchCurves& model, const SwitchCurves& target) {
  SwitchCurves t, m;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double v = target.voltages[i];
    if (model.size() == 0 || v < model.voltages.front() - 1e-12 || v > model.voltages.back() + 1e-12) continue;
    t.voltages.push_back(v);
    t.p_s0_to_s1.push_back(target.p_s0_to_s1[i]);
    t.p_s0_to_s2.push_back(target.p_s0_to_s2[i]);
    t.trials.push_back(target.trials[i]);
    m.voltages.push_back(v);
    m.p_s0_to_s1.push_back(detail::interpolate(model.voltages, model.p_s0_to_s1, v));
    m.p_s0_to_s2.push_back(detail::interpolate(model.voltages, model.p_s0_to_s2, v));
    m.trials.push_back(model.trials.front());
  }
  return {m, t};
}

inline std::string curve_comparison_csv(const SwitchCurves& model, const SwitchCurves& target) {
  std::ostringstream ss;
  ss << "voltage,target_s1,target_s2,model_s1,model_s2\n";
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double v = target.voltages[i];
    if (v < model.voltages.front() - 1e-12 || v > model.voltages.back() + 1e-12) continue;
    ss << format_double(v) << "," << format_double(target.p_s0_to_s1[i]) << "," << format_double(target.p_s0_to_s2[i])
       << "," << format_double(detail::interpolate(model.voltages, model.p_s0_to_s1, v)) << ","
       << format_double(detail::interpolate(model.voltages, model.p_s0_to_s2, v)) << "\n";
  }
  return ss.str();
}

inline json run_calibrate(const RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const SwitchCurves target = load_curves_csv(cfg.target_curves);
  CalibrationOptions opt = cfg.calibration;
  opt.jobs = cfg.jobs;
  ctx.note("fitting " + std::to_string(target.size()) + " target voltages");
  const CalibrationResult r = calibrate(cfg.device, cfg.protocol, target, opt);
  ctx.note("mse " + format_double(r.mse) + " (start " + format_double(r.initial_mse) + ") after " +
           std::to_string(r.evaluations) + " evaluations");
  const SwitchCurves fitted = accumulative_curves(r.params, cfg.protocol, target.voltages, opt.trials, opt.seed, cfg.jobs);
  json report{{"device", r.params},
              {"mse", r.mse},
              {"initial_mse", r.initial_mse},
              {"evaluations", r.evaluations},
              {"converged", r.converged},
              {"target_curves", cfg.target_curves}};
  ctx.write_json("calibrated_device.json", report);
  ctx.write_csv("calibration_fit.csv", curve_comparison_csv(fitted, target));
  return report;
}

inline json run_curves(const RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const SwitchCurves c = accumulative_curves(cfg.device, cfg.protocol, cfg.grid.voltages(), cfg.curve_trials,
                                             derive_seed(cfg.seed, {0xc0}), cfg.jobs);
  ctx.write_csv("curves.csv", curves_to_csv(c));
  json report{{"voltages", c.size()}, {"trials", cfg.curve_trials}, {"curves", c}};
  if (!cfg.target_curves.empty()) {
    const SwitchCurves target = load_curves_csv(cfg.target_curves);
    ctx.write_csv("curves_vs_target.csv", curve_comparison_csv(c, target));
    const auto [m, t] = overlap_with_target(c, target);
    report["target_points_compared"] = t.size();
    if (t.size() > 0) report["mse_vs_target"] = curve_mse(m, t);
  }
  ctx.write_json("curves_report.json", report);
  return report;
}

inline json run_domain_sweep(const RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto grid = cfg.grid.voltages();
  const auto rows = states_vs_domains(cfg.device, cfg.protocol, cfg.domain_counts, grid, cfg.sweep_trials,
                                      derive_seed(cfg.seed, {0xd5}), cfg.jobs, cfg.plateau_observable);
  std::ostringstream table, fractions;
  table << "n_domains,plateaus\n";
  fractions << "voltage";
  json out = json::array();
  for (const auto& r : rows) {
    const int count = count_plateaus(r.fraction, cfg.plateau_gap, cfg.plateau_min_run);
    table << r.n_domains << "," << count << "\n";
    fractions << ",n" << r.n_domains;
    out.push_back({{"n_domains", r.n_domains}, {"plateaus", count}});
    ctx.note("n=" + std::to_string(r.n_domains) + " plateaus=" + std::to_string(count));
  }
  fractions << "\n";
  for (std::size_t v = 0; v < grid.size(); ++v) {
    fractions << format_double(grid[v]);
    for (const auto& r : rows) fractions << "," << format_double(r.fraction[v]);
    fractions << "\n";
  }
  ctx.write_csv("domain_sweep.csv", table.str());
  ctx.write_csv("domain_sweep_fraction.csv", fractions.str());
  json report{{"rows", out}};
  ctx.write_json("domain_sweep_report.json", report);
  return report;
}

// One training + evaluation run. Returns the trained state through `state_out`
// when given. The log callback receives JSONL lines.
struct TrainEvalResult {
  EvalReport eval;
  TrainReport train;
  std::size_t labeled = 0;
};

inline TrainEvalResult train_eval_once(const ExperimentConfig& cfg, const SynapsePair& syn, const Dataset& train_set,
                                       const Dataset& test_set, double binary_fraction, std::uint64_t seed,
                                       int jobs, SnnState* state_out = nullptr,
                                       const std::function<void(const PatternLog&, const SnnState&)>& on_pattern = {}) {
  Rng init_rng(derive_seed(seed, {0x1a17}));
  SnnState s = make_state(cfg.network, syn.tri, syn.binary, init_rng);
  Rng inject_rng(derive_seed(seed, {0xb1a}));
  s.weights.inject_binary_fraction(binary_fraction, inject_rng);
  TrainEvalResult r;
  PatternLogger logger;
  if (on_pattern) logger = [&](const PatternLog& l) { on_pattern(l, s); };
  r.train = train(s, train_set, cfg.network, derive_seed(seed, {0x7a}), logger);
  r.eval = evaluate(s, test_set, cfg.network, derive_seed(seed, {0xe7}), jobs);
  for (int l : s.labels) r.labeled += l >= 0;
  if (state_out) *state_out = std::move(s);
  return r;
}

inline std::string confusion_csv(const EvalReport& e) {
  std::ostringstream ss;
  ss << "true";
  for (int p = 0; p < 10; ++p) ss << ",pred_" << p;
  ss << "\n";
  for (int t = 0; t < 10; ++t) {
    ss << t;
    for (int p = 0; p < 10; ++p) ss << "," << e.confusion[t][p];
    ss << "\n";
  }
  return ss.str();
}

inline std::pair<Dataset, Dataset> load_split(const ExperimentConfig& cfg, std::uint64_t seed) {
  const Dataset all = load_idx(cfg.data.images, cfg.data.labels);
  return take_split(all, cfg.data.n_train, cfg.data.n_test, seed);
}

inline json class_counts_json(const Dataset& d) {
  const auto c = d.class_counts();
  return json(std::vector<std::size_t>(c.begin(), c.end()));
}

inline json run_train_eval(const RunContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto [train_set, test_set] = load_split(cfg, derive_seed(cfg.seed, {0xda7a}));
  ctx.note("train " + std::to_string(train_set.size()) + " / test " + std::to_string(test_set.size()) +
           " patterns; train class counts " + class_counts_json(train_set).dump());
  const SynapsePair syn = build_synapses(cfg);

  std::ostringstream jsonl;
  const std::size_t every = cfg.checkpoint_every;
  auto on_pattern = [&](const PatternLog& l, const SnnState& s) {
    if (cfg.write_train_log) {
      json line{{"pattern", l.index},
                {"label", l.label},
                {"presentations", l.result.presentations},
                {"spike_counts", l.result.spike_counts},
                {"pulses", {{"strong", l.result.pulses.strong}, {"weak", l.result.pulses.weak},
                            {"reset", l.result.pulses.reset}}}};
      jsonl << line.dump() << "\n";
    }
    if (every > 0 && (l.index + 1) % every == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "checkpoints/crossbar_%06zu.json", l.index + 1);
      ctx.write_json(name, crossbar_to_json(s.weights));
    }
  };

  SnnState trained;
  const TrainEvalResult r =
      train_eval_once(cfg, syn, train_set, test_set, cfg.binary_fraction, cfg.seed, cfg.jobs, &trained, on_pattern);
  ctx.note("accuracy " + format_double(r.eval.accuracy, 4) + " (" + std::to_string(r.eval.correct) + "/" +
           std::to_string(r.eval.total) + "), degenerate " + std::to_string(r.eval.degenerate));

  if (cfg.write_train_log) write_file_atomic(ctx.out / "train_log.jsonl", jsonl.str());
  ctx.write_csv("confusion.csv", confusion_csv(r.eval));
  const std::size_t side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(cfg.network.n_input))));
  if (side * side == cfg.network.n_input)
    write_file_atomic(ctx.out / "weights.pgm", encode_weight_pgm(trained.weights, side, side, ctx.header()));
  ctx.write_json("crossbar_final.json", crossbar_to_json(trained.weights));
  ctx.write_json("synapse_models.json", {{"tri_state", syn.tri}, {"binary", syn.binary}});

  json report{{"accuracy", r.eval.accuracy},
              {"correct", r.eval.correct},
              {"total", r.eval.total},
              {"degenerate_patterns", r.eval.degenerate},
              {"labeled_neurons", r.labeled},
              {"binary_fraction", cfg.binary_fraction},
              {"pulses", {{"strong", r.train.pulses.strong}, {"weak", r.train.pulses.weak},
                          {"reset", r.train.pulses.reset}}},
              {"train_class_counts", class_counts_json(train_set)},
              {"test_class_counts", class_counts_json(test_set)},
              {"weight_states", {{"S0", trained.weights.count(SynapseState::S0)},
                                 {"S1", trained.weights.count(SynapseState::S1)},
                                 {"S2", trained.weights.count(SynapseState::S2)}}}};
  ctx.write_json("accuracy.json", report);
  return report;
}

struct FractionPoint {
  double fraction = 0.0;
  std::vector<double> accuracies;  // one per repeat
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single repeat
};

inline std::pair<double, double> mean_sd(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

// Repeat r uses the same split, initial weights and streams for every
// fraction, so fractions are compared on matched seeds.
inline std::vector<FractionPoint> binary_fraction_sweep(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  const Dataset all = load_idx(cfg.data.images, cfg.data.labels);
  const SynapsePair syn = build_synapses(cfg);
  const std::size_t nf = cfg.binary_fractions.size(), nr = static_cast<std::size_t>(cfg.repeats);
  std::vector<double> acc(nf * nr, 0.0);
  std::mutex log_mu;
  detail::parallel_for(nf * nr, cfg.jobs, [&](std::size_t u) {
    const std::size_t fi = u / nr, r = u % nr;
    const std::uint64_t seed = derive_seed(cfg.seed, {0x5eed, r});
    const auto [tr, te] = take_split(all, cfg.data.n_train, cfg.data.n_test, derive_seed(seed, {0xda7a}));
    acc[u] = train_eval_once(cfg, syn, tr, te, cfg.binary_fractions[fi], seed, 1).eval.accuracy;
    if (log) {
      std::lock_guard<std::mutex> lk(log_mu);
      *log << "[binary-fraction-sweep] f=" << cfg.binary_fractions[fi] << " repeat " << r << " accuracy "
           << format_double(acc[u], 4) << std::endl;
    }
  });
  std::vector<FractionPoint> pts(nf);
  for (std::size_t fi = 0; fi < nf; ++fi) {
    pts[fi].fraction = cfg.binary_fractions[fi];
    pts[fi].accuracies.assign(acc.begin() + static_cast<std::ptrdiff_t>(fi * nr),
                              acc.begin() + static_cast<std::ptrdiff_t>((fi + 1) * nr));
    std::tie(pts[fi].mean, pts[fi].sd) = mean_sd(pts[fi].accuracies);
  }
  return pts;
}

inline json run_binary_fraction_sweep(const RunContext& ctx) {
  const auto pts = binary_fraction_sweep(ctx.cfg, ctx.log);
  std::ostringstream ss;
  ss << "fraction,mean_accuracy,sd_accuracy,repeats";
  for (int r = 0; r < ctx.cfg.repeats; ++r) ss << ",accuracy_r" << r;
  ss << "\n";
  json rows = json::array();
  for (const auto& p : pts) {
    ss << format_double(p.fraction) << "," << format_double(p.mean) << "," << format_double(p.sd) << ","
       << p.accuracies.size();
    for (double a : p.accuracies) ss << "," << format_double(a);
    ss << "\n";
    rows.push_back({{"fraction", p.fraction}, {"mean", p.mean}, {"sd", p.sd}, {"accuracies", p.accuracies}});
  }
  ctx.write_csv("binary_fraction_sweep.csv", ss.str());
  json report{{"points", rows}};
  ctx.write_json("binary_fraction_report.json", report);
  return report;
}

// Writes the effective config next to the outputs, then dispatches.
inline json run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr) {
  RunContext ctx(cfg, log);
  std::filesystem::create_directories(ctx.out);
  ctx.write_json("effective_config.json", json(cfg));
  switch (cfg.experiment) {
    case ExperimentKind::Calibrate: return run_calibrate(ctx);
    case ExperimentKind::Curves: return run_curves(ctx);
    case ExperimentKind::DomainSweep: return run_domain_sweep(ctx);
    case ExperimentKind::TrainEval: return run_train_eval(ctx);
    case ExperimentKind::BinaryFractionSweep: return run_binary_fraction_sweep(ctx);
  }
  throw ConfigError("unknown experiment kind");
}

}  // namespace fefet
