#pragma once

// Experiment configuration, Monte Carlo orchestration and CSV I/O.
//
// Per-trial randomness is keyed by (master_seed, trial, purpose) and never by
// the sweep value, so every sweep point and every scheme sees the same
// layouts, datasets and channel draws (common random numbers).

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relayfl/aggregation.hpp"
#include "relayfl/channel.hpp"
#include "relayfl/errors.hpp"
#include "relayfl/federated.hpp"
#include "relayfl/optimizer.hpp"
#include "relayfl/random.hpp"
#include "relayfl/single_relay.hpp"

namespace relayfl {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class LayoutKind { line, cell };
enum class PartitionKind { iid, shards };

struct LayoutConfig {
  LayoutKind kind = LayoutKind::line;
  LineScenario line{};
  CellScenario cell{};
  PathLossParams path_loss{};
};

struct FlConfig {
  int total_blocks = 1000;
  int tau = 1;
  LearningRateSchedule lr{};
  TaskParams task{};
  PartitionKind partition = PartitionKind::iid;
  std::size_t shards_C = 2;
};

struct SweepSpec {
  std::string key;
  std::vector<double> values;
};

struct ExperimentConfig {
  Scheme scheme = Scheme::proposed;
  std::size_t num_devices = 20;
  std::size_t num_relays = 1;
  PowerBudget budget{0.05, 0.1, dbm_to_watts(-70.0)};
  double noise_dbm = -70.0;
  LayoutConfig layout{};
  SolverConfig solver{};
  FlConfig fl{};
  std::optional<double> csi_kappa;
  int trials = 1;
  std::uint64_t master_seed = 1;
  std::vector<SweepSpec> sweep;

  void validate() const;
};

// --- loading ----------------------------------------------------------------

namespace detail {

/// Typed access to one JSON object that remembers which keys were consumed so
/// leftovers can be reported as unknown.
class ObjectReader {
public:
  ObjectReader(const nlohmann::json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    auto it = obj_.find(key);
    seen_.insert(key);
    if (it == obj_.end()) return;
    try {
      out = convert<T>(*it);
    } catch (const Mismatch&) {
      throw ConfigError(child(key) + ": wrong type");
    }
  }

  template <class T>
  void read_optional(const char* key, std::optional<T>& out) {
    auto it = obj_.find(key);
    seen_.insert(key);
    if (it == obj_.end() || it->is_null()) return;
    T value{};
    read(key, value);
    out = value;
  }

  std::optional<ObjectReader> object(const char* key) {
    auto it = obj_.find(key);
    seen_.insert(key);
    if (it == obj_.end()) return std::nullopt;
    return ObjectReader(*it, child(key));
  }

  const nlohmann::json* raw(const char* key) {
    auto it = obj_.find(key);
    seen_.insert(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(child(it.key()) + ": unknown key");
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "<root>" : path_; }

private:
  struct Mismatch {};

  template <class T>
  static T convert(const nlohmann::json& j) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw Mismatch{};
      return j.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!j.is_number_integer()) throw Mismatch{};
      if constexpr (std::is_unsigned_v<T>)
        if (!j.is_number_unsigned() && j.get<std::int64_t>() < 0) throw Mismatch{};
      return j.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!j.is_number()) throw Mismatch{};
      return j.get<T>();
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (!j.is_array()) throw Mismatch{};
      T out;
      for (const auto& v : j) out.push_back(convert<double>(v));
      return out;
    } else {
      if (!j.is_string()) throw Mismatch{};
      return j.get<T>();
    }
  }

  const nlohmann::json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

inline Scheme parse_scheme(const std::string& s, const std::string& path) {
  if (s == "proposed") return Scheme::proposed;
  if (s == "relay_only") return Scheme::relay_only;
  if (s == "no_relay") return Scheme::no_relay;
  if (s == "error_free") return Scheme::error_free;
  throw ConfigError(path + ": unknown scheme '" + s + "'");
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

} // namespace detail

inline void ExperimentConfig::validate() const {
  using detail::require;
  require(num_devices >= 1, "num_devices: must be at least 1");
  require(budget.p0 > 0.0, "budget.p0_watts: must be positive");
  require(budget.pr > 0.0, "budget.pr_watts: must be positive");
  require(std::isfinite(noise_dbm), "budget.noise_dbm: must be finite");
  require(layout.line.x_relay > 0.0, "layout.x_relay: must be positive");
  require(layout.cell.cell_radius > 0.0, "layout.cell_radius: must be positive");
  require(layout.cell.relay_radius > 0.0, "layout.relay_radius: must be positive");
  require(layout.path_loss.antenna_gain > 0.0, "layout.antenna_gain: must be positive");
  require(layout.path_loss.carrier_freq > 0.0, "layout.carrier_freq_hz: must be positive");
  require(layout.path_loss.exponent > 0.0, "layout.path_loss_exponent: must be positive");
  require(solver.j_max >= 1, "solver.j_max: must be at least 1");
  require(solver.epsilon > 0.0, "solver.epsilon: must be positive");
  require(solver.qcqp_tol > 0.0, "solver.qcqp_tol: must be positive");
  require(solver.qcqp_max_iter >= 1, "solver.qcqp_max_iter: must be at least 1");
  require(fl.total_blocks >= 1, "fl.total_blocks: must be at least 1");
  require(fl.tau >= 1, "fl.tau: must be at least 1");
  require(fl.lr.base > 0.0 && fl.lr.decay > 0.0 && fl.lr.period >= 1 && fl.lr.floor > 0.0,
          "fl.lr: all schedule parameters must be positive");
  require(fl.task.num_classes >= 1 && fl.task.feature_dim >= fl.task.num_classes && fl.task.samples_per_class >= 1 &&
              fl.task.separation > 0.0,
          "fl.task: need positive sizes, separation > 0 and feature_dim >= num_classes");
  require(fl.shards_C >= 1, "fl.shards_C: must be at least 1");
  require(!csi_kappa || (*csi_kappa >= 0.0 && *csi_kappa <= 1.0), "csi_kappa: must lie in [0, 1]");
  require(trials >= 1, "trials: must be at least 1");
  for (const auto& s : sweep) require(!s.values.empty(), "sweep." + s.key + ": needs at least one value");
}

inline ExperimentConfig apply_sweep_value(ExperimentConfig cfg, const std::string& key, double value);

inline ExperimentConfig parse_config(const nlohmann::json& doc) {
  ExperimentConfig cfg;
  detail::ObjectReader root(doc, "");

  std::string scheme = "proposed";
  root.read("scheme", scheme);
  cfg.scheme = detail::parse_scheme(scheme, "scheme");
  root.read("num_devices", cfg.num_devices);
  root.read("num_relays", cfg.num_relays);

  if (auto b = root.object("budget")) {
    b->read("p0_watts", cfg.budget.p0);
    b->read("pr_watts", cfg.budget.pr);
    b->read("noise_dbm", cfg.noise_dbm);
    b->finish();
  }

  if (auto l = root.object("layout")) {
    std::string kind = "line";
    l->read("kind", kind);
    if (kind == "line")
      cfg.layout.kind = LayoutKind::line;
    else if (kind == "cell")
      cfg.layout.kind = LayoutKind::cell;
    else
      throw ConfigError("layout.kind: expected 'line' or 'cell'");
    l->read("x_relay", cfg.layout.line.x_relay);
    l->read("cell_radius", cfg.layout.cell.cell_radius);
    l->read("relay_radius", cfg.layout.cell.relay_radius);
    l->read("antenna_gain", cfg.layout.path_loss.antenna_gain);
    l->read("carrier_freq_hz", cfg.layout.path_loss.carrier_freq);
    l->read("path_loss_exponent", cfg.layout.path_loss.exponent);
    l->finish();
  }

  if (auto s = root.object("solver")) {
    s->read("j_max", cfg.solver.j_max);
    s->read("epsilon", cfg.solver.epsilon);
    s->read("qcqp_tol", cfg.solver.qcqp_tol);
    s->read("qcqp_max_iter", cfg.solver.qcqp_max_iter);
    s->finish();
  }

  if (auto f = root.object("fl")) {
    f->read("total_blocks", cfg.fl.total_blocks);
    f->read("tau", cfg.fl.tau);
    if (auto lr = f->object("lr")) {
      lr->read("base", cfg.fl.lr.base);
      lr->read("decay", cfg.fl.lr.decay);
      lr->read("period", cfg.fl.lr.period);
      lr->read("floor", cfg.fl.lr.floor);
      lr->finish();
    }
    if (auto t = f->object("task")) {
      t->read("num_classes", cfg.fl.task.num_classes);
      t->read("feature_dim", cfg.fl.task.feature_dim);
      t->read("samples_per_class", cfg.fl.task.samples_per_class);
      t->read("separation", cfg.fl.task.separation);
      t->finish();
    }
    std::string partition = "iid";
    f->read("partition", partition);
    if (partition == "iid")
      cfg.fl.partition = PartitionKind::iid;
    else if (partition == "shards")
      cfg.fl.partition = PartitionKind::shards;
    else
      throw ConfigError("fl.partition: expected 'iid' or 'shards'");
    f->read("shards_C", cfg.fl.shards_C);
    f->finish();
  }

  root.read_optional("csi_kappa", cfg.csi_kappa);
  root.read("trials", cfg.trials);
  root.read("master_seed", cfg.master_seed);

  if (const auto* sweep = root.raw("sweep")) {
    // A single {key, values} object or a list of them; each is run on its own.
    std::vector<const nlohmann::json*> items;
    if (sweep->is_array())
      for (const auto& item : *sweep) items.push_back(&item);
    else
      items.push_back(sweep);
    for (std::size_t i = 0; i < items.size(); ++i) {
      detail::ObjectReader s(*items[i], "sweep[" + std::to_string(i) + "]");
      SweepSpec spec;
      s.read("key", spec.key);
      s.read("values", spec.values);
      s.finish();
      if (spec.key.empty()) throw ConfigError(s.child("key") + ": missing");
      cfg.sweep.push_back(std::move(spec));
    }
  }
  root.finish();

  cfg.budget.sigma2 = dbm_to_watts(cfg.noise_dbm);
  cfg.validate();
  // Reject bad sweep keys and values now rather than midway through a run.
  for (const auto& s : cfg.sweep)
    for (double v : s.values) apply_sweep_value(cfg, s.key, v);
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = text.find_first_not_of(" \t\r\n") == std::string::npos ? nlohmann::json::object()
                                                                   : nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

/// Copy of `cfg` with one knob set to `value`. Integer knobs must receive integral values.
inline ExperimentConfig apply_sweep_value(ExperimentConfig cfg, const std::string& key, double value) {
  auto as_count = [&](double v) {
    if (!(v >= 0.0) || v != std::floor(v)) throw ConfigError("sweep." + key + ": expects non-negative integers");
    return static_cast<std::size_t>(v);
  };
  if (key == "p0_watts")
    cfg.budget.p0 = value;
  else if (key == "pr_watts")
    cfg.budget.pr = value;
  else if (key == "noise_dbm") {
    cfg.noise_dbm = value;
    cfg.budget.sigma2 = dbm_to_watts(value);
  } else if (key == "x_relay")
    cfg.layout.line.x_relay = value;
  else if (key == "cell_radius")
    cfg.layout.cell.cell_radius = value;
  else if (key == "relay_radius")
    cfg.layout.cell.relay_radius = value;
  else if (key == "num_devices")
    cfg.num_devices = as_count(value);
  else if (key == "num_relays")
    cfg.num_relays = as_count(value);
  else if (key == "shards_C")
    cfg.fl.shards_C = as_count(value);
  else if (key == "tau")
    cfg.fl.tau = static_cast<int>(as_count(value));
  else if (key == "total_blocks")
    cfg.fl.total_blocks = static_cast<int>(as_count(value));
  else if (key == "csi_kappa")
    cfg.csi_kappa = value;
  else
    throw ConfigError("sweep: unknown key '" + key + "'");
  cfg.sweep.clear();
  cfg.validate();
  return cfg;
}

// --- results ----------------------------------------------------------------

struct ResultRow {
  std::string sweep_key = "none";
  double sweep_value = 0.0;
  int trial = 0;
  int round = 0;
  std::optional<int> blocks_used;
  std::optional<double> nmse_db;
  std::optional<double> test_accuracy;
  std::optional<double> mse_predicted;
  std::optional<double> mse_norelay_bound;
  std::optional<bool> cond40;
  std::optional<bool> cond41;

  bool operator==(const ResultRow&) const = default;
};

using ResultTable = std::vector<ResultRow>;

namespace detail {
enum TrialPurpose : std::uint64_t { kLayout = 11, kTask = 12, kPartition = 13, kTraining = 14, kTheorem = 15 };

inline NodeLayout draw_layout(const ExperimentConfig& cfg, RandomStream& rng) {
  return cfg.layout.kind == LayoutKind::line ? line_layout(cfg.num_devices, cfg.num_relays, cfg.layout.line, rng)
                                             : cell_layout(cfg.num_devices, cfg.num_relays, cfg.layout.cell, rng);
}
} // namespace detail

/// One FedAvg run for one trial; rows carry the given sweep label.
inline ResultTable run_trial(const ExperimentConfig& cfg, int trial, const std::string& sweep_key, double sweep_value) {
  const auto t = static_cast<std::uint64_t>(trial);
  auto layout_rng = RandomStream::keyed({cfg.master_seed, t, detail::kLayout});
  auto task_rng = RandomStream::keyed({cfg.master_seed, t, detail::kTask});
  auto partition_rng = RandomStream::keyed({cfg.master_seed, t, detail::kPartition});
  auto train_rng = RandomStream::keyed({cfg.master_seed, t, detail::kTraining});

  const NodeLayout layout = detail::draw_layout(cfg, layout_rng);
  const LearningTask task = make_synthetic_task(cfg.fl.task, task_rng);
  const Partition partition = cfg.fl.partition == PartitionKind::iid
                                  ? partition_iid(task, cfg.num_devices, partition_rng)
                                  : partition_shards(task, cfg.num_devices, cfg.fl.shards_C);

  TrainOptions opts;
  opts.scheme = cfg.scheme;
  opts.budget = cfg.budget;
  opts.solver = cfg.solver;
  opts.schedule = cfg.fl.lr;
  opts.path_loss = cfg.layout.path_loss;
  opts.tau = cfg.fl.tau;
  opts.total_blocks = cfg.fl.total_blocks;
  opts.csi_kappa = cfg.csi_kappa;
  const auto result = train(task, partition, layout, opts, train_rng);

  ResultTable rows;
  for (const auto& m : result.rounds) {
    ResultRow r;
    r.sweep_key = sweep_key;
    r.sweep_value = sweep_value;
    r.trial = trial;
    r.round = m.round;
    r.blocks_used = m.transmission_blocks_used;
    r.nmse_db = m.nmse_db;
    r.test_accuracy = m.test_accuracy;
    r.mse_predicted = m.mse_predicted;
    r.mse_norelay_bound = m.mse_norelay_bound;
    r.cond40 = m.cond40;
    r.cond41 = m.cond41;
    rows.push_back(std::move(r));
  }
  return rows;
}

/// All sweep points x trials, ordered by (sweep, value, trial, round).
inline ResultTable run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ResultTable table;
  auto run_point = [&](const ExperimentConfig& point, const std::string& key, double value) {
    for (int trial = 0; trial < point.trials; ++trial) {
      auto rows = run_trial(point, trial, key, value);
      table.insert(table.end(), rows.begin(), rows.end());
    }
  };
  if (cfg.sweep.empty()) {
    run_point(cfg, "none", 0.0);
    return table;
  }
  for (const auto& s : cfg.sweep)
    for (double v : s.values) run_point(apply_sweep_value(cfg, s.key, v), s.key, v);
  return table;
}

/// Single-relay certification: one channel instance per trial. Row with
/// round 0 holds the analytic construction's error, round 1 the solver's error
/// when warm-started from it; sweep_value carries delta.
inline ResultTable theorem_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.num_relays != 1) throw ConfigError("num_relays: theorem-sweep requires exactly one relay");
  if (!cfg.sweep.empty()) throw ConfigError("sweep: theorem-sweep does not take a sweep");
  const auto weights = DeviceWeights::uniform(cfg.num_devices);
  ResultTable table;
  for (int trial = 0; trial < cfg.trials; ++trial) {
    const auto t = static_cast<std::uint64_t>(trial);
    auto layout_rng = RandomStream::keyed({cfg.master_seed, t, detail::kLayout});
    auto channel_rng = RandomStream::keyed({cfg.master_seed, t, detail::kTheorem});
    const NodeLayout layout = detail::draw_layout(cfg, layout_rng);
    const ChannelRealization ch = realize_channels(layout, cfg.layout.path_loss, channel_rng);

    const auto snr = snr_summary(ch, cfg.budget);
    const auto cond = check_theorem_conditions(snr, cfg.num_devices);
    const auto construction = analytic_construction(ch, cfg.budget);
    const double bound = norelay_reference_mse(ch, cfg.budget);
    const auto solved = solve(ch, weights, cfg.budget, cfg.solver, SchemeVariant::full, construction.config);

    for (int round = 0; round < 2; ++round) {
      ResultRow r;
      r.sweep_key = "delta";
      r.sweep_value = snr.delta;
      r.trial = trial;
      r.round = round;
      r.mse_predicted = round == 0 ? construction.mse : solved.trace.objectives.back();
      r.mse_norelay_bound = bound;
      r.cond40 = cond.cond_40;
      r.cond41 = cond.cond_41;
      table.push_back(std::move(r));
    }
  }
  return table;
}

struct SummaryPoint {
  std::string sweep_key;
  double sweep_value = 0.0;
  int round = 0;
  int count = 0;
  double nmse_db_mean = 0.0;
  double nmse_db_stderr = 0.0;
  double accuracy_mean = 0.0;
  double accuracy_stderr = 0.0;
};

/// Pointwise mean and standard error over trials, per (sweep point, round).
inline std::vector<SummaryPoint> summarize(const ResultTable& table) {
  struct Acc {
    std::vector<double> nmse, acc;
  };
  std::map<std::tuple<std::string, double, int>, Acc> groups;
  std::vector<std::tuple<std::string, double, int>> order;
  for (const auto& r : table) {
    auto key = std::make_tuple(r.sweep_key, r.sweep_value, r.round);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    if (r.nmse_db) it->second.nmse.push_back(*r.nmse_db);
    if (r.test_accuracy) it->second.acc.push_back(*r.test_accuracy);
  }
  auto mean_se = [](const std::vector<double>& v) -> std::pair<double, double> {
    if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    if (v.size() < 2 || !std::isfinite(m)) return {m, 0.0};
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return {m, std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()))};
  };
  std::vector<SummaryPoint> out;
  for (const auto& key : order) {
    const auto& g = groups.at(key);
    SummaryPoint p;
    std::tie(p.sweep_key, p.sweep_value, p.round) = key;
    p.count = static_cast<int>(std::max(g.nmse.size(), g.acc.size()));
    std::tie(p.nmse_db_mean, p.nmse_db_stderr) = mean_se(g.nmse);
    std::tie(p.accuracy_mean, p.accuracy_stderr) = mean_se(g.acc);
    out.push_back(std::move(p));
  }
  return out;
}

// --- CSV --------------------------------------------------------------------

inline constexpr const char* kCsvHeader = "sweep_key,sweep_value,trial,round,blocks_used,nmse_db,test_accuracy,"
                                          "mse_predicted,mse_norelay_bound,cond40,cond41";

/// Shortest representation that parses back to the same double; infinities as "inf"/"-inf".
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw IoError("CSV: bad number '" + s + "'");
  return v;
}

inline void write_csv(const ResultTable& table, std::ostream& out) {
  auto opt = [](const auto& v, auto fmt) { return v ? fmt(*v) : std::string(); };
  auto num = [](double v) { return format_double(v); };
  auto integer = [](int v) { return std::to_string(v); };
  auto flag = [](bool v) { return std::string(v ? "1" : "0"); };
  out << kCsvHeader << '\n';
  for (const auto& r : table) {
    if (r.sweep_key.find_first_of(",\"\n") != std::string::npos) throw IoError("CSV: sweep key needs quoting");
    out << r.sweep_key << ',' << format_double(r.sweep_value) << ',' << r.trial << ',' << r.round << ','
        << opt(r.blocks_used, integer) << ',' << opt(r.nmse_db, num) << ',' << opt(r.test_accuracy, num) << ','
        << opt(r.mse_predicted, num) << ',' << opt(r.mse_norelay_bound, num) << ',' << opt(r.cond40, flag) << ','
        << opt(r.cond41, flag) << '\n';
  }
}

inline void write_csv(const ResultTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_csv(table, out);
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline ResultTable read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw IoError("CSV: missing or unexpected header");
  ResultTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != 11) throw IoError("CSV: expected 11 fields, got " + std::to_string(f.size()));
    auto to_int = [](const std::string& s) {
      int v = 0;
      auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw IoError("CSV: bad integer '" + s + "'");
      return v;
    };
    auto opt_num = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<double>(parse_double(s)); };
    auto opt_flag = [](const std::string& s) -> std::optional<bool> {
      if (s.empty()) return std::nullopt;
      if (s == "1") return true;
      if (s == "0") return false;
      throw IoError("CSV: bad flag '" + s + "'");
    };
    ResultRow r;
    r.sweep_key = f[0];
    r.sweep_value = parse_double(f[1]);
    r.trial = to_int(f[2]);
    r.round = to_int(f[3]);
    if (!f[4].empty()) r.blocks_used = to_int(f[4]);
    r.nmse_db = opt_num(f[5]);
    r.test_accuracy = opt_num(f[6]);
    r.mse_predicted = opt_num(f[7]);
    r.mse_norelay_bound = opt_num(f[8]);
    r.cond40 = opt_flag(f[9]);
    r.cond41 = opt_flag(f[10]);
    table.push_back(std::move(r));
  }
  return table;
}

inline ResultTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_csv(in);
}

} // namespace relayfl
