#include "dcpl/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "dcpl/dataset.hpp"
#include "dcpl/error.hpp"
#include "dcpl/rng.hpp"
#include "dcpl/verify.hpp"

namespace dcpl {

using nlohmann::json;

namespace {

const std::vector<std::pair<RunMode, std::string>>& mode_names() {
  static const std::vector<std::pair<RunMode, std::string>> names = {
      {RunMode::kGenSynth, "gen-synth"},       {RunMode::kTrainSource, "train-source"},
      {RunMode::kAdapt, "adapt"},              {RunMode::kAdaptIdentity, "adapt-identity"},
      {RunMode::kAdaptOracle, "adapt-oracle"}, {RunMode::kVerify, "verify"},
      {RunMode::kEval, "eval"},
  };
  return names;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

void reject_unknown_keys(const json& obj, const std::vector<std::string>& allowed,
                         const std::string& scope) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) != allowed.end()) continue;
    std::string msg = "unknown key '" + key + "'" + (scope.empty() ? "" : " in '" + scope + "'");
    std::string best;
    std::size_t best_d = 3;
    for (const auto& a : allowed) {
      const std::size_t d = edit_distance(key, a);
      if (d < best_d) {
        best_d = d;
        best = a;
      }
    }
    if (!best.empty()) msg += "; did you mean '" + best + "'?";
    throw ConfigError(msg);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& scope = "") {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  const std::string name = scope.empty() ? key : scope + "." + key;
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!it->is_number_integer() && !it->is_number_unsigned())
        throw ConfigError("key '" + name + "' must be an integer");
      if (it->is_number_integer() && it->template get<long long>() < 0)
        throw ConfigError("key '" + name + "' must be non-negative");
      out = it->template get<T>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) throw ConfigError("key '" + name + "' must be a number");
      out = it->template get<double>();
    } else {
      out = it->template get<T>();
    }
  } catch (const json::exception&) {
    throw ConfigError("key '" + name + "' has the wrong type");
  }
}

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::string lr_schedule_name(LrSchedule s) { return s == LrSchedule::kPoly ? "poly" : "constant"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path.string(), text);
}

std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

ModelParams resolve_source_head(const RunConfig& cfg, const Dataset& target) {
  if (!cfg.source_head.empty()) return load_head(cfg.source_head);
  if (target.source_head) return *target.source_head;
  throw ConfigError("mode '" + to_string(cfg.effective_mode()) +
                    "' needs 'source_head' (or a dataset with an embedded head)");
}

void require(const std::string& value, const char* key, RunMode mode) {
  if (value.empty())
    throw ConfigError("mode '" + to_string(mode) + "' requires key '" + key + "'");
}

int run_verify(const RunConfig& cfg, std::ostream& log) {
  const auto grad = run_gradcheck_suite(cfg.hp.seed);
  const auto bound = run_bound_suite(cfg.hp.seed);
  log << std::left << std::setw(44) << "check" << std::setw(16) << "value"
      << "result\n";
  auto row = [&](const std::string& name, const std::string& value, bool ok) {
    log << std::left << std::setw(44) << name << std::setw(16) << value << (ok ? "PASS" : "FAIL")
        << "\n";
  };
  std::ostringstream g;
  g << std::scientific << std::setprecision(2) << grad.max_rel_error;
  row("gradcheck max rel err (" + std::to_string(grad.configurations) + " configs, < 1e-6)",
      g.str(), grad.passed);
  row("trace bound violations (" + std::to_string(bound.trials) + " trials)",
      std::to_string(bound.violations), bound.passed);

  SplitMix64 rng(cfg.hp.seed ^ 0x5eedULL);
  double worst_col = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = 2 + rng.below(9);
    TransitionParams tp{Mat(k, k)};
    for (double& v : tp.logits.values()) v = 10.0 * rng.normal();
    const Mat m = materialize(tp);
    for (std::size_t j = 0; j < k; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < k; ++i) s += m(i, j);
      worst_col = std::max(worst_col, std::abs(s - 1.0));
    }
  }
  std::ostringstream c;
  c << std::scientific << std::setprecision(2) << worst_col;
  const bool cols_ok = worst_col <= 1e-12;
  row("transition column-sum deviation (< 1e-12)", c.str(), cols_ok);
  const bool ok = grad.passed && bound.passed && cols_ok;
  log << (ok ? "verify: all checks passed\n" : "verify: FAILED\n");
  return ok ? 0 : static_cast<int>(ErrorCategory::kNumeric);
}

}  // namespace

std::string to_string(RunMode mode) {
  for (const auto& [m, name] : mode_names())
    if (m == mode) return name;
  return "unknown";
}

RunMode parse_mode(const std::string& name) {
  for (const auto& [m, n] : mode_names())
    if (n == name) return m;
  std::string all;
  for (const auto& [m, n] : mode_names()) all += (all.empty() ? "" : ", ") + n;
  throw ConfigError("unknown mode '" + name + "' (expected one of: " + all + ")");
}

RunMode RunConfig::effective_mode() const {
  if (!mode) throw ConfigError("no mode given");
  if (*mode == RunMode::kAdapt && frozen_oracle) return RunMode::kAdaptOracle;
  return *mode;
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": JSON parse error at " + line_col(text, e.byte ? e.byte - 1 : 0) +
                      ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError(origin + ": top-level JSON value must be an object");

  static const std::vector<std::string> kTop = {
      "mode",         "dataset",     "source_dataset", "source_head",    "head",
      "output_dir",   "num_classes", "seed",           "lambda",         "gamma",
      "tau",          "lr",          "momentum",       "weight_decay",   "epochs",
      "batch_size",   "im_weight",   "sfda",           "beta",           "lr_schedule",
      "prior_transpose", "frozen_oracle", "synth",     "source_training"};
  static const std::vector<std::string> kSynth = {
      "k",  "d_f", "d_p", "n_source", "n_target", "class_separation", "shift_translation",
      "shift_rotation", "pretrained_noise", "label_noise_target", "seed"};
  static const std::vector<std::string> kSource = {"lr", "momentum", "weight_decay", "epochs",
                                                   "batch_size"};
  reject_unknown_keys(j, kTop, "");

  RunConfig cfg;
  if (j.contains("mode")) {
    std::string m;
    read(j, "mode", m);
    cfg.mode = parse_mode(m);
  }
  read(j, "dataset", cfg.dataset);
  read(j, "source_dataset", cfg.source_dataset);
  read(j, "source_head", cfg.source_head);
  read(j, "head", cfg.head);
  read(j, "output_dir", cfg.output_dir);
  if (j.contains("num_classes")) {
    std::size_t k = 0;
    read(j, "num_classes", k);
    cfg.num_classes = k;
  }

  HyperParams& hp = cfg.hp;
  read(j, "seed", hp.seed);
  read(j, "lambda", hp.lambda);
  read(j, "gamma", hp.gamma);
  read(j, "tau", hp.tau);
  read(j, "lr", hp.learning_rate);
  read(j, "momentum", hp.momentum);
  read(j, "weight_decay", hp.weight_decay);
  read(j, "epochs", hp.epochs);
  read(j, "batch_size", hp.batch_size);
  read(j, "beta", hp.beta);
  read(j, "prior_transpose", hp.prior_transpose);
  read(j, "frozen_oracle", cfg.frozen_oracle);

  std::string sfda = "none";
  read(j, "sfda", sfda);
  if (sfda == "shot") {
    hp.im_weight = 1.0;
  } else if (sfda != "none") {
    throw ConfigError("key 'sfda' must be \"none\" or \"shot\", got \"" + sfda + "\"");
  }
  read(j, "im_weight", hp.im_weight);

  std::string schedule = "constant";
  read(j, "lr_schedule", schedule);
  if (schedule == "poly") {
    hp.lr_schedule = LrSchedule::kPoly;
  } else if (schedule != "constant") {
    throw ConfigError("key 'lr_schedule' must be \"constant\" or \"poly\"");
  }

  // The generator follows the run seed unless synth.seed is given.
  cfg.synth.seed = hp.seed;
  if (j.contains("synth")) {
    const json& s = j.at("synth");
    if (!s.is_object()) throw ConfigError("key 'synth' must be an object");
    reject_unknown_keys(s, kSynth, "synth");
    SynthConfig& sc = cfg.synth;
    read(s, "k", sc.k, "synth");
    read(s, "d_f", sc.d_f, "synth");
    read(s, "d_p", sc.d_p, "synth");
    read(s, "n_source", sc.n_source, "synth");
    read(s, "n_target", sc.n_target, "synth");
    read(s, "class_separation", sc.class_separation, "synth");
    read(s, "shift_translation", sc.shift_translation, "synth");
    read(s, "shift_rotation", sc.shift_rotation, "synth");
    read(s, "pretrained_noise", sc.pretrained_noise, "synth");
    read(s, "seed", sc.seed, "synth");
    std::string noise = "none";
    read(s, "label_noise_target", noise, "synth");
    if (noise != "none")
      throw ConfigError("key 'synth.label_noise_target' only supports \"none\" (noise comes from the shift)");
  }
  if (j.contains("source_training")) {
    const json& s = j.at("source_training");
    if (!s.is_object()) throw ConfigError("key 'source_training' must be an object");
    reject_unknown_keys(s, kSource, "source_training");
    auto& st = cfg.source_training;
    read(s, "lr", st.learning_rate, "source_training");
    read(s, "momentum", st.momentum, "source_training");
    read(s, "weight_decay", st.weight_decay, "source_training");
    read(s, "epochs", st.epochs, "source_training");
    read(s, "batch_size", st.batch_size, "source_training");
  }

  try {
    hp.validate();
    cfg.synth.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::string config_echo(const RunConfig& cfg) {
  const HyperParams& hp = cfg.hp;
  json j;
  j["mode"] = to_string(cfg.effective_mode());
  j["dataset"] = cfg.dataset;
  j["source_dataset"] = cfg.source_dataset;
  j["source_head"] = cfg.source_head;
  j["seed"] = hp.seed;
  j["lambda"] = hp.lambda;
  j["gamma"] = hp.gamma;
  j["tau"] = hp.tau;
  j["lr"] = hp.learning_rate;
  j["momentum"] = hp.momentum;
  j["weight_decay"] = hp.weight_decay;
  j["epochs"] = hp.epochs;
  j["batch_size"] = hp.batch_size;
  j["im_weight"] = hp.im_weight;
  j["beta"] = hp.beta;
  j["lr_schedule"] = lr_schedule_name(hp.lr_schedule);
  j["prior_transpose"] = hp.prior_transpose;
  j["frozen_oracle"] = cfg.frozen_oracle;
  return j.dump();
}

MetricsRecord make_metrics(const RunConfig& cfg, const AdaptationReport& report) {
  MetricsRecord m;
  m.mode = to_string(cfg.effective_mode());
  m.config_json = config_echo(cfg);
  m.run_id = hex64(fnv1a(m.config_json.data(), m.config_json.size()));
  for (std::size_t e = 0; e < report.epoch_losses.size(); ++e) {
    EpochRecord r;
    r.epoch = e + 1;
    r.loss = report.epoch_losses[e];
    if (e < report.epoch_accuracy.size()) r.accuracy = report.epoch_accuracy[e];
    m.epochs.push_back(r);
  }
  m.final_accuracy = report.final_accuracy();
  m.pseudo_label_accuracy = report.pseudo_label_accuracy;
  m.source_accuracy = report.source_accuracy;
  if (report.t_oracle) {
    m.recovery_error_vs_oracle = transition_recovery_error(report.t_hat, *report.t_oracle);
    m.identity_error_vs_oracle =
        transition_recovery_error(Mat::identity(report.t_hat.rows()), *report.t_oracle);
  }
  m.warnings = report.warnings;
  return m;
}

std::string serialize_metrics(const MetricsRecord& m) {
  json j;
  j["run_id"] = m.run_id;
  j["mode"] = m.mode;
  j["config"] = json::parse(m.config_json);
  json epochs = json::array();
  for (const auto& e : m.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"ce_noisy", e.loss.ce_noisy},
                      {"trace_term", e.loss.trace_term},
                      {"prior_term", e.loss.prior_term},
                      {"sfda_term", e.loss.sfda_term},
                      {"total", e.loss.total},
                      {"accuracy", optional_number(e.accuracy)}});
  }
  j["epochs"] = epochs;
  j["final_accuracy"] = optional_number(m.final_accuracy);
  j["pseudo_label_accuracy"] = optional_number(m.pseudo_label_accuracy);
  j["source_accuracy"] = optional_number(m.source_accuracy);
  j["recovery_error_vs_oracle"] = optional_number(m.recovery_error_vs_oracle);
  j["identity_error_vs_oracle"] = optional_number(m.identity_error_vs_oracle);
  j["warnings"] = m.warnings;
  return j.dump(2) + "\n";
}

MetricsRecord parse_metrics(const std::string& text) {
  MetricsRecord m;
  try {
    const json j = json::parse(text);
    m.run_id = j.at("run_id").get<std::string>();
    m.mode = j.at("mode").get<std::string>();
    m.config_json = j.at("config").dump();
    for (const auto& e : j.at("epochs")) {
      EpochRecord r;
      r.epoch = e.at("epoch").get<std::size_t>();
      r.loss.ce_noisy = e.at("ce_noisy").get<double>();
      r.loss.trace_term = e.at("trace_term").get<double>();
      r.loss.prior_term = e.at("prior_term").get<double>();
      r.loss.sfda_term = e.at("sfda_term").get<double>();
      r.loss.total = e.at("total").get<double>();
      r.accuracy = read_optional(e, "accuracy");
      m.epochs.push_back(r);
    }
    m.final_accuracy = read_optional(j, "final_accuracy");
    m.pseudo_label_accuracy = read_optional(j, "pseudo_label_accuracy");
    m.source_accuracy = read_optional(j, "source_accuracy");
    m.recovery_error_vs_oracle = read_optional(j, "recovery_error_vs_oracle");
    m.identity_error_vs_oracle = read_optional(j, "identity_error_vs_oracle");
    m.warnings = j.at("warnings").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("metrics record: ") + e.what());
  }
  return m;
}

int execute(const RunConfig& cfg, std::ostream& log) {
  namespace fs = std::filesystem;
  try {
    const RunMode mode = cfg.effective_mode();
    const fs::path out(cfg.output_dir);
    if (mode != RunMode::kVerify) {
      std::error_code ec;
      fs::create_directories(out, ec);
      if (ec) throw FormatError(cfg.output_dir + ": cannot create output directory");
    }

    switch (mode) {
      case RunMode::kVerify:
        return run_verify(cfg, log);

      case RunMode::kGenSynth: {
        SynthConfig sc = cfg.synth;
        const SynthPair pair = generate_pair(sc);
        const std::string src =
            cfg.source_dataset.empty() ? (out / "source.dcpl").string() : cfg.source_dataset;
        const std::string tgt = cfg.dataset.empty() ? (out / "target.dcpl").string() : cfg.dataset;
        save_dataset(pair.source, src);
        save_dataset(pair.target, tgt);
        log << "wrote " << src << " (" << pair.source.n() << " samples) and " << tgt << " ("
            << pair.target.n() << " samples)\n";
        return 0;
      }

      case RunMode::kTrainSource: {
        require(cfg.source_dataset, "source_dataset", mode);
        const Dataset src = load_dataset(cfg.source_dataset, {cfg.num_classes});
        HyperParams hp = cfg.hp;
        hp.learning_rate = cfg.source_training.learning_rate;
        hp.momentum = cfg.source_training.momentum;
        hp.weight_decay = cfg.source_training.weight_decay;
        hp.epochs = cfg.source_training.epochs;
        hp.batch_size = cfg.source_training.batch_size;
        const ModelParams head = train_source_head(src, hp);
        const std::string path =
            cfg.source_head.empty() ? (out / "source_head.dcph").string() : cfg.source_head;
        save_head(head, path);
        log << "source accuracy " << accuracy(head, src.features_f, *src.true_labels) << "; wrote "
            << path << "\n";
        return 0;
      }

      case RunMode::kEval: {
        require(cfg.dataset, "dataset", mode);
        const Dataset ds = load_dataset(cfg.dataset, {cfg.num_classes});
        const std::string head_path = cfg.head.empty() ? cfg.source_head : cfg.head;
        require(head_path, "head", mode);
        const ModelParams head = load_head(head_path);
        json j;
        j["dataset"] = cfg.dataset;
        j["head"] = head_path;
        j["n"] = ds.n();
        if (ds.true_labels) {
          j["accuracy"] = accuracy(head, ds.features_f, *ds.true_labels);
        } else {
          j["accuracy"] = nullptr;
        }
        const auto pred = predict_labels(head, ds.features_f);
        j["predictions"] = pred;
        write_text(out / "eval.json", j.dump(2) + "\n");
        log << "eval accuracy " << j["accuracy"].dump() << "\n";
        return 0;
      }

      case RunMode::kAdapt:
      case RunMode::kAdaptIdentity:
      case RunMode::kAdaptOracle: {
        require(cfg.dataset, "dataset", mode);
        const Dataset ds = load_dataset(cfg.dataset, {cfg.num_classes});
        const ModelParams head = resolve_source_head(cfg, ds);
        const TransitionMode tm = mode == RunMode::kAdapt           ? TransitionMode::kLearned
                                  : mode == RunMode::kAdaptIdentity ? TransitionMode::kFrozenIdentity
                                                                    : TransitionMode::kFrozenOracle;
        const AdaptationReport report = run_dcpl(ds, head, cfg.hp, tm);
        const MetricsRecord metrics = make_metrics(cfg, report);
        write_text(out / "metrics.json", serialize_metrics(metrics));
        write_text(out / "transition.csv", matrix_to_csv(report.t_hat));
        write_text(out / "prior.csv", matrix_to_csv(report.prior.matrix));
        if (report.t_oracle) write_text(out / "oracle_transition.csv", matrix_to_csv(*report.t_oracle));
        save_head(report.head, (out / "adapted_head.dcph").string());
        for (const auto& w : report.warnings) log << "warning: " << w << "\n";
        log << to_string(mode) << ": " << report.epoch_losses.size() << " epochs in " << std::fixed
            << std::setprecision(2) << report.seconds << " s";
        if (metrics.pseudo_label_accuracy)
          log << ", pseudo-label acc " << std::setprecision(4) << *metrics.pseudo_label_accuracy;
        if (metrics.final_accuracy)
          log << ", final acc " << std::setprecision(4) << *metrics.final_accuracy;
        log << "\n";
        return 0;
      }
    }
    return static_cast<int>(ErrorCategory::kInternal);
  } catch (const Error& e) {
    log << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    log << "internal error: " << e.what() << "\n";
    return static_cast<int>(ErrorCategory::kInternal);
  }
}

}  // namespace dcpl
