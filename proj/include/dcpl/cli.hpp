#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dcpl/losses.hpp"
#include "dcpl/synthbench.hpp"
#include "dcpl/trainer.hpp"

namespace dcpl {

enum class RunMode { kGenSynth, kTrainSource, kAdapt, kAdaptIdentity, kAdaptOracle, kVerify, kEval };

std::string to_string(RunMode mode);
// Throws ConfigError for an unknown name.
RunMode parse_mode(const std::string& name);

struct SourceTraining {
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-3;
  std::size_t epochs = 20;
  std::size_t batch_size = 64;

  bool operator==(const SourceTraining&) const = default;
};

struct RunConfig {
  std::optional<RunMode> mode;
  std::string dataset;         // target dataset (adapt*, eval)
  std::string source_dataset;  // gen-synth output / train-source input
  std::string source_head;     // train-source output / adapt* input
  std::string head;            // eval input
  std::string output_dir = "out";
  std::optional<std::size_t> num_classes;  // CSV datasets without labels
  HyperParams hp;
  SynthConfig synth;
  SourceTraining source_training;
  bool frozen_oracle = false;

  // Mode actually run: frozen_oracle promotes adapt to adapt-oracle.
  RunMode effective_mode() const;
};

// Parses a JSON config. Unknown keys are rejected (with a close-match
// suggestion), omitted keys take their defaults, and out-of-range values
// are reported by name. Errors are ConfigError with line/column for syntax
// problems.
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
RunConfig parse_config(const std::string& path);

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown loss;
  std::optional<double> accuracy;

  bool operator==(const EpochRecord&) const = default;
};

struct MetricsRecord {
  std::string run_id;
  std::string mode;
  std::string config_json;  // canonical echo of the effective configuration
  std::vector<EpochRecord> epochs;
  std::optional<double> final_accuracy;
  std::optional<double> pseudo_label_accuracy;
  std::optional<double> source_accuracy;
  std::optional<double> recovery_error_vs_oracle;
  std::optional<double> identity_error_vs_oracle;
  std::vector<std::string> warnings;

  bool operator==(const MetricsRecord&) const = default;
};

std::string config_echo(const RunConfig& cfg);
MetricsRecord make_metrics(const RunConfig& cfg, const AdaptationReport& report);
std::string serialize_metrics(const MetricsRecord& m);
MetricsRecord parse_metrics(const std::string& text);

// Runs the configured pipeline, writing artifacts under cfg.output_dir.
// Returns the process exit code: 0 ok, 1 config, 2 data, 3 numeric,
// 4 internal. Diagnostics go to log.
int execute(const RunConfig& cfg, std::ostream& log);

}  // namespace dcpl
