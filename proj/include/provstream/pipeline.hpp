#pragma once

// End-to-end commands shared by the CLI and the acceptance suite: scenario
// generation, featurizer fitting, model training, streaming detection with
// checkpoint/resume, and report evaluation. Training and index construction
// only ever see the first `train_budget` emitted events of a log.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "provstream/detector.hpp"
#include "provstream/evalharness.hpp"
#include "provstream/ingest.hpp"
#include "provstream/seqmodel.hpp"
#include "provstream/synthgen.hpp"
#include "provstream/types.hpp"

namespace provstream::pipeline {

struct RunConfig {
  // inputs / artifacts
  std::string log_path;
  std::string labels_path;
  std::string streamspot_map_path;
  std::string features_path = "features.pvsf";
  std::string params_path = "params.pvsp";
  std::string alerts_path = "alerts.jsonl";
  std::string checkpoint_path;
  std::string resume_path;
  std::string run_stats_path;
  std::string out_dir = ".";
  ingest::FormatId format = ingest::FormatId::NativeJsonl;
  Timestamp reorder_window = 0;
  bool skip_bad_records = false;

  // featurizer
  bool hash_features = false;  // corpus-free hashing instead of trained tokens
  int feature_dim = 64;

  // model
  int hidden_dim = 64;
  int layers = 10;
  seqmodel::CellKind cell = seqmodel::CellKind::Gru;
  double learning_rate = 0.05;
  int epochs = 5;
  int negatives = 5;
  double margin = 0.5;
  double clip_norm = 5.0;
  bool use_root = true;
  size_t k_roots = 32;

  uint64_t train_budget = 1000000;
  uint64_t seed = 1;

  // detector / streaming
  double alpha = 0.5;
  double calibrate_fpr = -1.0;  // >= 0 picks alpha from a held-out benign window
  uint64_t val_budget = 0;
  bool partition_index = true;
  int index_snapshots = 1;  // evenly spaced snapshots of the training replay
  uint64_t stop_after = 0;  // stop after this many test events (0 = all)
  uint64_t memory_sample_period = 10000;
  bool score_events = true;

  // eval
  double lag_period_s = 24.0 * 3600.0;
  double lag_run_s = 18.0 * 3600.0;
  double lag_event_cost_s = 0.002;
  Timestamp drift_window_ns = 3600ll * 1000000000ll;

  seqmodel::ModelConfig model_config() const;
};

struct GenSummary {
  uint64_t events = 0;
  uint64_t entities = 0;
  uint64_t attack_entities = 0;
};
GenSummary cmd_gen(const RunConfig& cfg, const synthgen::ScenarioConfig& scenario);

struct FitSummary {
  uint64_t corpus_paths = 0;
  uint64_t vocab = 0;
  uint64_t artifact_hash = 0;
};
FitSummary cmd_fit_features(const RunConfig& cfg);

struct TrainSummary {
  seqmodel::TrainReport report;
  uint64_t artifact_hash = 0;
};
TrainSummary cmd_train(const RunConfig& cfg);

struct StreamSummary {
  uint64_t train_events = 0;
  uint64_t test_events = 0;
  uint64_t alert_count = 0;
  double alpha_used = 0.0;
  uint64_t state_digest = 0;
  uint64_t index_size = 0;
  double stream_seconds = 0.0;  // process+score time, excluding parse
  std::vector<evalharness::MemoryRow> memory_rows;
};
StreamSummary cmd_stream(const RunConfig& cfg);

struct EvalSummary {
  double auc = 0.0;
  uint64_t entities = 0;
  uint64_t attack_entities = 0;
  double offline_min_lag_s = 0.0, offline_max_lag_s = 0.0;
};
EvalSummary cmd_eval(const RunConfig& cfg);

// Reads the log and returns the first `budget` emitted events (the training
// fence); the rest of the file is never touched.
std::vector<Event> read_training_window(const RunConfig& cfg);

void write_manifest(const std::string& artifact_path, const std::string& command,
                    const RunConfig& cfg, const std::vector<std::pair<std::string, uint64_t>>& inputs);

}  // namespace provstream::pipeline
