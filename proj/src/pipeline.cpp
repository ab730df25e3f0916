#include "provstream/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "provstream/serialize.hpp"
#include "provstream/streamer.hpp"

namespace provstream::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

seqmodel::ModelConfig RunConfig::model_config() const {
  seqmodel::ModelConfig mc;
  mc.input_dim = feature_dim;
  mc.hidden_dim = hidden_dim;
  mc.layers = layers;
  mc.cell = cell;
  mc.learning_rate = learning_rate;
  mc.epochs = epochs;
  mc.negative_samples = negatives;
  mc.margin = margin;
  mc.clip_norm = clip_norm;
  mc.seed = seed;
  mc.use_root = use_root;
  mc.validate();
  return mc;
}

namespace {

std::optional<ingest::StreamSpotMap> load_map(const RunConfig& cfg) {
  if (cfg.streamspot_map_path.empty()) return std::nullopt;
  return ingest::StreamSpotMap::load(cfg.streamspot_map_path);
}

json config_json(const RunConfig& cfg) {
  json j;
  j["feature_dim"] = cfg.feature_dim;
  j["hidden_dim"] = cfg.hidden_dim;
  j["layers"] = cfg.layers;
  j["cell"] = seqmodel::to_string(cfg.cell);
  j["learning_rate"] = cfg.learning_rate;
  j["epochs"] = cfg.epochs;
  j["negatives"] = cfg.negatives;
  j["margin"] = cfg.margin;
  j["clip_norm"] = cfg.clip_norm;
  j["use_root"] = cfg.use_root;
  j["k_roots"] = cfg.k_roots;
  j["train_budget"] = cfg.train_budget;
  j["hash_features"] = cfg.hash_features;
  j["format"] = ingest::to_string(cfg.format);
  j["seed"] = cfg.seed;
  return j;
}

std::string hex64(uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void write_manifest(const std::string& artifact_path, const std::string& command,
                    const RunConfig& cfg,
                    const std::vector<std::pair<std::string, uint64_t>>& inputs) {
  json j;
  j["command"] = command;
  j["seed"] = cfg.seed;
  j["config"] = config_json(cfg);
  json in = json::object();
  for (auto& [name, hash] : inputs) in[name] = hex64(hash);
  j["inputs"] = in;
  j["artifact"] = hex64(ser::hash_file(artifact_path));
  std::ofstream out(artifact_path + ".manifest.json");
  if (!out) throw DataError("cannot write manifest for " + artifact_path);
  out << j.dump(2) << '\n';
}

std::vector<Event> read_training_window(const RunConfig& cfg) {
  if (cfg.train_budget == 0) throw UsageError("train budget must be > 0");
  std::ifstream in(cfg.log_path);
  if (!in) throw DataError("cannot open log file: " + cfg.log_path);
  auto ss_map = load_map(cfg);
  ingest::EventReader reader(in, cfg.format, cfg.reorder_window,
                             ss_map ? &*ss_map : nullptr, cfg.skip_bad_records);
  std::vector<Event> events;
  events.reserve(std::min<uint64_t>(cfg.train_budget, 1 << 20));
  while (events.size() < cfg.train_budget) {
    auto e = reader.next();
    if (!e) break;
    events.push_back(std::move(*e));
  }
  if (events.empty()) throw DataError("log contains no training events");
  return events;
}

GenSummary cmd_gen(const RunConfig& cfg, const synthgen::ScenarioConfig& scenario) {
  synthgen::Scenario sc = synthgen::generate(scenario);
  std::ofstream log(cfg.log_path);
  if (!log) throw DataError("cannot write log file: " + cfg.log_path);
  synthgen::write_jsonl(log, sc.events);
  if (!log) throw DataError("short write on log file: " + cfg.log_path);
  if (!cfg.labels_path.empty()) {
    std::ofstream lab(cfg.labels_path);
    if (!lab) throw DataError("cannot write label file: " + cfg.labels_path);
    ingest::write_labels(lab, sc.labels);
  }
  GenSummary s;
  s.events = sc.events.size();
  s.entities = sc.labels.size();
  for (auto& [id, attack] : sc.labels)
    if (attack) ++s.attack_entities;
  return s;
}

FitSummary cmd_fit_features(const RunConfig& cfg) {
  std::vector<Event> window = read_training_window(cfg);
  std::vector<std::string> corpus;
  {
    std::unordered_map<std::string, bool> seen;
    for (const Event& e : window) {
      if (seen.emplace(e.src.path, true).second) corpus.push_back(e.src.path);
      if (seen.emplace(e.dst.path, true).second) corpus.push_back(e.dst.path);
    }
  }
  featurizer::FeatureModel fm =
      cfg.hash_features ? featurizer::FeatureModel::hashing(cfg.feature_dim, cfg.seed)
                        : featurizer::FeatureModel::fit(corpus, cfg.feature_dim, cfg.seed);
  fm.save(cfg.features_path);
  write_manifest(cfg.features_path, "fit-features", cfg,
                 {{"log", ser::hash_file(cfg.log_path)}});
  FitSummary s;
  s.corpus_paths = corpus.size();
  s.vocab = fm.vocab_size();
  s.artifact_hash = ser::hash_file(cfg.features_path);
  return s;
}

TrainSummary cmd_train(const RunConfig& cfg) {
  if (cfg.train_budget == 0) throw UsageError("train budget must be > 0");
  featurizer::FeatureModel fm = featurizer::FeatureModel::load(cfg.features_path);
  if (fm.dim() != cfg.feature_dim)
    throw DataError("feature model dimension does not match --feature-dim");
  std::vector<Event> window = read_training_window(cfg);
  seqmodel::CellParams params = seqmodel::CellParams::init(cfg.model_config());
  TrainSummary s;
  s.report = seqmodel::train_params(window, fm, params);
  params.save(cfg.params_path);
  write_manifest(cfg.params_path, "train", cfg,
                 {{"log", ser::hash_file(cfg.log_path)},
                  {"features", ser::hash_file(cfg.features_path)}});
  s.artifact_hash = ser::hash_file(cfg.params_path);
  return s;
}

namespace {

struct StreamMeta {
  double alpha = 0.0;
  uint64_t fence = 0;
  uint64_t test_events_done = 0;
};

void save_stream_meta(const std::string& checkpoint_path, const StreamMeta& m) {
  json j;
  j["alpha"] = m.alpha;
  j["fence"] = m.fence;
  j["test_events_done"] = m.test_events_done;
  std::ofstream out(checkpoint_path + ".meta.json");
  if (!out) throw DataError("cannot write checkpoint metadata");
  out << j.dump(2) << '\n';
}

StreamMeta load_stream_meta(const std::string& checkpoint_path) {
  std::ifstream in(checkpoint_path + ".meta.json");
  if (!in) throw DataError("missing checkpoint metadata: " + checkpoint_path + ".meta.json");
  json j;
  in >> j;
  StreamMeta m;
  m.alpha = j.at("alpha").get<double>();
  m.fence = j.at("fence").get<uint64_t>();
  m.test_events_done = j.at("test_events_done").get<uint64_t>();
  return m;
}

}  // namespace

StreamSummary cmd_stream(const RunConfig& cfg) {
  featurizer::FeatureModel fm = featurizer::FeatureModel::load(cfg.features_path);
  seqmodel::CellParams params = seqmodel::CellParams::load(cfg.params_path);
  if (fm.dim() != params.cfg.input_dim)
    throw DataError("feature model and parameters disagree on dimension");

  auto ss_map = load_map(cfg);
  const ingest::StreamSpotMap* map_ptr = ss_map ? &*ss_map : nullptr;

  StreamSummary summary;
  summary.alpha_used = cfg.alpha;

  // Replay the training window to take benign snapshots. The replica is also
  // the warm dictionary for a fresh (non-resume) run.
  streamer::StreamState state(fm, params, cfg.k_roots);
  std::vector<streamer::SnapshotRow> index_rows;
  uint64_t fence = 0;
  {
    std::ifstream in(cfg.log_path);
    if (!in) throw DataError("cannot open log file: " + cfg.log_path);
    ingest::EventReader replay(in, cfg.format, cfg.reorder_window, map_ptr, cfg.skip_bad_records);
    std::vector<Event> window;
    window.reserve(1024);
    while (window.size() < cfg.train_budget) {
      auto e = replay.next();
      if (!e) break;
      window.push_back(std::move(*e));
    }
    if (window.empty()) throw DataError("log contains no training events");
    fence = window.size();
    const int snaps = std::max(1, cfg.index_snapshots);
    uint64_t done = 0;
    int snap_i = 1;
    for (const Event& e : window) {
      state.process_event(e);
      ++done;
      while (snap_i <= snaps && done == std::max<uint64_t>(1, fence * snap_i / snaps)) {
        auto rows = state.snapshot_embeddings();
        index_rows.insert(index_rows.end(), rows.begin(), rows.end());
        ++snap_i;
      }
    }
    if (index_rows.empty()) {
      auto rows = state.snapshot_embeddings();
      index_rows.insert(index_rows.end(), rows.begin(), rows.end());
    }
  }
  summary.train_events = fence;
  detector::BenignIndex index =
      detector::BenignIndex::build(index_rows, cfg.partition_index, cfg.seed);
  summary.index_size = index.size();

  // Open the main reader; either skip the fence (fresh run) or restore the
  // checkpointed position (resume).
  std::ifstream in(cfg.log_path);
  if (!in) throw DataError("cannot open log file: " + cfg.log_path);
  ingest::EventReader reader(in, cfg.format, cfg.reorder_window, map_ptr, cfg.skip_bad_records);

  double alpha = cfg.alpha;
  uint64_t test_done = 0;
  bool calibrated = cfg.calibrate_fpr < 0.0;

  if (!cfg.resume_path.empty()) {
    streamer::StreamState restored(fm, params, cfg.k_roots);
    ingest::EventReader::Position pos = restored.load_checkpoint(cfg.resume_path);
    StreamMeta meta = load_stream_meta(cfg.resume_path);
    if (meta.fence != fence)
      throw DataError("checkpoint train fence does not match this configuration");
    state = std::move(restored);
    reader.restore(pos);
    alpha = meta.alpha;
    test_done = meta.test_events_done;
    calibrated = true;
  } else {
    // The replay consumed exactly the records that produced `fence` events; a
    // second pass re-reads them to position the reader identically.
    uint64_t emitted = 0;
    while (emitted < fence) {
      auto e = reader.next();
      if (!e) throw InternalError("training window shrank between passes");
      ++emitted;
    }
  }

  std::ofstream alerts(cfg.alerts_path);
  if (!alerts) throw DataError("cannot write alert stream: " + cfg.alerts_path);

  std::vector<detector::ScoredAlert> held;  // calibration window
  std::vector<double> val_scores;
  auto flush_held = [&]() {
    for (auto& a : held) {
      a.alert = detector::classify(a.score, alpha);
      if (a.alert) ++summary.alert_count;
      alerts << detector::alert_to_json(a) << '\n';
    }
    held.clear();
  };

  auto sample_memory = [&]() {
    evalharness::MemoryRow row;
    row.events = state.event_count();
    row.entities = state.entity_count();
    row.state_bytes = state.state_bytes();
    row.rss_bytes = evalharness::current_rss_bytes();
    summary.memory_rows.push_back(row);
  };

  sample_memory();
  using clock = std::chrono::steady_clock;
  std::chrono::nanoseconds spent{0};
  uint64_t processed_this_run = 0;
  for (;;) {
    if (cfg.stop_after && processed_this_run >= cfg.stop_after) break;
    auto e = reader.next();
    if (!e) break;
    auto t0 = clock::now();
    streamer::UpdateResult r = state.process_event(*e);
    detector::ScoredAlert a;
    a.entity_id = state.entity_id(r.dst_idx);
    a.version = r.dst_version;
    a.t = r.t;
    a.score = cfg.score_events ? index.score(*r.dst_embedding) : 0.0;
    spent += clock::now() - t0;
    ++test_done;
    ++processed_this_run;

    if (!calibrated) {
      val_scores.push_back(a.score);
      held.push_back(std::move(a));
      if (val_scores.size() >= std::max<uint64_t>(1, cfg.val_budget)) {
        std::sort(val_scores.begin(), val_scores.end());
        alpha = evalharness::quantile_sorted(val_scores, 1.0 - cfg.calibrate_fpr);
        calibrated = true;
        flush_held();
      }
    } else {
      a.alert = detector::classify(a.score, alpha);
      if (a.alert) ++summary.alert_count;
      alerts << detector::alert_to_json(a) << '\n';
    }
    if (cfg.memory_sample_period && test_done % cfg.memory_sample_period == 0) sample_memory();
  }
  if (!calibrated) {
    if (val_scores.empty()) throw DataError("no test events available to calibrate the threshold");
    std::sort(val_scores.begin(), val_scores.end());
    alpha = evalharness::quantile_sorted(val_scores, 1.0 - cfg.calibrate_fpr);
  }
  flush_held();
  alerts.flush();
  if (!alerts) throw DataError("short write on alert stream");

  sample_memory();
  summary.test_events = test_done;
  summary.alpha_used = alpha;
  summary.state_digest = state.digest();
  summary.stream_seconds = std::chrono::duration<double>(spent).count();

  if (!cfg.checkpoint_path.empty()) {
    state.save_checkpoint(cfg.checkpoint_path, reader.position());
    StreamMeta meta;
    meta.alpha = alpha;
    meta.fence = fence;
    meta.test_events_done = test_done;
    save_stream_meta(cfg.checkpoint_path, meta);
  }
  if (!cfg.run_stats_path.empty()) {
    std::ofstream ms(cfg.run_stats_path);
    if (!ms) throw DataError("cannot write run stats: " + cfg.run_stats_path);
    evalharness::write_memory_csv(ms, summary.memory_rows);
  }
  return summary;
}

EvalSummary cmd_eval(const RunConfig& cfg) {
  std::vector<detector::ScoredAlert> alerts = detector::read_alerts(cfg.alerts_path);
  auto labels = ingest::read_labels(cfg.labels_path);
  auto scored = evalharness::entity_scores(alerts, labels);
  evalharness::RocCurve roc = evalharness::roc_auc(scored);

  fs::create_directories(cfg.out_dir);
  {
    std::ofstream out(cfg.out_dir + "/roc.csv");
    if (!out) throw DataError("cannot write roc.csv");
    evalharness::write_roc_csv(out, roc);
  }
  std::vector<Timestamp> times;
  times.reserve(alerts.size());
  for (const auto& a : alerts) times.push_back(a.t);
  evalharness::LagProfile off = evalharness::offline_lag(times, cfg.lag_period_s, cfg.lag_run_s);
  evalharness::LagProfile str = evalharness::streaming_lag(times, cfg.lag_event_cost_s);
  {
    std::ofstream out(cfg.out_dir + "/lag.csv");
    if (!out) throw DataError("cannot write lag.csv");
    evalharness::write_lag_csv(out, off, str);
  }
  if (!cfg.run_stats_path.empty() && fs::exists(cfg.run_stats_path)) {
    auto rows = evalharness::read_memory_csv(cfg.run_stats_path);
    std::ofstream out(cfg.out_dir + "/memory.csv");
    if (!out) throw DataError("cannot write memory.csv");
    evalharness::write_memory_csv(out, rows);
  }
  {
    auto rows = evalharness::drift_quartiles(alerts, labels, cfg.drift_window_ns);
    std::ofstream out(cfg.out_dir + "/drift.csv");
    if (!out) throw DataError("cannot write drift.csv");
    evalharness::write_drift_csv(out, rows);
  }

  EvalSummary s;
  s.auc = roc.auc;
  s.entities = scored.size();
  for (auto& [score, attack] : scored)
    if (attack) ++s.attack_entities;
  s.offline_min_lag_s = off.min_lag_s;
  s.offline_max_lag_s = off.max_lag_s;
  return s;
}

}  // namespace provstream::pipeline
