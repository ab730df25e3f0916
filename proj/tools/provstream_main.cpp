// provstream command line: gen | fit-features | train | stream | eval | bench
// Exit codes: 0 ok, 1 usage, 2 data error, 3 internal failure.

#include <chrono>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "provstream/detector.hpp"
#include "provstream/kernels.hpp"
#include "provstream/pipeline.hpp"
#include "provstream/streamer.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace provstream;

namespace {

int verbosity() {
  const char* v = std::getenv("PROVSTREAM_VERBOSE");
  return v ? std::atoi(v) : 1;
}

void add_common(CLI::App* cmd, pipeline::RunConfig& cfg, std::string& format) {
  cmd->add_option("--log", cfg.log_path, "audit log file");
  cmd->add_option("--labels", cfg.labels_path, "label csv (entity_id,label)");
  cmd->add_option("--format", format, "log format: jsonl | streamspot");
  cmd->add_option("--streamspot-map", cfg.streamspot_map_path, "letter mapping config");
  cmd->add_option("--features", cfg.features_path, "feature model file");
  cmd->add_option("--params", cfg.params_path, "model parameter file");
  cmd->add_option("--seed", cfg.seed, "run seed (all randomness derives from it)");
  cmd->add_option("--reorder-window", cfg.reorder_window, "ingest reorder window (ns)");
  cmd->add_flag("--skip-bad-records", cfg.skip_bad_records, "count and skip malformed lines");
  cmd->set_config("--config", "", "key=value config file (flags win)");
  cmd->allow_config_extras(CLI::config_extras_mode::error);
}

void add_model(CLI::App* cmd, pipeline::RunConfig& cfg, std::string& cell) {
  cmd->add_option("--feature-dim", cfg.feature_dim, "feature/embedding dimension L");
  cmd->add_option("--hidden-dim", cfg.hidden_dim, "hidden dimension H");
  cmd->add_option("--layers", cfg.layers, "recurrent layers N");
  cmd->add_option("--cell", cell, "cell kind: gru | rnn");
  cmd->add_option("--lr", cfg.learning_rate, "learning rate");
  cmd->add_option("--epochs", cfg.epochs, "training epochs");
  cmd->add_option("--negatives", cfg.negatives, "negative samples per event");
  cmd->add_option("--margin", cfg.margin, "ranking margin");
  cmd->add_option("--clip-norm", cfg.clip_norm, "gradient clip norm");
  cmd->add_option("--k-roots", cfg.k_roots, "root id set capacity");
  cmd->add_option("--train-budget", cfg.train_budget, "training window (events)");
  cmd->add_flag("--no-root,!--root", cfg.use_root, "disable the root-context term")
      ->default_val(true);
  cmd->add_flag("--hash-features,!--trained-features", cfg.hash_features,
                "corpus-free hashing featurizer")
      ->default_val(false);
}

void finish_config(pipeline::RunConfig& cfg, const std::string& format, const std::string& cell) {
  if (!format.empty() && !ingest::parse_format(format, cfg.format))
    throw UsageError("unknown format: " + format);
  if (!cell.empty() && !seqmodel::parse_cell_kind(cell, cfg.cell))
    throw UsageError("unknown cell kind: " + cell);
}

void run_kernel_bench();
void run_throughput_bench(const pipeline::RunConfig& cfg, uint64_t events, bool score);

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming provenance anomaly detection"};
  app.require_subcommand(1);

  pipeline::RunConfig cfg;
  std::string format_s, cell_s;
  synthgen::ScenarioConfig scenario;

  auto* gen = app.add_subcommand("gen", "generate a synthetic labeled audit log");
  add_common(gen, cfg, format_s);
  gen->add_option("--behaviors", scenario.n_benign_behaviors, "benign behavior count");
  gen->add_option("--events-per-behavior", scenario.events_per_behavior, "events per behavior");
  gen->add_option("--entities", scenario.n_entities, "benign entity population");
  gen->add_flag("--attack", scenario.attack.enabled, "inject an attack chain");
  gen->add_option("--chain-length", scenario.attack.chain_length, "attack chain edges (>=3)");
  gen->add_option("--spacing", scenario.attack.spacing, "benign events between attack steps");
  gen->add_option("--start-fraction", scenario.attack.start_fraction,
                  "attack start position (0,1)");

  auto* fit = app.add_subcommand("fit-features", "fit the featurizer on the training window");
  add_common(fit, cfg, format_s);
  add_model(fit, cfg, cell_s);

  auto* train = app.add_subcommand("train", "train cell parameters on the training window");
  add_common(train, cfg, format_s);
  add_model(train, cfg, cell_s);

  auto* stream = app.add_subcommand("stream", "stream test events and emit scored alerts");
  add_common(stream, cfg, format_s);
  add_model(stream, cfg, cell_s);
  stream->add_option("--alerts", cfg.alerts_path, "alert output (json lines)");
  stream->add_option("--alpha", cfg.alpha, "anomaly threshold");
  stream->add_option("--calibrate-fpr", cfg.calibrate_fpr,
                     "pick alpha for this benign false-positive rate");
  stream->add_option("--val-budget", cfg.val_budget, "calibration window (test events)");
  stream->add_option("--checkpoint", cfg.checkpoint_path, "write a checkpoint at end/stop");
  stream->add_option("--resume", cfg.resume_path, "resume from a checkpoint");
  stream->add_option("--stop-after", cfg.stop_after, "stop after this many test events");
  stream->add_option("--run-stats", cfg.run_stats_path, "memory series csv");
  stream->add_option("--memory-sample-period", cfg.memory_sample_period,
                     "events between memory samples");
  stream->add_option("--index-snapshots", cfg.index_snapshots,
                     "benign snapshots taken across the training replay");
  stream->add_flag("--no-partition-index,!--partition-index", cfg.partition_index,
                   "linear-scan index instead of the partitioned one")
      ->default_val(true);
  stream->add_flag("--no-score", [&cfg](size_t) { cfg.score_events = false; },
                   "skip detector scoring (state maintenance only)");

  auto* eval = app.add_subcommand("eval", "write roc/lag/memory/drift reports");
  add_common(eval, cfg, format_s);
  eval->add_option("--alerts", cfg.alerts_path, "alert stream from `stream`");
  eval->add_option("--out-dir", cfg.out_dir, "report directory");
  eval->add_option("--run-stats", cfg.run_stats_path, "memory series csv from `stream`");
  eval->add_option("--lag-period-s", cfg.lag_period_s, "offline checkpoint period (s)");
  eval->add_option("--lag-run-s", cfg.lag_run_s, "offline train+test duration (s)");
  eval->add_option("--lag-event-cost-s", cfg.lag_event_cost_s, "streaming per-event cost (s)");
  eval->add_option("--drift-window-ns", cfg.drift_window_ns, "drift window (ns)");

  auto* bench = app.add_subcommand("bench", "kernel and pipeline throughput benchmarks");
  add_common(bench, cfg, format_s);
  add_model(bench, cfg, cell_s);
  bool bench_kernels = false;
  bool bench_no_score = false;
  uint64_t bench_events = 200000;
  int bench_threads = 0;
  bench->add_flag("--kernels", bench_kernels, "compare serial and parallel kernels");
  bench->add_option("--events", bench_events, "synthetic events to stream");
  bench->add_option("--threads", bench_threads, "OpenMP threads (0 = default)");
  bench->add_flag("--no-score", bench_no_score, "skip detector scoring");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    finish_config(cfg, format_s, cell_s);
    if (gen->parsed()) {
      if (cfg.log_path.empty()) throw UsageError("gen requires --log");
      scenario.seed = cfg.seed;
      auto s = pipeline::cmd_gen(cfg, scenario);
      if (verbosity() > 0)
        std::cout << "generated " << s.events << " events over " << s.entities << " entities ("
                  << s.attack_entities << " attack)\n";
    } else if (fit->parsed()) {
      if (cfg.log_path.empty()) throw UsageError("fit-features requires --log");
      auto s = pipeline::cmd_fit_features(cfg);
      if (verbosity() > 0)
        std::cout << "featurizer fitted on " << s.corpus_paths << " paths, vocab " << s.vocab
                  << ", artifact " << cfg.features_path << "\n";
    } else if (train->parsed()) {
      if (cfg.log_path.empty()) throw UsageError("train requires --log");
      auto s = pipeline::cmd_train(cfg);
      if (verbosity() > 0) {
        std::cout << "trained " << s.report.steps << " steps; epoch losses:";
        for (double l : s.report.epoch_mean_loss) std::cout << ' ' << l;
        std::cout << "; artifact " << cfg.params_path << "\n";
      }
    } else if (stream->parsed()) {
      if (cfg.log_path.empty()) throw UsageError("stream requires --log");
      auto s = pipeline::cmd_stream(cfg);
      if (verbosity() > 0) {
        std::cout << "streamed " << s.test_events << " test events (fence " << s.train_events
                  << "), " << s.alert_count << " alerts at alpha " << s.alpha_used << "\n";
        if (s.stream_seconds > 0)
          std::cout << "rate " << static_cast<uint64_t>(s.test_events / s.stream_seconds)
                    << " events/s (excl. parse), index " << s.index_size << " vectors\n";
      }
    } else if (eval->parsed()) {
      auto s = pipeline::cmd_eval(cfg);
      std::cout << "entities " << s.entities << " (" << s.attack_entities << " attack), auc "
                << s.auc << "\n";
      std::cout << "offline lag min/max " << s.offline_min_lag_s << "/" << s.offline_max_lag_s
                << " s; reports in " << cfg.out_dir << "\n";
    } else if (bench->parsed()) {
#ifdef _OPENMP
      if (bench_threads > 0) omp_set_num_threads(bench_threads);
#endif
      if (bench_kernels) run_kernel_bench();
      else run_throughput_bench(cfg, bench_events, !bench_no_score);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const synthgen::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const OrderViolation& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

namespace {

void run_kernel_bench() {
  using clock = std::chrono::steady_clock;
  auto time_it = [&](auto&& fn, int reps) {
    auto t0 = clock::now();
    for (int i = 0; i < reps; ++i) fn();
    return std::chrono::duration<double>(clock::now() - t0).count() / reps;
  };
  uint64_t rng = 42;
  std::cout << "kernel,size,serial_s,parallel_s,speedup\n";
  for (int dim : {64, 256, 1024}) {
    seqmodel::Matrix a(dim, dim);
    std::vector<double> x(static_cast<size_t>(dim)), y(static_cast<size_t>(dim));
    for (auto& v : a.a) v = seqmodel::uniform_pm(rng, 1.0);
    for (auto& v : x) v = seqmodel::uniform_pm(rng, 1.0);
    int reps = dim <= 256 ? 2000 : 200;
    double ts = time_it([&] { kernels::matvec_serial(a.data(), x.data(), y.data(), dim, dim); }, reps);
    double tp = time_it([&] { kernels::matvec_omp(a.data(), x.data(), y.data(), dim, dim); }, reps);
    std::cout << "matvec," << dim << 'x' << dim << ',' << ts << ',' << tp << ',' << ts / tp << "\n";
  }
  for (size_t n : {10000ul, 100000ul}) {
    const int dim = 64;
    std::vector<double> vecs(n * dim), q(dim);
    for (auto& v : vecs) v = seqmodel::uniform_pm(rng, 1.0);
    for (auto& v : q) v = seqmodel::uniform_pm(rng, 1.0);
    int reps = n <= 10000 ? 500 : 50;
    double ts = time_it([&] { kernels::nn_min_distance_serial(vecs.data(), n, dim, q.data()); }, reps);
    double tp = time_it([&] { kernels::nn_min_distance_omp(vecs.data(), n, dim, q.data()); }, reps);
    std::cout << "nn_scan," << n << 'x' << dim << ',' << ts << ',' << tp << ',' << ts / tp << "\n";
  }
}

void run_throughput_bench(const pipeline::RunConfig& cfg, uint64_t events, bool score) {
  // Synthetic single-process pipeline rate: hashing features, seeded
  // parameters, benign index snapshotted a tenth of the way in.
  synthgen::ScenarioConfig sc;
  sc.seed = cfg.seed;
  sc.n_benign_behaviors = 5;
  sc.events_per_behavior = static_cast<int>(events / 5 + 1);
  sc.n_entities = 1000;
  synthgen::Scenario scenario = synthgen::generate(sc);
  if (scenario.events.size() > events) scenario.events.resize(events);

  featurizer::FeatureModel fm = featurizer::FeatureModel::hashing(cfg.feature_dim, cfg.seed);
  seqmodel::ModelConfig mc = cfg.model_config();
  seqmodel::CellParams params = seqmodel::CellParams::init(mc, true);
  streamer::StreamState state(fm, params, cfg.k_roots);

  const size_t fence = scenario.events.size() / 10;
  for (size_t i = 0; i < fence; ++i) state.process_event(scenario.events[i]);
  detector::BenignIndex index =
      detector::BenignIndex::build(state.snapshot_embeddings(), cfg.partition_index, cfg.seed);

  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  double sink = 0.0;
  for (size_t i = fence; i < scenario.events.size(); ++i) {
    auto r = state.process_event(scenario.events[i]);
    if (score) sink += index.score(*r.dst_embedding);
  }
  double secs = std::chrono::duration<double>(clock::now() - t0).count();
  uint64_t n = scenario.events.size() - fence;
  std::cout << "streamed " << n << " events in " << secs << " s: "
            << static_cast<uint64_t>(n / secs) << " events/s ("
            << (score ? "scored" : "unscored") << ", cell " << seqmodel::to_string(mc.cell)
            << ", N=" << mc.layers << ", L=" << mc.input_dim << ", H=" << mc.hidden_dim
            << ", checksum " << sink << ")\n";
}

}  // namespace
