#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "provstream/pipeline.hpp"
#include "provstream/serialize.hpp"

using namespace provstream;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

pipeline::RunConfig small_run(const TempDir& dir, uint64_t seed = 42) {
  pipeline::RunConfig cfg;
  cfg.log_path = dir / "log.jsonl";
  cfg.labels_path = dir / "labels.csv";
  cfg.features_path = dir / "features.pvsf";
  cfg.params_path = dir / "params.pvsp";
  cfg.alerts_path = dir / "alerts.jsonl";
  cfg.out_dir = dir / "reports";
  cfg.feature_dim = 16;
  cfg.hidden_dim = 16;
  cfg.layers = 1;
  cfg.epochs = 2;
  cfg.train_budget = 1500;
  cfg.seed = seed;
  return cfg;
}

synthgen::ScenarioConfig small_scenario(uint64_t seed) {
  synthgen::ScenarioConfig sc;
  sc.seed = seed;
  sc.n_benign_behaviors = 3;
  sc.events_per_behavior = 1200;
  sc.n_entities = 45;
  sc.attack.enabled = true;
  sc.attack.chain_length = 5;
  sc.attack.spacing = 150;
  sc.attack.start_fraction = 0.6;
  return sc;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("rerunning fit and train from the same inputs reproduces artifact hashes") {
  TempDir dir("pvs_pipe_det");
  auto cfg = small_run(dir);
  pipeline::cmd_gen(cfg, small_scenario(42));
  auto f1 = pipeline::cmd_fit_features(cfg);
  auto t1 = pipeline::cmd_train(cfg);
  auto f2 = pipeline::cmd_fit_features(cfg);
  auto t2 = pipeline::cmd_train(cfg);
  CHECK(f1.artifact_hash == f2.artifact_hash);
  CHECK(t1.artifact_hash == t2.artifact_hash);
  // manifest written next to the artifact
  CHECK(fs::exists(cfg.params_path + ".manifest.json"));
}

TEST_CASE("zero training budget is a usage error") {
  TempDir dir("pvs_pipe_zero");
  auto cfg = small_run(dir);
  pipeline::cmd_gen(cfg, small_scenario(1));
  cfg.train_budget = 0;
  CHECK_THROWS_AS(pipeline::cmd_fit_features(cfg), UsageError);
  CHECK_THROWS_AS(pipeline::cmd_train(cfg), UsageError);
}

TEST_CASE("training never reads past the event-count fence") {
  TempDir dir("pvs_pipe_fence");
  auto cfg = small_run(dir);
  pipeline::cmd_gen(cfg, small_scenario(9));
  auto f1 = pipeline::cmd_fit_features(cfg);
  auto t1 = pipeline::cmd_train(cfg);

  // perturb the log strictly after the fence: replace the tail with different
  // but valid lines
  std::ifstream in(cfg.log_path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  in.close();
  REQUIRE(lines.size() > cfg.train_budget + 10);
  std::ofstream out(cfg.log_path);
  for (size_t i = 0; i < lines.size(); ++i) {
    if (i < cfg.train_budget) out << lines[i] << '\n';
    else
      out << R"({"src":{"id":"zz","kind":"Process","path":"/bin/zz"},"dst":{"id":"zf","kind":"File","path":"/zz/zf"},"rel":"Write","t":)"
          << (4000000000000ll + static_cast<long long>(i)) << "}\n";
  }
  out.close();

  auto f2 = pipeline::cmd_fit_features(cfg);
  auto t2 = pipeline::cmd_train(cfg);
  CHECK(f1.artifact_hash == f2.artifact_hash);
  CHECK(t1.artifact_hash == t2.artifact_hash);
}

TEST_CASE("streaming with the maximum threshold emits zero alerts") {
  TempDir dir("pvs_pipe_alpha");
  auto cfg = small_run(dir);
  pipeline::cmd_gen(cfg, small_scenario(3));
  pipeline::cmd_fit_features(cfg);
  pipeline::cmd_train(cfg);
  cfg.alpha = 2.0;
  auto s = pipeline::cmd_stream(cfg);
  CHECK(s.alert_count == 0);
  CHECK(s.test_events > 0);
}

TEST_CASE("stop-and-resume reproduces the single-pass alert stream and state") {
  TempDir dir("pvs_pipe_resume");
  auto cfg = small_run(dir, 77);
  pipeline::cmd_gen(cfg, small_scenario(77));
  pipeline::cmd_fit_features(cfg);
  pipeline::cmd_train(cfg);

  // single pass
  cfg.alerts_path = dir / "alerts_full.jsonl";
  auto full = pipeline::cmd_stream(cfg);

  // half + resume
  auto cfg1 = cfg;
  cfg1.alerts_path = dir / "alerts_p1.jsonl";
  cfg1.checkpoint_path = dir / "ckpt.pvsc";
  cfg1.stop_after = full.test_events / 2;
  auto part1 = pipeline::cmd_stream(cfg1);
  auto cfg2 = cfg;
  cfg2.alerts_path = dir / "alerts_p2.jsonl";
  cfg2.resume_path = dir / "ckpt.pvsc";
  auto part2 = pipeline::cmd_stream(cfg2);

  CHECK(part1.test_events == full.test_events / 2);
  CHECK(part2.test_events == full.test_events);  // cumulative across the resume
  CHECK(part2.state_digest == full.state_digest);
  CHECK(slurp(dir / "alerts_p1.jsonl") + slurp(dir / "alerts_p2.jsonl") ==
        slurp(dir / "alerts_full.jsonl"));
}

TEST_CASE("eval writes the four reports and a sane auc") {
  TempDir dir("pvs_pipe_eval");
  auto cfg = small_run(dir, 5);
  pipeline::cmd_gen(cfg, small_scenario(5));
  pipeline::cmd_fit_features(cfg);
  pipeline::cmd_train(cfg);
  cfg.run_stats_path = dir / "stats.csv";
  pipeline::cmd_stream(cfg);
  auto ev = pipeline::cmd_eval(cfg);
  CHECK(ev.entities > 0);
  CHECK(ev.attack_entities > 0);
  CHECK(ev.auc >= 0.0);
  CHECK(ev.auc <= 1.0);
  CHECK(ev.offline_min_lag_s == doctest::Approx(18 * 3600.0));
  CHECK(ev.offline_max_lag_s == doctest::Approx(42 * 3600.0));
  CHECK(fs::exists(cfg.out_dir + "/roc.csv"));
  CHECK(fs::exists(cfg.out_dir + "/lag.csv"));
  CHECK(fs::exists(cfg.out_dir + "/memory.csv"));
  CHECK(fs::exists(cfg.out_dir + "/drift.csv"));
}

TEST_CASE("eval without labels or alerts fails with a data error") {
  TempDir dir("pvs_pipe_eval_err");
  auto cfg = small_run(dir);
  cfg.alerts_path = dir / "missing.jsonl";
  CHECK_THROWS_AS(pipeline::cmd_eval(cfg), DataError);
}

TEST_CASE("fpr calibration picks a threshold meeting the target on the window") {
  TempDir dir("pvs_pipe_cal");
  auto cfg = small_run(dir, 11);
  auto sc = small_scenario(11);
  sc.attack.enabled = false;
  pipeline::cmd_gen(cfg, sc);
  pipeline::cmd_fit_features(cfg);
  pipeline::cmd_train(cfg);
  cfg.calibrate_fpr = 0.05;
  cfg.val_budget = 400;
  auto s = pipeline::cmd_stream(cfg);
  CHECK(s.alpha_used > 0.0);
  // the calibration window itself alerts at roughly the target rate
  auto alerts = detector::read_alerts(cfg.alerts_path);
  size_t val_alerts = 0;
  for (size_t i = 0; i < 400 && i < alerts.size(); ++i)
    if (alerts[i].alert) ++val_alerts;
  CHECK(val_alerts <= 400 * 0.05 + 1);
}

TEST_CASE("feature model dimension mismatches are surfaced") {
  TempDir dir("pvs_pipe_dim");
  auto cfg = small_run(dir);
  pipeline::cmd_gen(cfg, small_scenario(2));
  pipeline::cmd_fit_features(cfg);
  cfg.feature_dim = 32;
  CHECK_THROWS_AS(pipeline::cmd_train(cfg), DataError);
}
