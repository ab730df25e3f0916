#pragma once

// Measurement tooling: exact ROC/AUC over labeled entities, checkpoint-lag
// profiles, streaming-state memory accounting, and score-drift quartiles.

#include <cstdint>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "provstream/detector.hpp"
#include "provstream/types.hpp"

namespace provstream::evalharness {

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

struct RocCurve {
  std::vector<RocPoint> points;  // threshold descending
  double auc = 0.0;
};

// scored: (score, is_attack) pairs, one per entity (callers aggregate
// versions by max beforehand). Alert rule is strict score > threshold.
RocCurve roc_auc(const std::vector<std::pair<double, bool>>& scored);

// Max score over every scored version of each labeled entity. Alert ids
// missing from the labels raise DataError listing them.
std::vector<std::pair<double, bool>> entity_scores(const std::vector<detector::ScoredAlert>& alerts,
                                                   const std::map<std::string, bool>& labels);

struct LagProfile {
  double min_lag_s = 0.0;   // analytic infimum over event times
  double max_lag_s = 0.0;   // analytic supremum
  double mean_lag_s = 0.0;  // mean over the supplied events
  std::vector<std::pair<Timestamp, double>> series;
};

// Offline deployment: runs start every period_s seconds and take
// run_duration_s; an event waits for the next run start plus the run itself.
LagProfile offline_lag(const std::vector<Timestamp>& event_times_ns, double period_s,
                       double run_duration_s);
// Streaming deployment: flat per-event cost.
LagProfile streaming_lag(const std::vector<Timestamp>& event_times_ns, double per_event_cost_s);

struct MemoryRow {
  uint64_t events = 0;
  uint64_t entities = 0;
  uint64_t state_bytes = 0;  // formula accounting
  uint64_t rss_bytes = 0;    // measured resident set, 0 when unavailable
};

// Resident set size of this process; 0 where /proc is unavailable.
uint64_t current_rss_bytes();

struct DriftRow {
  Timestamp window_start = 0;
  bool attack = false;
  uint64_t n = 0;
  double mean = 0.0, q25 = 0.0, q75 = 0.0;
};

// Per (time window, label): mean and interpolated quartiles of the scores.
// Windows are [k*window_ns, (k+1)*window_ns); empty windows are omitted.
std::vector<DriftRow> drift_quartiles(const std::vector<detector::ScoredAlert>& alerts,
                                      const std::map<std::string, bool>& labels,
                                      Timestamp window_ns);

// Linear-interpolation quantile over a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double p);

void write_roc_csv(std::ostream& out, const RocCurve& roc);
void write_lag_csv(std::ostream& out, const LagProfile& offline, const LagProfile& streaming);
void write_memory_csv(std::ostream& out, const std::vector<MemoryRow>& rows);
void write_drift_csv(std::ostream& out, const std::vector<DriftRow>& rows);

std::vector<MemoryRow> read_memory_csv(const std::string& path);

}  // namespace provstream::evalharness
