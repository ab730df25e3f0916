#include "provstream/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace provstream::evalharness {

RocCurve roc_auc(const std::vector<std::pair<double, bool>>& scored) {
  size_t n_pos = 0, n_neg = 0;
  for (auto& [s, attack] : scored) (attack ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0)
    throw DataError("roc requires both labels present");

  std::vector<std::pair<double, bool>> sorted = scored;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  size_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < sorted.size()) {
    const double s = sorted[i].first;
    // group ties: everything with score == s flips together at threshold just below s
    while (i < sorted.size() && sorted[i].first == s) {
      (sorted[i].second ? tp : fp)++;
      ++i;
    }
    const double next_threshold = i < sorted.size() ? sorted[i].first
                                                    : -std::numeric_limits<double>::infinity();
    curve.points.push_back({next_threshold, static_cast<double>(fp) / static_cast<double>(n_neg),
                            static_cast<double>(tp) / static_cast<double>(n_pos)});
  }
  double auc = 0.0;
  for (size_t k = 1; k < curve.points.size(); ++k) {
    const RocPoint& a = curve.points[k - 1];
    const RocPoint& b = curve.points[k];
    auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  curve.auc = auc;
  return curve;
}

std::vector<std::pair<double, bool>> entity_scores(const std::vector<detector::ScoredAlert>& alerts,
                                                   const std::map<std::string, bool>& labels) {
  std::map<std::string, double> best;
  std::vector<std::string> unknown;
  for (const auto& a : alerts) {
    if (!labels.count(a.entity_id)) {
      if (unknown.empty() || unknown.back() != a.entity_id) unknown.push_back(a.entity_id);
      continue;
    }
    auto [it, fresh] = best.emplace(a.entity_id, a.score);
    if (!fresh) it->second = std::max(it->second, a.score);
  }
  if (!unknown.empty()) {
    std::string msg = "alert ids missing from label file:";
    size_t shown = 0;
    for (const auto& id : unknown) {
      msg += " " + id;
      if (++shown == 20) {
        msg += " ... (" + std::to_string(unknown.size()) + " total)";
        break;
      }
    }
    throw DataError(msg);
  }
  std::vector<std::pair<double, bool>> out;
  out.reserve(best.size());
  for (auto& [id, score] : best) out.emplace_back(score, labels.at(id));
  return out;
}

namespace {
constexpr double kNsPerSec = 1e9;
}

LagProfile offline_lag(const std::vector<Timestamp>& event_times_ns, double period_s,
                       double run_duration_s) {
  if (period_s <= 0) throw UsageError("checkpoint period must be > 0");
  if (run_duration_s < 0) throw UsageError("run duration must be >= 0");
  LagProfile p;
  p.min_lag_s = run_duration_s;             // event right at a run start
  p.max_lag_s = period_s + run_duration_s;  // event just after a run start
  double sum = 0.0;
  p.series.reserve(event_times_ns.size());
  for (Timestamp t : event_times_ns) {
    const double ts = static_cast<double>(t) / kNsPerSec;
    const double next_start = std::ceil(ts / period_s) * period_s;
    const double lag = next_start - ts + run_duration_s;
    p.series.emplace_back(t, lag);
    sum += lag;
  }
  p.mean_lag_s = event_times_ns.empty() ? 0.0 : sum / static_cast<double>(event_times_ns.size());
  return p;
}

LagProfile streaming_lag(const std::vector<Timestamp>& event_times_ns, double per_event_cost_s) {
  LagProfile p;
  p.min_lag_s = per_event_cost_s;
  p.max_lag_s = per_event_cost_s;
  p.mean_lag_s = per_event_cost_s;
  p.series.reserve(event_times_ns.size());
  for (Timestamp t : event_times_ns) p.series.emplace_back(t, per_event_cost_s);
  return p;
}

uint64_t current_rss_bytes() {
  std::ifstream in("/proc/self/status");
  if (!in) return 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("VmRSS:", 0) == 0) {
      uint64_t kb = 0;
      std::istringstream is(line.substr(6));
      is >> kb;
      return kb * 1024;
    }
  }
  return 0;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw UsageError("quantile of empty sample");
  if (sorted.size() == 1) return sorted[0];
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::vector<DriftRow> drift_quartiles(const std::vector<detector::ScoredAlert>& alerts,
                                      const std::map<std::string, bool>& labels,
                                      Timestamp window_ns) {
  if (window_ns <= 0) throw UsageError("drift window must be > 0");
  std::map<std::pair<Timestamp, bool>, std::vector<double>> groups;
  for (const auto& a : alerts) {
    auto it = labels.find(a.entity_id);
    if (it == labels.end()) continue;
    Timestamp w = (a.t / window_ns) * window_ns;
    groups[{w, it->second}].push_back(a.score);
  }
  std::vector<DriftRow> rows;
  for (auto& [key, scores] : groups) {
    std::sort(scores.begin(), scores.end());
    DriftRow r;
    r.window_start = key.first;
    r.attack = key.second;
    r.n = scores.size();
    double sum = 0.0;
    for (double s : scores) sum += s;
    r.mean = sum / static_cast<double>(scores.size());
    r.q25 = quantile_sorted(scores, 0.25);
    r.q75 = quantile_sorted(scores, 0.75);
    rows.push_back(r);
  }
  return rows;
}

namespace {
std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}
}  // namespace

void write_roc_csv(std::ostream& out, const RocCurve& roc) {
  out << "threshold,fpr,tpr\n";
  for (const RocPoint& p : roc.points)
    out << fmt(p.threshold) << ',' << fmt(p.fpr) << ',' << fmt(p.tpr) << '\n';
}

void write_lag_csv(std::ostream& out, const LagProfile& offline, const LagProfile& streaming) {
  out << "model,min_lag_s,max_lag_s,mean_lag_s\n";
  out << "offline_baseline," << fmt(offline.min_lag_s) << ',' << fmt(offline.max_lag_s) << ','
      << fmt(offline.mean_lag_s) << '\n';
  out << "streaming," << fmt(streaming.min_lag_s) << ',' << fmt(streaming.max_lag_s) << ','
      << fmt(streaming.mean_lag_s) << '\n';
}

void write_memory_csv(std::ostream& out, const std::vector<MemoryRow>& rows) {
  out << "events,entities,state_bytes,rss_bytes\n";
  for (const MemoryRow& r : rows)
    out << r.events << ',' << r.entities << ',' << r.state_bytes << ',' << r.rss_bytes << '\n';
}

void write_drift_csv(std::ostream& out, const std::vector<DriftRow>& rows) {
  out << "window_start_ns,label,n,mean,q25,q75\n";
  for (const DriftRow& r : rows)
    out << r.window_start << ',' << (r.attack ? "attack" : "benign") << ',' << r.n << ','
        << fmt(r.mean) << ',' << fmt(r.q25) << ',' << fmt(r.q75) << '\n';
}

std::vector<MemoryRow> read_memory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open memory stats: " + path);
  std::vector<MemoryRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    MemoryRow r;
    if (std::sscanf(line.c_str(), "%lu,%lu,%lu,%lu", &r.events, &r.entities, &r.state_bytes,
                    &r.rss_bytes) != 4)
      throw DataError("bad memory stats line: " + line);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace provstream::evalharness
