#include "provstream/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "provstream/kernels.hpp"

namespace provstream::detector {

namespace {
// Pruning slack: a bucket is skipped only if its best possible distance beats
// the current minimum by more than this, which floating-point bound error
// (~1e-15) can never fake.
constexpr double kPruneSlack = 1e-9;
}  // namespace

BenignIndex BenignIndex::build(const std::vector<streamer::SnapshotRow>& rows, bool partitioned,
                               uint64_t seed) {
  if (rows.empty()) throw DataError("empty training embedding set");
  BenignIndex idx;
  idx.dim_ = static_cast<int>(rows.front().embedding.size());
  idx.flat_.reserve(rows.size() * static_cast<size_t>(idx.dim_));
  for (const auto& r : rows) {
    if (static_cast<int>(r.embedding.size()) != idx.dim_)
      throw DimensionMismatch("inconsistent embedding dims in index build");
    idx.flat_.insert(idx.flat_.end(), r.embedding.begin(), r.embedding.end());
    idx.meta_.push_back({r.entity_id, r.version});
  }
  if (partitioned && rows.size() >= 16) idx.build_partitions(seed);
  return idx;
}

void BenignIndex::build_partitions(uint64_t seed) {
  const size_t n = meta_.size();
  const size_t d = static_cast<size_t>(dim_);
  const size_t nb = std::max<size_t>(2, static_cast<size_t>(std::sqrt(static_cast<double>(n))));

  // k-means on the sphere, deterministic: centers seeded from evenly spaced
  // rows, a handful of Lloyd iterations, empty clusters keep their center.
  std::vector<std::vector<double>> centers(nb, std::vector<double>(d, 0.0));
  for (size_t b = 0; b < nb; ++b) {
    size_t pick = (b * n + seed % n) % n;
    std::copy_n(flat_.begin() + static_cast<long>(pick * d), d, centers[b].begin());
  }
  std::vector<uint32_t> assign(n, 0);
  for (int iter = 0; iter < 8; ++iter) {
    for (size_t i = 0; i < n; ++i) {
      const double* v = flat_.data() + i * d;
      double best = -std::numeric_limits<double>::infinity();
      uint32_t arg = 0;
      for (size_t b = 0; b < nb; ++b) {
        double s = kernels::dot(centers[b].data(), v, dim_);
        if (s > best) {
          best = s;
          arg = static_cast<uint32_t>(b);
        }
      }
      assign[i] = arg;
    }
    std::vector<std::vector<double>> sums(nb, std::vector<double>(d, 0.0));
    std::vector<size_t> counts(nb, 0);
    for (size_t i = 0; i < n; ++i) {
      const double* v = flat_.data() + i * d;
      for (size_t j = 0; j < d; ++j) sums[assign[i]][j] += v[j];
      ++counts[assign[i]];
    }
    for (size_t b = 0; b < nb; ++b) {
      if (!counts[b]) continue;
      double n2 = kernels::dot(sums[b].data(), sums[b].data(), dim_);
      if (n2 <= 0.0) continue;
      double inv = 1.0 / std::sqrt(n2);
      for (size_t j = 0; j < d; ++j) centers[b][j] = sums[b][j] * inv;
    }
  }

  // Regroup rows by bucket; distances are still computed over the same bit
  // patterns, only the scan order changes.
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return assign[a] < assign[b]; });
  std::vector<double> new_flat(flat_.size());
  std::vector<Meta> new_meta(n);
  for (size_t pos = 0; pos < n; ++pos) {
    std::copy_n(flat_.begin() + static_cast<long>(order[pos] * d), d,
                new_flat.begin() + static_cast<long>(pos * d));
    new_meta[pos] = meta_[order[pos]];
  }
  flat_ = std::move(new_flat);
  meta_ = std::move(new_meta);

  buckets_.clear();
  size_t pos = 0;
  for (size_t b = 0; b < nb; ++b) {
    Bucket bk;
    bk.center = centers[b];
    bk.begin = pos;
    while (pos < n && assign[order[pos]] == b) ++pos;
    bk.count = pos - bk.begin;
    double r2max = 0.0;
    for (size_t i = bk.begin; i < bk.begin + bk.count; ++i) {
      const double* v = flat_.data() + i * d;
      double r2 = 0.0;
      for (size_t j = 0; j < d; ++j) {
        double t = v[j] - bk.center[j];
        r2 += t * t;
      }
      r2max = std::max(r2max, r2);
    }
    bk.radius = std::sqrt(r2max);
    if (bk.count) buckets_.push_back(std::move(bk));
  }
  partitioned_ = true;
}

double BenignIndex::score_linear(std::span<const double> v) const {
  if (static_cast<int>(v.size()) != dim_) throw DimensionMismatch("score: query dim");
  return kernels::nn_min_distance(flat_.data(), meta_.size(), dim_, v.data());
}

double BenignIndex::score(std::span<const double> v) const {
  if (!partitioned_) return score_linear(v);
  if (static_cast<int>(v.size()) != dim_) throw DimensionMismatch("score: query dim");
  const size_t d = static_cast<size_t>(dim_);

  // dot(q, x) <= dot(q, c) + ||x - c|| for unit q, so each bucket's distance
  // can't go below 1 - (dot(q, c) + radius).
  struct Cand {
    double lower;
    const Bucket* b;
  };
  std::vector<Cand> cands;
  cands.reserve(buckets_.size());
  for (const Bucket& b : buckets_) {
    double qc = kernels::dot(v.data(), b.center.data(), dim_);
    cands.push_back({1.0 - (qc + b.radius), &b});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.lower < b.lower; });

  double best = std::numeric_limits<double>::infinity();
  for (const Cand& c : cands) {
    if (c.lower > best + kPruneSlack) break;
    const Bucket& b = *c.b;
    double local = kernels::nn_min_distance(flat_.data() + b.begin * d, b.count, dim_, v.data());
    best = std::min(best, local);
  }
  return best;
}

bool classify(double score, double alpha) {
  if (alpha < 0) throw UsageError("threshold must be >= 0");
  return score > alpha;
}

std::string alert_to_json(const ScoredAlert& a) {
  char num[32];
  std::snprintf(num, sizeof num, "%.17g", a.score);
  std::string out = "{\"entity_id\":";
  out += nlohmann::json(a.entity_id).dump();
  out += ",\"version\":" + std::to_string(a.version);
  out += ",\"t\":" + std::to_string(a.t);
  out += ",\"score\":";
  out += num;
  out += ",\"alert\":";
  out += a.alert ? "true" : "false";
  out += "}";
  return out;
}

ScoredAlert alert_from_json(std::string_view line, size_t line_no) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
    ScoredAlert a;
    a.entity_id = j.at("entity_id").get<std::string>();
    a.version = j.at("version").get<uint64_t>();
    a.t = j.at("t").get<int64_t>();
    a.score = j.at("score").get<double>();
    a.alert = j.at("alert").get<bool>();
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(line_no, std::string("bad alert record: ") + e.what());
  }
}

std::vector<ScoredAlert> read_alerts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open alert file: " + path);
  std::vector<ScoredAlert> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    out.push_back(alert_from_json(line, line_no));
  }
  return out;
}

}  // namespace provstream::detector
