#pragma once

// Nearest-neighbor anomaly scoring against the frozen benign embedding set.
// Two interchangeable exact structures: a flat linear scan and a
// center/radius-partitioned scan with a conservative pruning bound. Both
// compute candidate distances with the same kernel, so they agree bitwise.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "provstream/streamer.hpp"
#include "provstream/types.hpp"

namespace provstream::detector {

struct ScoredAlert {
  std::string entity_id;
  uint64_t version = 0;
  Timestamp t = 0;
  double score = 0.0;  // 1 - cosine to nearest benign embedding, in [0, 2]
  bool alert = false;
};

class BenignIndex {
 public:
  static BenignIndex build(const std::vector<streamer::SnapshotRow>& rows, bool partitioned = true,
                           uint64_t seed = 7);

  size_t size() const { return meta_.size(); }
  int dim() const { return dim_; }
  bool partitioned() const { return partitioned_; }

  double score(std::span<const double> v) const;
  double score_linear(std::span<const double> v) const;  // reference scan

 private:
  void build_partitions(uint64_t seed);

  int dim_ = 0;
  bool partitioned_ = false;
  std::vector<double> flat_;  // n x dim, bucket-grouped when partitioned
  struct Meta {
    std::string entity_id;
    uint64_t version;
  };
  std::vector<Meta> meta_;

  struct Bucket {
    std::vector<double> center;  // unit
    double radius = 0.0;         // max Euclidean distance of members to center
    size_t begin = 0, count = 0; // row range in flat_
  };
  std::vector<Bucket> buckets_;
};

// Strict threshold rule: alert iff score > alpha (a tie stays benign).
bool classify(double score, double alpha);

std::string alert_to_json(const ScoredAlert& a);
ScoredAlert alert_from_json(std::string_view line, size_t line_no);
std::vector<ScoredAlert> read_alerts(const std::string& path);

}  // namespace provstream::detector
