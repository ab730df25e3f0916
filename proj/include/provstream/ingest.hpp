#pragma once

// Audit-log ingestion: per-line parsers for the supported formats and a
// pull-based reader that enforces non-decreasing timestamps with a bounded
// reorder window.

#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "provstream/types.hpp"

namespace provstream::ingest {

enum class FormatId { NativeJsonl, StreamSpotTsv };

bool parse_format(std::string_view s, FormatId& out);
const char* to_string(FormatId f);

// Letter tables for the StreamSpot TSV format. The dataset carries no paths,
// so entities get a synthetic "<prefix>/<id>" path; graph ids are folded into
// entity ids so disconnected graphs combine into one log.
struct StreamSpotMap {
  struct NodeRule {
    EntityKind kind;
    std::string path_prefix;
  };
  struct EdgeRule {
    Relation rel;
    bool swap_src_dst = false;  // true when the TSV order is against information flow
  };
  std::map<char, NodeRule> node_types;
  std::map<char, EdgeRule> edge_types;

  static StreamSpotMap load(const std::string& json_path);
  static StreamSpotMap builtin();
};

// line_no is 1-based and is also the synthetic timestamp for StreamSpotTsv.
Event parse_line(std::string_view line, FormatId format, size_t line_no,
                 const StreamSpotMap* ss_map = nullptr);

std::string serialize_jsonl(const Event& e);
std::string serialize_streamspot(const Event& e, const StreamSpotMap& m);

// Normalized form of a valid NativeJsonl line: parse + re-serialize.
std::string normalize_jsonl(std::string_view line, size_t line_no = 0);

// Ordered event stream over a text source. Events whose timestamp is within
// `reorder_window` time units of the newest seen are buffered and re-sorted;
// an event older than that raises OrderViolation. Ties keep arrival order.
class EventReader {
 public:
  EventReader(std::istream& in, FormatId format, Timestamp reorder_window = 0,
              const StreamSpotMap* ss_map = nullptr, bool skip_bad_records = false);

  std::optional<Event> next();

  size_t records_consumed() const { return records_consumed_; }
  size_t records_skipped() const { return records_skipped_; }
  size_t line_no() const { return line_no_; }
  Timestamp max_seen_t() const { return max_seen_t_; }

  // Fast-forward past input records already consumed by a previous run.
  void skip_records(size_t n);

  // Checkpoint support: buffered-but-unemitted events plus stream counters.
  struct Position {
    size_t records_consumed = 0;
    Timestamp max_seen_t = 0;
    uint64_t arrival_seq = 0;
    std::vector<Event> pending;  // in (t, arrival) order
  };
  Position position() const;
  void restore(const Position& pos);

 private:
  struct Pending {
    Event e;
    uint64_t seq;
  };
  struct Later {
    bool operator()(const Pending& a, const Pending& b) const {
      if (a.e.t != b.e.t) return a.e.t > b.e.t;
      return a.seq > b.seq;
    }
  };

  bool pull_one();  // reads one input record into the buffer; false at EOF

  std::istream& in_;
  FormatId format_;
  Timestamp window_;
  const StreamSpotMap* ss_map_;
  bool skip_bad_;
  std::priority_queue<Pending, std::vector<Pending>, Later> buf_;
  size_t records_consumed_ = 0;
  size_t records_skipped_ = 0;
  size_t line_no_ = 0;
  Timestamp max_seen_t_ = std::numeric_limits<Timestamp>::min();
  uint64_t arrival_seq_ = 0;
  bool eof_ = false;
};

// Convenience: read a whole log into memory (tests, training replays).
std::vector<Event> read_all(std::istream& in, FormatId format, Timestamp reorder_window = 0,
                            const StreamSpotMap* ss_map = nullptr, bool skip_bad_records = false);
std::vector<Event> read_file(const std::string& path, FormatId format,
                             Timestamp reorder_window = 0, const StreamSpotMap* ss_map = nullptr,
                             bool skip_bad_records = false);

// Label file: CSV `entity_id,label`, label in {benign, attack}.
// Returns id -> true when attack.
std::map<std::string, bool> read_labels(const std::string& path);
void write_labels(std::ostream& out, const std::vector<std::pair<std::string, bool>>& labels);

}  // namespace provstream::ingest
