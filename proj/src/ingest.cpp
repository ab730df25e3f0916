#include "provstream/ingest.hpp"

#include <array>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace provstream::ingest {

using nlohmann::json;

bool parse_format(std::string_view s, FormatId& out) {
  if (s == "jsonl" || s == "NativeJsonl") out = FormatId::NativeJsonl;
  else if (s == "streamspot" || s == "StreamSpotTsv") out = FormatId::StreamSpotTsv;
  else return false;
  return true;
}

const char* to_string(FormatId f) {
  return f == FormatId::NativeJsonl ? "jsonl" : "streamspot";
}

StreamSpotMap StreamSpotMap::builtin() {
  StreamSpotMap m;
  // Vertex letters: process/thread -> Process, fd- and memory-backed objects
  // -> File, network endpoints -> Socket. Kept in sync with
  // data/streamspot_map.json; validate against the dataset docs before a run.
  m.node_types['a'] = {EntityKind::Process, "proc"};
  m.node_types['b'] = {EntityKind::File, "obj"};
  m.node_types['c'] = {EntityKind::File, "file"};
  m.node_types['d'] = {EntityKind::File, "mmap"};
  m.node_types['e'] = {EntityKind::Socket, "sock"};
  m.node_types['f'] = {EntityKind::File, "stdin"};
  m.node_types['g'] = {EntityKind::File, "stdout"};
  m.node_types['h'] = {EntityKind::File, "stderr"};
  // Edge letters. swap=true marks records whose TSV (src,dst) order is the
  // syscall direction rather than the information-flow direction.
  m.edge_types['R'] = {Relation::Read, true};    // process reads file
  m.edge_types['W'] = {Relation::Write, false};  // process writes file
  m.edge_types['E'] = {Relation::Exec, false};   // process execs process
  m.edge_types['F'] = {Relation::Exec, false};   // fork/clone folded into Exec
  m.edge_types['V'] = {Relation::Recv, true};    // process receives from socket
  m.edge_types['S'] = {Relation::Send, false};   // process sends to socket
  return m;
}

StreamSpotMap StreamSpotMap::load(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw DataError("cannot open streamspot map: " + json_path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("bad streamspot map " + json_path + ": " + e.what());
  }
  StreamSpotMap m;
  for (auto& [key, val] : j.at("node_types").items()) {
    if (key.size() != 1) throw DataError("streamspot node type key must be one letter: " + key);
    EntityKind k;
    if (!parse_entity_kind(val.at("kind").get<std::string>(), k))
      throw DataError("streamspot map: unknown kind for node type " + key);
    m.node_types[key[0]] = {k, val.at("path_prefix").get<std::string>()};
  }
  for (auto& [key, val] : j.at("edge_types").items()) {
    if (key.size() != 1) throw DataError("streamspot edge type key must be one letter: " + key);
    Relation r;
    if (!parse_relation(val.at("rel").get<std::string>(), r))
      throw DataError("streamspot map: unknown relation for edge type " + key);
    m.edge_types[key[0]] = {r, val.value("swap", false)};
  }
  return m;
}

namespace {

EntityDescriptor parse_entity_json(const json& j, size_t line_no, const char* which) {
  EntityDescriptor d;
  try {
    d.id = j.at("id").get<std::string>();
    std::string kind = j.at("kind").get<std::string>();
    if (!parse_entity_kind(kind, d.kind))
      throw ParseError(line_no, std::string(which) + ": unknown entity kind '" + kind + "'");
    d.path = j.at("path").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(line_no, std::string(which) + ": " + e.what());
  }
  if (d.id.empty()) throw ParseError(line_no, std::string(which) + ": empty id");
  if (d.path.empty()) throw ParseError(line_no, std::string(which) + ": empty path");
  return d;
}

Event finish_event(Event e, size_t line_no) {
  if (e.src.id == e.dst.id) throw ParseError(line_no, "self-loop (src.id == dst.id)");
  if (!legal_flow(e.src.kind, e.dst.kind, e.rel))
    throw ParseError(line_no, std::string("illegal combination ") + to_string(e.src.kind) + "-" +
                                  to_string(e.rel) + "->" + to_string(e.dst.kind));
  return e;
}

Event parse_jsonl(std::string_view line, size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(line_no, std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line_no, "record is not a JSON object");
  Event e;
  e.src = parse_entity_json(j.contains("src") ? j["src"] : json(), line_no, "src");
  e.dst = parse_entity_json(j.contains("dst") ? j["dst"] : json(), line_no, "dst");
  std::string rel;
  try {
    rel = j.at("rel").get<std::string>();
    e.t = j.at("t").get<int64_t>();
  } catch (const json::exception& ex) {
    throw ParseError(line_no, ex.what());
  }
  if (!parse_relation(rel, e.rel)) throw ParseError(line_no, "unknown relation '" + rel + "'");
  return finish_event(std::move(e), line_no);
}

Event parse_streamspot(std::string_view line, size_t line_no, const StreamSpotMap& m) {
  std::array<std::string_view, 6> col;
  size_t start = 0, n = 0;
  for (size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == '\t') {
      if (n >= 6) throw ParseError(line_no, "expected 6 tab-separated columns");
      col[n++] = line.substr(start, i - start);
      start = i + 1;
    }
  }
  if (n != 6) throw ParseError(line_no, "expected 6 tab-separated columns");
  auto one_letter = [&](std::string_view s, const char* what) -> char {
    if (s.size() != 1) throw ParseError(line_no, std::string(what) + " is not a single letter");
    return s[0];
  };
  char st = one_letter(col[1], "src type");
  char dt = one_letter(col[3], "dst type");
  char et = one_letter(col[4], "edge type");
  auto nt_s = m.node_types.find(st);
  auto nt_d = m.node_types.find(dt);
  if (nt_s == m.node_types.end()) throw ParseError(line_no, std::string("unknown node type '") + st + "'");
  if (nt_d == m.node_types.end()) throw ParseError(line_no, std::string("unknown node type '") + dt + "'");
  auto et_it = m.edge_types.find(et);
  if (et_it == m.edge_types.end()) throw ParseError(line_no, std::string("unknown relation '") + et + "'");

  auto make = [&](std::string_view id, const StreamSpotMap::NodeRule& rule) {
    EntityDescriptor d;
    d.id = std::string(col[5]) + ":" + std::string(id);  // graph id folded into entity id
    d.kind = rule.kind;
    d.path = rule.path_prefix + "/" + std::string(id);
    return d;
  };
  Event e;
  e.src = make(col[0], nt_s->second);
  e.dst = make(col[2], nt_d->second);
  e.rel = et_it->second.rel;
  if (et_it->second.swap_src_dst) std::swap(e.src, e.dst);
  e.t = static_cast<Timestamp>(line_no);
  return finish_event(std::move(e), line_no);
}

}  // namespace

Event parse_line(std::string_view line, FormatId format, size_t line_no,
                 const StreamSpotMap* ss_map) {
  if (format == FormatId::NativeJsonl) return parse_jsonl(line, line_no);
  static const StreamSpotMap default_map = StreamSpotMap::builtin();
  return parse_streamspot(line, line_no, ss_map ? *ss_map : default_map);
}

std::string serialize_jsonl(const Event& e) {
  json j;
  j["src"] = {{"id", e.src.id}, {"kind", to_string(e.src.kind)}, {"path", e.src.path}};
  j["dst"] = {{"id", e.dst.id}, {"kind", to_string(e.dst.kind)}, {"path", e.dst.path}};
  j["rel"] = to_string(e.rel);
  j["t"] = e.t;
  return j.dump();
}

std::string serialize_streamspot(const Event& e, const StreamSpotMap& m) {
  auto letter_for_kind = [&](EntityKind k, const std::string& path) -> char {
    // Prefer the rule whose prefix matches the synthetic path, else first rule of that kind.
    char fallback = 0;
    for (auto& [c, rule] : m.node_types) {
      if (rule.kind != k) continue;
      if (fallback == 0) fallback = c;
      if (path.rfind(rule.path_prefix + "/", 0) == 0) return c;
    }
    if (!fallback) throw DataError("streamspot map has no node letter for kind");
    return fallback;
  };
  char edge = 0;
  bool swapped = false;
  for (auto& [c, rule] : m.edge_types) {
    if (rule.rel == e.rel) {
      edge = c;
      swapped = rule.swap_src_dst;
      break;
    }
  }
  if (!edge) throw DataError("streamspot map has no edge letter for relation");
  const EntityDescriptor& a = swapped ? e.dst : e.src;
  const EntityDescriptor& b = swapped ? e.src : e.dst;
  auto split_id = [](const std::string& id) -> std::pair<std::string, std::string> {
    auto pos = id.find(':');
    if (pos == std::string::npos) return {"0", id};
    return {id.substr(0, pos), id.substr(pos + 1)};
  };
  auto [ga, ida] = split_id(a.id);
  auto [gb, idb] = split_id(b.id);
  std::ostringstream out;
  out << ida << '\t' << letter_for_kind(a.kind, a.path) << '\t' << idb << '\t'
      << letter_for_kind(b.kind, b.path) << '\t' << edge << '\t' << ga;
  return out.str();
}

std::string normalize_jsonl(std::string_view line, size_t line_no) {
  return serialize_jsonl(parse_line(line, FormatId::NativeJsonl, line_no));
}

EventReader::EventReader(std::istream& in, FormatId format, Timestamp reorder_window,
                         const StreamSpotMap* ss_map, bool skip_bad_records)
    : in_(in), format_(format), window_(reorder_window), ss_map_(ss_map),
      skip_bad_(skip_bad_records) {
  if (reorder_window < 0) throw UsageError("reorder window must be >= 0");
}

bool EventReader::pull_one() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++records_consumed_;
    Event e;
    try {
      e = parse_line(line, format_, line_no_, ss_map_);
    } catch (const ParseError&) {
      if (skip_bad_) {
        ++records_skipped_;
        continue;
      }
      throw;
    }
    if (max_seen_t_ != std::numeric_limits<Timestamp>::min() && e.t < max_seen_t_ - window_)
      throw OrderViolation(e.t, "event at t=" + std::to_string(e.t) +
                                    " arrived more than the reorder window behind t=" +
                                    std::to_string(max_seen_t_));
    if (e.t > max_seen_t_) max_seen_t_ = e.t;
    buf_.push(Pending{std::move(e), arrival_seq_++});
    return true;
  }
  eof_ = true;
  return false;
}

std::optional<Event> EventReader::next() {
  for (;;) {
    if (!buf_.empty()) {
      const Pending& top = buf_.top();
      // Safe to emit once no unseen event can still precede it.
      if (eof_ || top.e.t <= max_seen_t_ - window_) {
        Event e = top.e;
        buf_.pop();
        return e;
      }
    }
    if (!pull_one()) {
      if (buf_.empty()) return std::nullopt;
      // Drain remaining buffered events in order.
      Event e = buf_.top().e;
      buf_.pop();
      return e;
    }
  }
}

void EventReader::skip_records(size_t n) {
  std::string line;
  size_t seen = 0;
  while (seen < n && std::getline(in_, line)) {
    ++line_no_;
    if (line.empty()) continue;
    ++seen;
  }
  if (seen < n) throw DataError("input shorter than checkpointed position");
  records_consumed_ = n;
}

EventReader::Position EventReader::position() const {
  Position p;
  p.records_consumed = records_consumed_;
  p.max_seen_t = max_seen_t_;
  p.arrival_seq = arrival_seq_;
  auto copy = buf_;
  while (!copy.empty()) {
    p.pending.push_back(copy.top().e);
    copy.pop();
  }
  return p;
}

void EventReader::restore(const Position& pos) {
  skip_records(pos.records_consumed);
  max_seen_t_ = pos.max_seen_t;
  uint64_t seq = 0;
  for (const Event& e : pos.pending) buf_.push(Pending{e, seq++});
  arrival_seq_ = std::max<uint64_t>(pos.arrival_seq, seq);
}

std::vector<Event> read_all(std::istream& in, FormatId format, Timestamp reorder_window,
                            const StreamSpotMap* ss_map, bool skip_bad_records) {
  EventReader r(in, format, reorder_window, ss_map, skip_bad_records);
  std::vector<Event> out;
  while (auto e = r.next()) out.push_back(std::move(*e));
  return out;
}

std::vector<Event> read_file(const std::string& path, FormatId format, Timestamp reorder_window,
                             const StreamSpotMap* ss_map, bool skip_bad_records) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open log file: " + path);
  return read_all(in, format, reorder_window, ss_map, skip_bad_records);
}

std::map<std::string, bool> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open label file: " + path);
  std::map<std::string, bool> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line == "entity_id,label") continue;  // optional header
    auto pos = line.rfind(',');
    if (pos == std::string::npos) throw DataError("bad label line " + std::to_string(line_no));
    std::string id = line.substr(0, pos);
    std::string label = line.substr(pos + 1);
    bool attack;
    if (label == "attack") attack = true;
    else if (label == "benign") attack = false;
    else throw DataError("bad label '" + label + "' at line " + std::to_string(line_no));
    out[id] = attack;
  }
  return out;
}

void write_labels(std::ostream& out, const std::vector<std::pair<std::string, bool>>& labels) {
  out << "entity_id,label\n";
  for (auto& [id, attack] : labels) out << id << ',' << (attack ? "attack" : "benign") << '\n';
}

}  // namespace provstream::ingest
