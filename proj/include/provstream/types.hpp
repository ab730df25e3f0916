#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace provstream {

enum class EntityKind : uint8_t { Process = 0, File = 1, Socket = 2 };
enum class Relation : uint8_t { Exec = 0, Read = 1, Write = 2, Recv = 3, Send = 4 };

constexpr int kEntityKinds = 3;
constexpr int kRelations = 5;

const char* to_string(EntityKind k);
const char* to_string(Relation r);
bool parse_entity_kind(std::string_view s, EntityKind& out);
bool parse_relation(std::string_view s, Relation& out);

// Nanoseconds since epoch.
using Timestamp = int64_t;

struct EntityDescriptor {
  std::string id;
  EntityKind kind = EntityKind::Process;
  std::string path;

  bool operator==(const EntityDescriptor&) const = default;
};

// One audit record. The edge direction always encodes information flow:
//   Exec: Process -> Process   Read: File -> Process   Write: Process -> File
//   Recv: Socket -> Process    Send: Process -> Socket
struct Event {
  EntityDescriptor src;
  EntityDescriptor dst;
  Relation rel = Relation::Read;
  Timestamp t = 0;

  bool operator==(const Event&) const = default;
};

// True iff (src kind, dst kind) is the unique legal pair for rel.
bool legal_flow(EntityKind src, EntityKind dst, Relation rel);

struct ParseError : std::runtime_error {
  size_t line_no;
  ParseError(size_t line, const std::string& reason)
      : std::runtime_error("parse error at line " + std::to_string(line) + ": " + reason),
        line_no(line) {}
};

struct OrderViolation : std::runtime_error {
  Timestamp event_t;
  OrderViolation(Timestamp t, const std::string& what)
      : std::runtime_error(what), event_t(t) {}
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InternalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace provstream
