#include "provstream/types.hpp"

namespace provstream {

const char* to_string(EntityKind k) {
  switch (k) {
    case EntityKind::Process: return "Process";
    case EntityKind::File: return "File";
    case EntityKind::Socket: return "Socket";
  }
  return "?";
}

const char* to_string(Relation r) {
  switch (r) {
    case Relation::Exec: return "Exec";
    case Relation::Read: return "Read";
    case Relation::Write: return "Write";
    case Relation::Recv: return "Recv";
    case Relation::Send: return "Send";
  }
  return "?";
}

bool parse_entity_kind(std::string_view s, EntityKind& out) {
  if (s == "Process") out = EntityKind::Process;
  else if (s == "File") out = EntityKind::File;
  else if (s == "Socket") out = EntityKind::Socket;
  else return false;
  return true;
}

bool parse_relation(std::string_view s, Relation& out) {
  if (s == "Exec") out = Relation::Exec;
  else if (s == "Read") out = Relation::Read;
  else if (s == "Write") out = Relation::Write;
  else if (s == "Recv") out = Relation::Recv;
  else if (s == "Send") out = Relation::Send;
  else return false;
  return true;
}

bool legal_flow(EntityKind src, EntityKind dst, Relation rel) {
  switch (rel) {
    case Relation::Exec: return src == EntityKind::Process && dst == EntityKind::Process;
    case Relation::Read: return src == EntityKind::File && dst == EntityKind::Process;
    case Relation::Write: return src == EntityKind::Process && dst == EntityKind::File;
    case Relation::Recv: return src == EntityKind::Socket && dst == EntityKind::Process;
    case Relation::Send: return src == EntityKind::Process && dst == EntityKind::Socket;
  }
  return false;
}

}  // namespace provstream
