#include "provstream/serialize.hpp"

#include <fstream>

namespace provstream::ser {

uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for hashing: " + path);
  Fnv64 h;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    h.update(buf, static_cast<size_t>(in.gcount()));
    if (!in) break;
  }
  return h.digest();
}

}  // namespace provstream::ser
