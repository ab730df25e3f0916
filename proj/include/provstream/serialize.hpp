#pragma once

// Little-endian binary readers/writers for the model, checkpoint, and index
// files. f64 values travel as raw bit patterns so round trips are bitwise.

#include <bit>
#include <cstdint>
#include <cstring>
#include <iostream>
#include <string>
#include <vector>

#include "provstream/types.hpp"

namespace provstream::ser {

inline void put_u8(std::ostream& o, uint8_t v) { o.put(static_cast<char>(v)); }

inline void put_u32(std::ostream& o, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  o.write(b, 4);
}

inline void put_u64(std::ostream& o, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  o.write(b, 8);
}

inline void put_i64(std::ostream& o, int64_t v) { put_u64(o, static_cast<uint64_t>(v)); }

inline void put_f64(std::ostream& o, double v) { put_u64(o, std::bit_cast<uint64_t>(v)); }

inline void put_string(std::ostream& o, const std::string& s) {
  put_u64(o, s.size());
  o.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void put_f64_vec(std::ostream& o, const std::vector<double>& v) {
  put_u64(o, v.size());
  for (double x : v) put_f64(o, x);
}

inline uint8_t get_u8(std::istream& i) {
  int c = i.get();
  if (c == EOF) throw DataError("truncated binary stream");
  return static_cast<uint8_t>(c);
}

inline uint32_t get_u32(std::istream& i) {
  char b[4];
  if (!i.read(b, 4)) throw DataError("truncated binary stream");
  uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<uint32_t>(static_cast<uint8_t>(b[k])) << (8 * k);
  return v;
}

inline uint64_t get_u64(std::istream& i) {
  char b[8];
  if (!i.read(b, 8)) throw DataError("truncated binary stream");
  uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<uint64_t>(static_cast<uint8_t>(b[k])) << (8 * k);
  return v;
}

inline int64_t get_i64(std::istream& i) { return static_cast<int64_t>(get_u64(i)); }

inline double get_f64(std::istream& i) { return std::bit_cast<double>(get_u64(i)); }

inline std::string get_string(std::istream& i) {
  uint64_t n = get_u64(i);
  if (n > (1ull << 32)) throw DataError("implausible string length in binary stream");
  std::string s(n, '\0');
  if (n && !i.read(s.data(), static_cast<std::streamsize>(n))) throw DataError("truncated binary stream");
  return s;
}

inline std::vector<double> get_f64_vec(std::istream& i) {
  uint64_t n = get_u64(i);
  if (n > (1ull << 34)) throw DataError("implausible vector length in binary stream");
  std::vector<double> v(n);
  for (auto& x : v) x = get_f64(i);
  return v;
}

inline void expect_magic(std::istream& i, const char (&magic)[5], const char* what) {
  char b[4];
  if (!i.read(b, 4) || std::memcmp(b, magic, 4) != 0)
    throw DataError(std::string("bad magic, not a ") + what + " file");
}

// FNV-1a, used for manifest content hashes and state digests.
struct Fnv64 {
  uint64_t h = 1469598103934665603ull;
  void update(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  }
  void update_u64(uint64_t v) { update(&v, sizeof v); }
  void update_f64(double v) { update_u64(std::bit_cast<uint64_t>(v)); }
  void update_str(const std::string& s) {
    update_u64(s.size());
    update(s.data(), s.size());
  }
  uint64_t digest() const { return h; }
};

uint64_t hash_file(const std::string& path);

}  // namespace provstream::ser
