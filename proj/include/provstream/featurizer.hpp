#pragma once

// Entity path -> unit L-vector. Two interchangeable modes: a corpus-free
// signed-hash of character trigrams (cold-start safe), and token vectors
// trained by skip-gram with negative sampling over path co-occurrence, with
// hashing as the unseen-token fallback.

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "provstream/types.hpp"

namespace provstream::featurizer {

// Lowercase, split on / \ . : - _ , drop empty segments, collapse digit runs
// to the sentinel "<num>".
std::vector<std::string> tokenize(std::string_view path);

struct SkipGramOpts {
  int negative_samples = 5;
  int epochs = 5;
  double learning_rate = 0.05;
  double unigram_power = 0.75;
  size_t unigram_table_size = 1 << 20;
};

class FeatureModel {
 public:
  enum class Mode : uint8_t { HashNgram = 0, TrainedTokens = 1 };

  static FeatureModel hashing(int dim, uint64_t seed);
  static FeatureModel fit(const std::vector<std::string>& corpus, int dim, uint64_t seed,
                          const SkipGramOpts& opts = {});

  Mode mode() const { return mode_; }
  int dim() const { return dim_; }
  uint64_t seed() const { return seed_; }
  size_t vocab_size() const { return table_.size(); }

  std::vector<double> embed_path(std::string_view path) const;
  std::vector<double> embed_entity(const EntityDescriptor& d) const { return embed_path(d.path); }
  const std::vector<double>* token_vector(const std::string& token) const;

  void save(const std::string& path) const;
  static FeatureModel load(const std::string& path);

 private:
  FeatureModel() = default;
  std::vector<double> hash_embed(const std::vector<std::string>& tokens) const;

  Mode mode_ = Mode::HashNgram;
  int dim_ = 64;
  uint64_t seed_ = 0;
  std::unordered_map<std::string, std::vector<double>> table_;  // unit token vectors
};

// In-place x /= ||x||; a zero vector is left as-is.
void normalize(std::vector<double>& x);
double cosine(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace provstream::featurizer
