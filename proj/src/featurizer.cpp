#include "provstream/featurizer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

#include "provstream/kernels.hpp"
#include "provstream/serialize.hpp"

namespace provstream::featurizer {

namespace {

constexpr std::string_view kNum = "<num>";
constexpr std::string_view kEmpty = "<empty>";

bool is_sep(char c) {
  return c == '/' || c == '\\' || c == '.' || c == ':' || c == '-' || c == '_';
}

// 64-bit seeded FNV-1a; std::hash is not stable across platforms.
uint64_t hash64(std::string_view s, uint64_t seed) {
  uint64_t h = 1469598103934665603ull ^ (seed * 0x9e3779b97f4a7c15ull);
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  // final avalanche (splitmix64 tail)
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ull;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebull;
  h ^= h >> 31;
  return h;
}

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double uniform_pm(uint64_t& state, double r) {
  // uniform in (-r, r)
  return (static_cast<double>(splitmix64(state) >> 11) / 9007199254740992.0 * 2.0 - 1.0) * r;
}

}  // namespace

void normalize(std::vector<double>& x) {
  double n2 = kernels::dot(x.data(), x.data(), static_cast<int>(x.size()));
  if (n2 <= 0.0) return;
  double inv = 1.0 / std::sqrt(n2);
  for (double& v : x) v *= inv;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DimensionMismatch("cosine of mismatched vectors");
  double num = kernels::dot(a.data(), b.data(), static_cast<int>(a.size()));
  double na = std::sqrt(kernels::dot(a.data(), a.data(), static_cast<int>(a.size())));
  double nb = std::sqrt(kernels::dot(b.data(), b.data(), static_cast<int>(b.size())));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return num / (na * nb);
}

std::vector<std::string> tokenize(std::string_view path) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    // collapse maximal digit runs to <num>
    std::string folded;
    size_t i = 0;
    while (i < cur.size()) {
      if (std::isdigit(static_cast<unsigned char>(cur[i]))) {
        while (i < cur.size() && std::isdigit(static_cast<unsigned char>(cur[i]))) ++i;
        folded += kNum;
      } else {
        folded += cur[i++];
      }
    }
    out.push_back(std::move(folded));
    cur.clear();
  };
  for (char c : path) {
    if (is_sep(c)) {
      flush();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return out;
}

std::vector<double> FeatureModel::hash_embed(const std::vector<std::string>& tokens) const {
  std::vector<double> v(dim_, 0.0);
  std::string stream = "^";
  if (tokens.empty()) {
    stream += kEmpty;
  } else {
    for (size_t i = 0; i < tokens.size(); ++i) {
      if (i) stream += ' ';
      stream += tokens[i];
    }
  }
  stream += '$';
  if (stream.size() < 3) return v;
  for (size_t i = 0; i + 3 <= stream.size(); ++i) {
    uint64_t h = hash64(std::string_view(stream).substr(i, 3), seed_);
    size_t bucket = h % static_cast<uint64_t>(dim_);
    v[bucket] += (h >> 63) ? 1.0 : -1.0;
  }
  normalize(v);
  return v;
}

std::vector<double> FeatureModel::embed_path(std::string_view path) const {
  std::vector<std::string> tokens = tokenize(path);
  if (mode_ == Mode::HashNgram) return hash_embed(tokens);
  if (tokens.empty()) return hash_embed(tokens);
  std::vector<double> v(dim_, 0.0);
  for (const std::string& tok : tokens) {
    auto it = table_.find(tok);
    if (it != table_.end()) {
      for (int i = 0; i < dim_; ++i) v[i] += it->second[i];
    } else {
      std::vector<double> hv = hash_embed({tok});
      for (int i = 0; i < dim_; ++i) v[i] += hv[i];
    }
  }
  for (double& x : v) x /= static_cast<double>(tokens.size());
  normalize(v);
  return v;
}

const std::vector<double>* FeatureModel::token_vector(const std::string& token) const {
  auto it = table_.find(token);
  return it == table_.end() ? nullptr : &it->second;
}

FeatureModel FeatureModel::hashing(int dim, uint64_t seed) {
  if (dim < 8) throw UsageError("feature dimension must be >= 8");
  FeatureModel m;
  m.mode_ = Mode::HashNgram;
  m.dim_ = dim;
  m.seed_ = seed;
  return m;
}

FeatureModel FeatureModel::fit(const std::vector<std::string>& corpus, int dim, uint64_t seed,
                               const SkipGramOpts& opts) {
  if (corpus.empty()) throw DataError("empty training corpus");
  if (dim < 8) throw UsageError("feature dimension must be >= 8");

  // Tokenize once; build the vocabulary in first-seen order.
  std::vector<std::vector<uint32_t>> docs;
  docs.reserve(corpus.size());
  std::vector<std::string> vocab;
  std::unordered_map<std::string, uint32_t> vocab_idx;
  std::vector<uint64_t> freq;
  for (const std::string& path : corpus) {
    auto toks = tokenize(path);
    std::vector<uint32_t> doc;
    doc.reserve(toks.size());
    for (auto& t : toks) {
      auto [it, fresh] = vocab_idx.try_emplace(t, static_cast<uint32_t>(vocab.size()));
      if (fresh) {
        vocab.push_back(t);
        freq.push_back(0);
      }
      ++freq[it->second];
      doc.push_back(it->second);
    }
    if (!doc.empty()) docs.push_back(std::move(doc));
  }
  if (vocab.empty()) throw DataError("training corpus produced no tokens");

  const size_t v = vocab.size();
  const size_t d = static_cast<size_t>(dim);

  // Negative-sampling table over unigram^power.
  std::vector<uint32_t> neg_table;
  {
    neg_table.reserve(opts.unigram_table_size);
    double total = 0.0;
    std::vector<double> w(v);
    for (size_t i = 0; i < v; ++i) {
      w[i] = std::pow(static_cast<double>(freq[i]), opts.unigram_power);
      total += w[i];
    }
    size_t i = 0;
    double acc = w[0] / total;
    for (size_t k = 0; k < opts.unigram_table_size; ++k) {
      neg_table.push_back(static_cast<uint32_t>(i));
      if (static_cast<double>(k + 1) / static_cast<double>(opts.unigram_table_size) > acc &&
          i + 1 < v) {
        ++i;
        acc += w[i] / total;
      }
    }
  }

  uint64_t rng = seed ? seed : 0x5bf0f1e2d3c4a596ull;
  std::vector<double> syn0(v * d), syn1(v * d, 0.0);
  for (double& x : syn0) x = uniform_pm(rng, 0.5 / static_cast<double>(dim));

  const double lr = opts.learning_rate;
  std::vector<double> grad_in(d);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    for (const auto& doc : docs) {
      for (size_t ci = 0; ci < doc.size(); ++ci) {
        const uint32_t center = doc[ci];
        double* in = &syn0[center * d];
        for (size_t xi = 0; xi < doc.size(); ++xi) {
          if (xi == ci) continue;  // window = whole path
          const uint32_t context = doc[xi];
          std::fill(grad_in.begin(), grad_in.end(), 0.0);
          for (int k = 0; k <= opts.negative_samples; ++k) {
            uint32_t target;
            double label;
            if (k == 0) {
              target = context;
              label = 1.0;
            } else {
              target = neg_table[splitmix64(rng) % neg_table.size()];
              if (target == context) continue;
              label = 0.0;
            }
            double* out = &syn1[target * d];
            double f = kernels::dot(in, out, dim);
            double sig = 1.0 / (1.0 + std::exp(-f));
            double g = (label - sig) * lr;
            for (size_t j = 0; j < d; ++j) grad_in[j] += g * out[j];
            for (size_t j = 0; j < d; ++j) out[j] += g * in[j];
          }
          for (size_t j = 0; j < d; ++j) in[j] += grad_in[j];
        }
      }
    }
  }

  FeatureModel m;
  m.mode_ = Mode::TrainedTokens;
  m.dim_ = dim;
  m.seed_ = seed;
  for (size_t i = 0; i < v; ++i) {
    std::vector<double> vec(syn0.begin() + static_cast<long>(i * d),
                            syn0.begin() + static_cast<long>((i + 1) * d));
    normalize(vec);
    m.table_.emplace(vocab[i], std::move(vec));
  }
  return m;
}

void FeatureModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write feature model: " + path);
  out.write("PVSF", 4);
  ser::put_u32(out, 1);
  ser::put_u8(out, static_cast<uint8_t>(mode_));
  ser::put_u32(out, static_cast<uint32_t>(dim_));
  ser::put_u64(out, seed_);
  // deterministic order for reproducible artifact hashes
  std::vector<const std::string*> keys;
  keys.reserve(table_.size());
  for (auto& [k, _] : table_) keys.push_back(&k);
  std::sort(keys.begin(), keys.end(), [](auto* a, auto* b) { return *a < *b; });
  ser::put_u64(out, keys.size());
  for (auto* k : keys) {
    ser::put_string(out, *k);
    for (double x : table_.at(*k)) ser::put_f64(out, x);
  }
  if (!out) throw DataError("short write on feature model: " + path);
}

FeatureModel FeatureModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature model: " + path);
  ser::expect_magic(in, "PVSF", "feature model");
  uint32_t version = ser::get_u32(in);
  if (version != 1) throw DataError("unsupported feature model version");
  FeatureModel m;
  m.mode_ = static_cast<Mode>(ser::get_u8(in));
  m.dim_ = static_cast<int>(ser::get_u32(in));
  m.seed_ = ser::get_u64(in);
  uint64_t n = ser::get_u64(in);
  for (uint64_t i = 0; i < n; ++i) {
    std::string key = ser::get_string(in);
    std::vector<double> vec(static_cast<size_t>(m.dim_));
    for (auto& x : vec) x = ser::get_f64(in);
    m.table_.emplace(std::move(key), std::move(vec));
  }
  return m;
}

}  // namespace provstream::featurizer
