#pragma once

// Stacked recurrent cell (vanilla RNN or GRU) with an additive root-context
// term on the first layer's candidate pre-activation, hand-written backward
// pass, online margin-ranking trainer, and a finite-difference gradient
// checker. All math is f64.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "provstream/featurizer.hpp"
#include "provstream/types.hpp"

namespace provstream::seqmodel {

enum class CellKind : uint8_t { Rnn = 0, Gru = 1 };

bool parse_cell_kind(std::string_view s, CellKind& out);
const char* to_string(CellKind c);

struct ModelConfig {
  int input_dim = 64;   // L
  int hidden_dim = 64;  // H
  int layers = 10;      // N
  CellKind cell = CellKind::Gru;
  double learning_rate = 0.05;
  int epochs = 5;
  int negative_samples = 5;
  double margin = 0.5;
  double clip_norm = 5.0;
  uint64_t seed = 1;
  bool use_root = true;

  void validate() const;  // L >= 8, H >= L, N >= 1
};

struct Matrix {
  int rows = 0, cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
  double* data() { return a.data(); }
  const double* data() const { return a.data(); }
  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
  bool empty() const { return a.empty(); }
  void zero() { std::fill(a.begin(), a.end(), 0.0); }
};

// One layer. GRU uses all three gate triples; RNN uses only (wn, un, bn).
struct LayerParams {
  Matrix wz, uz;
  std::vector<double> bz;
  Matrix wr, ur;
  std::vector<double> br;
  Matrix wn, un;
  std::vector<double> bn;
};

struct CellParams {
  ModelConfig cfg;
  std::vector<LayerParams> layers;
  Matrix root_mix;  // H x L, layer-1 candidate pre-activation
  Matrix out_proj;  // L x H, only when H != L (identity otherwise)

  // Weights U(-1/sqrt(H), 1/sqrt(H)); root_mix starts at zero unless
  // random_root is set (tests use a populated root_mix directly).
  static CellParams init(const ModelConfig& cfg, bool random_root = false);

  size_t param_count() const;
  uint64_t content_hash() const;
  void save(const std::string& path) const;
  void save(std::ostream& out) const;
  static CellParams load(const std::string& path);
  static CellParams load(std::istream& in);

  // All parameter tensors in a fixed order (update/clip/grad-check walk this).
  std::vector<std::pair<std::string, std::span<double>>> tensors();
};

using HiddenStack = std::vector<std::vector<double>>;  // N x H

HiddenStack zero_state(const ModelConfig& cfg);

struct LayerCache {
  std::vector<double> input, h_prev;
  std::vector<double> z, r, rh, n;  // gru intermediates
  std::vector<double> h;
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  std::vector<double> root;  // root-mean input actually used (empty if none)
  std::vector<double> y;     // projected top state, pre-normalization
  std::vector<double> e;     // unit output embedding
  double y_norm = 0.0;
};

// One step of the whole stack. h_prev/h_out are N x H; x is L; root_mean is L
// (ignored when cfg.use_root is false). embedding is the unit-normalized
// projection of the top layer. cache may be null outside training.
void cell_forward(const CellParams& p, std::span<const double> x, const HiddenStack& h_prev,
                  std::span<const double> root_mean, HiddenStack& h_out,
                  std::vector<double>& embedding, ForwardCache* cache);

struct Grads {
  std::vector<LayerParams> layers;
  Matrix root_mix;
  Matrix out_proj;

  static Grads zeros_like(const CellParams& p);
  void zero();
  std::vector<std::pair<std::string, std::span<double>>> tensors();
  double global_norm();
};

// Backward through one cached step given d(loss)/d(embedding). Parameter
// gradients accumulate into g; input-side gradients are optional (used by
// tests; training truncates at the event boundary).
void cell_backward(const CellParams& p, const ForwardCache& cache,
                   std::span<const double> d_embedding, Grads& g, std::vector<double>* d_x,
                   std::vector<double>* d_root, HiddenStack* d_h_prev);

// sum_k max(0, margin - e.pos + e.neg_k); d_e accumulated for active terms.
double margin_ranking_loss(std::span<const double> e, std::span<const double> x_pos,
                           const std::vector<std::vector<double>>& x_negs, double margin,
                           std::vector<double>* d_e);

// Scale all gradients so their global L2 norm is at most max_norm.
void clip_gradients(Grads& g, double max_norm);
void sgd_step(CellParams& p, Grads& g, double lr);

struct TrainReport {
  std::vector<double> epoch_mean_loss;
  uint64_t steps = 0;
};

// Online training over an ordered benign event window: replays the streaming
// update per epoch from a fresh dictionary and takes one truncated gradient
// step per event.
TrainReport train_params(const std::vector<Event>& events, const featurizer::FeatureModel& fm,
                         CellParams& params);

struct GradCheckReport {
  double max_rel_error = 0.0;
  double root_mix_grad_norm = 0.0;
  std::string worst_tensor;
};

// Analytic vs central finite differences over every parameter tensor for the
// one-event / one-negative loss. A large margin keeps the hinge active so the
// loss is smooth across the FD step.
GradCheckReport grad_check(const ModelConfig& cfg, uint64_t seed);

// Deterministic helpers shared by trainers and tests.
uint64_t splitmix64(uint64_t& state);
double uniform_pm(uint64_t& state, double radius);
std::vector<double> random_unit_vector(uint64_t& state, int dim);

}  // namespace provstream::seqmodel
