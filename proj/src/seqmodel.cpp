#include "provstream/seqmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "provstream/kernels.hpp"
#include "provstream/serialize.hpp"

namespace provstream::seqmodel {

bool parse_cell_kind(std::string_view s, CellKind& out) {
  if (s == "gru" || s == "Gru" || s == "GRU") out = CellKind::Gru;
  else if (s == "rnn" || s == "Rnn" || s == "RNN") out = CellKind::Rnn;
  else return false;
  return true;
}

const char* to_string(CellKind c) { return c == CellKind::Gru ? "gru" : "rnn"; }

void ModelConfig::validate() const {
  if (input_dim < 8) throw UsageError("input dim must be >= 8");
  if (hidden_dim < input_dim) throw UsageError("hidden dim must be >= input dim");
  if (layers < 1) throw UsageError("layer count must be >= 1");
  if (epochs < 1) throw UsageError("epochs must be >= 1");
  if (negative_samples < 1) throw UsageError("negative samples must be >= 1");
  if (learning_rate <= 0) throw UsageError("learning rate must be > 0");
}

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double uniform_pm(uint64_t& state, double radius) {
  return (static_cast<double>(splitmix64(state) >> 11) / 9007199254740992.0 * 2.0 - 1.0) * radius;
}

std::vector<double> random_unit_vector(uint64_t& state, int dim) {
  std::vector<double> v(static_cast<size_t>(dim));
  for (double& x : v) x = uniform_pm(state, 1.0);
  featurizer::normalize(v);
  return v;
}

namespace {

void fill_uniform(Matrix& m, uint64_t& state, double radius) {
  for (double& x : m.a) x = uniform_pm(state, radius);
}


inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

CellParams CellParams::init(const ModelConfig& cfg, bool random_root) {
  cfg.validate();
  CellParams p;
  p.cfg = cfg;
  uint64_t rng = cfg.seed ? cfg.seed : 0x9d8e7f6a5b4c3d2eull;
  const double radius = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
  p.layers.resize(static_cast<size_t>(cfg.layers));
  for (int l = 0; l < cfg.layers; ++l) {
    const int in_dim = l == 0 ? cfg.input_dim : cfg.hidden_dim;
    LayerParams& lp = p.layers[static_cast<size_t>(l)];
    auto make_gate = [&](Matrix& w, Matrix& u, std::vector<double>& b) {
      w = Matrix(cfg.hidden_dim, in_dim);
      u = Matrix(cfg.hidden_dim, cfg.hidden_dim);
      b.assign(static_cast<size_t>(cfg.hidden_dim), 0.0);
      fill_uniform(w, rng, radius);
      fill_uniform(u, rng, radius);
    };
    if (cfg.cell == CellKind::Gru) {
      make_gate(lp.wz, lp.uz, lp.bz);
      make_gate(lp.wr, lp.ur, lp.br);
    }
    make_gate(lp.wn, lp.un, lp.bn);
  }
  p.root_mix = Matrix(cfg.hidden_dim, cfg.input_dim);
  if (random_root) fill_uniform(p.root_mix, rng, radius);
  if (cfg.hidden_dim != cfg.input_dim) {
    p.out_proj = Matrix(cfg.input_dim, cfg.hidden_dim);
    fill_uniform(p.out_proj, rng, radius);
  }
  return p;
}

size_t CellParams::param_count() const {
  size_t n = 0;
  for (const LayerParams& lp : layers)
    n += lp.wz.a.size() + lp.uz.a.size() + lp.bz.size() + lp.wr.a.size() + lp.ur.a.size() +
         lp.br.size() + lp.wn.a.size() + lp.un.a.size() + lp.bn.size();
  return n + root_mix.a.size() + out_proj.a.size();
}

std::vector<std::pair<std::string, std::span<double>>> CellParams::tensors() {
  std::vector<std::pair<std::string, std::span<double>>> out;
  for (size_t l = 0; l < layers.size(); ++l) {
    LayerParams& lp = layers[l];
    std::string pre = "layer" + std::to_string(l) + ".";
    auto add = [&](const char* name, std::vector<double>& v) {
      if (!v.empty()) out.emplace_back(pre + name, std::span<double>(v));
    };
    add("wz", lp.wz.a);
    add("uz", lp.uz.a);
    add("bz", lp.bz);
    add("wr", lp.wr.a);
    add("ur", lp.ur.a);
    add("br", lp.br);
    add("wn", lp.wn.a);
    add("un", lp.un.a);
    add("bn", lp.bn);
  }
  if (!root_mix.a.empty()) out.emplace_back("root_mix", std::span<double>(root_mix.a));
  if (!out_proj.a.empty()) out.emplace_back("out_proj", std::span<double>(out_proj.a));
  return out;
}

uint64_t CellParams::content_hash() const {
  std::ostringstream buf(std::ios::binary);
  save(buf);
  std::string s = buf.str();
  ser::Fnv64 h;
  h.update(s.data(), s.size());
  return h.digest();
}

void CellParams::save(std::ostream& out) const {
  out.write("PVSP", 4);
  ser::put_u32(out, 1);
  ser::put_u32(out, static_cast<uint32_t>(cfg.input_dim));
  ser::put_u32(out, static_cast<uint32_t>(cfg.hidden_dim));
  ser::put_u32(out, static_cast<uint32_t>(cfg.layers));
  ser::put_u8(out, static_cast<uint8_t>(cfg.cell));
  ser::put_f64(out, cfg.learning_rate);
  ser::put_u32(out, static_cast<uint32_t>(cfg.epochs));
  ser::put_u32(out, static_cast<uint32_t>(cfg.negative_samples));
  ser::put_f64(out, cfg.margin);
  ser::put_f64(out, cfg.clip_norm);
  ser::put_u64(out, cfg.seed);
  ser::put_u8(out, cfg.use_root ? 1 : 0);
  auto write_vec = [&](const std::vector<double>& v) {
    for (double x : v) ser::put_f64(out, x);
  };
  for (const LayerParams& lp : layers) {
    write_vec(lp.wz.a);
    write_vec(lp.uz.a);
    write_vec(lp.bz);
    write_vec(lp.wr.a);
    write_vec(lp.ur.a);
    write_vec(lp.br);
    write_vec(lp.wn.a);
    write_vec(lp.un.a);
    write_vec(lp.bn);
  }
  write_vec(root_mix.a);
  write_vec(out_proj.a);
}

void CellParams::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model parameters: " + path);
  save(out);
  if (!out) throw DataError("short write on model parameters: " + path);
}

CellParams CellParams::load(std::istream& in) {
  ser::expect_magic(in, "PVSP", "model parameter");
  uint32_t version = ser::get_u32(in);
  if (version != 1) throw DataError("unsupported model parameter version");
  ModelConfig cfg;
  cfg.input_dim = static_cast<int>(ser::get_u32(in));
  cfg.hidden_dim = static_cast<int>(ser::get_u32(in));
  cfg.layers = static_cast<int>(ser::get_u32(in));
  cfg.cell = static_cast<CellKind>(ser::get_u8(in));
  cfg.learning_rate = ser::get_f64(in);
  cfg.epochs = static_cast<int>(ser::get_u32(in));
  cfg.negative_samples = static_cast<int>(ser::get_u32(in));
  cfg.margin = ser::get_f64(in);
  cfg.clip_norm = ser::get_f64(in);
  cfg.seed = ser::get_u64(in);
  cfg.use_root = ser::get_u8(in) != 0;
  CellParams p = CellParams::init(cfg);
  auto read_vec = [&](std::vector<double>& v) {
    for (double& x : v) x = ser::get_f64(in);
  };
  for (LayerParams& lp : p.layers) {
    read_vec(lp.wz.a);
    read_vec(lp.uz.a);
    read_vec(lp.bz);
    read_vec(lp.wr.a);
    read_vec(lp.ur.a);
    read_vec(lp.br);
    read_vec(lp.wn.a);
    read_vec(lp.un.a);
    read_vec(lp.bn);
  }
  read_vec(p.root_mix.a);
  read_vec(p.out_proj.a);
  return p;
}

CellParams CellParams::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model parameters: " + path);
  return load(in);
}

HiddenStack zero_state(const ModelConfig& cfg) {
  return HiddenStack(static_cast<size_t>(cfg.layers),
                     std::vector<double>(static_cast<size_t>(cfg.hidden_dim), 0.0));
}

void cell_forward(const CellParams& p, std::span<const double> x, const HiddenStack& h_prev,
                  std::span<const double> root_mean, HiddenStack& h_out,
                  std::vector<double>& embedding, ForwardCache* cache) {
  const ModelConfig& cfg = p.cfg;
  const int H = cfg.hidden_dim;
  const int L = cfg.input_dim;
  if (static_cast<int>(x.size()) != L) throw DimensionMismatch("cell_forward: input dim");
  if (h_prev.size() != static_cast<size_t>(cfg.layers))
    throw DimensionMismatch("cell_forward: layer count");
  for (const auto& h : h_prev)
    if (static_cast<int>(h.size()) != H) throw DimensionMismatch("cell_forward: hidden dim");
  const bool with_root = cfg.use_root && !root_mean.empty();
  if (with_root && static_cast<int>(root_mean.size()) != L)
    throw DimensionMismatch("cell_forward: root dim");

  h_out.resize(h_prev.size());
  if (cache) {
    cache->layers.resize(h_prev.size());
    cache->root.assign(root_mean.begin(), root_mean.end());
  }

  std::vector<double> root_term;
  if (with_root) {
    root_term.resize(static_cast<size_t>(H));
    kernels::matvec(p.root_mix.data(), root_mean.data(), root_term.data(), H, L);
  }

  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> az(static_cast<size_t>(H)), ar(static_cast<size_t>(H)),
      an(static_cast<size_t>(H)), tmp(static_cast<size_t>(H));
  for (size_t l = 0; l < h_prev.size(); ++l) {
    const LayerParams& lp = p.layers[l];
    const int in_dim = static_cast<int>(cur.size());
    const std::vector<double>& hp = h_prev[l];
    std::vector<double>& h = h_out[l];
    h.resize(static_cast<size_t>(H));
    LayerCache* lc = cache ? &cache->layers[l] : nullptr;
    if (lc) {
      lc->input = cur;
      lc->h_prev = hp;
    }
    if (cfg.cell == CellKind::Gru) {
      kernels::matvec(lp.wz.data(), cur.data(), az.data(), H, in_dim);
      kernels::matvec(lp.uz.data(), hp.data(), tmp.data(), H, H);
      for (int i = 0; i < H; ++i) az[i] = sigmoid(az[i] + tmp[i] + lp.bz[i]);

      kernels::matvec(lp.wr.data(), cur.data(), ar.data(), H, in_dim);
      kernels::matvec(lp.ur.data(), hp.data(), tmp.data(), H, H);
      for (int i = 0; i < H; ++i) ar[i] = sigmoid(ar[i] + tmp[i] + lp.br[i]);

      std::vector<double> rh(static_cast<size_t>(H));
      for (int i = 0; i < H; ++i) rh[i] = ar[i] * hp[i];
      kernels::matvec(lp.wn.data(), cur.data(), an.data(), H, in_dim);
      kernels::matvec(lp.un.data(), rh.data(), tmp.data(), H, H);
      for (int i = 0; i < H; ++i) {
        double a = an[i] + tmp[i] + lp.bn[i];
        if (l == 0 && with_root) a += root_term[static_cast<size_t>(i)];
        an[i] = std::tanh(a);
      }
      for (int i = 0; i < H; ++i) h[i] = (1.0 - az[i]) * an[i] + az[i] * hp[i];
      if (lc) {
        lc->z = az;
        lc->r = ar;
        lc->rh = std::move(rh);
        lc->n = an;
        lc->h = h;
      }
    } else {
      kernels::matvec(lp.wn.data(), cur.data(), an.data(), H, in_dim);
      kernels::matvec(lp.un.data(), hp.data(), tmp.data(), H, H);
      for (int i = 0; i < H; ++i) {
        double a = an[i] + tmp[i] + lp.bn[i];
        if (l == 0 && with_root) a += root_term[static_cast<size_t>(i)];
        h[i] = std::tanh(a);
      }
      if (lc) lc->h = h;
    }
    cur = h;
  }

  const std::vector<double>& top = h_out.back();
  std::vector<double> y;
  if (p.out_proj.empty()) {
    y = top;
  } else {
    y.resize(static_cast<size_t>(L));
    kernels::matvec(p.out_proj.data(), top.data(), y.data(), L, H);
  }
  double n2 = kernels::dot(y.data(), y.data(), static_cast<int>(y.size()));
  double norm = std::sqrt(n2);
  embedding = y;
  if (norm > 0.0)
    for (double& v : embedding) v /= norm;
  if (cache) {
    cache->y = std::move(y);
    cache->e = embedding;
    cache->y_norm = norm;
  }
}

Grads Grads::zeros_like(const CellParams& p) {
  Grads g;
  g.layers.resize(p.layers.size());
  for (size_t l = 0; l < p.layers.size(); ++l) {
    const LayerParams& lp = p.layers[l];
    LayerParams& gl = g.layers[l];
    auto like = [](const Matrix& m) { return Matrix(m.rows, m.cols); };
    gl.wz = like(lp.wz);
    gl.uz = like(lp.uz);
    gl.bz.assign(lp.bz.size(), 0.0);
    gl.wr = like(lp.wr);
    gl.ur = like(lp.ur);
    gl.br.assign(lp.br.size(), 0.0);
    gl.wn = like(lp.wn);
    gl.un = like(lp.un);
    gl.bn.assign(lp.bn.size(), 0.0);
  }
  g.root_mix = Matrix(p.root_mix.rows, p.root_mix.cols);
  if (!p.out_proj.empty()) g.out_proj = Matrix(p.out_proj.rows, p.out_proj.cols);
  return g;
}

void Grads::zero() {
  for (LayerParams& gl : layers) {
    gl.wz.zero();
    gl.uz.zero();
    std::fill(gl.bz.begin(), gl.bz.end(), 0.0);
    gl.wr.zero();
    gl.ur.zero();
    std::fill(gl.br.begin(), gl.br.end(), 0.0);
    gl.wn.zero();
    gl.un.zero();
    std::fill(gl.bn.begin(), gl.bn.end(), 0.0);
  }
  root_mix.zero();
  out_proj.zero();
}

std::vector<std::pair<std::string, std::span<double>>> Grads::tensors() {
  std::vector<std::pair<std::string, std::span<double>>> out;
  for (size_t l = 0; l < layers.size(); ++l) {
    LayerParams& lp = layers[l];
    std::string pre = "layer" + std::to_string(l) + ".";
    auto add = [&](const char* name, std::vector<double>& v) {
      if (!v.empty()) out.emplace_back(pre + name, std::span<double>(v));
    };
    add("wz", lp.wz.a);
    add("uz", lp.uz.a);
    add("bz", lp.bz);
    add("wr", lp.wr.a);
    add("ur", lp.ur.a);
    add("br", lp.br);
    add("wn", lp.wn.a);
    add("un", lp.un.a);
    add("bn", lp.bn);
  }
  if (!root_mix.a.empty()) out.emplace_back("root_mix", std::span<double>(root_mix.a));
  if (!out_proj.a.empty()) out.emplace_back("out_proj", std::span<double>(out_proj.a));
  return out;
}

double Grads::global_norm() {
  double s = 0.0;
  for (auto& [name, t] : tensors())
    for (double v : t) s += v * v;
  return std::sqrt(s);
}

void cell_backward(const CellParams& p, const ForwardCache& cache,
                   std::span<const double> d_embedding, Grads& g, std::vector<double>* d_x,
                   std::vector<double>* d_root, HiddenStack* d_h_prev) {
  const ModelConfig& cfg = p.cfg;
  const int H = cfg.hidden_dim;
  const int L = cfg.input_dim;
  const size_t nl = cache.layers.size();
  const bool with_root = !cache.root.empty() && cfg.use_root;

  // normalize: e = y/|y|; dy = (de - e (e . de)) / |y|
  std::vector<double> dy(cache.y.size(), 0.0);
  if (cache.y_norm > 0.0) {
    double edot = kernels::dot(cache.e.data(), d_embedding.data(), static_cast<int>(cache.e.size()));
    for (size_t i = 0; i < dy.size(); ++i)
      dy[i] = (d_embedding[i] - cache.e[i] * edot) / cache.y_norm;
  }

  std::vector<double> dh_top(static_cast<size_t>(H), 0.0);
  if (p.out_proj.empty()) {
    dh_top = dy;
  } else {
    kernels::matvec_t_acc(p.out_proj.data(), dy.data(), dh_top.data(), L, H);
    kernels::ger_acc(g.out_proj.data(), dy.data(), cache.layers.back().h.data(), L, H);
  }

  if (d_root) d_root->assign(static_cast<size_t>(L), 0.0);
  if (d_h_prev) {
    d_h_prev->resize(nl);
    for (auto& v : *d_h_prev) v.assign(static_cast<size_t>(H), 0.0);
  }

  std::vector<double> dh = dh_top;
  std::vector<double> d_input;
  for (size_t li = nl; li-- > 0;) {
    const LayerParams& lp = p.layers[li];
    LayerParams& gl = g.layers[li];
    const LayerCache& lc = cache.layers[li];
    const int in_dim = static_cast<int>(lc.input.size());
    d_input.assign(static_cast<size_t>(in_dim), 0.0);
    std::vector<double> dhp(static_cast<size_t>(H), 0.0);

    if (cfg.cell == CellKind::Gru) {
      std::vector<double> dan(static_cast<size_t>(H)), daz(static_cast<size_t>(H)),
          dar(static_cast<size_t>(H)), drh(static_cast<size_t>(H), 0.0);
      for (int i = 0; i < H; ++i) {
        const double dz = dh[i] * (lc.h_prev[i] - lc.n[i]);
        const double dn = dh[i] * (1.0 - lc.z[i]);
        dhp[i] += dh[i] * lc.z[i];
        dan[i] = dn * (1.0 - lc.n[i] * lc.n[i]);
        daz[i] = dz * lc.z[i] * (1.0 - lc.z[i]);
      }
      kernels::ger_acc(gl.wn.data(), dan.data(), lc.input.data(), H, in_dim);
      kernels::ger_acc(gl.un.data(), dan.data(), lc.rh.data(), H, H);
      for (int i = 0; i < H; ++i) gl.bn[i] += dan[i];
      kernels::matvec_t_acc(lp.wn.data(), dan.data(), d_input.data(), H, in_dim);
      kernels::matvec_t_acc(lp.un.data(), dan.data(), drh.data(), H, H);
      for (int i = 0; i < H; ++i) {
        dar[i] = drh[i] * lc.h_prev[i] * lc.r[i] * (1.0 - lc.r[i]);
        dhp[i] += drh[i] * lc.r[i];
      }
      kernels::ger_acc(gl.wz.data(), daz.data(), lc.input.data(), H, in_dim);
      kernels::ger_acc(gl.uz.data(), daz.data(), lc.h_prev.data(), H, H);
      for (int i = 0; i < H; ++i) gl.bz[i] += daz[i];
      kernels::matvec_t_acc(lp.wz.data(), daz.data(), d_input.data(), H, in_dim);
      kernels::matvec_t_acc(lp.uz.data(), daz.data(), dhp.data(), H, H);

      kernels::ger_acc(gl.wr.data(), dar.data(), lc.input.data(), H, in_dim);
      kernels::ger_acc(gl.ur.data(), dar.data(), lc.h_prev.data(), H, H);
      for (int i = 0; i < H; ++i) gl.br[i] += dar[i];
      kernels::matvec_t_acc(lp.wr.data(), dar.data(), d_input.data(), H, in_dim);
      kernels::matvec_t_acc(lp.ur.data(), dar.data(), dhp.data(), H, H);

      if (li == 0 && with_root) {
        kernels::ger_acc(g.root_mix.data(), dan.data(), cache.root.data(), H, L);
        if (d_root) kernels::matvec_t_acc(p.root_mix.data(), dan.data(), d_root->data(), H, L);
      }
    } else {
      std::vector<double> da(static_cast<size_t>(H));
      for (int i = 0; i < H; ++i) da[i] = dh[i] * (1.0 - lc.h[i] * lc.h[i]);
      kernels::ger_acc(gl.wn.data(), da.data(), lc.input.data(), H, in_dim);
      kernels::ger_acc(gl.un.data(), da.data(), lc.h_prev.data(), H, H);
      for (int i = 0; i < H; ++i) gl.bn[i] += da[i];
      kernels::matvec_t_acc(lp.wn.data(), da.data(), d_input.data(), H, in_dim);
      kernels::matvec_t_acc(lp.un.data(), da.data(), dhp.data(), H, H);
      if (li == 0 && with_root) {
        kernels::ger_acc(g.root_mix.data(), da.data(), cache.root.data(), H, L);
        if (d_root) kernels::matvec_t_acc(p.root_mix.data(), da.data(), d_root->data(), H, L);
      }
    }

    if (d_h_prev)
      for (int i = 0; i < H; ++i) (*d_h_prev)[li][static_cast<size_t>(i)] += dhp[i];
    if (li == 0) {
      if (d_x) *d_x = d_input;
    } else {
      dh = d_input;  // input of layer li is the output of layer li-1
    }
  }
}

double margin_ranking_loss(std::span<const double> e, std::span<const double> x_pos,
                           const std::vector<std::vector<double>>& x_negs, double margin,
                           std::vector<double>* d_e) {
  const int dim = static_cast<int>(e.size());
  const double s_pos = kernels::dot(e.data(), x_pos.data(), dim);
  double loss = 0.0;
  if (d_e) d_e->assign(e.size(), 0.0);
  for (const auto& xn : x_negs) {
    const double s_neg = kernels::dot(e.data(), xn.data(), dim);
    const double v = margin - s_pos + s_neg;
    if (v > 0.0) {
      loss += v;
      if (d_e)
        for (int i = 0; i < dim; ++i) (*d_e)[static_cast<size_t>(i)] += xn[static_cast<size_t>(i)] - x_pos[static_cast<size_t>(i)];
    }
  }
  return loss;
}

void clip_gradients(Grads& g, double max_norm) {
  double norm = g.global_norm();
  if (norm <= max_norm || norm == 0.0) return;
  double scale = max_norm / norm;
  for (auto& [name, t] : g.tensors())
    for (double& v : t) v *= scale;
}

void sgd_step(CellParams& p, Grads& g, double lr) {
  auto pt = p.tensors();
  auto gt = g.tensors();
  if (pt.size() != gt.size()) throw InternalError("parameter/gradient tensor mismatch");
  for (size_t i = 0; i < pt.size(); ++i) {
    auto& pv = pt[i].second;
    auto& gv = gt[i].second;
    for (size_t j = 0; j < pv.size(); ++j) pv[j] -= lr * gv[j];
  }
}

GradCheckReport grad_check(const ModelConfig& cfg_in, uint64_t seed) {
  ModelConfig cfg = cfg_in;
  cfg.seed = seed;
  cfg.use_root = true;
  CellParams params = CellParams::init(cfg, /*random_root=*/true);

  uint64_t rng = seed * 0x2545f4914f6cdd1dull + 0x9e3779b97f4a7c15ull;
  std::vector<double> x = random_unit_vector(rng, cfg.input_dim);
  std::vector<double> x_pos = random_unit_vector(rng, cfg.input_dim);
  std::vector<std::vector<double>> x_negs{random_unit_vector(rng, cfg.input_dim)};
  std::vector<double> root = random_unit_vector(rng, cfg.input_dim);
  HiddenStack h_prev = zero_state(cfg);
  for (auto& h : h_prev)
    for (double& v : h) v = uniform_pm(rng, 0.5);

  // Hinge kept strictly active across the FD step so the loss is smooth.
  const double margin = 10.0;

  auto loss_of = [&](CellParams& p) {
    HiddenStack h_out;
    std::vector<double> e;
    cell_forward(p, x, h_prev, root, h_out, e, nullptr);
    return margin_ranking_loss(e, x_pos, x_negs, margin, nullptr);
  };

  ForwardCache cache;
  HiddenStack h_out;
  std::vector<double> e;
  cell_forward(params, x, h_prev, root, h_out, e, &cache);
  std::vector<double> d_e;
  margin_ranking_loss(e, x_pos, x_negs, margin, &d_e);
  Grads grads = Grads::zeros_like(params);
  cell_backward(params, cache, d_e, grads, nullptr, nullptr, nullptr);

  GradCheckReport rep;
  const double eps = 1e-6;
  auto pt = params.tensors();
  auto gt = grads.tensors();
  for (size_t ti = 0; ti < pt.size(); ++ti) {
    auto& [name, pspan] = pt[ti];
    auto& gspan = gt[ti].second;
    for (size_t j = 0; j < pspan.size(); ++j) {
      const double saved = pspan[j];
      pspan[j] = saved + eps;
      const double lp = loss_of(params);
      pspan[j] = saved - eps;
      const double lm = loss_of(params);
      pspan[j] = saved;
      const double fd = (lp - lm) / (2.0 * eps);
      const double an = gspan[j];
      const double rel = std::abs(an - fd) / std::max({1.0, std::abs(an), std::abs(fd)});
      if (rel > rep.max_rel_error) {
        rep.max_rel_error = rel;
        rep.worst_tensor = name;
      }
    }
    if (name == "root_mix") {
      double s = 0.0;
      for (double v : gspan) s += v * v;
      rep.root_mix_grad_norm = std::sqrt(s);
    }
  }
  return rep;
}

}  // namespace provstream::seqmodel
