#include "provstream/streamer.hpp"

#include <fstream>

#include "provstream/serialize.hpp"

namespace provstream::streamer {

KindFilter KindFilter::only(EntityKind k) {
  KindFilter f{false, false, false};
  switch (k) {
    case EntityKind::Process: f.process = true; break;
    case EntityKind::File: f.file = true; break;
    case EntityKind::Socket: f.socket = true; break;
  }
  return f;
}

bool KindFilter::pass(EntityKind k) const {
  switch (k) {
    case EntityKind::Process: return process;
    case EntityKind::File: return file;
    case EntityKind::Socket: return socket;
  }
  return false;
}

StreamState::StreamState(const featurizer::FeatureModel& fm, const seqmodel::CellParams& params,
                         size_t k_roots, bool oracle_mode)
    : fm_(&fm), params_(&params), params_hash_(params.content_hash()),
      graph_(fm.dim(), k_roots, oracle_mode) {
  if (fm.dim() != params.cfg.input_dim)
    throw DimensionMismatch("feature dim does not match model input dim");
}

void StreamState::ensure_entity(uint32_t idx, const EntityDescriptor& d) {
  if (idx < entities_.size()) return;
  if (idx != entities_.size()) throw InternalError("entity index out of order");
  EntityModelState st;
  st.embedding = fm_->embed_entity(d);
  // One cell step from zero state encodes the fresh entity's own feature
  // vector; its own vector also stands in as the root context here.
  seqmodel::HiddenStack zero = seqmodel::zero_state(params_->cfg);
  std::vector<double> enc_emb;
  seqmodel::HiddenStack enc;
  seqmodel::cell_forward(*params_, st.embedding, zero, st.embedding, enc, enc_emb, nullptr);
  st.hidden = std::move(enc);
  entities_.push_back(std::move(st));
}

UpdateResult StreamState::process_event(const Event& e, StepTrace* trace) {
  auto feat = [this](const EntityDescriptor& d) { return fm_->embed_entity(d); };
  provgraph::VersionTransition tr = graph_.apply_event(e, feat);
  ensure_entity(tr.src_idx, e.src);
  ensure_entity(tr.dst_idx, e.dst);

  EntityModelState& src = entities_[tr.src_idx];
  EntityModelState& dst = entities_[tr.dst_idx];

  root_scratch_ = graph_.status(tr.dst_idx).roots.mean(fm_->dim());

  seqmodel::ForwardCache* cache = trace ? &trace->cache : nullptr;
  seqmodel::cell_forward(*params_, src.embedding, dst.hidden, root_scratch_, h_scratch_,
                         emb_scratch_, cache);
  if (trace) {
    trace->x = src.embedding;
    trace->root_mean = root_scratch_;
    trace->src_idx = tr.src_idx;
    trace->dst_idx = tr.dst_idx;
  }
  dst.hidden.swap(h_scratch_);
  dst.embedding.swap(emb_scratch_);
  dst.last_update_t = e.t;
  ++event_count_;

  UpdateResult r;
  r.dst_idx = tr.dst_idx;
  r.dst_version = tr.dst_version;
  r.versioned = tr.dst_versioned;
  r.t = e.t;
  r.dst_embedding = &dst.embedding;
  return r;
}

std::vector<SnapshotRow> StreamState::snapshot_embeddings(const KindFilter& filter) const {
  std::vector<SnapshotRow> out;
  const auto& interner = graph_.interner();
  for (uint32_t i = 0; i < entities_.size(); ++i) {
    if (!filter.pass(interner.kind(i))) continue;
    out.push_back({interner.id(i), graph_.status(i).version, entities_[i].embedding});
  }
  return out;
}

size_t StreamState::state_bytes() const {
  const auto& cfg = params_->cfg;
  const size_t per_entity = sizeof(EntityModelState) +
                            sizeof(double) * static_cast<size_t>(cfg.input_dim) +
                            sizeof(double) * static_cast<size_t>(cfg.hidden_dim) *
                                static_cast<size_t>(cfg.layers);
  return entities_.size() * per_entity + graph_.state_bytes();
}

uint64_t StreamState::digest() const {
  ser::Fnv64 h;
  h.update_u64(event_count_);
  h.update_u64(entities_.size());
  const auto& interner = graph_.interner();
  for (uint32_t i = 0; i < entities_.size(); ++i) {
    const EntityModelState& st = entities_[i];
    h.update_str(interner.id(i));
    h.update_u64(static_cast<uint64_t>(interner.kind(i)));
    const auto& ns = graph_.status(i);
    h.update_u64(ns.version);
    h.update_u64(ns.has_outgoing ? 1 : 0);
    h.update_u64(ns.roots.count);
    for (double v : ns.roots.sum) h.update_f64(v);
    for (uint32_t id : ns.roots.ids) h.update_u64(id);
    for (double v : st.embedding) h.update_f64(v);
    for (const auto& layer : st.hidden)
      for (double v : layer) h.update_f64(v);
    h.update_u64(static_cast<uint64_t>(st.last_update_t));
  }
  return h.digest();
}

void StreamState::save_checkpoint(std::ostream& out, const ingest::EventReader::Position& pos) const {
  out.write("PVSC", 4);
  ser::put_u32(out, 1);
  ser::put_u64(out, params_hash_);
  ser::put_u64(out, event_count_);
  graph_.save(out);
  ser::put_u64(out, entities_.size());
  for (const EntityModelState& st : entities_) {
    ser::put_f64_vec(out, st.embedding);
    ser::put_u64(out, st.hidden.size());
    for (const auto& layer : st.hidden) ser::put_f64_vec(out, layer);
    ser::put_i64(out, st.last_update_t);
  }
  ser::put_u64(out, pos.records_consumed);
  ser::put_i64(out, pos.max_seen_t);
  ser::put_u64(out, pos.arrival_seq);
  ser::put_u64(out, pos.pending.size());
  for (const Event& e : pos.pending) ser::put_string(out, ingest::serialize_jsonl(e));
}

void StreamState::save_checkpoint(const std::string& path,
                                  const ingest::EventReader::Position& pos) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  save_checkpoint(out, pos);
  if (!out) throw DataError("short write on checkpoint: " + path);
}

ingest::EventReader::Position StreamState::load_checkpoint(std::istream& in) {
  ser::expect_magic(in, "PVSC", "checkpoint");
  uint32_t version = ser::get_u32(in);
  if (version != 1) throw DataError("unsupported checkpoint version");
  uint64_t ph = ser::get_u64(in);
  if (ph != params_hash_)
    throw DataError("checkpoint was written with different model parameters");
  event_count_ = ser::get_u64(in);
  graph_.load(in);
  uint64_t n = ser::get_u64(in);
  entities_.assign(n, EntityModelState{});
  for (uint64_t i = 0; i < n; ++i) {
    EntityModelState& st = entities_[i];
    st.embedding = ser::get_f64_vec(in);
    uint64_t layers = ser::get_u64(in);
    st.hidden.resize(layers);
    for (auto& layer : st.hidden) layer = ser::get_f64_vec(in);
    st.last_update_t = ser::get_i64(in);
  }
  ingest::EventReader::Position pos;
  pos.records_consumed = ser::get_u64(in);
  pos.max_seen_t = ser::get_i64(in);
  pos.arrival_seq = ser::get_u64(in);
  uint64_t pending = ser::get_u64(in);
  for (uint64_t i = 0; i < pending; ++i) {
    std::string line = ser::get_string(in);
    pos.pending.push_back(ingest::parse_line(line, ingest::FormatId::NativeJsonl, 0));
  }
  return pos;
}

ingest::EventReader::Position StreamState::load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  return load_checkpoint(in);
}

}  // namespace provstream::streamer
