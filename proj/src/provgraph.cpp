#include "provstream/provgraph.hpp"

#include <algorithm>
#include <deque>
#include <limits>

#include "provstream/serialize.hpp"

namespace provstream::provgraph {

uint32_t Interner::intern(const EntityDescriptor& d) {
  auto it = index_.find(d.id);
  if (it != index_.end()) return it->second;
  uint32_t idx = static_cast<uint32_t>(ids_.size());
  ids_.push_back(d.id);
  kinds_.push_back(d.kind);
  index_.emplace(d.id, idx);
  return idx;
}

std::optional<uint32_t> Interner::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Interner::save(std::ostream& out) const {
  ser::put_u64(out, ids_.size());
  for (size_t i = 0; i < ids_.size(); ++i) {
    ser::put_string(out, ids_[i]);
    ser::put_u8(out, static_cast<uint8_t>(kinds_[i]));
  }
}

void Interner::load(std::istream& in) {
  uint64_t n = ser::get_u64(in);
  ids_.clear();
  kinds_.clear();
  index_.clear();
  for (uint64_t i = 0; i < n; ++i) {
    std::string id = ser::get_string(in);
    EntityKind k = static_cast<EntityKind>(ser::get_u8(in));
    index_.emplace(id, static_cast<uint32_t>(ids_.size()));
    ids_.push_back(std::move(id));
    kinds_.push_back(k);
  }
}

bool RootSummary::contains(uint32_t idx) const {
  return std::find(ids.begin(), ids.end(), idx) != ids.end();
}

std::vector<double> RootSummary::mean(int dim) const {
  std::vector<double> m(static_cast<size_t>(dim), 0.0);
  if (count == 0 || sum.empty()) return m;
  for (int i = 0; i < dim; ++i) m[static_cast<size_t>(i)] = sum[static_cast<size_t>(i)] / static_cast<double>(count);
  return m;
}

void merge_roots(RootSummary& dst, const RootSummary& src,
                 const std::function<const std::vector<double>&(uint32_t)>& root_vec,
                 size_t cap) {
  if (src.count == 0) return;
  if (dst.sum.empty() && !src.sum.empty()) dst.sum.assign(src.sum.size(), 0.0);

  uint64_t added = 0;
  for (uint32_t id : src.ids) {
    if (dst.contains(id)) continue;
    const std::vector<double>& v = root_vec(id);
    if (dst.sum.empty()) dst.sum.assign(v.size(), 0.0);
    for (size_t i = 0; i < v.size(); ++i) dst.sum[i] += v[i];
    ++added;
    if (dst.ids.size() < cap) dst.ids.push_back(id);
  }
  // Roots src absorbed past its id cap cannot be deduplicated; fold in their
  // residual contribution as a multiset.
  if (src.count > src.ids.size()) {
    std::vector<double> residual = src.sum;
    for (uint32_t id : src.ids) {
      const std::vector<double>& v = root_vec(id);
      for (size_t i = 0; i < v.size(); ++i) residual[i] -= v[i];
    }
    for (size_t i = 0; i < residual.size(); ++i) dst.sum[i] += residual[i];
    added += src.count - src.ids.size();
  }
  dst.count += added;
}

StreamingGraph::StreamingGraph(int feature_dim, size_t k_roots, bool oracle_mode)
    : dim_(feature_dim), k_roots_(k_roots) {
  if (oracle_mode) oracle_ = std::make_unique<MaterializedGraph>();
}

const std::vector<double>& StreamingGraph::root_vector(uint32_t idx) const {
  auto it = root_vecs_.find(idx);
  if (it == root_vecs_.end()) throw InternalError("missing root vector");
  return it->second;
}

const MaterializedGraph& StreamingGraph::oracle() const {
  if (!oracle_) throw UsageError("oracle mode is disabled");
  return *oracle_;
}

VersionTransition StreamingGraph::apply_event(const Event& e, const FeatureFn& feat) {
  VersionTransition tr;
  tr.src_idx = interner_.intern(e.src);
  tr.src_is_new = tr.src_idx >= status_.size();
  if (tr.src_is_new) status_.emplace_back();
  tr.dst_idx = interner_.intern(e.dst);
  tr.dst_is_new = tr.dst_idx >= status_.size();
  if (tr.dst_is_new) status_.emplace_back();

  NodeStatus& src = status_[tr.src_idx];
  NodeStatus& dst = status_[tr.dst_idx];

  // A fresh entity whose first appearance is as a source is its own root.
  if (tr.src_is_new) {
    std::vector<double> v = feat(e.src);
    src.roots.sum = v;
    src.roots.count = 1;
    src.roots.ids = {tr.src_idx};
    root_vecs_.emplace(tr.src_idx, std::move(v));
  }

  if (dst.has_outgoing) {
    ++dst.version;
    dst.has_outgoing = false;
    tr.dst_versioned = true;
  }

  auto vec_of = [this](uint32_t idx) -> const std::vector<double>& { return root_vector(idx); };
  merge_roots(dst.roots, src.roots, vec_of, k_roots_);
  src.has_outgoing = true;

  tr.src_version = src.version;
  tr.dst_version = dst.version;

  if (oracle_) {
    VersionedNode sn{tr.src_idx, src.version};
    VersionedNode dn{tr.dst_idx, dst.version};
    oracle_->note_node(sn);
    oracle_->note_node(dn);
    oracle_->add_edge(sn, dn, e.rel, e.t);
  }
  return tr;
}

size_t StreamingGraph::state_bytes() const {
  // Per entity: version + flag + root summary (sum vector, count, id slots).
  size_t per_entity = sizeof(NodeStatus) + sizeof(double) * static_cast<size_t>(dim_) +
                      sizeof(uint32_t) * k_roots_;
  size_t roots = 0;
  for (auto& [idx, v] : root_vecs_) roots += sizeof(uint32_t) + sizeof(double) * v.size();
  return status_.size() * per_entity + roots;
}

void StreamingGraph::save(std::ostream& out) const {
  ser::put_u32(out, static_cast<uint32_t>(dim_));
  ser::put_u64(out, k_roots_);
  interner_.save(out);
  ser::put_u64(out, status_.size());
  for (const NodeStatus& s : status_) {
    ser::put_u64(out, s.version);
    ser::put_u8(out, s.has_outgoing ? 1 : 0);
    ser::put_f64_vec(out, s.roots.sum);
    ser::put_u64(out, s.roots.count);
    ser::put_u64(out, s.roots.ids.size());
    for (uint32_t id : s.roots.ids) ser::put_u32(out, id);
  }
  ser::put_u64(out, root_vecs_.size());
  // sorted for byte-stable output
  std::vector<uint32_t> keys;
  keys.reserve(root_vecs_.size());
  for (auto& [k, _] : root_vecs_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  for (uint32_t k : keys) {
    ser::put_u32(out, k);
    ser::put_f64_vec(out, root_vecs_.at(k));
  }
}

void StreamingGraph::load(std::istream& in) {
  dim_ = static_cast<int>(ser::get_u32(in));
  k_roots_ = ser::get_u64(in);
  interner_.load(in);
  uint64_t n = ser::get_u64(in);
  status_.assign(n, NodeStatus{});
  for (uint64_t i = 0; i < n; ++i) {
    NodeStatus& s = status_[i];
    s.version = ser::get_u64(in);
    s.has_outgoing = ser::get_u8(in) != 0;
    s.roots.sum = ser::get_f64_vec(in);
    s.roots.count = ser::get_u64(in);
    uint64_t m = ser::get_u64(in);
    s.roots.ids.resize(m);
    for (auto& id : s.roots.ids) id = ser::get_u32(in);
  }
  root_vecs_.clear();
  uint64_t r = ser::get_u64(in);
  for (uint64_t i = 0; i < r; ++i) {
    uint32_t k = ser::get_u32(in);
    root_vecs_.emplace(k, ser::get_f64_vec(in));
  }
}

void MaterializedGraph::note_node(VersionedNode n) { nodes_.insert(n); }

void MaterializedGraph::add_edge(VersionedNode src, VersionedNode dst, Relation rel, Timestamp t) {
  size_t idx = edges_.size();
  edges_.push_back({src, dst, rel, t});
  nodes_.insert(src);
  nodes_.insert(dst);
  in_edges_[dst].push_back(idx);
  out_edges_[src].push_back(idx);
}

MaterializedGraph::Trace MaterializedGraph::backward_trace(VersionedNode n) const {
  if (!nodes_.count(n)) throw DataError("backward_trace: unknown node");
  Trace tr;
  std::deque<VersionedNode> work{n};
  tr.nodes.insert(n);
  while (!work.empty()) {
    VersionedNode cur = work.front();
    work.pop_front();
    auto visit = [&](VersionedNode parent) {
      if (tr.nodes.insert(parent).second) work.push_back(parent);
    };
    auto it = in_edges_.find(cur);
    if (it != in_edges_.end())
      for (size_t ei : it->second) visit(edges_[ei].src);
    if (cur.version > 0) {
      VersionedNode prev{cur.entity, cur.version - 1};
      if (nodes_.count(prev)) visit(prev);
    }
  }
  for (const Edge& e : edges_)
    if (tr.nodes.count(e.src) && tr.nodes.count(e.dst)) tr.edges.push_back(e);
  return tr;
}

std::set<VersionedNode> MaterializedGraph::roots_of(VersionedNode n) const {
  Trace tr = backward_trace(n);
  std::set<VersionedNode> roots;
  for (const VersionedNode& v : tr.nodes) {
    auto it = in_edges_.find(v);
    bool has_in = it != in_edges_.end() && !it->second.empty();
    if (!has_in && v.version == 0) roots.insert(v);
  }
  return roots;
}

bool MaterializedGraph::is_acyclic() const {
  // Kahn's algorithm over real edges plus implicit version links.
  std::map<VersionedNode, size_t> indeg;
  for (const VersionedNode& n : nodes_) indeg[n] = 0;
  for (const Edge& e : edges_) ++indeg[e.dst];
  std::vector<std::pair<VersionedNode, VersionedNode>> version_links;
  for (const VersionedNode& n : nodes_) {
    if (n.version == 0) continue;
    VersionedNode prev{n.entity, n.version - 1};
    if (nodes_.count(prev)) {
      version_links.emplace_back(prev, n);
      ++indeg[n];
    }
  }
  std::map<VersionedNode, std::vector<VersionedNode>> extra_out;
  for (auto& [a, b] : version_links) extra_out[a].push_back(b);

  std::deque<VersionedNode> ready;
  for (auto& [n, d] : indeg)
    if (d == 0) ready.push_back(n);
  size_t seen = 0;
  while (!ready.empty()) {
    VersionedNode n = ready.front();
    ready.pop_front();
    ++seen;
    auto it = out_edges_.find(n);
    if (it != out_edges_.end())
      for (size_t ei : it->second)
        if (--indeg[edges_[ei].dst] == 0) ready.push_back(edges_[ei].dst);
    auto ex = extra_out.find(n);
    if (ex != extra_out.end())
      for (const VersionedNode& m : ex->second)
        if (--indeg[m] == 0) ready.push_back(m);
  }
  return seen == nodes_.size();
}

bool MaterializedGraph::temporal_ok() const {
  for (const VersionedNode& n : nodes_) {
    Timestamp max_in = std::numeric_limits<Timestamp>::min();
    Timestamp min_out = std::numeric_limits<Timestamp>::max();
    auto in_it = in_edges_.find(n);
    if (in_it != in_edges_.end())
      for (size_t ei : in_it->second) max_in = std::max(max_in, edges_[ei].t);
    auto out_it = out_edges_.find(n);
    if (out_it != out_edges_.end())
      for (size_t ei : out_it->second) min_out = std::min(min_out, edges_[ei].t);
    if (max_in > min_out) return false;
  }
  return true;
}

void MaterializedGraph::export_tsv(std::ostream& out, const Interner& interner) const {
  for (const Edge& e : edges_) {
    out << interner.id(e.src.entity) << '#' << e.src.version << '\t'
        << interner.id(e.dst.entity) << '#' << e.dst.version << '\t' << to_string(e.rel) << '\t'
        << e.t << '\n';
  }
}

}  // namespace provstream::provgraph
