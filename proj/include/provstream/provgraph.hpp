#pragma once

// Streaming provenance-graph state: one version counter, outgoing-edge flag
// and root summary per live entity, plus an optional fully materialized
// versioned graph used by tests and backward traces.

#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "provstream/types.hpp"

namespace provstream::provgraph {

class Interner {
 public:
  // Returns the dense index for d.id, creating it on first sight.
  uint32_t intern(const EntityDescriptor& d);
  std::optional<uint32_t> find(const std::string& id) const;
  const std::string& id(uint32_t idx) const { return ids_[idx]; }
  EntityKind kind(uint32_t idx) const { return kinds_[idx]; }
  size_t size() const { return ids_.size(); }

  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  std::vector<std::string> ids_;
  std::vector<EntityKind> kinds_;
  std::unordered_map<std::string, uint32_t> index_;
};

// Mean of the feature vectors of the roots absorbed so far. The sum and count
// are carried separately so the mean stays exact; ids are kept up to a cap
// with first-seen retention.
struct RootSummary {
  std::vector<double> sum;        // L accumulator; empty until first merge
  uint64_t count = 0;             // multiset size (unique under the cap)
  std::vector<uint32_t> ids;      // first-seen order, size <= cap

  bool contains(uint32_t idx) const;
  std::vector<double> mean(int dim) const;
};

struct NodeStatus {
  uint64_t version = 0;
  bool has_outgoing = false;  // current version emitted an outgoing edge
  RootSummary roots;
};

struct VersionedNode {
  uint32_t entity = 0;
  uint64_t version = 0;
  auto operator<=>(const VersionedNode&) const = default;
};

struct VersionTransition {
  uint32_t src_idx = 0, dst_idx = 0;
  uint64_t src_version = 0, dst_version = 0;  // after the event
  bool dst_versioned = false;
  bool src_is_new = false, dst_is_new = false;
};

// Absorb src's summary into dst. Roots identifiable in src.ids are
// deduplicated against dst.ids; any portion of src beyond its id cap is
// folded in blindly (multiset semantics past the cap).
void merge_roots(RootSummary& dst, const RootSummary& src,
                 const std::function<const std::vector<double>&(uint32_t)>& root_vec,
                 size_t cap);

class MaterializedGraph;

class StreamingGraph {
 public:
  explicit StreamingGraph(int feature_dim, size_t k_roots = 32, bool oracle_mode = false);

  // feat(d) supplies the feature vector for an entity that just became a root.
  using FeatureFn = std::function<std::vector<double>(const EntityDescriptor&)>;
  VersionTransition apply_event(const Event& e, const FeatureFn& feat);

  Interner& interner() { return interner_; }
  const Interner& interner() const { return interner_; }
  const NodeStatus& status(uint32_t idx) const { return status_[idx]; }
  size_t entity_count() const { return status_.size(); }
  size_t k_roots() const { return k_roots_; }
  int feature_dim() const { return dim_; }
  const std::vector<double>& root_vector(uint32_t idx) const;
  size_t root_count() const { return root_vecs_.size(); }

  bool oracle_enabled() const { return oracle_ != nullptr; }
  const MaterializedGraph& oracle() const;

  // Formula accounting for the per-entity streaming state owned here.
  size_t state_bytes() const;

  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  int dim_;
  size_t k_roots_;
  Interner interner_;
  std::vector<NodeStatus> status_;
  std::unordered_map<uint32_t, std::vector<double>> root_vecs_;
  std::unique_ptr<MaterializedGraph> oracle_;
};

// Debug/test-only full graph. Real edges only; the version chain
// (entity, v) -> (entity, v+1) is an implicit link traversed by queries and
// included in the acyclicity check.
class MaterializedGraph {
 public:
  struct Edge {
    VersionedNode src, dst;
    Relation rel;
    Timestamp t;
  };

  void add_edge(VersionedNode src, VersionedNode dst, Relation rel, Timestamp t);
  void note_node(VersionedNode n);

  bool has_node(VersionedNode n) const { return nodes_.count(n) > 0; }
  size_t node_count() const { return nodes_.size(); }
  size_t edge_count() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }

  struct Trace {
    std::set<VersionedNode> nodes;
    std::vector<Edge> edges;  // real edges with both ends in `nodes`
  };
  Trace backward_trace(VersionedNode n) const;           // throws DataError on unknown node
  std::set<VersionedNode> roots_of(VersionedNode n) const;

  bool is_acyclic() const;       // includes implicit version links
  bool temporal_ok() const;      // per node: max incoming t <= min outgoing t
  void export_tsv(std::ostream& out, const Interner& interner) const;

 private:
  std::vector<Edge> edges_;
  std::set<VersionedNode> nodes_;
  std::map<VersionedNode, std::vector<size_t>> in_edges_;
  std::map<VersionedNode, std::vector<size_t>> out_edges_;
};

}  // namespace provstream::provgraph
