#pragma once

// The entity dictionary: one recurrent state per live entity, updated once per
// event with constant work. Composes the streaming provenance graph (versions,
// roots) with the recurrent cell and the featurizer.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "provstream/featurizer.hpp"
#include "provstream/ingest.hpp"
#include "provstream/provgraph.hpp"
#include "provstream/seqmodel.hpp"
#include "provstream/types.hpp"

namespace provstream::streamer {

struct EntityModelState {
  std::vector<double> embedding;  // current dictionary value, unit L-vector
  seqmodel::HiddenStack hidden;   // N x H
  Timestamp last_update_t = 0;
};

struct UpdateResult {
  uint32_t dst_idx = 0;
  uint64_t dst_version = 0;
  bool versioned = false;
  Timestamp t = 0;
  const std::vector<double>* dst_embedding = nullptr;
};

// Inputs and intermediates of one update, kept only when training.
struct StepTrace {
  seqmodel::ForwardCache cache;
  std::vector<double> x;
  std::vector<double> root_mean;
  uint32_t src_idx = 0, dst_idx = 0;
};

struct KindFilter {
  bool process = true, file = true, socket = true;
  static KindFilter all() { return {}; }
  static KindFilter only(EntityKind k);
  bool pass(EntityKind k) const;
};

struct SnapshotRow {
  std::string entity_id;
  uint64_t version = 0;
  std::vector<double> embedding;
};

class StreamState {
 public:
  StreamState(const featurizer::FeatureModel& fm, const seqmodel::CellParams& params,
              size_t k_roots = 32, bool oracle_mode = false);

  UpdateResult process_event(const Event& e, StepTrace* trace = nullptr);

  const provgraph::StreamingGraph& graph() const { return graph_; }
  const featurizer::FeatureModel& feature_model() const { return *fm_; }
  const seqmodel::CellParams& params() const { return *params_; }

  uint64_t event_count() const { return event_count_; }
  size_t entity_count() const { return entities_.size(); }
  const EntityModelState& entity(uint32_t idx) const { return entities_[idx]; }
  const std::string& entity_id(uint32_t idx) const { return graph_.interner().id(idx); }

  std::vector<SnapshotRow> snapshot_embeddings(const KindFilter& filter = KindFilter::all()) const;

  // Formula-based accounting of resident streaming state.
  size_t state_bytes() const;

  // FNV digest over every mutable state bit; equal digests mean equal state.
  uint64_t digest() const;

  void save_checkpoint(std::ostream& out, const ingest::EventReader::Position& pos) const;
  void save_checkpoint(const std::string& path, const ingest::EventReader::Position& pos) const;
  // Restores state into *this (constructed with the same fm/params); returns
  // the stream position to resume from. Verifies the params content hash.
  ingest::EventReader::Position load_checkpoint(std::istream& in);
  ingest::EventReader::Position load_checkpoint(const std::string& path);

 private:
  void ensure_entity(uint32_t idx, const EntityDescriptor& d);

  const featurizer::FeatureModel* fm_;
  const seqmodel::CellParams* params_;
  uint64_t params_hash_;
  provgraph::StreamingGraph graph_;
  std::vector<EntityModelState> entities_;
  uint64_t event_count_ = 0;

  // scratch reused across events
  seqmodel::HiddenStack h_scratch_;
  std::vector<double> emb_scratch_;
  std::vector<double> root_scratch_;
};

}  // namespace provstream::streamer
