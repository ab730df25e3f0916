#include "provstream/seqmodel.hpp"
#include "provstream/streamer.hpp"

namespace provstream::seqmodel {

// One truncated gradient step per event: rank the updated destination's
// embedding against its own feature vector (positive) and uniformly sampled
// entities (negatives). Each epoch replays the window from an empty
// dictionary; parameters persist across epochs.
TrainReport train_params(const std::vector<Event>& events, const featurizer::FeatureModel& fm,
                         CellParams& params) {
  if (events.empty()) throw DataError("empty training window");
  const ModelConfig& cfg = params.cfg;
  uint64_t rng = cfg.seed ^ 0xa02bdbf7bb3c0a7ull;

  Grads grads = Grads::zeros_like(params);
  std::vector<double> d_e;
  TrainReport report;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    streamer::StreamState state(fm, params);
    std::vector<std::vector<double>> feats;  // feature vector per interned idx
    double loss_sum = 0.0;
    uint64_t loss_events = 0;

    for (const Event& e : events) {
      streamer::StepTrace trace;
      state.process_event(e, &trace);
      if (trace.src_idx == feats.size()) feats.push_back(fm.embed_entity(e.src));
      if (trace.dst_idx == feats.size()) feats.push_back(fm.embed_entity(e.dst));

      std::vector<std::vector<double>> negs;
      negs.reserve(static_cast<size_t>(cfg.negative_samples));
      for (int k = 0; k < cfg.negative_samples; ++k) {
        uint32_t pick = trace.dst_idx;
        for (int attempt = 0; attempt < 8 && pick == trace.dst_idx; ++attempt)
          pick = static_cast<uint32_t>(splitmix64(rng) % feats.size());
        if (pick == trace.dst_idx) continue;
        negs.push_back(feats[pick]);
      }
      if (negs.empty()) continue;

      double loss = margin_ranking_loss(trace.cache.e, feats[trace.dst_idx], negs, cfg.margin, &d_e);
      loss_sum += loss;
      ++loss_events;
      ++report.steps;
      if (loss == 0.0) continue;

      grads.zero();
      cell_backward(params, trace.cache, d_e, grads, nullptr, nullptr, nullptr);
      clip_gradients(grads, cfg.clip_norm);
      sgd_step(params, grads, cfg.learning_rate);
    }
    report.epoch_mean_loss.push_back(loss_events ? loss_sum / static_cast<double>(loss_events)
                                                 : 0.0);
  }
  return report;
}

}  // namespace provstream::seqmodel
