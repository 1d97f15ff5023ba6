#pragma once

// Reset-based evaluation.
//
// Frame 0 initialises the tracker with ground truth. A predicted box with zero
// overlap is a failure: the next four frames get no prediction, the fifth
// re-initialises from ground truth, and the ten frames after the failure are
// left out of the accuracy average even when they carry predictions.

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cltrack/error.hpp"
#include "cltrack/geometry.hpp"
#include "cltrack/synth.hpp"

namespace cltrack {

enum class FrameStatus { tracked, failed, skipped, reinit };

inline const char* to_string(FrameStatus s) {
  switch (s) {
    case FrameStatus::tracked: return "tracked";
    case FrameStatus::failed: return "failed";
    case FrameStatus::skipped: return "skipped";
    case FrameStatus::reinit: return "reinit";
  }
  return "?";
}

struct FrameOutcome {
  FrameStatus status = FrameStatus::skipped;
  /// Present iff status == tracked.
  std::optional<double> overlap;
  /// Overlap of whatever box the frame carried: the prediction for tracked,
  /// failed and masked frames, 1 for (re)initialisation frames, absent when no
  /// prediction was requested.
  std::optional<double> raw_overlap;

  friend bool operator==(const FrameOutcome&, const FrameOutcome&) = default;
};

struct EvalTrace {
  std::string sequence_id;
  std::vector<FrameOutcome> outcomes;
  std::size_t n_frames = 0;
  std::size_t n_fails = 0;

  friend bool operator==(const EvalTrace&, const EvalTrace&) = default;
};

/// What the protocol needs from a tracker. Frames are addressed by index; the
/// implementation owns access to the pixels.
class Tracker {
 public:
  virtual ~Tracker() = default;
  virtual void initialize(std::size_t frame, const CornerBB& gt) = 0;
  virtual CornerBB predict(std::size_t frame) = 0;
};

struct ProtocolConfig {
  /// Frames without prediction after a failure; re-initialisation happens on the next one.
  std::size_t skip_after_failure = 4;
  /// Frames after a failure excluded from accuracy.
  std::size_t accuracy_mask = 10;
};

inline double safe_overlap(const CornerBB& pred, const CornerBB& gt) {
  try {
    validate(pred);
  } catch (const Error&) {
    return 0.0;
  }
  return polygon_iou(pred, gt);
}

inline EvalTrace run_reset_protocol(Tracker& tracker, const std::string& id, std::span<const CornerBB> gt,
                                    std::size_t n_frames, const ProtocolConfig& cfg = {}) {
  if (n_frames == 0) throw EmptySequence("sequence '" + id + "' has no frames");
  if (gt.size() < n_frames)
    throw MissingAnnotation("sequence '" + id + "' lacks ground truth from frame " + std::to_string(gt.size()));
  EvalTrace trace;
  trace.sequence_id = id;
  trace.n_frames = n_frames;
  trace.outcomes.resize(n_frames);

  auto reinit = [&](std::size_t i) {
    tracker.initialize(i, gt[i]);
    trace.outcomes[i] = {FrameStatus::reinit, std::nullopt, 1.0};
  };

  reinit(0);
  std::size_t mask_end = 0;  // frames in [.., mask_end] are excluded from accuracy
  bool masking = false;
  for (std::size_t i = 1; i < n_frames;) {
    const double iou = safe_overlap(tracker.predict(i), gt[i]);
    if (iou <= 0.0) {
      trace.outcomes[i] = {FrameStatus::failed, std::nullopt, 0.0};
      ++trace.n_fails;
      masking = true;
      mask_end = i + cfg.accuracy_mask;
      const std::size_t restart = i + cfg.skip_after_failure + 1;
      for (std::size_t k = i + 1; k < std::min(restart, n_frames); ++k)
        trace.outcomes[k] = {FrameStatus::skipped, std::nullopt, std::nullopt};
      if (restart < n_frames) reinit(restart);
      i = restart + 1;
      continue;
    }
    if (masking && i <= mask_end)
      trace.outcomes[i] = {FrameStatus::skipped, std::nullopt, iou};
    else
      trace.outcomes[i] = {FrameStatus::tracked, iou, iou};
    ++i;
  }
  return trace;
}

inline double accuracy(std::span<const EvalTrace> traces) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& t : traces)
    for (const auto& o : t.outcomes)
      if (o.status == FrameStatus::tracked && o.overlap) {
        sum += *o.overlap;
        ++n;
      }
  if (n == 0) throw NoValidFrames();
  return sum / static_cast<double>(n);
}

inline double robustness(std::span<const EvalTrace> traces) {
  std::size_t fails = 0, frames = 0;
  for (const auto& t : traces) {
    fails += t.n_fails;
    frames += t.n_frames;
  }
  if (frames == 0) throw EmptySequence("no frames to compute robustness over");
  return 100.0 * static_cast<double>(fails) / static_cast<double>(frames);
}

/// Overlap curves of every (re)initialisation-to-end run: the run's overlaps
/// up to its first failure, zeros from the failure on.
inline std::vector<std::vector<double>> overlap_runs(std::span<const EvalTrace> traces) {
  std::vector<std::vector<double>> runs;
  for (const auto& t : traces) {
    const auto& o = t.outcomes;
    for (std::size_t s = 0; s < o.size(); ++s) {
      if (o[s].status != FrameStatus::reinit) continue;
      std::vector<double> curve(o.size() - s, 0.0);
      for (std::size_t k = s; k < o.size(); ++k) {
        if (o[k].status == FrameStatus::failed) break;
        curve[k - s] = o[k].raw_overlap.value_or(0.0);
      }
      runs.push_back(std::move(curve));
    }
  }
  return runs;
}

struct EaoPoint {
  std::size_t n = 0;
  double phi = 0.0;
};

/// phi(N) for N in [lo, hi]: mean over runs of the mean of the first N curve
/// values, runs shorter than N padded with zeros.
inline std::vector<EaoPoint> eao_curve(std::span<const EvalTrace> traces, std::size_t lo, std::size_t hi) {
  if (lo == 0 || lo > hi)
    throw InvalidInterval("EAO interval [" + std::to_string(lo) + ", " + std::to_string(hi) + "] is invalid");
  const auto runs = overlap_runs(traces);
  if (runs.empty()) throw EmptySequence("no runs to compute EAO over");
  std::vector<double> total(hi + 1, 0.0);  // total[N] = sum over runs of the first-N prefix sum
  for (const auto& r : runs) {
    double acc = 0.0;
    for (std::size_t n = 1; n <= hi; ++n) {
      if (n <= r.size()) acc += r[n - 1];
      total[n] += acc;
    }
  }
  std::vector<EaoPoint> out;
  for (std::size_t n = lo; n <= hi; ++n)
    out.push_back({n, total[n] / (static_cast<double>(n) * static_cast<double>(runs.size()))});
  return out;
}

inline double eao(std::span<const EvalTrace> traces, std::size_t lo, std::size_t hi) {
  const auto curve = eao_curve(traces, lo, hi);
  double s = 0.0;
  for (const auto& p : curve) s += p.phi;
  return s / static_cast<double>(curve.size());
}

struct SequenceSummary {
  std::string id;
  std::size_t n_frames = 0;
  std::size_t n_fails = 0;
  std::size_t n_tracked = 0;
  std::optional<double> accuracy;
  double robustness = 0.0;
};

struct EvalReport {
  /// Absent when no frame was validly tracked.
  std::optional<double> accuracy;
  double robustness = 0.0;
  double eao = 0.0;
  std::size_t eao_lo = 0;
  std::size_t eao_hi = 0;
  std::vector<SequenceSummary> per_sequence;
  std::vector<EaoPoint> curve;
  std::vector<EvalTrace> traces;
};

inline EvalReport summarize(std::vector<EvalTrace> traces, std::optional<std::size_t> lo,
                            std::optional<std::size_t> hi) {
  if (traces.empty()) throw EmptySequence("nothing to evaluate");
  std::size_t min_len = traces.front().n_frames, max_len = 0;
  for (const auto& t : traces) {
    min_len = std::min(min_len, t.n_frames);
    max_len = std::max(max_len, t.n_frames);
  }
  EvalReport rep;
  rep.eao_lo = lo.value_or(min_len);
  rep.eao_hi = hi.value_or(max_len);
  try {
    rep.accuracy = accuracy(traces);
  } catch (const NoValidFrames&) {
  }
  rep.robustness = robustness(traces);
  rep.curve = eao_curve(traces, rep.eao_lo, rep.eao_hi);
  double s = 0.0;
  for (const auto& p : rep.curve) s += p.phi;
  rep.eao = s / static_cast<double>(rep.curve.size());
  for (const auto& t : traces) {
    SequenceSummary ss{t.sequence_id, t.n_frames, t.n_fails, 0, std::nullopt, 0.0};
    for (const auto& o : t.outcomes) ss.n_tracked += o.status == FrameStatus::tracked;
    const std::span<const EvalTrace> one(&t, 1);
    try {
      ss.accuracy = accuracy(one);
    } catch (const NoValidFrames&) {
    }
    ss.robustness = robustness(one);
    rep.per_sequence.push_back(std::move(ss));
  }
  rep.traces = std::move(traces);
  return rep;
}

/// Replays a fixed list of predictions, one per frame.
class PredictionReplay final : public Tracker {
 public:
  explicit PredictionReplay(std::vector<CornerBB> boxes) : boxes_(std::move(boxes)) {}
  void initialize(std::size_t, const CornerBB&) override {}
  CornerBB predict(std::size_t frame) override { return boxes_.at(frame); }

 private:
  std::vector<CornerBB> boxes_;
};

/// Scores per-sequence prediction lists against ground truth. Every ground
/// truth sequence needs predictions for each of its frames, and vice versa.
inline EvalReport evaluate(const std::vector<Sequence>& groundtruth,
                           const std::map<std::string, std::vector<CornerBB>>& predictions,
                           std::optional<std::size_t> lo = {}, std::optional<std::size_t> hi = {},
                           const ProtocolConfig& cfg = {}) {
  if (groundtruth.empty()) throw EmptySequence("empty ground-truth dataset");
  for (const auto& [id, _] : predictions)
    if (std::none_of(groundtruth.begin(), groundtruth.end(), [&](const Sequence& s) { return s.id == id; }))
      throw DatasetMismatch("predictions for unknown sequence '" + id + "'");
  std::vector<EvalTrace> traces;
  for (const auto& seq : groundtruth) {
    const auto it = predictions.find(seq.id);
    if (it == predictions.end()) throw DatasetMismatch("no predictions for sequence '" + seq.id + "'");
    if (it->second.size() != seq.size())
      throw DatasetMismatch("sequence '" + seq.id + "': " + std::to_string(it->second.size()) +
                            " predictions for " + std::to_string(seq.size()) + " frames");
    PredictionReplay replay(it->second);
    traces.push_back(run_reset_protocol(replay, seq.id, seq.groundtruth, seq.size(), cfg));
  }
  return summarize(std::move(traces), lo, hi);
}

using TrackerFactory = std::function<std::unique_ptr<Tracker>(const Sequence&)>;

/// Runs a live tracker (one instance per sequence) under the reset protocol.
inline EvalReport evaluate(const std::vector<Sequence>& groundtruth, const TrackerFactory& make_tracker,
                           std::optional<std::size_t> lo = {}, std::optional<std::size_t> hi = {},
                           const ProtocolConfig& cfg = {}) {
  if (groundtruth.empty()) throw EmptySequence("empty ground-truth dataset");
  std::vector<EvalTrace> traces;
  for (const auto& seq : groundtruth) {
    auto tracker = make_tracker(seq);
    traces.push_back(run_reset_protocol(*tracker, seq.id, seq.groundtruth, seq.size(), cfg));
  }
  return summarize(std::move(traces), lo, hi);
}

}  // namespace cltrack
