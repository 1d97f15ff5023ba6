#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "cltrack/protocol.hpp"
#include "cltrack/synth.hpp"
#include "cltrack/tracker/model.hpp"

namespace cltrack {

struct StepResult {
  /// Prediction in frame coordinates.
  FiveBB box;
  /// Window the prediction was made in.
  CropTransform crop;
  /// Head output when the step was recorded on a tape.
  std::optional<nn::Var> output;
};

/// Per-sequence tracking state: descriptors of the last n+1 crops and the last
/// n boxes (frame coordinates), both oldest first.
class TrackerSession {
 public:
  explicit TrackerSession(const TrackerModel& model) : model_(&model) {}

  bool initialized() const noexcept { return !boxes_.empty(); }
  const std::deque<std::vector<double>>& descriptors() const noexcept { return descriptors_; }
  const std::deque<FiveBB>& boxes() const noexcept { return boxes_; }

  void init(const Frame& frame, const CornerBB& gt) {
    const FiveBB box = corners_to_five(gt);
    const auto tf = window(box);
    auto d = patch_descriptor(crop_frame(frame, tf, config().input_size), config());
    descriptors_.assign(config().n_history + 1, d);
    boxes_.assign(config().n_history, box);
  }

  void reinitialize(const Frame& frame, const CornerBB& gt) { init(frame, gt); }

  FiveBB step(const Frame& frame) { return advance(frame, nullptr).box; }

  /// One tracking step; when `tape` is given the forward pass is recorded on it
  /// and the head output (crop coordinates) is returned alongside the box.
  StepResult advance(const Frame& frame, nn::Tape* tape) {
    if (!initialized()) throw NotInitialized();
    const auto& cfg = config();
    const CropTransform tf = window(boxes_.back());
    descriptors_.pop_front();
    descriptors_.push_back(patch_descriptor(crop_frame(frame, tf, cfg.input_size), cfg));

    nn::Tensor desc({cfg.n_history + 1, cfg.descriptor_size()});
    for (std::size_t i = 0; i < descriptors_.size(); ++i)
      std::copy(descriptors_[i].begin(), descriptors_[i].end(), desc.storage().begin() + i * cfg.descriptor_size());
    nn::Tensor hist({cfg.n_history, 5});
    for (std::size_t i = 0; i < boxes_.size(); ++i) {
      const auto v = to_array(tf.to_crop(boxes_[i]));
      for (std::size_t j = 0; j < 5; ++j) hist(i, j) = v[j];
    }

    nn::Tape local;
    nn::Tape& t = tape ? *tape : local;
    const nn::Var out = model_->forward(t, desc, hist);
    const nn::Tensor& u = t.value(out);
    const FiveBB box = tf.to_frame(FiveBB{{u[0], u[1]}, {u[2], u[3]}, u[4]});
    if (!u.all_finite() || !is_finite(box.p1) || !is_finite(box.p2))
      throw NumericalFailure("tracker head produced a non-finite box");
    try {
      validate(box);
    } catch (const Error& e) {
      throw NumericalFailure(std::string("tracker head produced an invalid box: ") + e.what());
    }
    boxes_.pop_front();
    boxes_.push_back(box);
    StepResult r{box, tf, std::nullopt};
    if (tape) r.output = out;
    return r;
  }

  /// Replaces the newest history box (teacher forcing).
  void overwrite_last_box(const FiveBB& box) {
    if (!initialized()) throw NotInitialized();
    validate(box);
    boxes_.back() = box;
  }

 private:
  const TrackerConfig& config() const { return model_->config(); }

  CropTransform window(const FiveBB& b) const {
    validate(b);
    const double side = std::max(config().crop_factor * distance(b.p1, b.p2), config().min_crop_side);
    const Point2 c = midpoint(b.p1, b.p2);
    return {c - Point2{0.5 * side, 0.5 * side}, side};
  }

  const TrackerModel* model_;
  std::deque<std::vector<double>> descriptors_;
  std::deque<FiveBB> boxes_;
};

/// Adapts a session over a loaded sequence to the evaluation protocol and
/// keeps the boxes it reported, one per frame.
class SessionTracker final : public Tracker {
 public:
  SessionTracker(const TrackerModel& model, const Sequence& seq)
      : session_(model), seq_(&seq), reported_(seq.size()) {
    if (seq.frames.size() != seq.size())
      throw MissingAnnotation("sequence '" + seq.id + "' needs frames for live tracking");
  }

  void initialize(std::size_t frame, const CornerBB& gt) override {
    session_.reinitialize(seq_->frames.at(frame), gt);
    reported_[frame] = gt;
  }

  CornerBB predict(std::size_t frame) override {
    const CornerBB c = five_to_corners(session_.step(seq_->frames.at(frame)));
    reported_[frame] = c;
    return c;
  }

  /// Frames the protocol skipped repeat the previous box so the list can be
  /// replayed through evaluate() and give the same trace.
  std::vector<FiveBB> predictions() const {
    std::vector<FiveBB> out;
    std::optional<CornerBB> last;
    for (const auto& r : reported_) {
      if (r) last = r;
      out.push_back(corners_to_five(*last));
    }
    return out;
  }

 private:
  TrackerSession session_;
  const Sequence* seq_;
  std::vector<std::optional<CornerBB>> reported_;
};

struct TrackResult {
  EvalTrace trace;
  std::vector<FiveBB> predictions;
};

inline TrackResult track_sequence(const TrackerModel& model, const Sequence& seq, const ProtocolConfig& cfg = {}) {
  SessionTracker tracker(model, seq);
  auto trace = run_reset_protocol(tracker, seq.id, seq.groundtruth, seq.size(), cfg);
  return {std::move(trace), tracker.predictions()};
}

}  // namespace cltrack
