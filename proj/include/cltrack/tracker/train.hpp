#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cltrack/nn/adam.hpp"
#include "cltrack/tracker/session.hpp"

namespace cltrack {

struct TrainConfig {
  std::size_t epochs = 10;
  /// Consecutive frames per update; the first one initialises the session.
  std::size_t window = 20;
  /// Hard cap on Adam updates over all epochs (0 = none).
  std::size_t max_steps = 0;
  nn::AdamConfig adam;
  /// Feed ground-truth boxes into the history instead of the session's own predictions.
  bool teacher_forcing = false;
  std::uint64_t seed = 0;
};

struct TrainStep {
  std::size_t step = 0;
  std::size_t epoch = 0;
  /// Mean over the window's predicted frames.
  LossBreakdown loss;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<TrainStep> steps;
  std::vector<double> epoch_lr;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

namespace detail {

struct Window {
  std::size_t sequence = 0;
  std::size_t start = 0;
  std::size_t length = 0;
};

inline void shuffle(std::vector<Window>& w, Rng& rng) {
  for (std::size_t i = w.size(); i > 1; --i) std::swap(w[i - 1], w[rng.below(i)]);
}

inline std::vector<Window> epoch_windows(const std::vector<Sequence>& data, std::size_t window, Rng& rng) {
  std::vector<Window> out;
  for (std::size_t s = 0; s < data.size(); ++s) {
    const std::size_t n = data[s].size();
    if (n < 2) continue;
    if (n <= window) {
      out.push_back({s, 0, n});
      continue;
    }
    const std::size_t offset = rng.below(std::min(window, n - window + 1));
    for (std::size_t start = offset; start + window <= n; start += window) out.push_back({s, start, window});
  }
  shuffle(out, rng);
  return out;
}

inline nn::Tensor frame_to_head_grad(const Grad5& g, const CropTransform& tf) {
  return nn::Tensor::matrix(1, 5, {g.d_x1 * tf.side, g.d_y1 * tf.side, g.d_x2 * tf.side, g.d_y2 * tf.side, g.d_beta});
}

}  // namespace detail

/// Loss and parameter gradient of one window: initialise on its first frame,
/// track through the rest, average the circular loss over predicted frames.
/// The history the session feeds itself is treated as a constant.
inline LossBreakdown window_gradient(const TrackerModel& model, const Sequence& seq, std::size_t start,
                                     std::size_t length, bool teacher_forcing, nn::Gradients& grads) {
  const auto& w = model.config().loss_weights;
  grads = nn::zero_gradients(model.params());
  TrackerSession session(model);
  session.init(seq.frames.at(start), seq.groundtruth.at(start));
  LossBreakdown mean;
  const double inv = 1.0 / static_cast<double>(length - 1);
  for (std::size_t k = start + 1; k < start + length; ++k) {
    nn::Tape tape;
    const StepResult r = session.advance(seq.frames[k], &tape);
    const FiveBB gt = corners_to_five(seq.groundtruth[k]);
    const LossBreakdown l = circular_loss(r.box, gt, w);
    const Grad5 g = circular_loss_grad(r.box, gt, w);
    nn::accumulate(grads, nn::backward(tape, *r.output, detail::frame_to_head_grad(g, r.crop)), inv);
    mean.area += l.area * inv;
    mean.angle += l.angle * inv;
    mean.arc += l.arc * inv;
    mean.total += l.total * inv;
    if (teacher_forcing) session.overwrite_last_box(gt);
  }
  for (const auto& g : grads)
    if (!g.all_finite()) throw NumericalFailure("non-finite gradient during training");
  return mean;
}

/// One Adam update per window of consecutive frames.
inline TrainHistory train(TrackerModel& model, const std::vector<Sequence>& data, const TrainConfig& cfg,
                          const std::function<void(const TrainStep&)>& on_step = {}) {
  if (data.empty()) throw EmptySequence("training set is empty");
  if (cfg.window < 2) throw ConfigError("training window needs at least 2 frames");
  TrainHistory hist;
  hist.seed = cfg.seed;
  for (const auto& s : data) {
    s.validate();
    if (s.frames.size() != s.size()) throw MissingAnnotation("sequence '" + s.id + "' has no frames loaded");
    if (s.size() < 2)
      hist.warnings.push_back("sequence '" + s.id + "' has fewer than 2 frames and is not used");
    else if (s.size() < cfg.window)
      hist.warnings.push_back("sequence '" + s.id + "' is shorter than the window; windows truncated to " +
                              std::to_string(s.size()) + " frames");
  }
  Rng rng(cfg.seed);
  nn::AdamState adam;
  nn::Gradients grads;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.max_steps && step >= cfg.max_steps) break;
    const double lr = nn::learning_rate_at_epoch(cfg.adam, epoch);
    hist.epoch_lr.push_back(lr);
    const auto windows = detail::epoch_windows(data, cfg.window, rng);
    if (windows.empty()) throw EmptySequence("no sequence is long enough to train on");
    for (const auto& win : windows) {
      if (cfg.max_steps && step >= cfg.max_steps) break;
      const LossBreakdown l =
          window_gradient(model, data[win.sequence], win.start, win.length, cfg.teacher_forcing, grads);
      nn::adam_step(model.params(), grads, adam, lr, cfg.adam);
      TrainStep rec{step++, epoch, l, lr};
      hist.steps.push_back(rec);
      if (on_step) on_step(rec);
    }
  }
  return hist;
}

/// Trailing moving average of the total loss (shorter at the start).
inline std::vector<double> smoothed_loss(const TrainHistory& h, std::size_t span = 20) {
  std::vector<double> out;
  double sum = 0.0;
  for (std::size_t i = 0; i < h.steps.size(); ++i) {
    sum += h.steps[i].loss.total;
    if (i >= span) sum -= h.steps[i - span].loss.total;
    out.push_back(sum / static_cast<double>(std::min(i + 1, span)));
  }
  return out;
}

// Re-initialisation pretraining: the buffers are filled from a single
// annotated frame and the model is asked to reproduce that frame's box.

struct ReinitSample {
  Frame frame;
  CornerBB gt;
};

inline std::vector<ReinitSample> reinit_samples(const std::vector<Sequence>& data) {
  std::vector<ReinitSample> out;
  for (const auto& s : data) {
    if (s.frames.size() != s.size()) throw MissingAnnotation("sequence '" + s.id + "' has no frames loaded");
    for (std::size_t i = 0; i < s.size(); ++i) out.push_back({s.frames[i], s.groundtruth[i]});
  }
  return out;
}

struct PretrainConfig {
  std::size_t epochs = 15;
  /// Samples averaged per Adam update.
  std::size_t batch = 8;
  std::size_t max_steps = 0;
  nn::AdamConfig adam;
  SmoothL1Config smooth_l1;
  std::uint64_t seed = 0;
};

/// Smooth-L1 of the first prediction after re-initialisation, compared in the
/// crop's normalised coordinates. Gradient w.r.t. the parameters if requested.
inline double reinit_loss(const TrackerModel& model, const ReinitSample& s, const SmoothL1Config& cfg,
                          nn::Gradients* grads = nullptr) {
  TrackerSession session(model);
  session.init(s.frame, s.gt);
  nn::Tape tape;
  const StepResult r = session.advance(s.frame, grads ? &tape : nullptr);
  const auto pred = to_array(r.crop.to_crop(r.box));
  const auto gt = to_array(r.crop.to_crop(corners_to_five(s.gt)));
  const double loss = smooth_l1_vector(pred, gt, cfg);
  if (grads) {
    nn::Tensor up = nn::Tensor::matrix(1, 5);
    for (std::size_t j = 0; j < 5; ++j) up[j] = smooth_l1_derivative(pred[j] - gt[j], cfg);
    *grads = nn::backward(tape, *r.output, up);
  }
  return loss;
}

inline double pretrain_loss(const TrackerModel& model, const std::vector<ReinitSample>& samples,
                            const SmoothL1Config& cfg = {}) {
  if (samples.empty()) throw EmptySequence("no re-initialisation samples");
  double sum = 0.0;
  for (const auto& s : samples) sum += reinit_loss(model, s, cfg);
  return sum / static_cast<double>(samples.size());
}

/// Returns the mean loss of every update.
inline std::vector<double> pretrain_reinit(TrackerModel& model, const std::vector<ReinitSample>& samples,
                                           const PretrainConfig& cfg) {
  if (samples.empty()) throw EmptySequence("no re-initialisation samples");
  if (cfg.batch == 0) throw ConfigError("pretraining batch must be positive");
  Rng rng(cfg.seed);
  nn::AdamState adam;
  std::vector<std::size_t> order(samples.size());
  std::vector<double> losses;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = nn::learning_rate_at_epoch(cfg.adam, epoch);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t b = 0; b < order.size(); b += cfg.batch) {
      if (cfg.max_steps && step >= cfg.max_steps) return losses;
      const std::size_t e = std::min(order.size(), b + cfg.batch);
      const double inv = 1.0 / static_cast<double>(e - b);
      nn::Gradients total = nn::zero_gradients(model.params());
      nn::Gradients g;
      double loss = 0.0;
      for (std::size_t k = b; k < e; ++k) {
        loss += reinit_loss(model, samples[order[k]], cfg.smooth_l1, &g) * inv;
        nn::accumulate(total, g, inv);
      }
      nn::adam_step(model.params(), total, adam, lr, cfg.adam);
      losses.push_back(loss);
      ++step;
    }
  }
  return losses;
}

// End-to-end gradient check of the circular loss of one tracking step.

struct GradcheckEntry {
  std::string name;
  std::size_t scalars = 0;
  double max_rel_error = 0.0;
};

struct GradcheckReport {
  std::vector<GradcheckEntry> params;
  double max_rel_error = 0.0;
  std::string worst;
};

inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Initialise on (f0, gt0), step on f1, score against gt1.
inline double step_loss(const TrackerModel& model, const Frame& f0, const CornerBB& gt0, const Frame& f1,
                        const CornerBB& gt1, nn::Gradients* grads = nullptr) {
  TrackerSession session(model);
  session.init(f0, gt0);
  nn::Tape tape;
  const StepResult r = session.advance(f1, grads ? &tape : nullptr);
  const FiveBB gt = corners_to_five(gt1);
  const auto& w = model.config().loss_weights;
  if (grads)
    *grads = nn::backward(tape, *r.output, detail::frame_to_head_grad(circular_loss_grad(r.box, gt, w), r.crop));
  return circular_loss(r.box, gt, w).total;
}

inline GradcheckReport gradcheck(TrackerModel& model, const Frame& f0, const CornerBB& gt0, const Frame& f1,
                                 const CornerBB& gt1, double h = 1e-5) {
  nn::Gradients analytic;
  step_loss(model, f0, gt0, f1, gt1, &analytic);
  GradcheckReport rep;
  auto& ps = model.params();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    GradcheckEntry e{ps[i].name, ps[i].value.size(), 0.0};
    for (std::size_t k = 0; k < ps[i].value.size(); ++k) {
      double& x = ps[i].value[k];
      const double x0 = x;
      x = x0 + h;
      const double up = step_loss(model, f0, gt0, f1, gt1);
      x = x0 - h;
      const double down = step_loss(model, f0, gt0, f1, gt1);
      x = x0;
      const double numeric = (up - down) / (2.0 * h);
      e.max_rel_error = std::max(e.max_rel_error, relative_error(analytic[i][k], numeric));
    }
    if (e.max_rel_error >= rep.max_rel_error) {
      rep.max_rel_error = e.max_rel_error;
      rep.worst = e.name;
    }
    rep.params.push_back(std::move(e));
  }
  return rep;
}

}  // namespace cltrack
