#include <gtest/gtest.h>

#include "support.hpp"

using namespace cltrack;
using namespace testing_support;

namespace {

TrackerConfig tiny_config() {
  TrackerConfig c;
  c.attention = {8, 2};
  c.n_history = 2;
  c.input_size = 16;
  c.grid = 4;
  return c;
}

Sequence short_sequence(std::uint64_t seed, int length = 8) {
  SynthConfig s;
  s.length = length;
  return synth_sequence(s, seed);
}

// Copies `f` into a zero canvas at the given integer offset.
Frame embed(const Frame& f, int w, int h, int dx, int dy) {
  Frame out(w, h);
  for (int r = 0; r < f.height; ++r)
    for (int c = 0; c < f.width; ++c)
      for (int ch = 0; ch < 3; ++ch) out.at(c + dx, r + dy, ch) = f.at(c, r, ch);
  return out;
}

CornerBB shifted(CornerBB b, Point2 d) {
  for (auto& p : b.corners) p = p + d;
  return b;
}

}  // namespace

TEST(TrackerConfig, DefaultsAndPaperScale) {
  const TrackerConfig c;
  EXPECT_EQ(c.n_history, 3u);
  EXPECT_EQ(c.d_model(), 32u);
  EXPECT_EQ(c.attention.heads, 2u);
  EXPECT_EQ(c.input_size, 64);
  EXPECT_EQ(c.crop_factor, 1.5);
  EXPECT_EQ(c.hidden(), 64u);
  const auto p = TrackerConfig::full_scale();
  EXPECT_EQ(p.n_history, 7u);
  EXPECT_EQ(p.d_model(), 1024u);
  EXPECT_EQ(p.attention.heads, 4u);
  EXPECT_NO_THROW(p.validate());
}

TEST(TrackerConfig, JsonRoundTripAndValidation) {
  TrackerConfig c = tiny_config();
  c.head_squash = false;
  c.layer_norm.decoder_cross = false;
  const nlohmann::json j = c;
  const auto back = j.get<TrackerConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_THROW((nlohmann::json{{"d_modle", 8}}.get<TrackerConfig>()), ConfigError);
  EXPECT_THROW((nlohmann::json{{"n_history", 0}}.get<TrackerConfig>()), ConfigError);
  EXPECT_THROW((nlohmann::json{{"d_model", 9}, {"heads", 2}}.get<TrackerConfig>()), ConfigError);
}

TEST(FeatureExtractor, ConstantFrameProjectsConstantVector) {
  const TrackerConfig cfg = tiny_config();
  const TrackerModel m(cfg, 1);
  const Frame crop(16, 16, 0.75f);
  const auto d = patch_descriptor(crop, cfg);
  for (double v : d) EXPECT_DOUBLE_EQ(v, 0.25);
  const auto f = m.features(crop);
  const auto& w = m.params()[m.params().index_of("feature.w")].value;
  const auto& b = m.params()[m.params().index_of("feature.b")].value;
  for (std::size_t j = 0; j < cfg.d_model(); ++j) {
    double want = b[j];
    for (std::size_t i = 0; i < cfg.descriptor_size(); ++i) want += 0.25 * w(i, j);
    EXPECT_NEAR(f[j], want, 1e-12);
  }
  EXPECT_THROW(patch_descriptor(Frame(15, 16), cfg), ShapeError);
}

TEST(FeatureExtractor, ContentOutsideCropIsIgnored) {
  const TrackerConfig cfg = tiny_config();
  const TrackerModel m(cfg, 1);
  Frame a(64, 64, 0.3f), b = a;
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c) b.at(c, r, 1) = 0.9f;
  const auto box = square(35, 35, 10);
  const auto ca = crop_around_box(a, box, cfg.crop_factor, cfg.input_size);
  const auto cb = crop_around_box(b, box, cfg.crop_factor, cfg.input_size);
  const auto fa = m.features(ca.frame), fb = m.features(cb.frame);
  for (std::size_t j = 0; j < fa.size(); ++j) EXPECT_EQ(fa[j], fb[j]);
}

TEST(FeatureExtractor, ProjectionGradientMatchesFiniteDifferences) {
  const TrackerConfig cfg = tiny_config();
  TrackerModel m(cfg, 2);
  const auto seq = short_sequence(3);
  const auto d = patch_descriptor(crop_around_box(seq.frames[0], seq.groundtruth[0], 1.5, 16).frame, cfg);
  const std::size_t wi = m.params().index_of("feature.w");
  const nn::Tensor x = nn::Tensor::matrix(1, d.size(), d);
  Rng rng(4);
  nn::Tensor up = nn::Tensor::matrix(1, cfg.d_model());
  for (auto& v : up.data()) v = rng.uniform(-1, 1);
  nn::Tape t;
  const auto p = t.bind(m.params());
  const auto y = nn::add_bias(t, nn::matmul(t, t.constant(x), p[wi]), p[wi + 1]);
  const auto g = nn::backward(t, y, up);
  auto loss = [&] {
    const auto f = m.features(crop_around_box(seq.frames[0], seq.groundtruth[0], 1.5, 16).frame);
    double s = 0;
    for (std::size_t j = 0; j < f.size(); ++j) s += f[j] * up[j];
    return s;
  };
  for (std::size_t k = 0; k < 40; ++k) {
    double& w = m.params()[wi].value[k * 7];
    const double w0 = w, h = 1e-6;
    w = w0 + h;
    const double a = loss();
    w = w0 - h;
    const double b = loss();
    w = w0;
    EXPECT_LT(relative_error(g[wi][k * 7], (a - b) / (2 * h)), 1e-6);
  }
}

TEST(TrackerModel, ParameterLayoutAndDeterministicInit) {
  const TrackerConfig cfg = tiny_config();
  const TrackerModel a(cfg, 5), b(cfg, 5), c(cfg, 6);
  EXPECT_TRUE(a.params() == b.params());
  EXPECT_FALSE(a.params() == c.params());
  EXPECT_NO_THROW(a.params().index_of("decoder.cross_attention.wo"));
  EXPECT_NO_THROW(a.params().index_of("head.2.w"));
  EXPECT_EQ(a.params()[a.params().index_of("feature.w")].value.shape(),
            (std::vector<std::size_t>{cfg.descriptor_size(), cfg.d_model()}));
  EXPECT_THROW(TrackerModel(TrackerConfig{}, a.params()), ConfigError);
}

TEST(TrackerModel, ForwardShapesAndErrors) {
  const TrackerConfig cfg = tiny_config();
  const TrackerModel m(cfg, 1);
  nn::Tape t;
  const nn::Tensor d({cfg.n_history + 1, cfg.descriptor_size()}, 0.1);
  const nn::Tensor b({cfg.n_history, 5}, 0.5);
  const auto out = t.value(m.forward(t, d, b));
  EXPECT_EQ(out.shape(), (std::vector<std::size_t>{1, 5}));
  EXPECT_GT(out[4], cfg.beta_min);
  EXPECT_LT(out[4], cfg.beta_max);
  EXPECT_THROW(m.forward(t, nn::Tensor({cfg.n_history, cfg.descriptor_size()}), b), ShapeError);
  EXPECT_THROW(m.forward(t, d, nn::Tensor({cfg.n_history, 4})), ShapeError);
}

TEST(TrackerModel, DecoderValuesComeFromBoxHistory) {
  // The box history reaches the output only through the cross-attention values,
  // so changing it must change the prediction.
  const TrackerConfig cfg = tiny_config();
  const TrackerModel m(cfg, 8);
  nn::Tape t;
  const nn::Tensor d({cfg.n_history + 1, cfg.descriptor_size()}, 0.1);
  nn::Tensor b1({cfg.n_history, 5}, 0.5), b2 = b1;
  b2(0, 0) = 0.1;
  const auto o1 = t.value(m.forward(t, d, b1));
  const auto o2 = t.value(m.forward(t, d, b2));
  EXPECT_NE(o1[0], o2[0]);
}

TEST(Session, InitFillsBuffers) {
  const TrackerModel m(tiny_config(), 1);
  const auto seq = short_sequence(1);
  TrackerSession s(m);
  EXPECT_FALSE(s.initialized());
  EXPECT_THROW(s.step(seq.frames[0]), NotInitialized);
  s.init(seq.frames[0], seq.groundtruth[0]);
  ASSERT_EQ(s.descriptors().size(), 3u);
  ASSERT_EQ(s.boxes().size(), 2u);
  for (const auto& d : s.descriptors()) EXPECT_EQ(d, s.descriptors().front());
  const auto gt5 = corners_to_five(seq.groundtruth[0]);
  for (const auto& b : s.boxes()) EXPECT_EQ(to_array(b), to_array(gt5));
  EXPECT_THROW(s.init(seq.frames[0], CornerBB{}), DegenerateBox);
}

TEST(Session, ReinitFullyResets) {
  const TrackerModel m(tiny_config(), 1);
  const auto seq = short_sequence(1);
  TrackerSession a(m), b(m);
  a.init(seq.frames[0], seq.groundtruth[0]);
  for (int i = 1; i < 5; ++i) a.step(seq.frames[i]);
  a.reinitialize(seq.frames[5], seq.groundtruth[5]);
  b.init(seq.frames[5], seq.groundtruth[5]);
  EXPECT_EQ(a.descriptors(), b.descriptors());
  for (std::size_t i = 0; i < a.boxes().size(); ++i) EXPECT_EQ(to_array(a.boxes()[i]), to_array(b.boxes()[i]));
  EXPECT_EQ(to_array(a.step(seq.frames[6])), to_array(b.step(seq.frames[6])));
}

TEST(Session, HistoryDiscipline) {
  const TrackerModel m(tiny_config(), 2);
  const auto seq = short_sequence(2, 10);
  TrackerSession s(m);
  s.init(seq.frames[0], seq.groundtruth[0]);
  std::vector<FiveBB> outputs;
  for (int k = 1; k < 10; ++k) {
    outputs.push_back(s.step(seq.frames[k]));
    ASSERT_EQ(s.boxes().size(), 2u);
    ASSERT_EQ(s.descriptors().size(), 3u);
    const std::size_t n = outputs.size();
    EXPECT_EQ(to_array(s.boxes().back()), to_array(outputs[n - 1]));
    if (n >= 2) {
      EXPECT_EQ(to_array(s.boxes().front()), to_array(outputs[n - 2]));
    }
  }
}

TEST(Session, OutputsAreValidAndDeterministic) {
  const TrackerModel m(tiny_config(), 3);
  const auto seq = short_sequence(3, 20);
  TrackerSession a(m), b(m);
  a.init(seq.frames[0], seq.groundtruth[0]);
  b.init(seq.frames[0], seq.groundtruth[0]);
  for (std::size_t k = 1; k < seq.size(); ++k) {
    const FiveBB x = a.step(seq.frames[k]), y = b.step(seq.frames[k]);
    EXPECT_EQ(to_array(x), to_array(y));
    EXPECT_GT(x.beta, 0.01);
    EXPECT_LT(x.beta, 0.99);
    EXPECT_TRUE(is_finite(x.p1) && is_finite(x.p2));
    EXPECT_NO_THROW(validate(x));
  }
}

TEST(Session, CropConsistencyUnderTranslation) {
  const TrackerModel m(tiny_config(), 4);
  const auto seq = short_sequence(4, 10);
  const Point2 off{7, 5};
  TrackerSession a(m), b(m);
  a.init(embed(seq.frames[0], 100, 100, 10, 10), shifted(seq.groundtruth[0], {10, 10}));
  b.init(embed(seq.frames[0], 100, 100, 17, 15), shifted(seq.groundtruth[0], Point2{10, 10} + off));
  for (std::size_t k = 1; k < seq.size(); ++k) {
    const FiveBB x = a.step(embed(seq.frames[k], 100, 100, 10, 10));
    const FiveBB y = b.step(embed(seq.frames[k], 100, 100, 17, 15));
    EXPECT_LT(distance(x.p1 + off, y.p1), 1e-6);
    EXPECT_LT(distance(x.p2 + off, y.p2), 1e-6);
    EXPECT_NEAR(x.beta, y.beta, 1e-9);
  }
}

TEST(SessionTracker, PredictionsReplayToSameTrace) {
  const TrackerModel m(tiny_config(), 5);
  const auto seq = short_sequence(5, 40);
  const auto r = track_sequence(m, seq);
  ASSERT_EQ(r.predictions.size(), seq.size());
  std::vector<CornerBB> replay;
  for (const auto& b : r.predictions) replay.push_back(five_to_corners(b));
  const auto rep = evaluate({seq}, {{seq.id, replay}});
  EXPECT_EQ(rep.traces[0].n_fails, r.trace.n_fails);
  for (std::size_t i = 0; i < seq.size(); ++i) EXPECT_EQ(rep.traces[0].outcomes[i].status, r.trace.outcomes[i].status);
}

TEST(SessionTracker, NeedsFrames) {
  const TrackerModel m(tiny_config(), 5);
  Sequence s{"x", {}, std::vector<CornerBB>(3, square(10, 10, 4))};
  EXPECT_THROW(SessionTracker(m, s), MissingAnnotation);
}
