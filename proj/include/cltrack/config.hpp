#pragma once

// Run configuration shared by the command-line tool. Every section is
// optional; unknown keys are rejected at every level.
//
// {
//   "seed": 0,
//   "dataset": "data/train", "predictions": "out/predictions", "out_dir": "out",
//   "checkpoint": "out/model.ckpt",
//   "tracker":  { see TrackerConfig },
//   "train":    { "epochs", "window", "max_steps", "lr", "decay", "teacher_forcing" },
//   "pretrain": { "epochs", "batch", "max_steps", "lr", "decay", "sigma" },
//   "eval":     { "lo", "hi" },
//   "synth":    { "count", "width", "height", "length", "object_w": [lo, hi], "object_h",
//                 "velocity", "velocity_jitter", "angular_velocity", "angular_jitter",
//                 "angle", "noise", "supersample", "id_prefix", "appearance_seed" }
// }

#include <optional>
#include <type_traits>
#include <string>

#include <nlohmann/json.hpp>

#include "cltrack/dataset.hpp"
#include "cltrack/tracker/train.hpp"

namespace cltrack {

struct EvalInterval {
  std::optional<std::size_t> lo;
  std::optional<std::size_t> hi;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string dataset;
  std::string predictions;
  std::string out_dir;
  std::string checkpoint;
  TrackerConfig tracker;
  TrainConfig train;
  PretrainConfig pretrain;
  EvalInterval eval;
  SynthConfig synth;
  std::size_t synth_count = 1;
};

namespace detail {

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [k, _] : j.items())
    if (std::none_of(known.begin(), known.end(), [&](const char* n) { return k == n; }))
      throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>)
    if (!j.at(key).is_number_unsigned()) throw ConfigError(std::string("'") + key + "' must be a non-negative integer");
  try {
    field = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

inline void read_range(const nlohmann::json& j, const char* key, Range& r) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(std::string("'") + key + "' must be a [lo, hi] pair");
  r = {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  using detail::read_key;
  detail::check_keys(j, {"seed", "dataset", "predictions", "out_dir", "checkpoint", "tracker", "train", "pretrain",
                         "eval", "synth"},
                     "run config");
  RunConfig c;
  read_key(j, "seed", c.seed);
  read_key(j, "dataset", c.dataset);
  read_key(j, "predictions", c.predictions);
  read_key(j, "out_dir", c.out_dir);
  read_key(j, "checkpoint", c.checkpoint);
  if (j.contains("tracker")) {
    try {
      c.tracker = j.at("tracker").get<TrackerConfig>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad tracker section: ") + e.what());
    }
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::check_keys(t, {"epochs", "window", "max_steps", "lr", "decay", "teacher_forcing"}, "train");
    read_key(t, "epochs", c.train.epochs);
    read_key(t, "window", c.train.window);
    read_key(t, "max_steps", c.train.max_steps);
    read_key(t, "lr", c.train.adam.lr);
    read_key(t, "decay", c.train.adam.decay);
    read_key(t, "teacher_forcing", c.train.teacher_forcing);
  }
  if (j.contains("pretrain")) {
    const auto& p = j.at("pretrain");
    detail::check_keys(p, {"epochs", "batch", "max_steps", "lr", "decay", "sigma"}, "pretrain");
    read_key(p, "epochs", c.pretrain.epochs);
    read_key(p, "batch", c.pretrain.batch);
    read_key(p, "max_steps", c.pretrain.max_steps);
    read_key(p, "lr", c.pretrain.adam.lr);
    read_key(p, "decay", c.pretrain.adam.decay);
    read_key(p, "sigma", c.pretrain.smooth_l1.sigma);
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    detail::check_keys(e, {"lo", "hi"}, "eval");
    for (const char* k : {"lo", "hi"}) {
      if (!e.contains(k)) continue;
      std::size_t v = 0;
      read_key(e, k, v);
      (std::string(k) == "lo" ? c.eval.lo : c.eval.hi) = v;
    }
  }
  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    detail::check_keys(s,
                       {"count", "width", "height", "length", "object_w", "object_h", "velocity", "velocity_jitter",
                        "angular_velocity", "angular_jitter", "angle", "noise", "supersample", "id_prefix",
                        "appearance_seed"},
                       "synth");
    read_key(s, "count", c.synth_count);
    read_key(s, "width", c.synth.width);
    read_key(s, "height", c.synth.height);
    read_key(s, "length", c.synth.length);
    detail::read_range(s, "object_w", c.synth.object_w);
    detail::read_range(s, "object_h", c.synth.object_h);
    detail::read_range(s, "velocity", c.synth.velocity);
    read_key(s, "velocity_jitter", c.synth.velocity_jitter);
    detail::read_range(s, "angular_velocity", c.synth.angular_velocity);
    read_key(s, "angular_jitter", c.synth.angular_jitter);
    detail::read_range(s, "angle", c.synth.angle);
    read_key(s, "noise", c.synth.noise);
    read_key(s, "supersample", c.synth.supersample);
    read_key(s, "id_prefix", c.synth.id_prefix);
    if (s.contains("appearance_seed")) {
      std::uint64_t v = 0;
      read_key(s, "appearance_seed", v);
      c.synth.appearance_seed = v;
    }
    c.synth.validate();
  }
  c.tracker.validate();
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
  return parse_run_config(j);
}

}  // namespace cltrack
