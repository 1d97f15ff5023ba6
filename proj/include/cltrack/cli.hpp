#pragma once

// The cltrack command-line tool. run_cli() is the whole program; main() only
// forwards to it so that tests can drive commands in-process.
//
// Exit codes: 0 success, 2 input error, 3 dataset mismatch, 4 numerical failure.

#include <charconv>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cltrack/config.hpp"
#include "cltrack/nn/checkpoint.hpp"
#include "cltrack/protocol.hpp"
#include "cltrack/report.hpp"
#include "cltrack/synth.hpp"
#include "cltrack/tracker/session.hpp"

namespace cltrack {

enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitMismatch = 3, kExitNumerical = 4 };

namespace cli {

namespace fs = std::filesystem;

inline std::string shortest(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string join_shortest(std::initializer_list<double> values) {
  std::string s;
  for (double v : values) s += (s.empty() ? "" : ",") + shortest(v);
  return s;
}

/// Box file with one box per line: 5 values (x1,y1,x2,y2,beta), 8 corner
/// values or 4 axis-aligned values. Lines may mix forms.
inline std::vector<FiveBB> parse_box_file(const std::string& text) {
  std::vector<FiveBB> out;
  std::istringstream in(text);
  detail::for_each_record(in, [&](std::size_t line_no, const std::vector<double>& v) {
    if (v.size() == 5) {
      FiveBB b{{v[0], v[1]}, {v[2], v[3]}, v[4]};
      try {
        validate(b);
      } catch (const Error& e) {
        throw ParseError(e.what(), line_no);
      }
      out.push_back(b);
    } else {
      out.push_back(corners_to_five(corners_from_values(v, line_no)));
    }
  });
  return out;
}

struct Common {
  std::uint64_t seed = 0;
  std::string config;
  std::string out_dir;
};

inline void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--config", c.config, "JSON run configuration");
  cmd->add_option("--out-dir", c.out_dir, "output directory");
}

/// Config file first, then command-line values given explicitly.
inline RunConfig resolve(CLI::App* cmd, const Common& c) {
  RunConfig rc = c.config.empty() ? RunConfig{} : load_run_config(c.config);
  if (cmd->count("--seed") || c.config.empty()) rc.seed = c.seed;
  if (cmd->count("--out-dir")) rc.out_dir = c.out_dir;
  return rc;
}

inline fs::path require_out_dir(const RunConfig& rc) {
  if (rc.out_dir.empty()) throw ConfigError("--out-dir is required");
  fs::create_directories(rc.out_dir);
  return rc.out_dir;
}

inline nn::Checkpoint make_checkpoint(const TrackerModel& m) {
  return {nlohmann::json(m.config()).dump(), m.params()};
}

inline TrackerModel model_from_checkpoint(const std::string& path) {
  nn::Checkpoint ck = nn::load_checkpoint(path);
  TrackerConfig cfg;
  try {
    cfg = nlohmann::json::parse(ck.config).get<TrackerConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint " + path + " has an unreadable configuration: " + e.what());
  }
  return TrackerModel(cfg, std::move(ck.params));
}

inline std::map<std::string, std::vector<CornerBB>> load_predictions(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("predictions directory not found: " + dir.string());
  std::map<std::string, std::vector<CornerBB>> preds;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".txt") continue;
    std::vector<CornerBB> boxes;
    for (const auto& b : parse_box_file(read_text(e.path()))) boxes.push_back(five_to_corners(b));
    preds[e.path().stem().string()] = std::move(boxes);
  }
  return preds;
}

inline void write_eval_outputs(const fs::path& out, const EvalReport& rep) {
  write_text(out / "report.json", report_text(rep));
  write_text(out / "eao_curve.csv", eao_curve_csv(rep.curve));
}

}  // namespace cli

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli;
  CLI::App app{"Rotated-box tracking toolkit: geometry, circular loss, reset-protocol evaluation, transformer tracker"};
  app.require_subcommand(1);
  int status = kExitOk;
  std::function<void()> action;

  // convert
  Common convert_c;
  std::string convert_in, convert_out, convert_to = "five";
  auto* convert = app.add_subcommand("convert", "convert boxes between corner and five-parameter form");
  add_common(convert, convert_c);
  convert->add_option("--input", convert_in, "input box file")->required();
  convert->add_option("--output", convert_out, "output file (default: stdout)");
  convert->add_option("--to", convert_to, "target form")->check(CLI::IsMember({"five", "corners"}));
  convert->callback([&] {
    action = [&] {
      resolve(convert, convert_c);
      const auto boxes = parse_box_file(read_text(convert_in));
      std::string text;
      for (const auto& b : boxes) {
        if (convert_to == "five") {
          text += join_shortest({b.p1.x, b.p1.y, b.p2.x, b.p2.y, b.beta});
        } else {
          const auto& k = five_to_corners(b).corners;
          text += join_shortest({k[0].x, k[0].y, k[1].x, k[1].y, k[2].x, k[2].y, k[3].x, k[3].y});
        }
        text += '\n';
      }
      if (convert_out.empty())
        out << text;
      else
        write_text(convert_out, text);
    };
  });

  // loss
  Common loss_c;
  std::string loss_pred, loss_gt, loss_output;
  double lambda1 = LossWeights{}.lambda1, lambda2 = LossWeights{}.lambda2;
  bool loss_grad = false;
  auto* loss = app.add_subcommand("loss", "circular loss per line of two box files");
  add_common(loss, loss_c);
  loss->add_option("--pred", loss_pred, "predicted boxes")->required();
  loss->add_option("--gt", loss_gt, "ground-truth boxes")->required();
  loss->add_option("--lambda1", lambda1, "weight of the angle term");
  loss->add_option("--lambda2", lambda2, "weight of the arc term");
  loss->add_flag("--grad", loss_grad, "also print the gradient w.r.t. the prediction");
  loss->add_option("--output", loss_output, "CSV output file (default: stdout)");
  loss->callback([&] {
    action = [&] {
      const RunConfig rc = resolve(loss, loss_c);
      LossWeights w = rc.tracker.loss_weights;
      if (loss->count("--lambda1") || loss_c.config.empty()) w.lambda1 = lambda1;
      if (loss->count("--lambda2") || loss_c.config.empty()) w.lambda2 = lambda2;
      const auto pred = parse_box_file(read_text(loss_pred));
      const auto gt = parse_box_file(read_text(loss_gt));
      if (pred.size() != gt.size())
        throw ParseError(std::to_string(pred.size()) + " predictions for " + std::to_string(gt.size()) +
                             " ground-truth boxes",
                         std::min(pred.size(), gt.size()) + 1);
      std::string csv = "line,area,angle,arc,total";
      if (loss_grad) csv += ",d_x1,d_y1,d_x2,d_y2,d_beta,on_boundary";
      csv += "\n";
      LossBreakdown mean;
      for (std::size_t i = 0; i < pred.size(); ++i) {
        const auto l = circular_loss(pred[i], gt[i], w);
        csv += std::to_string(i + 1) + "," + join_shortest({l.area, l.angle, l.arc, l.total});
        if (loss_grad) {
          const auto g = circular_loss_grad(pred[i], gt[i], w);
          csv += "," + join_shortest({g.d_x1, g.d_y1, g.d_x2, g.d_y2, g.d_beta}) + (g.on_boundary ? ",1" : ",0");
        }
        csv += "\n";
        mean.area += l.area;
        mean.angle += l.angle;
        mean.arc += l.arc;
        mean.total += l.total;
      }
      const double n = pred.empty() ? 1.0 : static_cast<double>(pred.size());
      if (loss_output.empty())
        out << csv;
      else
        write_text(loss_output, csv);
      if (!rc.out_dir.empty()) {
        const auto dir = require_out_dir(rc);
        const nlohmann::json summary = {{"count", pred.size()},
                                        {"lambda1", w.lambda1},
                                        {"lambda2", w.lambda2},
                                        {"mean",
                                         {{"area", mean.area / n},
                                          {"angle", mean.angle / n},
                                          {"arc", mean.arc / n},
                                          {"total", mean.total / n}}}};
        write_text(dir / "loss_summary.json", summary.dump(2) + "\n");
      }
    };
  });

  // eval
  Common eval_c;
  std::string eval_dataset, eval_preds, eval_ckpt;
  std::size_t eval_lo = 0, eval_hi = 0;
  auto* eval = app.add_subcommand("eval", "score predictions or a tracker under the reset protocol");
  add_common(eval, eval_c);
  eval->add_option("--dataset", eval_dataset, "ground-truth dataset directory");
  auto* pred_opt = eval->add_option("--predictions", eval_preds, "directory of <sequence>.txt prediction files");
  auto* ckpt_opt = eval->add_option("--checkpoint,--tracker", eval_ckpt, "tracker checkpoint to run live");
  pred_opt->excludes(ckpt_opt);
  eval->add_option("--lo", eval_lo, "first N of the EAO interval");
  eval->add_option("--hi", eval_hi, "last N of the EAO interval");
  eval->callback([&] {
    action = [&] {
      RunConfig rc = resolve(eval, eval_c);
      if (eval->count("--dataset")) rc.dataset = eval_dataset;
      if (eval->count("--predictions")) rc.predictions = eval_preds;
      if (eval->count("--checkpoint")) rc.checkpoint = eval_ckpt;
      if (eval->count("--lo")) rc.eval.lo = eval_lo;
      if (eval->count("--hi")) rc.eval.hi = eval_hi;
      if (rc.dataset.empty()) throw ConfigError("--dataset is required");
      const auto out_dir = require_out_dir(rc);
      EvalReport rep;
      if (!rc.checkpoint.empty() && eval->count("--predictions") == 0) {
        const auto data = load_dataset(rc.dataset, true);
        const TrackerModel model = model_from_checkpoint(rc.checkpoint);
        rep = evaluate(
            data, [&](const Sequence& s) { return std::make_unique<SessionTracker>(model, s); }, rc.eval.lo,
            rc.eval.hi);
      } else {
        if (rc.predictions.empty()) throw ConfigError("either --predictions or --checkpoint is required");
        const auto data = load_dataset(rc.dataset, false);
        rep = evaluate(data, load_predictions(rc.predictions), rc.eval.lo, rc.eval.hi);
      }
      write_eval_outputs(out_dir, rep);
      out << "accuracy " << (rep.accuracy ? shortest(*rep.accuracy) : "n/a") << " robustness "
          << shortest(rep.robustness) << " eao " << shortest(rep.eao) << "\n";
    };
  });

  // synth
  Common synth_c;
  std::size_t synth_count = 1;
  int synth_length = 0;
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth, synth_c);
  synth->add_option("--count", synth_count, "number of sequences");
  synth->add_option("--length", synth_length, "frames per sequence");
  synth->callback([&] {
    action = [&] {
      RunConfig rc = resolve(synth, synth_c);
      if (synth->count("--count")) rc.synth_count = synth_count;
      if (synth->count("--length")) rc.synth.length = synth_length;
      rc.synth.validate();
      const auto dir = require_out_dir(rc);
      std::vector<Sequence> seqs;
      for (std::size_t i = 0; i < rc.synth_count; ++i) seqs.push_back(synth_sequence(rc.synth, rc.seed + i));
      save_dataset(dir, seqs);
      out << "wrote " << seqs.size() << " sequences to " << dir.string() << "\n";
    };
  });

  // train
  Common train_c;
  std::string train_dataset, train_init;
  std::size_t train_epochs = 0, train_steps = 0;
  double train_lr = 0.0;
  bool train_tf = false;
  auto* trn = app.add_subcommand("train", "train the tracker with the circular loss");
  add_common(trn, train_c);
  trn->add_option("--dataset", train_dataset, "training dataset directory");
  trn->add_option("--init", train_init, "checkpoint to start from");
  trn->add_option("--epochs", train_epochs, "epochs");
  trn->add_option("--max-steps", train_steps, "cap on Adam updates");
  trn->add_option("--lr", train_lr, "initial learning rate");
  trn->add_flag("--teacher-forcing", train_tf, "feed ground-truth boxes into the history");
  trn->callback([&] {
    action = [&] {
      RunConfig rc = resolve(trn, train_c);
      if (trn->count("--dataset")) rc.dataset = train_dataset;
      if (trn->count("--epochs")) rc.train.epochs = train_epochs;
      if (trn->count("--max-steps")) rc.train.max_steps = train_steps;
      if (trn->count("--lr")) rc.train.adam.lr = train_lr;
      if (train_tf) rc.train.teacher_forcing = true;
      rc.train.seed = rc.seed;
      if (rc.dataset.empty()) throw ConfigError("--dataset is required");
      const auto dir = require_out_dir(rc);
      const auto data = load_dataset(rc.dataset, true);
      TrackerModel model = train_init.empty() ? TrackerModel(rc.tracker, rc.seed) : model_from_checkpoint(train_init);
      const TrainHistory hist = train(model, data, rc.train);
      for (const auto& w : hist.warnings) err << "warning: " << w << "\n";
      write_text(dir / "train_history.csv", train_history_csv(hist));
      nn::save_checkpoint((dir / "model.ckpt").string(), make_checkpoint(model));
      const auto smooth = smoothed_loss(hist);
      out << "trained " << hist.steps.size() << " steps";
      if (!smooth.empty()) out << ", smoothed loss " << shortest(smooth.front()) << " -> " << shortest(smooth.back());
      out << "\n";
    };
  });

  // pretrain
  Common pre_c;
  std::string pre_dataset, pre_init;
  std::size_t pre_epochs = 0;
  auto* pre = app.add_subcommand("pretrain", "re-initialisation pretraining with the Smooth-L1 loss");
  add_common(pre, pre_c);
  pre->add_option("--dataset", pre_dataset, "dataset directory");
  pre->add_option("--init", pre_init, "checkpoint to start from");
  pre->add_option("--epochs", pre_epochs, "epochs");
  pre->callback([&] {
    action = [&] {
      RunConfig rc = resolve(pre, pre_c);
      if (pre->count("--dataset")) rc.dataset = pre_dataset;
      if (pre->count("--epochs")) rc.pretrain.epochs = pre_epochs;
      rc.pretrain.seed = rc.seed;
      if (rc.dataset.empty()) throw ConfigError("--dataset is required");
      const auto dir = require_out_dir(rc);
      const auto samples = reinit_samples(load_dataset(rc.dataset, true));
      TrackerModel model = pre_init.empty() ? TrackerModel(rc.tracker, rc.seed) : model_from_checkpoint(pre_init);
      const double before = pretrain_loss(model, samples, rc.pretrain.smooth_l1);
      const auto losses = pretrain_reinit(model, samples, rc.pretrain);
      const double after = pretrain_loss(model, samples, rc.pretrain.smooth_l1);
      std::string csv = "step,smooth_l1\n";
      for (std::size_t i = 0; i < losses.size(); ++i) csv += std::to_string(i) + "," + detail::format_double(losses[i]) + "\n";
      write_text(dir / "pretrain_history.csv", csv);
      nn::save_checkpoint((dir / "model.ckpt").string(), make_checkpoint(model));
      out << "pretrained " << losses.size() << " steps, smooth-l1 " << shortest(before) << " -> " << shortest(after)
          << "\n";
    };
  });

  // gradcheck
  Common gc_c;
  std::size_t gc_d = 0, gc_h = 0, gc_n = 0;
  double gc_tol = 1e-3, gc_step = 1e-5;
  auto* gc = app.add_subcommand("gradcheck", "compare backprop with finite differences for every parameter");
  add_common(gc, gc_c);
  gc->add_option("--d-model", gc_d, "model width");
  gc->add_option("--heads", gc_h, "attention heads");
  gc->add_option("--n-history", gc_n, "history length");
  gc->add_option("--tolerance", gc_tol, "maximum relative error");
  gc->add_option("--step", gc_step, "finite-difference step");
  gc->callback([&] {
    action = [&] {
      RunConfig rc = resolve(gc, gc_c);
      TrackerConfig tc = rc.tracker;
      if (gc->count("--d-model")) tc.attention.d_model = gc_d;
      if (gc->count("--heads")) tc.attention.heads = gc_h;
      if (gc->count("--n-history")) tc.n_history = gc_n;
      tc.validate();
      TrackerModel model(tc, rc.seed);
      SynthConfig sc = rc.synth;
      sc.length = 2;
      const Sequence seq = synth_sequence(sc, rc.seed);
      const auto rep = gradcheck(model, seq.frames[0], seq.groundtruth[0], seq.frames[1], seq.groundtruth[1], gc_step);
      std::size_t scalars = 0;
      for (const auto& e : rep.params) scalars += e.scalars;
      const bool pass = rep.max_rel_error < gc_tol;
      out << (pass ? "PASS" : "FAIL") << " max relative error " << shortest(rep.max_rel_error) << " (" << rep.worst
          << ") over " << scalars << " scalars in " << rep.params.size() << " parameters\n";
      if (!pass) status = kExitNumerical;
    };
  });

  // track
  Common track_c;
  std::string track_dataset, track_ckpt;
  auto* trk = app.add_subcommand("track", "run a trained tracker and write per-sequence predictions");
  add_common(trk, track_c);
  trk->add_option("--dataset", track_dataset, "dataset directory");
  trk->add_option("--checkpoint", track_ckpt, "tracker checkpoint");
  trk->callback([&] {
    action = [&] {
      RunConfig rc = resolve(trk, track_c);
      if (trk->count("--dataset")) rc.dataset = track_dataset;
      if (trk->count("--checkpoint")) rc.checkpoint = track_ckpt;
      if (rc.dataset.empty() || rc.checkpoint.empty()) throw ConfigError("--dataset and --checkpoint are required");
      const auto dir = require_out_dir(rc) / "predictions";
      fs::create_directories(dir);
      const TrackerModel model = model_from_checkpoint(rc.checkpoint);
      for (const auto& seq : load_dataset(rc.dataset, true)) {
        const auto r = track_sequence(model, seq);
        write_text(dir / (seq.id + ".txt"), serialize_predictions(r.predictions));
        out << seq.id << ": " << r.trace.n_fails << " failures in " << r.trace.n_frames << " frames\n";
      }
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    if (action) action();
  } catch (const DatasetMismatch& e) {
    err << "dataset mismatch: " << e.what() << "\n";
    return kExitMismatch;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const TapeCorruption& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return status;
}

}  // namespace cltrack
