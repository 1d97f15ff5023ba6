#include <gtest/gtest.h>

#include <fstream>
#include <iterator>

#include "protocol_fixtures.hpp"
#include "support.hpp"

using namespace cltrack;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

std::vector<std::vector<double>> read_rows(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  detail::for_each_record(in, [&](std::size_t, const std::vector<double>& v) { rows.push_back(v); });
  return rows;
}

// Every regular file under `root`, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) {
      std::ifstream in(e.path(), std::ios::binary);
      files[fs::relative(e.path(), root).string()] = {std::istreambuf_iterator<char>(in), {}};
    }
  return files;
}

const char* kSmallModel = R"({"tracker": {"d_model": 8, "heads": 2, "n_history": 2, "input_size": 16, "grid": 4},
  "train": {"epochs": 1, "window": 6}, "synth": {"length": 10, "supersample": 1}})";

}  // namespace

TEST(Cli, HelpExitsZero) {
  const auto r = run_tool({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("convert"), std::string::npos);
  EXPECT_EQ(run_tool({"train", "--help"}).code, 0);
  EXPECT_EQ(run_tool({}).code, kExitInput);
  EXPECT_EQ(run_tool({"frobnicate"}).code, kExitInput);
}

TEST(Cli, ConvertSquareToFive) {
  const auto dir = temp_dir("cli-convert");
  write_text(dir / "c.txt", "0,0,0,2,2,2,2,0\n");
  const auto r = run_tool({"convert", "--input", (dir / "c.txt").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "0,0,2,2,0.5\n");
  fs::remove_all(dir);
}

TEST(Cli, ConvertRoundTrip) {
  const auto dir = temp_dir("cli-roundtrip");
  Rng rng(21);
  std::string text;
  std::vector<FiveBB> boxes;
  for (int i = 0; i < 200; ++i) {
    const FiveBB b = random_box(rng);
    boxes.push_back(b);
    text += cli::join_shortest({b.p1.x, b.p1.y, b.p2.x, b.p2.y, b.beta}) + "\n";
  }
  write_text(dir / "five.txt", text);
  ASSERT_EQ(run_tool({"convert", "--input", (dir / "five.txt").string(), "--to", "corners", "--output",
                 (dir / "corners.txt").string()})
                .code,
            0);
  ASSERT_EQ(run_tool({"convert", "--input", (dir / "corners.txt").string(), "--output", (dir / "back.txt").string()}).code,
            0);
  const auto rows = read_rows(read_text(dir / "back.txt"));
  ASSERT_EQ(rows.size(), boxes.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const FiveBB back{{rows[i][0], rows[i][1]}, {rows[i][2], rows[i][3]}, rows[i][4]};
    const FiveBB want = corners_to_five(five_to_corners(boxes[i]));
    EXPECT_NEAR(back.p1.x, want.p1.x, 1e-6);
    EXPECT_NEAR(back.p1.y, want.p1.y, 1e-6);
    EXPECT_NEAR(back.p2.x, want.p2.x, 1e-6);
    EXPECT_NEAR(back.p2.y, want.p2.y, 1e-6);
    EXPECT_NEAR(back.beta, want.beta, 1e-6);
  }
  fs::remove_all(dir);
}

TEST(Cli, ConvertRejectsMalformedInput) {
  const auto dir = temp_dir("cli-bad");
  write_text(dir / "bad.txt", "0,0,1\n");
  const auto r = run_tool({"convert", "--input", (dir / "bad.txt").string()});
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("line 1"), std::string::npos) << r.err;
  EXPECT_EQ(run_tool({"convert", "--input", (dir / "missing.txt").string()}).code, kExitInput);
  fs::remove_all(dir);
}

TEST(Cli, LossOfIdenticalFilesIsZero) {
  const auto dir = temp_dir("cli-loss");
  write_text(dir / "a.txt", "0,0,2,2,0.5\n1,1,4,5,0.3\n");
  const auto r = run_tool({"loss", "--pred", (dir / "a.txt").string(), "--gt", (dir / "a.txt").string(), "--out-dir",
                      dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), "line,area,angle,arc,total");
  const auto rows = read_rows(r.out.substr(r.out.find('\n') + 1));
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& row : rows) EXPECT_NEAR(row[4], 0.0, 1e-12);
  const auto summary = nlohmann::json::parse(read_text(dir / "loss_summary.json"));
  EXPECT_EQ(summary["count"], 2);
  EXPECT_NEAR(summary["mean"]["total"].get<double>(), 0.0, 1e-12);
  fs::remove_all(dir);
}

TEST(Cli, LossWeightsAndGradientMatchLibrary) {
  const auto dir = temp_dir("cli-loss-grad");
  const FiveBB p{{0, 0}, {3, 1}, 0.4}, g{{0.5, 0.2}, {3, 2}, 0.3};
  write_text(dir / "p.txt", serialize_predictions(std::vector<FiveBB>{p}));
  write_text(dir / "g.txt", serialize_predictions(std::vector<FiveBB>{g}));

  const auto plain = run_tool({"loss", "--pred", (dir / "p.txt").string(), "--gt", (dir / "g.txt").string(), "--lambda1",
                          "0", "--lambda2", "0"});
  ASSERT_EQ(plain.code, 0) << plain.err;
  auto row = read_rows(plain.out.substr(plain.out.find('\n') + 1)).at(0);
  EXPECT_DOUBLE_EQ(row[4], row[1]);

  const auto r = run_tool({"loss", "--pred", (dir / "p.txt").string(), "--gt", (dir / "g.txt").string(), "--grad"});
  ASSERT_EQ(r.code, 0) << r.err;
  row = read_rows(r.out.substr(r.out.find('\n') + 1)).at(0);
  ASSERT_EQ(row.size(), 11u);
  // Printed values are shortest round-trip decimals, so parsing gives the exact doubles back.
  const auto l = circular_loss(p, g, {});
  EXPECT_EQ(row[4], l.total);
  const auto grad = circular_loss_grad(p, g, {});
  const double want[5] = {grad.d_x1, grad.d_y1, grad.d_x2, grad.d_y2, grad.d_beta};
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(row[5 + k], want[k]);
  fs::remove_all(dir);
}

TEST(Cli, LossCountMismatchFails) {
  const auto dir = temp_dir("cli-loss-count");
  write_text(dir / "a.txt", "0,0,2,2,0.5\n");
  write_text(dir / "b.txt", "0,0,2,2,0.5\n0,0,2,2,0.5\n");
  EXPECT_EQ(run_tool({"loss", "--pred", (dir / "a.txt").string(), "--gt", (dir / "b.txt").string()}).code, kExitInput);
  fs::remove_all(dir);
}

TEST(Cli, EvalGroundTruthAsPredictions) {
  const auto dir = temp_dir("cli-eval");
  ASSERT_EQ(run_tool({"synth", "--out-dir", (dir / "data").string(), "--count", "2", "--length", "15", "--seed", "4"}).code,
            0);
  fs::create_directories(dir / "preds");
  for (const auto& id : list_sequences(dir / "data"))
    fs::copy_file(dir / "data" / id / "groundtruth.txt", dir / "preds" / (id + ".txt"));
  const auto r = run_tool({"eval", "--dataset", (dir / "data").string(), "--predictions", (dir / "preds").string(),
                      "--out-dir", (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = nlohmann::json::parse(read_text(dir / "out" / "report.json"));
  // Ground truth goes through the 6-decimal file format and a corners -> five conversion.
  EXPECT_NEAR(rep["accuracy"].get<double>(), 1.0, 1e-6);
  EXPECT_EQ(rep["robustness"].get<double>(), 0.0);
  EXPECT_EQ(rep["per_sequence"].size(), 2u);
  EXPECT_EQ(read_text(dir / "out" / "eao_curve.csv").substr(0, 6), "N,phi\n");

  // A prediction set missing one sequence is a dataset mismatch.
  fs::remove(dir / "preds" / (list_sequences(dir / "data").front() + ".txt"));
  EXPECT_EQ(run_tool({"eval", "--dataset", (dir / "data").string(), "--predictions", (dir / "preds").string(), "--out-dir",
                 (dir / "out").string()})
                .code,
            kExitMismatch);
  fs::remove_all(dir);
}

TEST(Cli, EvalScriptedFailure) {
  const auto dir = temp_dir("cli-eval-fail");
  const auto gt = static_groundtruth(30);
  save_dataset(dir / "data", {Sequence{"s", {}, gt}});
  std::vector<FiveBB> preds;
  for (std::size_t i = 0; i < gt.size(); ++i) preds.push_back(corners_to_five(i == 10 ? square(100, 100, 4) : gt[i]));
  fs::create_directories(dir / "preds");
  write_text(dir / "preds" / "s.txt", serialize_predictions(preds));
  const auto r = run_tool({"eval", "--dataset", (dir / "data").string(), "--predictions", (dir / "preds").string(),
                      "--out-dir", (dir / "out").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = nlohmann::json::parse(read_text(dir / "out" / "report.json"));
  const auto& s = rep["per_sequence"][0];
  EXPECT_EQ(s["n_fails"], 1);
  EXPECT_EQ(s["n_tracked"], 18);
  EXPECT_EQ(s["status"][10], "failed");
  EXPECT_EQ(s["status"][15], "reinit");
  fs::remove_all(dir);
}

TEST(Cli, SynthIsDeterministic) {
  const auto dir = temp_dir("cli-synth");
  for (const char* sub : {"a", "b"})
    ASSERT_EQ(run_tool({"synth", "--out-dir", (dir / sub).string(), "--count", "2", "--length", "5", "--seed", "11"}).code,
              0);
  EXPECT_EQ(snapshot(dir / "a"), snapshot(dir / "b"));
  ASSERT_EQ(run_tool({"synth", "--out-dir", (dir / "c").string(), "--count", "2", "--length", "5", "--seed", "12"}).code, 0);
  EXPECT_NE(snapshot(dir / "a"), snapshot(dir / "c"));
  fs::remove_all(dir);
}

TEST(Cli, GradcheckPassesOnSmallModel) {
  const auto r = run_tool({"gradcheck", "--d-model", "8", "--heads", "2", "--n-history", "2", "--seed", "3"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_EQ(r.out.substr(0, 4), "PASS");
}

TEST(Cli, SynthTrainTrackEval) {
  const auto dir = temp_dir("cli-loop");
  write_text(dir / "run.json", kSmallModel);
  const std::string cfg = (dir / "run.json").string();
  ASSERT_EQ(run_tool({"synth", "--config", cfg, "--out-dir", (dir / "data").string(), "--count", "2"}).code, 0);
  const auto t = run_tool({"train", "--config", cfg, "--dataset", (dir / "data").string(), "--out-dir",
                      (dir / "model").string(), "--epochs", "5", "--max-steps", "3"});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_TRUE(fs::exists(dir / "model" / "model.ckpt"));
  const auto hist = read_text(dir / "model" / "train_history.csv");
  EXPECT_EQ(std::count(hist.begin(), hist.end(), '\n'), 4);

  const auto p = run_tool({"pretrain", "--config", cfg, "--dataset", (dir / "data").string(), "--init",
                      (dir / "model" / "model.ckpt").string(), "--out-dir", (dir / "pre").string(), "--epochs", "1"});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_EQ(read_text(dir / "pre" / "pretrain_history.csv").substr(0, 15), "step,smooth_l1\n");

  const auto k = run_tool({"track", "--dataset", (dir / "data").string(), "--checkpoint",
                      (dir / "model" / "model.ckpt").string(), "--out-dir", (dir / "track").string()});
  ASSERT_EQ(k.code, 0) << k.err;
  const auto e1 = run_tool({"eval", "--dataset", (dir / "data").string(), "--predictions",
                       (dir / "track" / "predictions").string(), "--out-dir", (dir / "e1").string()});
  const auto e2 = run_tool({"eval", "--dataset", (dir / "data").string(), "--tracker",
                       (dir / "model" / "model.ckpt").string(), "--out-dir", (dir / "e2").string()});
  ASSERT_EQ(e1.code, 0) << e1.err;
  ASSERT_EQ(e2.code, 0) << e2.err;
  // Replaying the written predictions reproduces the live run up to the 6-decimal file format.
  const auto r1 = nlohmann::json::parse(read_text(dir / "e1" / "report.json"));
  const auto r2 = nlohmann::json::parse(read_text(dir / "e2" / "report.json"));
  EXPECT_NEAR(r1["accuracy"].get<double>(), r2["accuracy"].get<double>(), 1e-5);
  EXPECT_NEAR(r1["eao"].get<double>(), r2["eao"].get<double>(), 1e-5);
  EXPECT_EQ(r1["robustness"], r2["robustness"]);
  for (std::size_t i = 0; i < r1["per_sequence"].size(); ++i)
    EXPECT_EQ(r1["per_sequence"][i]["status"], r2["per_sequence"][i]["status"]);
  fs::remove_all(dir);
}

TEST(Cli, ConfigErrorsExitTwo) {
  const auto dir = temp_dir("cli-config");
  write_text(dir / "bad.json", R"({"train": {"epoch": 3}})");
  EXPECT_EQ(run_tool({"synth", "--config", (dir / "bad.json").string(), "--out-dir", (dir / "x").string()}).code,
            kExitInput);
  EXPECT_EQ(run_tool({"synth", "--length", "5"}).code, kExitInput);
  EXPECT_EQ(run_tool({"track", "--out-dir", dir.string()}).code, kExitInput);
  fs::remove_all(dir);
}
