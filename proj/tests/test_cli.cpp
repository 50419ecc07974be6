// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>

#include "relit/cli.hpp"
#include "relit/image_io.hpp"
#include "relit/model_io.hpp"

namespace relit {
namespace {

namespace fs = std::filesystem;

using Tree = std::map<std::string, std::string>;

// Every file below `dir` except the manifest (which records wall time).
Tree snapshot(const fs::path& dir) {
  Tree out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().filename() == kManifestName) continue;
    std::ifstream f(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    out[fs::relative(e.path(), dir).string()] = ss.str();
  }
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "relit_cli_test";
    fs::remove_all(root_);
    fs::create_directories(root_);
    ASSERT_EQ(run_cli({"make-fixture", "--seed", "5", "--size", "32x32", "--out-dir", fx().string()}),
              kExitOk);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static fs::path fx() { return root_ / "fixture"; }
  static std::string f(const char* name) { return (fx() / name).string(); }
  static fs::path out(const std::string& name) { return root_ / name; }

  static std::vector<std::string> with_out(std::vector<std::string> args, const fs::path& dir) {
    args.push_back("--out-dir");
    args.push_back(dir.string());
    return args;
  }

  // Runs the command into two fresh directories and requires identical outputs.
  static Tree expect_deterministic(const std::string& tag, const std::vector<std::string>& args) {
    EXPECT_EQ(run_cli(with_out(args, out(tag + "_a"))), kExitOk) << tag;
    EXPECT_EQ(run_cli(with_out(args, out(tag + "_b"))), kExitOk) << tag;
    const Tree a = snapshot(out(tag + "_a"));
    EXPECT_FALSE(a.empty()) << tag;
    EXPECT_TRUE(a == snapshot(out(tag + "_b"))) << tag;
    EXPECT_TRUE(fs::exists(out(tag + "_a") / kManifestName)) << tag;
    return a;
  }

  static inline fs::path root_;
};

TEST_F(CliTest, FixtureContents) {
  for (const char* name : {"model.json", "coeffs.json", "sh_target.json", "sh_input.json", "target.png",
                           "input.png", kManifestName}) {
    EXPECT_TRUE(fs::exists(fx() / name)) << name;
  }
  const RunManifest m = read_manifest(fx() / kManifestName);
  EXPECT_EQ(m.subcommand, "make-fixture");
  EXPECT_EQ(m.seed, 5u);
  EXPECT_EQ(m.outputs.size(), 6u);
}

TEST_F(CliTest, MakeFixtureDeterministic) {
  expect_deterministic("fixture", {"make-fixture", "--seed", "5", "--size", "32x32"});
}

TEST_F(CliTest, RenderDeterministic) {
  const Tree t = expect_deterministic(
      "render", {"render", "--model", f("model.json"), "--coeffs", f("coeffs.json"), "--sh",
                 f("sh_target.json"), "--size", "32x32"});
  EXPECT_EQ(t.count("render.png"), 1u);
  // Rendering the target lighting reproduces the fixture target.
  EXPECT_EQ(read_png(out("render_a") / "render.png"), read_png(fx() / "target.png"));
}

TEST_F(CliTest, EstimateDeterministic) {
  expect_deterministic("estimate", {"estimate", "--model", f("model.json"), "--coeffs",
                                    f("coeffs.json"), "--input", f("input.png")});
}

TEST_F(CliTest, CorrectAndPipelineDeterministic) {
  const std::vector<std::string> common{"--model", f("model.json"), "--coeffs", f("coeffs.json"),
                                        "--input", f("input.png"),  "--target", f("target.png"),
                                        "--steps", "100"};
  std::vector<std::string> correct{"correct"};
  correct.insert(correct.end(), common.begin(), common.end());
  const Tree c = expect_deterministic("correct", correct);
  for (const char* name : {"guidance.png", "sh_estimate.json", "sh_corrected.json", "loss_history.csv"}) {
    EXPECT_EQ(c.count(name), 1u) << name;
  }
  std::vector<std::string> pipeline{"pipeline"};
  pipeline.insert(pipeline.end(), common.begin(), common.end());
  const Tree p = expect_deterministic("pipeline", pipeline);
  EXPECT_EQ(p.count("metrics.json"), 1u);
  EXPECT_EQ(p.count("sh_initial.json"), 1u);
  const Json metrics = load_json(out("pipeline_a") / "metrics.json");
  EXPECT_EQ(metrics.at("steps").get<int>(), 100);
  EXPECT_TRUE(metrics.contains("psnr_improvement_db"));
}

TEST_F(CliTest, ZeroStepsGuidanceEqualsInitialRender) {
  ASSERT_EQ(run_cli({"pipeline", "--model", f("model.json"), "--coeffs", f("coeffs.json"), "--input",
                     f("input.png"), "--steps", "0", "--out-dir", out("zero").string()}),
            kExitOk);
  ASSERT_EQ(run_cli({"render", "--model", f("model.json"), "--coeffs", f("coeffs.json"), "--sh",
                     (out("zero") / "sh_initial.json").string(), "--size", "32x32", "--out-dir",
                     out("zero_render").string()}),
            kExitOk);
  EXPECT_EQ(snapshot(out("zero")).at("guidance.png"), snapshot(out("zero_render")).at("render.png"));
  EXPECT_EQ(load_sh(out("zero") / "sh_corrected.json").coeffs,
            load_sh(out("zero") / "sh_initial.json").coeffs);
}

TEST_F(CliTest, DegradeDeterministicWithSplit) {
  const fs::path in = out("degrade_in");
  fs::create_directories(in);
  const Json coeffs = load_json(fx() / "coeffs.json");
  const Json sh = load_json(fx() / "sh_target.json");
  for (const char* stem : {"a", "b", "c", "d"}) {
    fs::copy_file(fx() / "target.png", in / (std::string(stem) + ".png"));
    save_json(in / (std::string(stem) + ".json"), {{"sh_target", sh}, {"coefficients", coeffs}});
  }
  const Tree t = expect_deterministic(
      "degrade", {"degrade", "--model", f("model.json"), "--input", in.string(), "--seed", "9",
                  "--split", "0.5"});
  EXPECT_EQ(t.count("pairs/a_input.png"), 1u);
  EXPECT_EQ(t.count("pairs/d.json"), 1u);
  const Json pairs = load_json(out("degrade_a") / "pairs.json");
  int test = 0;
  for (const auto& p : pairs.at("pairs")) {
    const double lambda = p.at("lambda_used").get<double>();
    EXPECT_GE(lambda, 1.0);
    EXPECT_LE(lambda, 2.0);
    if (p.at("split") == "test") ++test;
  }
  EXPECT_EQ(test, 2);
}

TEST_F(CliTest, MetricsDeterministic) {
  const Tree t = expect_deterministic("metrics", {"metrics", "--input", f("input.png"), "--target",
                                                  f("target.png")});
  EXPECT_EQ(t.count("metrics.json"), 1u);
  EXPECT_EQ(t.count("metrics.csv"), 1u);
}

TEST_F(CliTest, GradcheckAndDemoDeterministic) {
  expect_deterministic("gradcheck", {"gradcheck", "--scenes", "2"});
  const Json g = load_json(out("gradcheck_a") / "gradcheck.json");
  EXPECT_TRUE(g.at("passed").get<bool>());
  expect_deterministic("demo", {"demo-train", "--steps", "2", "--seed", "4"});
}

TEST_F(CliTest, RerunFromManifestIsByteIdentical) {
  ASSERT_EQ(run_cli({"pipeline", "--model", f("model.json"), "--coeffs", f("coeffs.json"), "--input",
                     f("input.png"), "--target", f("target.png"), "--steps", "50", "--out-dir",
                     out("orig").string()}),
            kExitOk);
  ASSERT_EQ(run_cli({"rerun", "--manifest", (out("orig") / kManifestName).string(), "--out-dir",
                     out("replay").string()}),
            kExitOk);
  EXPECT_TRUE(snapshot(out("orig")) == snapshot(out("replay")));
  const RunManifest m = read_manifest(out("replay") / kManifestName);
  EXPECT_EQ(m.subcommand, "pipeline");
}

TEST_F(CliTest, WritesNothingOutsideOutDir) {
  const fs::path sandbox = out("sandbox");
  fs::create_directories(sandbox);
  fs::copy(fx(), sandbox / "inputs");
  const Tree before = snapshot(sandbox / "inputs");
  ASSERT_EQ(run_cli({"pipeline", "--model", (sandbox / "inputs/model.json").string(), "--coeffs",
                     (sandbox / "inputs/coeffs.json").string(), "--input",
                     (sandbox / "inputs/input.png").string(), "--steps", "5", "--out-dir",
                     (sandbox / "run").string()}),
            kExitOk);
  EXPECT_TRUE(before == snapshot(sandbox / "inputs"));
  std::size_t entries = 0;
  for (const auto& e : fs::directory_iterator(sandbox)) {
    (void)e;
    ++entries;
  }
  EXPECT_EQ(entries, 2u);
  for (const auto& e : fs::recursive_directory_iterator(sandbox / "run")) {
    EXPECT_NE(e.path().extension(), ".tmp") << e.path();
  }
}

TEST_F(CliTest, InputErrorsExitTwo) {
  EXPECT_EQ(run_cli({"render", "--model", out("nope.json").string(), "--coeffs", f("coeffs.json"),
                     "--sh", f("sh_target.json"), "--out-dir", out("err1").string()}),
            kExitInput);
  std::ofstream(out("corrupt.png")) << "not an image";
  EXPECT_EQ(run_cli({"estimate", "--model", f("model.json"), "--coeffs", f("coeffs.json"), "--input",
                     out("corrupt.png").string(), "--out-dir", out("err2").string()}),
            kExitInput);
  EXPECT_EQ(run_cli({"render", "--out-dir", out("err3").string()}), kExitInput);
  EXPECT_EQ(run_cli({"frobnicate"}), kExitInput);
  EXPECT_EQ(run_cli({"render", "--model", f("model.json"), "--coeffs", f("coeffs.json"), "--sh",
                     f("sh_target.json"), "--size", "0x4", "--out-dir", out("err4").string()}),
            kExitInput);
}

TEST_F(CliTest, BinaryExitCodes) {
  const std::string bin = RELIT_BINARY;
  auto status = [](const std::string& cmd) {
    const int raw = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  EXPECT_EQ(status(bin + " --help"), 0);
  EXPECT_EQ(status(bin + " render --model " + out("missing.json").string() + " --coeffs " +
                   f("coeffs.json") + " --sh " + f("sh_target.json") + " --out-dir " +
                   out("bin_err").string()),
            2);
  EXPECT_EQ(status(bin + " metrics --input " + f("input.png") + " --target " + f("target.png") +
                   " --out-dir " + out("bin_ok").string()),
            0);
}

}  // namespace
}  // namespace relit
