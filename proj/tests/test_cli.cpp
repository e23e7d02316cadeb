#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include "commands.hpp"

namespace fs = std::filesystem;
using darkfarseer::cli::parse_ratio;
using darkfarseer::cli::run;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

std::map<std::string, std::string> key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    static int counter = 0;
    dir_ = fs::temp_directory_path() / ("darkfarseer_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    std::ofstream(dir_ / name) << text;
    return dir_ / name;
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Small enough to train in well under a second.
  std::vector<std::string> train_args(const std::string& out) const {
    return {"train", "--synthetic", "--nodes", "12", "--steps", "240", "--epochs", "2", "--hidden-dim", "4",
            "--seed", "3", "--out", path(out)};
  }

  fs::path dir_;
};

}  // namespace

TEST(ParseRatio, Forms) {
  EXPECT_EQ(parse_ratio("3:1"), (darkfarseer::training::Ratio{3, 1}));
  EXPECT_EQ(parse_ratio("25%"), (darkfarseer::training::Ratio{3, 1}));
  EXPECT_EQ(parse_ratio("0.5"), (darkfarseer::training::Ratio{1, 1}));
  EXPECT_THROW(parse_ratio("2:0"), std::invalid_argument);
  EXPECT_THROW(parse_ratio("abc"), std::invalid_argument);
  EXPECT_THROW(parse_ratio("100%"), std::invalid_argument);
}

TEST_F(CliTest, MakeGraphFromEdges) {
  const auto edges = write("e.csv", "0,1,1.0\n1,2,2.0\n");
  const auto r = call({"make-graph", "--edges", edges.string(), "--out", path("g")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto kv = key_values(r.out);
  EXPECT_EQ(kv.at("n_nodes"), "3");
  EXPECT_EQ(kv.at("edges"), "2");
  EXPECT_TRUE(fs::exists(dir_ / "g" / "graph.csv"));
  EXPECT_NE(slurp(dir_ / "g" / "manifest.txt").find("make-graph"), std::string::npos);
}

TEST_F(CliTest, MakeGraphFromCoordinates) {
  const auto coords = write("c.csv", "0,37.0,-122.0\n1,37.01,-122.0\n2,37.5,-122.0\n");
  const auto r = call({"make-graph", "--coords", coords.string(), "--sigma", "5", "--out", path("g")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(key_values(r.out).at("n_nodes"), "3");
}

TEST_F(CliTest, MakeGraphErrors) {
  const auto empty = write("empty.csv", "");
  const auto r = call({"make-graph", "--edges", empty.string(), "--out", path("g")});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("no edges"), std::string::npos) << r.err;
  EXPECT_NE(call({"make-graph", "--out", path("g")}).code, 0);
  EXPECT_NE(call({"make-graph", "--edges", "/nonexistent.csv", "--out", path("g")}).code, 0);
  EXPECT_NE(call({"no-such-command"}).code, 0);
}

TEST_F(CliTest, InspectBcc) {
  const auto tri = write("tri.csv", "n_nodes=3\n0,1,0.9\n1,2,0.9\n0,2,0.9\n");
  auto r = call({"inspect-bcc", "--graph", tri.string(), "--mu", "0.5", "--out", path("t")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(key_values(r.out).at("components"), "1");

  const auto path_graph = write("path.csv", "n_nodes=3\n0,1,0.9\n1,2,0.9\n");
  r = call({"inspect-bcc", "--graph", path_graph.string(), "--mu", "0.5", "--out", path("p")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto kv = key_values(r.out);
  EXPECT_EQ(kv.at("components"), "2");
  EXPECT_NE(r.out.find("articulation: 1"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir_ / "p" / "bcc.txt"));

  r = call({"inspect-bcc", "--graph", tri.string(), "--mu", "0.95", "--out", path("h")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(key_values(r.out).at("components"), "0");
}

TEST_F(CliTest, TrainIsDeterministicAndEvalReproducesTestMetrics) {
  auto a = call(train_args("a"));
  ASSERT_EQ(a.code, 0) << a.err;
  auto b = call(train_args("b"));
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(slurp(dir_ / "a" / "checkpoint.txt"), slurp(dir_ / "b" / "checkpoint.txt"));
  EXPECT_EQ(a.out, b.out);
  const auto trained = key_values(a.out);
  EXPECT_EQ(trained.at("virtual_nodes"), "3");

  const auto e = call({"eval", "--checkpoint", path("a/checkpoint.txt"), "--synthetic", "--nodes", "12", "--steps",
                       "240", "--out", path("e")});
  ASSERT_EQ(e.code, 0) << e.err;
  const auto evaluated = key_values(e.out);
  for (const std::string k : {"model_mae", "model_rmse", "mean_mae", "knn_mae"})
    EXPECT_EQ(evaluated.at(k), trained.at("test_" + k)) << k;
}

TEST_F(CliTest, HalfMaskingHidesHalfTheNodes) {
  auto args = train_args("h");
  args.insert(args.end(), {"--ratio", "50%"});
  const auto r = call(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(key_values(r.out).at("virtual_nodes"), "6");
}

TEST_F(CliTest, EvalMissingCheckpoint) {
  const auto r = call({"eval", "--checkpoint", path("missing.txt"), "--synthetic", "--out", path("e")});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST_F(CliTest, ConfigFileAndOverrides) {
  const auto cfg = write("run.ini", "seed=3\n[train]\nsynthetic=true\nnodes=12\nsteps=240\nepochs=2\nhidden-dim=4\n");
  const auto from_file = call({"--config", cfg.string(), "train", "--out", path("f")});
  ASSERT_EQ(from_file.code, 0) << from_file.err;
  const auto direct = call(train_args("d"));
  ASSERT_EQ(direct.code, 0) << direct.err;
  EXPECT_EQ(slurp(dir_ / "f" / "checkpoint.txt"), slurp(dir_ / "d" / "checkpoint.txt"));

  // A flag on the command line wins over the file.
  const auto overridden = call({"--config", cfg.string(), "train", "--epochs", "1", "--out", path("o")});
  ASSERT_EQ(overridden.code, 0) << overridden.err;
  EXPECT_EQ(key_values(overridden.out).at("epochs_run"), "1");

  // The manifest written by a run reproduces that run.
  const auto replay = call({"--config", path("d/manifest.txt"), "train", "--out", path("r")});
  ASSERT_EQ(replay.code, 0) << replay.err;
  EXPECT_EQ(slurp(dir_ / "r" / "checkpoint.txt"), slurp(dir_ / "d" / "checkpoint.txt"));

  const auto bogus = write("bogus.ini", "[train]\nnot-an-option=1\n");
  EXPECT_NE(call({"--config", bogus.string(), "train", "--synthetic", "--out", path("x")}).code, 0);
}

TEST_F(CliTest, SweepWritesTable) {
  const auto r = call({"sweep", "--synthetic", "--nodes", "12", "--steps", "240", "--epochs", "1", "--hidden-dim",
                       "4", "--ratios", "3:1", "--seeds", "0,1", "--param", "eta", "--values", "0,0.1", "--out",
                       path("s")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string table = slurp(dir_ / "s" / "sweep.csv");
  EXPECT_EQ(table.rfind("scenario,seed,mae,rmse,mre\n", 0), 0u) << table;
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 5);
  EXPECT_NE(r.out.find("ratio=3:1;eta=0.1 mae="), std::string::npos) << r.out;
}
