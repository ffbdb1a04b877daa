#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tcn/cli.hpp"
#include "tcn/featcomb.hpp"

namespace tcn {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunResult {
  int code = 0;
  std::string out;
  std::string err;
};

RunResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "tcn");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tcn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << content;
    return p;
  }

  fs::path synth_csv(const std::string& name, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    const Dataset ds = synth_interaction(n, 4, InteractionRule::ProductSign, 0.1, rng);
    const fs::path p = dir_ / name;
    write_csv(p, ds, "target");
    return p;
  }

  fs::path config(const json& j) {
    const fs::path p = dir_ / "config.json";
    std::ofstream(p) << j.dump();
    return p;
  }

  fs::path dir_;
};

TEST_F(Cli, TransformHeaderContract) {
  const auto in = write("in.csv", "a,b,c,label\n1,2,3,x\n4,5,6,y\n");
  const auto out = dir_ / "out.csv";
  const RunResult r = run_cli({"transform", "--input", in.string(), "--output", out.string(),
                               "--label-column", "label", "--m", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream f(out);
  std::string header;
  std::getline(f, header);
  EXPECT_EQ(header, "comb_0_1,comb_0_2,comb_1_2,label");
  std::string row;
  std::getline(f, row);
  EXPECT_EQ(row, "2,3,6,x");
}

TEST_F(Cli, TransformOptionalColumns) {
  const auto in = write("in.csv", "a,b,c,label\n1,2,3,x\n");
  const auto out = dir_ / "out.csv";
  const RunResult r =
      run_cli({"transform", "--input", in.string(), "--output", out.string(), "--label-column",
               "3", "--approach", "pairwise", "--m", "3", "--augment-original",
               "--append-global-interaction"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream f(out);
  std::string header, row;
  std::getline(f, header);
  std::getline(f, row);
  EXPECT_EQ(header, "comb_0_1_2,a,b,c,global_interaction,label");
  EXPECT_EQ(row, "11,1,2,3,11,x");
}

TEST_F(Cli, TransformErrors) {
  const auto in = write("in.csv", "a,b,c,label\n1,2,3,x\n");
  const auto out = (dir_ / "out.csv").string();
  const RunResult big = run_cli({"transform", "--input", in.string(), "--output", out,
                                 "--label-column", "label", "--m", "5"});
  EXPECT_NE(big.code, 0);
  EXPECT_NE(big.err.find("m exceeds feature count"), std::string::npos) << big.err;
  EXPECT_TRUE(big.out.empty());

  const RunResult cap = run_cli({"transform", "--input", in.string(), "--output", out,
                                 "--label-column", "label", "--max-combined", "2"});
  EXPECT_EQ(cap.code, cli::kCapacity);

  const RunResult parse = run_cli({"transform", "--input", write("bad.csv", "a,label\nq,x\n").string(),
                                   "--output", out, "--label-column", "label"});
  EXPECT_EQ(parse.code, cli::kData);

  EXPECT_EQ(run_cli({"transform", "--input", in.string()}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"transform", "--input", in.string(), "--output", out, "--label-column",
                     "label", "--approach", "sum"})
                .code,
            cli::kUsage);
}

TEST_F(Cli, TransformRoundTrip) {
  const auto in = synth_csv("in.csv", 100, 1);
  const auto out = dir_ / "out.csv";
  ASSERT_EQ(run_cli({"transform", "--input", in.string(), "--output", out.string(),
                     "--label-column", "target", "--m", "3"})
                .code,
            0);
  const Dataset raw = load_csv(in, std::string("target"));
  CombinationSpec spec;
  spec.m = 3;
  const Matrix expected = transform_dataset(raw.features, spec).values;
  const Dataset back = load_csv(out, std::string("target"));
  ASSERT_TRUE(back.features.same_shape(expected));
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const double e = expected.values()[i];
    EXPECT_LE(std::abs(back.features.values()[i] - e), 1e-12 * std::max(1.0, std::abs(e)));
  }
  EXPECT_EQ(back.labels, raw.labels);
}

TEST_F(Cli, TrainMinimalConfigUsesDefaults) {
  synth_csv("data.csv", 120, 2);
  const auto cfg = config({{"dataset", "data.csv"}, {"label_column", "target"}, {"max_epochs", 3}});
  const RunResult r = run_cli({"train", "--config", cfg.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const fs::path out_dir = dir_ / "tcn_run";
  ASSERT_TRUE(fs::exists(out_dir / "checkpoint.json"));
  const json results = read_json(out_dir / "results.json");
  const json& c = results["config"];
  EXPECT_EQ(c["model"], "tcn");
  EXPECT_EQ(c["learning_rate"], 0.001);
  EXPECT_EQ(c["batch_size"], 10);
  EXPECT_EQ(c["hidden1"], 20);
  EXPECT_EQ(c["hidden2"], 10);
  EXPECT_EQ(c["dropout_rate"], 0.5);
  EXPECT_EQ(c["m"], 2);
  EXPECT_EQ(c["val_fraction"], 0.1);
  for (const char* key : {"history", "final_metrics", "wall_time_seconds", "rng_algorithm"})
    EXPECT_TRUE(results.contains(key)) << key;
  EXPECT_TRUE(results["final_metrics"].contains("validation"));
  EXPECT_NE(r.out.find("validation"), std::string::npos);
}

TEST_F(Cli, TrainUnknownKeySuggestsClosest) {
  const auto cfg = config({{"dataset", "data.csv"},
                           {"label_column", "target"},
                           {"learning_rat", 0.01},
                           {"batch_sise", 5},
                           {"hidden1", "wide"}});
  const RunResult r = run_cli({"train", "--config", cfg.string()});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("learning_rat"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("learning_rate"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("batch_size"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("hidden1"), std::string::npos) << r.err;
  EXPECT_EQ(cli::suggest_key("learning_rat"), "learning_rate");
  EXPECT_EQ(cli::suggest_key("zzzzzzzz"), "");
}

TEST_F(Cli, TrainMissingDatasetIsConfigError) {
  const auto cfg = config(json::object());
  const RunResult r = run_cli({"train", "--config", cfg.string()});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("dataset"), std::string::npos);
  EXPECT_NE(r.err.find("label_column"), std::string::npos);
}

TEST_F(Cli, EvalReproducesTrainMetricsAndMatchesByName) {
  const auto data = synth_csv("data.csv", 150, 3);
  const auto cfg = config({{"dataset", "data.csv"},
                           {"label_column", "target"},
                           {"max_epochs", 4},
                           {"output_dir", "run"}});
  ASSERT_EQ(run_cli({"train", "--config", cfg.string()}).code, 0);
  const fs::path ckpt = dir_ / "run" / "checkpoint.json";
  const json results = read_json(dir_ / "run" / "results.json");

  const RunResult e = run_cli({"eval", "--checkpoint", ckpt.string(), "--input", data.string()});
  ASSERT_EQ(e.code, 0) << e.err;
  const json metrics = json::parse(e.out);
  const json& train = results["final_metrics"]["train"];
  EXPECT_NEAR(metrics["accuracy"].get<double>(), train["accuracy"].get<double>(), 1e-9);
  EXPECT_NEAR(metrics["mean_loss"].get<double>(), train["mean_loss"].get<double>(), 1e-9);
  EXPECT_EQ(metrics["confusion"], train["confusion"]);

  // Same data with the columns reversed.
  const Dataset ds = load_csv(data, std::string("target"));
  std::ofstream perm(dir_ / "perm.csv");
  perm << "target";
  for (std::size_t j = ds.n_features(); j-- > 0;) perm << ',' << ds.feature_names[j];
  perm << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    perm << ds.class_names[static_cast<std::size_t>(ds.labels[i])];
    for (std::size_t j = ds.n_features(); j-- > 0;) perm << ',' << format_double(ds.features(i, j));
    perm << '\n';
  }
  perm.close();
  const RunResult p =
      run_cli({"eval", "--checkpoint", ckpt.string(), "--input", (dir_ / "perm.csv").string()});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_EQ(json::parse(p.out), metrics);

  const auto missing = write("missing.csv", "x0,x1,x2,target\n1,2,3,0\n");
  const RunResult m =
      run_cli({"eval", "--checkpoint", ckpt.string(), "--input", missing.string()});
  EXPECT_EQ(m.code, cli::kData);
  EXPECT_NE(m.err.find("x3"), std::string::npos) << m.err;
}

TEST_F(Cli, GradcheckDefaultsPassAndListLayers) {
  const RunResult r = run_cli({"gradcheck"});
  ASSERT_EQ(r.code, 0) << r.err << r.out;
  const json report = json::parse(r.out);
  EXPECT_TRUE(report["passed"].get<bool>());
  for (const char* type : {"dense", "residual", "batchnorm", "relu", "dropout", "softmax_ce"})
    EXPECT_TRUE(report["per_layer_type"].contains(type)) << type;
}

TEST_F(Cli, GradcheckCnnConfigListsConv) {
  const auto cfg = config({{"model", "cnn1d"}});
  const RunResult r = run_cli({"gradcheck", "--config", cfg.string()});
  ASSERT_EQ(r.code, 0) << r.err << r.out;
  EXPECT_TRUE(json::parse(r.out)["per_layer_type"].contains("conv1d"));
}

TEST_F(Cli, GradcheckFailuresExitNonzero) {
  const RunResult corrupted = run_cli({"gradcheck", "--corrupt-gradient", "1.0"});
  EXPECT_EQ(corrupted.code, cli::kCheckFailed);
  EXPECT_FALSE(json::parse(corrupted.out)["passed"].get<bool>());

  const auto cfg = config({{"hidden1", 100}});
  EXPECT_EQ(run_cli({"gradcheck", "--config", cfg.string()}).code, cli::kCapacity);
}

TEST_F(Cli, BinaryExitCodes) {
  const std::string bin = TCN_CLI_PATH;
  const auto quiet = " >" + (dir_ / "o.txt").string() + " 2>" + (dir_ / "e.txt").string();
  EXPECT_EQ(std::system((bin + " gradcheck" + quiet).c_str()), 0);
  const int usage = std::system((bin + " frobnicate" + quiet).c_str());
  EXPECT_NE(usage, 0);
  std::ifstream err(dir_ / "e.txt");
  const std::string text((std::istreambuf_iterator<char>(err)), std::istreambuf_iterator<char>());
  EXPECT_FALSE(text.empty());
}

}  // namespace
}  // namespace tcn
