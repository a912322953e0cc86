#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dgvi/errors.hpp"
#include "dgvi/sim.hpp"
#include "test_util.hpp"

using namespace dgvi;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "dgvi_test_sim" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json small_config() {
  return json::parse(R"({
    "task": "classify",
    "representation": "diagonal",
    "graph": {"n": 3, "edges": [[0, 1], [1, 2]]},
    "kernel": {"n_random": 15, "lengthscale": 0.3, "seed": 2},
    "data": {"source": "csv", "path": ")" DGVI_DATA_DIR R"(/banana.csv",
             "split": {"train": 0.5, "test": 0.3, "verify": 0.2, "seed": 4},
             "partition": {"mode": "random", "seed": 5},
             "replay": {"free_ratio": null}},
    "run": {"n_rounds": 300, "eval_every": 100, "seed": 6}
  })");
}

std::vector<std::string> csv_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

Eigen::MatrixXd two_centers() {
  Eigen::MatrixXd c(2, 2);
  c << 0.0, 0.0, 1.0, -1.0;
  return c;
}

}  // namespace

TEST(Evaluate, ZeroMeanGivesLogTwo) {
  const KernelModel model(two_centers(), 1.0, 0.5);
  const std::vector<LabeledPoint> pts{{{0.1, 0.2}, 1, -1}, {{-2, 1}, 0, -1}, {{3, 3}, 1, -1}};
  const auto r = evaluate(GaussianBelief::isotropic(3, 1.0), model, pts);
  EXPECT_NEAR(r.bce, std::log(2.0), 1e-15);
  EXPECT_THROW(evaluate(GaussianBelief::isotropic(3, 1.0), model, std::vector<LabeledPoint>{}),
               ValidationError);
}

TEST(Evaluate, SaturatedSeparablePredictor) {
  Eigen::MatrixXd c(1, 2);
  c << 0.0, 0.0;
  const KernelModel model(c, 1.0, 1.0);
  // logit = -50 + 100 k(x): positive near the origin, negative far away
  const GaussianBelief b(Vector{{-50.0, 100.0}}, 1e8 * Matrix::Identity(2, 2));
  const std::vector<LabeledPoint> pts{{{0.0, 0.1}, 1, -1}, {{3.0, 0.0}, 0, -1}, {{0.2, 0.0}, 1, -1}};
  EXPECT_EQ(evaluate(b, model, pts).accuracy, 1.0);
}

TEST(Evaluate, MatchesLoop) {
  std::mt19937_64 rng(3);
  const KernelModel model(two_centers(), 1.0, 0.5);
  const GaussianBelief b(testutil::random_vector(3, rng), testutil::random_spd(3, rng));
  std::vector<LabeledPoint> pts;
  for (int i = 0; i < 200; ++i)
    pts.push_back({Eigen::Vector2d(testutil::random_vector(2, rng)), static_cast<int>(rng() & 1u), -1});
  double correct = 0.0, bce = 0.0;
  for (const auto& p : pts) {
    const double prob = expected_sigmoid(b, featurize(model, p.x));
    correct += ((prob >= 0.5) == (p.label == 1)) ? 1.0 : 0.0;
    const double c = std::min(std::max(prob, 1e-12), 1.0 - 1e-12);
    bce -= p.label ? std::log(c) : std::log(1.0 - c);
  }
  const auto r = evaluate(AnyBelief(b), model, pts);
  EXPECT_NEAR(r.accuracy, correct / 200.0, 1e-15);
  EXPECT_NEAR(r.bce, bce / 200.0, 1e-12);
}

TEST(ExportGrid, CornersZeroMeanAndPredictBatch) {
  const auto dir = scratch("grid");
  const KernelModel model(two_centers(), 1.0, 0.5);
  export_grid(GaussianBelief::isotropic(3, 1.0), model, {-1.0, 2.0, 0.0, 4.0}, 2, dir / "g.csv");
  const auto lines = csv_lines(dir / "g.csv");
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0], "x,y,prob");
  EXPECT_EQ(lines[1], "-1,0,0.5");
  EXPECT_EQ(lines[2], "2,0,0.5");
  EXPECT_EQ(lines[3], "-1,4,0.5");
  EXPECT_EQ(lines[4], "2,4,0.5");

  std::mt19937_64 rng(4);
  const GaussianBelief b(testutil::random_vector(3, rng), testutil::random_spd(3, rng));
  export_grid(b, model, {-2.0, 2.0, -2.0, 2.0}, 7, dir / "r.csv");
  const auto rows = csv_lines(dir / "r.csv");
  ASSERT_EQ(rows.size(), 50u);
  Eigen::MatrixXd pts(49, 2);
  std::vector<double> written;
  for (int i = 0; i < 49; ++i) {
    double x, y, p;
    char c1, c2;
    std::istringstream(rows[i + 1]) >> x >> c1 >> y >> c2 >> p;
    pts.row(i) << x, y;
    written.push_back(p);
  }
  const auto ref = predict_batch(b, model, pts);
  for (int i = 0; i < 49; ++i) EXPECT_NEAR(written[i], ref[i], 1e-9);
  EXPECT_THROW(export_grid(b, model, {0, 1, 0, 1}, 1, dir / "x.csv"), ValidationError);
  EXPECT_THROW(export_grid(b, model, {0, 1, 0, 1}, 3, "/nonexistent/dir/x.csv"), ValidationError);
}

TEST(ExportFeatureStats, DiagonalAndFull) {
  const auto dir = scratch("features");
  const KernelModel model(two_centers(), 1.0, 0.5);
  const DiagGaussianBelief d(Vector{{0.1, 0.2, 0.3}}, Vector{{1.0, 4.0, 8.0}});
  export_feature_stats(d, model, dir / "d.csv");
  const auto lines = csv_lines(dir / "d.csv");
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "cx,cy,mean,variance");
  EXPECT_EQ(lines[1], "0,0,0.2,0.25");
  EXPECT_EQ(lines[2], "1,-1,0.3,0.125");

  std::mt19937_64 rng(5);
  const Matrix info = testutil::random_spd(3, rng);
  export_feature_stats(GaussianBelief(Vector::Zero(3), info), model, dir / "f.csv");
  const auto rows = csv_lines(dir / "f.csv");
  const Matrix dense = info.inverse();
  for (int s = 0; s < 2; ++s) {
    double cx, cy, mean, var;
    char c;
    std::istringstream(rows[s + 1]) >> cx >> c >> cy >> c >> mean >> c >> var;
    EXPECT_NEAR(var, dense(s + 1, s + 1), 1e-8);
  }
}

TEST(Config, ParsesAndValidates) {
  auto c = config_from_json(small_config(), ".");
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.graph.n, 3);
  EXPECT_EQ(c.representation, Representation::diagonal);
  EXPECT_FALSE(c.data.replay_free_ratio.has_value());

  auto j = small_config();
  j["data"]["path"] = "/nonexistent/banana.csv";
  try {
    config_from_json(j, ".").validate();
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/banana.csv"), std::string::npos);
  }
  j = small_config();
  j["run"]["n_rounds"] = 0;
  EXPECT_THROW(config_from_json(j, ".").validate(), ValidationError);
  j = small_config();
  j["task"] = "cluster";
  EXPECT_THROW(config_from_json(j, "."), ValidationError);
  j = small_config();
  j["run"]["n_rounds"] = "many";
  EXPECT_THROW(config_from_json(j, "."), ValidationError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ValidationError);

  override_seed(c, 99);
  EXPECT_EQ(c.run.seed, 99u);
  EXPECT_EQ(c.kernel.seed, 99u);
  EXPECT_EQ(c.data.split_seed, 99u);
}

TEST(RunExperiment, MetricsShapeAndDeterminism) {
  const auto config = config_from_json(small_config(), ".");
  const auto a = run_experiment(config);
  // rounds 0, 100, 200, 300 for 3 agents
  ASSERT_EQ(a.metrics.size(), 12u);
  EXPECT_EQ(a.consensus_trace.size(), 300u);
  EXPECT_EQ(a.test_results.size(), 3u);
  for (const auto& m : a.metrics) {
    EXPECT_GE(m.verif_acc, 0.0);
    EXPECT_LE(m.verif_acc, 1.0);
    EXPECT_GE(m.verif_bce, 0.0);
    EXPECT_EQ(m.ms, 0.0);
  }
  const auto d1 = scratch("det1");
  const auto d2 = scratch("det2");
  write_artifacts(a, config, d1);
  write_artifacts(run_experiment(config), config, d2);
  EXPECT_EQ(slurp(d1 / "metrics.csv"), slurp(d2 / "metrics.csv"));
  EXPECT_EQ(slurp(d1 / "belief_2.json"), slurp(d2 / "belief_2.json"));
  EXPECT_EQ(csv_lines(d1 / "metrics.csv").front(), "round,agent,consensus_err,verif_bce,verif_acc,ms");
}

TEST(RunExperiment, ThreadCountDoesNotChangeResults) {
  for (const char* rep : {"diagonal", "full"}) {
    auto j = small_config();
    j["representation"] = rep;
    j["run"]["n_rounds"] = 120;
    auto c1 = config_from_json(j, ".");
    auto c3 = c1;
    c3.run.threads = 3;
    const auto a = run_experiment(c1);
    const auto b = run_experiment(c3);
    for (std::size_t i = 0; i < a.final_beliefs.size(); ++i) {
      EXPECT_EQ(mean_of(a.final_beliefs[i]), mean_of(b.final_beliefs[i])) << rep;
    }
    for (std::size_t k = 0; k < a.metrics.size(); ++k) {
      EXPECT_EQ(a.metrics[k].verif_bce, b.metrics[k].verif_bce);
    }
  }
}

TEST(RunExperiment, IdenticalAgentsHaveZeroConsensusError) {
  auto j = small_config();
  j["data"]["partition"]["mode"] = "replicate";
  j["run"]["shared_stream"] = true;
  j["graph"] = json::parse(R"({"n": 4, "edges": [[0,1],[1,2],[2,3],[3,0]]})");
  for (const char* rep : {"diagonal", "full"}) {
    j["representation"] = rep;
    const auto a = run_experiment(config_from_json(j, "."));
    for (const auto& round : a.consensus_trace)
      for (double e : round) EXPECT_LE(e, 1e-12);
  }
}

TEST(RunExperiment, StreamingIngestAndFreeRatio) {
  auto j = small_config();
  j["data"]["replay"] = json::parse(R"({"free_ratio": 0.5, "capacity": 200, "ingest_per_round": 2})");
  j["run"]["obs_per_round"] = 2;
  const auto a = run_experiment(config_from_json(j, "."));
  EXPECT_EQ(a.final_beliefs.size(), 3u);
}

TEST(RunExperiment, RegressionTask) {
  const auto dir = scratch("regress");
  {
    std::ofstream out(dir / "t.csv");
    out << "x,y,target\n";
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 600; ++i) {
      const double x = u(rng), y = u(rng);
      out << x << ',' << y << ',' << std::sin(x) + 0.5 * y << '\n';
    }
  }
  auto j = small_config();
  j["task"] = "regress";
  j["representation"] = "full";
  j["data"]["path"] = (dir / "t.csv").string();
  j["data"]["noise_precision"] = 100.0;
  j["kernel"]["n_random"] = 30;
  j["kernel"]["lengthscale"] = 1.0;
  j["run"]["n_rounds"] = 600;
  const auto a = run_experiment(config_from_json(j, "."));
  for (const auto& r : a.test_results) EXPECT_GT(r.accuracy, 0.9);  // R^2
}

TEST(RunExperiment, TwoRoomSourceAndExports) {
  auto j = small_config();
  j["data"] = json::parse(R"({
    "source": "two_room",
    "two_room": {"n_robots": 3, "scans_per_robot": 6, "beams_per_scan": 12, "seed": 1},
    "split": {"train": 0.7, "test": 0.2, "verify": 0.1, "mode": "by_trajectory_slices", "slices": 4},
    "partition": {"mode": "per_robot"}
  })");
  j["kernel"] = json::parse(R"({"n_occupied": 5, "n_random": 10, "lengthscale_occupied": 3.0, "lengthscale": 0.3})");
  j["export"] = json::parse(R"({"grid": {"bounds": [0, 20, 0, 10], "resolution": 5, "agent": 1},
                                 "feature_stats": true})");
  const auto config = config_from_json(j, ".");
  const auto a = run_experiment(config);
  const auto dir = scratch("tworoom");
  write_artifacts(a, config, dir);
  EXPECT_EQ(csv_lines(dir / "grid.csv").size(), 26u);
  EXPECT_EQ(csv_lines(dir / "feature_stats.csv").size(), 16u);
  EXPECT_TRUE(std::filesystem::exists(dir / "consensus.csv"));
  const auto summary = read_json(dir / "summary.json");
  EXPECT_EQ(summary.at("n_agents"), 3);
}

TEST(Messages, CarryInformationWeightedMean) {
  std::mt19937_64 rng(9);
  const GaussianBelief b(testutil::random_vector(3, rng), testutil::random_spd(3, rng));
  const auto m = make_message(2, b);
  EXPECT_EQ(m.sender, 2);
  EXPECT_LE(testutil::max_abs(m.information_mean, b.information() * b.mean()), 1e-14);
  const DiagGaussianBelief d(Vector{{1.0, 2.0}}, Vector{{3.0, 0.5}});
  const auto md = make_message(0, d);
  EXPECT_EQ(md.information.cols(), 1);
  EXPECT_EQ(md.information_mean, (Vector{{3.0, 1.0}}));
}
