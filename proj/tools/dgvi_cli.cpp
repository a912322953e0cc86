// dgvi: experiment runner, evaluator, oracle verification and data conversion.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "dgvi/data.hpp"
#include "dgvi/errors.hpp"
#include "dgvi/io.hpp"
#include "dgvi/oracle.hpp"
#include "dgvi/sim.hpp"
#include "dgvi/verify.hpp"

namespace {

using namespace dgvi;

int cmd_run(const std::filesystem::path& config_path, std::optional<std::uint64_t> seed,
            const std::filesystem::path& out_dir, std::optional<int> threads) {
  auto config = load_config(config_path);
  if (seed) override_seed(config, *seed);
  if (threads) config.run.threads = *threads;
  const auto artifacts = run_experiment(config);
  write_artifacts(artifacts, config, out_dir);
  std::cout << "rounds " << config.run.n_rounds << ", agents " << artifacts.weights.size()
            << ", " << artifacts.elapsed_ms / 1000.0 << " s\n";
  for (std::size_t i = 0; i < artifacts.test_results.size(); ++i) {
    const auto& r = artifacts.test_results[i];
    if (config.task == Task::classify) {
      std::printf("agent %zu: test accuracy %.4f, bce %.4f\n", i, r.accuracy, r.bce);
    } else {
      std::printf("agent %zu: test r2 %.4f, mse %.6g\n", i, r.accuracy, r.bce);
    }
  }
  std::cout << "artifacts written to " << out_dir.string() << "\n";
  return 0;
}

int cmd_eval(const std::filesystem::path& belief_path, const std::filesystem::path& kernel_path,
             const std::filesystem::path& data_path, const std::string& task, double xi) {
  const auto belief = belief_from_json(read_json(belief_path));
  const auto model = kernel_from_json(read_json(kernel_path));
  if (task == "regress") {
    const auto points = load_target_csv(data_path);
    const auto r = evaluate_regression(belief, model, points);
    std::printf("points %zu\nr2 %.6f\nmse %.6g\n", points.size(), r.accuracy, r.bce);
  } else {
    const auto points = load_labeled_csv(data_path);
    const auto r = evaluate(belief, model, points, xi);
    std::printf("points %zu\naccuracy %.6f\nbce %.6f\n", points.size(), r.accuracy, r.bce);
  }
  return 0;
}

int cmd_verify(const std::string& suite, std::uint64_t seed) {
  const auto results = run_suite(suite, seed);
  bool ok = true;
  std::printf("%-58s %14s %10s  %s\n", "check", "value", "tolerance", "result");
  for (const auto& r : results) {
    std::printf("%-58s %14.6g %10.3g  %s\n", r.name.c_str(), r.value, r.tolerance,
                r.passed ? "PASS" : "FAIL");
    if (!r.detail.empty()) std::printf("    %s\n", r.detail.c_str());
    ok = ok && r.passed;
  }
  return ok ? 0 : 2;
}

int cmd_export_particles(std::uint64_t seed, int n_particles, const std::filesystem::path& out) {
  std::vector<GaussianBelief> priors;
  for (int k = 0; k < 4; ++k) {
    const double a = k * 3.14159265358979323846 / 2.0;
    priors.emplace_back(Vector{{std::cos(a), std::sin(a)}}, Matrix::Identity(2, 2));
  }
  const std::vector<double> w(4, 0.25);
  const LinearGaussianModel model{Matrix::Identity(2, 2), Matrix::Identity(2, 2)};
  const Vector z{{1.0, 1.0}};
  const auto exact = conjugate_fusion_posterior(priors, w, model, z);
  const auto result = particle_fusion_posterior(priors, w, model, z, n_particles, seed);
  nlohmann::json j;
  j["priors"] = nlohmann::json::array();
  for (const auto& p : priors) j["priors"].push_back(belief_to_json(p));
  j["z"] = {z(0), z(1)};
  j["conjugate"] = belief_to_json(exact);
  j["fitted"] = belief_to_json(result.fitted);
  j["effective_sample_size"] = result.effective_sample_size;
  auto& pts = j["particles"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < result.particles.rows(); ++i) {
    pts.push_back({result.particles(i, 0), result.particles(i, 1)});
  }
  write_json(out, j);
  std::printf("mean gap %.4g, written %s\n",
              (result.fitted.mean() - exact.mean()).norm(), out.string().c_str());
  return 0;
}

int cmd_normalize_graph(const std::filesystem::path& in, const std::filesystem::path& out) {
  GraphSpec g = graph_from_json(read_json(in));
  const WeightMatrix a = build_weight_matrix(g);
  if (!is_strongly_connected(a)) throw ValidationError("graph is not strongly connected");
  g.weights = a.entries();
  write_json(out, graph_to_json(g));
  return 0;
}

int cmd_convert_lidar(const std::filesystem::path& in, const std::filesystem::path& out,
                      int n_free, double hit_epsilon, bool with_robot) {
  std::ofstream os(out);
  if (!os) throw ValidationError("cannot write " + out.string());
  os.precision(17);
  os << (with_robot ? "x,y,label,robot\n" : "x,y,label\n");
  std::size_t n_scans = 0;
  std::size_t n_points = 0;
  for_each_scan_jsonl(in, [&](const LidarScan& scan) {
    for (const auto& p : lidar_scan_to_points(scan, n_free, hit_epsilon)) {
      os << p.x[0] << ',' << p.x[1] << ',' << p.label;
      if (with_robot) os << ',' << p.robot;
      os << '\n';
      ++n_points;
    }
    ++n_scans;
  });
  std::printf("%zu scans -> %zu points\n", n_scans, n_points);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed Gaussian variational inference toolkit"};
  app.require_subcommand(1);

  std::filesystem::path config_path;
  std::filesystem::path out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  run->add_option("--config", config_path, "Experiment config")->required();
  run->add_option("--seed", seed, "Override every seed in the config");
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  std::filesystem::path belief_path, kernel_path, data_path;
  std::string task = "classify";
  double xi = kDefaultXi;
  auto* eval = app.add_subcommand("eval", "Evaluate a saved belief on a data file");
  eval->add_option("--belief", belief_path, "belief JSON")->required();
  eval->add_option("--kernel", kernel_path, "kernel JSON")->required();
  eval->add_option("--data", data_path, "CSV x,y,label (or x,y,target)")->required();
  eval->add_option("--task", task, "classify | regress")
      ->check(CLI::IsMember({"classify", "regress"}));
  eval->add_option("--xi", xi, "Probit scale");

  std::string suite = "all";
  std::uint64_t verify_seed = 0;
  auto* verify = app.add_subcommand("verify", "Run oracle checks and print a pass/fail table");
  verify->add_option("--suite", suite,
                     "unit_circle | woodbury | sinkhorn | probit | regression | spd | all");
  verify->add_option("--seed", verify_seed, "Random seed");

  auto* exp = app.add_subcommand("export", "Export grids, feature statistics or particles");
  exp->require_subcommand(1);
  std::array<double, 4> bounds{0.0, 1.0, 0.0, 1.0};
  int resolution = 100;
  std::filesystem::path export_out;
  auto* grid = exp->add_subcommand("grid", "Occupancy probability grid CSV");
  grid->add_option("--belief", belief_path)->required();
  grid->add_option("--kernel", kernel_path)->required();
  grid->add_option("--bounds", bounds, "xmin xmax ymin ymax")->expected(4);
  grid->add_option("--resolution", resolution);
  grid->add_option("--xi", xi);
  grid->add_option("--out", export_out)->required();
  auto* features = exp->add_subcommand("features", "Per-center mean/variance CSV");
  features->add_option("--belief", belief_path)->required();
  features->add_option("--kernel", kernel_path)->required();
  features->add_option("--out", export_out)->required();
  std::uint64_t particle_seed = 0;
  int n_particles = 100000;
  auto* particles = exp->add_subcommand("particles", "Particle vs conjugate fusion JSON");
  particles->add_option("--seed", particle_seed);
  particles->add_option("--particles", n_particles);
  particles->add_option("--out", export_out)->required();

  std::filesystem::path in_path, out_path;
  auto* norm = app.add_subcommand("normalize-graph", "Write the mixing matrix for a graph file");
  norm->add_option("--in", in_path)->required();
  norm->add_option("--out", out_path)->required();

  int n_free = 4;
  double hit_epsilon = 0.0;
  bool with_robot = false;
  auto* lidar = app.add_subcommand("convert-lidar", "Scans JSON-lines to labeled points CSV");
  lidar->add_option("--in", in_path)->required();
  lidar->add_option("--out", out_path)->required();
  lidar->add_option("--free-per-ray", n_free);
  lidar->add_option("--hit-epsilon", hit_epsilon);
  lidar->add_flag("--robot", with_robot, "Add a robot id column");

  TwoRoomOptions two_room;
  std::uint64_t sim_seed = 0;
  auto* simulate = app.add_subcommand("simulate-scans", "Synthetic two-room LiDAR scans");
  simulate->add_option("--out", out_path)->required();
  simulate->add_option("--seed", sim_seed);
  simulate->add_option("--robots", two_room.n_robots);
  simulate->add_option("--scans-per-robot", two_room.scans_per_robot);
  simulate->add_option("--beams", two_room.beams_per_scan);
  simulate->add_option("--max-range", two_room.max_range);
  simulate->add_option("--noise", two_room.range_noise);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(config_path, seed, out_dir, threads);
    if (*eval) return cmd_eval(belief_path, kernel_path, data_path, task, xi);
    if (*verify) return cmd_verify(suite, verify_seed);
    if (*grid) {
      export_grid(belief_from_json(read_json(belief_path)), kernel_from_json(read_json(kernel_path)),
                  bounds, resolution, export_out, xi);
      return 0;
    }
    if (*features) {
      export_feature_stats(belief_from_json(read_json(belief_path)),
                           kernel_from_json(read_json(kernel_path)), export_out);
      return 0;
    }
    if (*particles) return cmd_export_particles(particle_seed, n_particles, export_out);
    if (*norm) return cmd_normalize_graph(in_path, out_path);
    if (*lidar) return cmd_convert_lidar(in_path, out_path, n_free, hit_epsilon, with_robot);
    if (*simulate) {
      const auto scans = simulate_two_room_scans(two_room, sim_seed);
      write_scans_jsonl(out_path, scans);
      std::printf("%zu scans written to %s\n", scans.size(), out_path.string().c_str());
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
