#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dgvi/data.hpp"
#include "dgvi/features.hpp"
#include "dgvi/io.hpp"
#include "dgvi/network.hpp"
#include "dgvi/vi.hpp"

namespace dgvi {

enum class Task { classify, regress };
enum class Representation { full, diagonal };

struct KernelSpec {
  int n_random = 50;
  int n_occupied = 0;
  double scale = 1.0;
  double lengthscale = 0.3;                   ///< free / randomly drawn centers
  std::optional<double> lengthscale_occupied;  ///< defaults to `lengthscale`
  std::string center_source = "train";        ///< train | test | all
  std::uint64_t seed = 0;
};

struct DataSpec {
  std::string source = "csv";  ///< csv | scans | two_room
  std::filesystem::path path;  ///< csv or scans file (csv/scans sources)
  TwoRoomOptions two_room;
  std::uint64_t two_room_seed = 0;
  int n_free_per_ray = 4;
  double hit_epsilon = 0.0;

  SplitFractions split;
  SplitMode split_mode = SplitMode::random;
  std::optional<std::size_t> verify_cap;
  int n_slices = 10;
  std::uint64_t split_seed = 0;

  PartitionMode partition = PartitionMode::contiguous_trajectory;
  std::uint64_t partition_seed = 0;

  /// Fraction of free-class draws; nullopt draws uniformly over everything stored.
  std::optional<double> replay_free_ratio = 0.8;
  std::size_t replay_capacity = 1000000;
  /// New points moved from an agent's trajectory into its replay buffer each
  /// round; 0 preloads everything.
  int ingest_per_round = 0;

  /// Observation precision for regression targets.
  double noise_precision = 1.0;
};

struct RunSpec {
  int n_rounds = 1000;
  int obs_per_round = 1;
  int eval_every = 500;
  std::uint64_t seed = 0;
  int threads = 1;
  /// Every agent draws with the same RNG stream (identical-data experiments).
  bool shared_stream = false;
  /// Write elapsed milliseconds into the metrics table. Off by default so the
  /// table is byte-identical across reruns.
  bool record_wall_clock = false;
};

struct GridSpec {
  std::array<double, 4> bounds{0.0, 1.0, 0.0, 1.0};  ///< xmin, xmax, ymin, ymax
  int resolution = 100;
  int agent = 0;
};

struct ExportSpec {
  std::optional<GridSpec> grid;
  bool feature_stats = false;
  bool consensus_trace = true;
};

struct ExperimentConfig {
  Task task = Task::classify;
  Representation representation = Representation::full;
  GraphSpec graph;
  KernelSpec kernel;
  DataSpec data;
  RunSpec run;
  UpdateOptions update;
  double prior_information = 1.0;
  ExportSpec exports;

  /// Throws ValidationError naming the offending field or missing file.
  void validate() const;
};

/// Parses a config; relative paths resolve against `base_dir`.
ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Sets the run, kernel, split, partition and simulation seeds.
void override_seed(ExperimentConfig& config, std::uint64_t seed);

/// What an agent publishes at the end of a round: information and
/// information-weighted mean (Omega mu, or D .* mu for diagonal beliefs).
struct RoundMessage {
  int sender = 0;
  Eigen::MatrixXd information;  ///< dim x dim, or dim x 1 for diagonal beliefs
  Eigen::VectorXd information_mean;
};

RoundMessage make_message(int sender, const AnyBelief& belief);

struct AgentState {
  int id = 0;
  AnyBelief belief;
  ReplayBuffer replay;
  std::mt19937_64 rng;
};

struct MetricsRecord {
  int round = 0;
  int agent = 0;
  double consensus_err = 0.0;
  double verif_bce = 0.0;  ///< mean squared error for regression runs
  double verif_acc = 0.0;  ///< coefficient of determination for regression runs
  double ms = 0.0;
};

struct EvalResult {
  double accuracy = 0.0;
  double bce = 0.0;
};

struct RunArtifacts {
  std::vector<AnyBelief> final_beliefs;
  KernelModel model;
  WeightMatrix weights;
  std::vector<MetricsRecord> metrics;
  /// consensus_trace[r][i]: agent i's consensus error after round r + 1.
  std::vector<std::vector<double>> consensus_trace;
  /// Final test-set evaluation per agent.
  std::vector<EvalResult> test_results;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t n_verify = 0;
  double elapsed_ms = 0.0;
};

RunArtifacts run_experiment(const ExperimentConfig& config);

/// Writes metrics.csv, summary.json, kernel.json, belief_<i>.json and the
/// configured grid / feature-stat / consensus files into `out_dir`.
void write_artifacts(const RunArtifacts& artifacts, const ExperimentConfig& config,
                     const std::filesystem::path& out_dir);

/// Accuracy at threshold 0.5 and binary cross-entropy with predictions clamped
/// to [1e-12, 1 - 1e-12]. Throws ValidationError on an empty set.
EvalResult evaluate(const AnyBelief& belief, const KernelModel& model,
                    std::span<const LabeledPoint> points, double xi = kDefaultXi);
EvalResult evaluate(const GaussianBelief& belief, const KernelModel& model,
                    std::span<const LabeledPoint> points, double xi = kDefaultXi);
EvalResult evaluate(const DiagGaussianBelief& belief, const KernelModel& model,
                    std::span<const LabeledPoint> points, double xi = kDefaultXi);

/// (mean squared error, R^2) of the posterior-mean predictor.
EvalResult evaluate_regression(const AnyBelief& belief, const KernelModel& model,
                               std::span<const TargetPoint> points);

/// CSV `x,y,prob`, row-major over a resolution x resolution grid spanning the
/// bounds inclusively (y outer, x inner).
void export_grid(const AnyBelief& belief, const KernelModel& model,
                 const std::array<double, 4>& bounds, int resolution,
                 const std::filesystem::path& path, double xi = kDefaultXi);

/// CSV `cx,cy,mean,variance` per kernel center (constant feature excluded).
void export_feature_stats(const AnyBelief& belief, const KernelModel& model,
                          const std::filesystem::path& path);

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRecord> records);

}  // namespace dgvi
