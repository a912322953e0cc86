#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dgvi {

/// Binary occupancy sample: label 0 = free, 1 = occupied. `robot` is the id of
/// the robot whose scan produced the point, or -1 when unknown.
struct LabeledPoint {
  Eigen::Vector2d x;
  int label = 0;
  int robot = -1;
};

/// Real-valued regression sample.
struct TargetPoint {
  Eigen::Vector2d x;
  double target = 0.0;
};

/// One LiDAR sweep. pose = (px, py, heading) in the world frame, beam angles in
/// the sensor frame, ranges in meters.
struct LidarScan {
  Eigen::Vector3d pose = Eigen::Vector3d::Zero();
  std::vector<double> angles;
  std::vector<double> ranges;
  double max_range = 0.0;
  int robot = -1;
};

/// Per beam: `n_free_per_ray` free points at fractions k / (n_free_per_ray + 1)
/// of the range, plus one occupied point at the endpoint when the beam hit
/// something (range < max_range - hit_epsilon). Non-positive ranges are skipped.
std::vector<LabeledPoint> lidar_scan_to_points(const LidarScan& scan, int n_free_per_ray,
                                               double hit_epsilon = 0.0);

/// Bounded per-class sample store.
///
/// With a free ratio set, each draw picks the free store with that probability
/// and then a uniform element of the chosen store (falling back to the other
/// store when the chosen one is empty). Without a ratio, draws are uniform over
/// everything stored. Oldest points are evicted once a store is at capacity.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::optional<double> free_ratio);

  void push(const LabeledPoint& p);
  void push(std::span<const LabeledPoint> points);

  std::size_t free_size() const { return free_.size(); }
  std::size_t occupied_size() const { return occupied_.size(); }
  std::size_t size() const { return free_.size() + occupied_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::optional<double> free_ratio() const { return free_ratio_; }

  LabeledPoint draw_one(std::mt19937_64& rng) const;
  std::vector<LabeledPoint> draw(int count, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::optional<double> free_ratio_;
  std::deque<LabeledPoint> free_;
  std::deque<LabeledPoint> occupied_;
};

std::vector<LabeledPoint> replay_draw(const ReplayBuffer& buffer, int count, std::uint64_t seed);

enum class PartitionMode { contiguous_trajectory, random, per_robot, replicate };
enum class SplitMode { by_trajectory_slices, random };

PartitionMode parse_partition_mode(const std::string& s);
SplitMode parse_split_mode(const std::string& s);

/// Index lists, one per agent. `replicate` hands every agent the full set (used
/// for identical-stream consensus checks); the other modes are exact partitions.
std::vector<std::vector<std::size_t>> partition_indices(std::size_t n_points, int n_agents,
                                                        PartitionMode mode, std::uint64_t seed,
                                                        std::span<const int> robot_ids = {});

std::vector<std::vector<LabeledPoint>> partition_dataset(std::span<const LabeledPoint> points,
                                                         int n_agents, PartitionMode mode,
                                                         std::uint64_t seed);

struct SplitFractions {
  double train = 1.0;
  double test = 0.0;
  double verify = 0.0;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<std::size_t> verify;
};

/// Disjoint train/test/verify index sets of sizes floor(fraction * N) (verify
/// capped at `verify_cap` when given). Trajectory mode cuts the ordered data into
/// `n_slices` consecutive slices and takes the train, test and verify shares from
/// the front of each slice in that order.
SplitIndices split_indices(std::size_t n_points, const SplitFractions& fractions, SplitMode mode,
                           std::uint64_t seed, std::optional<std::size_t> verify_cap = std::nullopt,
                           int n_slices = 10);

struct LabeledSplit {
  std::vector<LabeledPoint> train;
  std::vector<LabeledPoint> test;
  std::vector<LabeledPoint> verify;
};

LabeledSplit split_train_test_verify(std::span<const LabeledPoint> points,
                                     const SplitFractions& fractions, SplitMode mode,
                                     std::uint64_t seed,
                                     std::optional<std::size_t> verify_cap = std::nullopt,
                                     int n_slices = 10);

template <typename T>
std::vector<T> gather(std::span<const T> items, std::span<const std::size_t> indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(items[i]);
  return out;
}

/// CSV `x,y,label` (header optional, optional 4th `robot` column). Labels in
/// {-1, 0, 1}; -1 maps to 0.
std::vector<LabeledPoint> load_labeled_csv(const std::filesystem::path& path);
void write_labeled_csv(const std::filesystem::path& path, std::span<const LabeledPoint> points,
                       bool with_robot = false);

/// CSV `x,y,target` (header optional).
std::vector<TargetPoint> load_target_csv(const std::filesystem::path& path);

/// JSON-lines, one scan per line:
/// {"robot": int, "pose": [px, py, heading], "angles": [...], "ranges": [...], "max_range": r}
std::vector<LidarScan> read_scans_jsonl(const std::filesystem::path& path);
/// Calls `fn` on each scan in file order without holding the whole file.
void for_each_scan_jsonl(const std::filesystem::path& path,
                         const std::function<void(const LidarScan&)>& fn);
void write_scans_jsonl(const std::filesystem::path& path, std::span<const LidarScan> scans);

/// Simulated indoor environment: two rooms joined by a doorway, a few box
/// obstacles, and robots sweeping LiDAR along closed loops, one loop per robot.
struct TwoRoomOptions {
  int n_robots = 4;
  int scans_per_robot = 50;
  int beams_per_scan = 40;
  double max_range = 6.0;
  double range_noise = 0.02;
};

std::vector<LidarScan> simulate_two_room_scans(const TwoRoomOptions& options, std::uint64_t seed);

}  // namespace dgvi
