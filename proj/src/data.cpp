#include "dgvi/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dgvi/errors.hpp"

namespace dgvi {
namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    const auto first = field.find_first_not_of(" \t\r");
    const auto last = field.find_last_not_of(" \t\r");
    fields.push_back(first == std::string::npos ? "" : field.substr(first, last - first + 1));
  }
  return fields;
}

std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return std::nullopt;
  return v;
}

bool is_header(const std::vector<std::string>& fields) {
  return !fields.empty() && !parse_double(fields.front()).has_value();
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

// Reads numeric rows of a 3 or 4 column CSV. Returns rows with line numbers.
template <typename RowFn>
void read_numeric_csv(const std::filesystem::path& path, std::size_t min_cols,
                      std::size_t max_cols, RowFn&& on_row) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_fields(line);
    if (first && is_header(fields)) {
      first = false;
      continue;
    }
    first = false;
    if (fields.size() < min_cols || fields.size() > max_cols) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(min_cols) + " numeric columns, got " +
                            std::to_string(fields.size()));
    }
    std::vector<double> values;
    for (const auto& f : fields) {
      auto v = parse_double(f);
      if (!v || !std::isfinite(*v)) {
        throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                              ": cannot parse '" + f + "' as a number");
      }
      values.push_back(*v);
    }
    on_row(values, line_no);
  }
}

std::size_t floor_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

}  // namespace

std::vector<LabeledPoint> lidar_scan_to_points(const LidarScan& scan, int n_free_per_ray,
                                               double hit_epsilon) {
  if (n_free_per_ray < 1) throw ValidationError("lidar conversion: n_free_per_ray must be >= 1");
  if (scan.angles.size() != scan.ranges.size()) {
    throw ValidationError("lidar scan: angles and ranges differ in length");
  }
  const double px = scan.pose[0];
  const double py = scan.pose[1];
  const double heading = scan.pose[2];
  std::vector<LabeledPoint> out;
  out.reserve(scan.ranges.size() * static_cast<std::size_t>(n_free_per_ray + 1));
  for (std::size_t b = 0; b < scan.ranges.size(); ++b) {
    const double r = scan.ranges[b];
    if (!(r > 0.0) || !std::isfinite(r)) continue;
    const double theta = heading + scan.angles[b];
    const Eigen::Vector2d origin(px, py);
    const Eigen::Vector2d dir(std::cos(theta), std::sin(theta));
    for (int k = 1; k <= n_free_per_ray; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(n_free_per_ray + 1);
      out.push_back({origin + (t * r) * dir, 0, scan.robot});
    }
    if (r < scan.max_range - hit_epsilon) out.push_back({origin + r * dir, 1, scan.robot});
  }
  return out;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::optional<double> free_ratio)
    : capacity_(capacity), free_ratio_(free_ratio) {
  if (capacity_ == 0) throw ValidationError("replay buffer capacity must be positive");
  if (free_ratio_ && !(*free_ratio_ >= 0.0 && *free_ratio_ <= 1.0)) {
    throw ValidationError("replay free ratio must lie in [0, 1]");
  }
}

void ReplayBuffer::push(const LabeledPoint& p) {
  auto& store = p.label == 1 ? occupied_ : free_;
  if (store.size() == capacity_) store.pop_front();
  store.push_back(p);
}

void ReplayBuffer::push(std::span<const LabeledPoint> points) {
  for (const auto& p : points) push(p);
}

LabeledPoint ReplayBuffer::draw_one(std::mt19937_64& rng) const {
  if (size() == 0) throw ValidationError("replay buffer is empty");
  if (!free_ratio_) {
    std::uniform_int_distribution<std::size_t> pick(0, size() - 1);
    const auto i = pick(rng);
    return i < free_.size() ? free_[i] : occupied_[i - free_.size()];
  }
  std::bernoulli_distribution choose_free(*free_ratio_);
  bool use_free = choose_free(rng);
  if (use_free && free_.empty()) use_free = false;
  if (!use_free && occupied_.empty()) use_free = true;
  const auto& store = use_free ? free_ : occupied_;
  std::uniform_int_distribution<std::size_t> pick(0, store.size() - 1);
  return store[pick(rng)];
}

std::vector<LabeledPoint> ReplayBuffer::draw(int count, std::mt19937_64& rng) const {
  std::vector<LabeledPoint> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) out.push_back(draw_one(rng));
  return out;
}

std::vector<LabeledPoint> replay_draw(const ReplayBuffer& buffer, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return buffer.draw(count, rng);
}

PartitionMode parse_partition_mode(const std::string& s) {
  if (s == "contiguous_trajectory" || s == "contiguous") return PartitionMode::contiguous_trajectory;
  if (s == "random") return PartitionMode::random;
  if (s == "per_robot") return PartitionMode::per_robot;
  if (s == "replicate") return PartitionMode::replicate;
  throw ValidationError("unknown partition mode '" + s + "'");
}

SplitMode parse_split_mode(const std::string& s) {
  if (s == "by_trajectory_slices") return SplitMode::by_trajectory_slices;
  if (s == "random") return SplitMode::random;
  throw ValidationError("unknown split mode '" + s + "'");
}

std::vector<std::vector<std::size_t>> partition_indices(std::size_t n_points, int n_agents,
                                                        PartitionMode mode, std::uint64_t seed,
                                                        std::span<const int> robot_ids) {
  if (n_agents < 1) throw ValidationError("partition: n_agents must be >= 1");
  const auto n = static_cast<std::size_t>(n_agents);
  std::vector<std::vector<std::size_t>> parts(n);
  std::vector<std::size_t> order(n_points);
  std::iota(order.begin(), order.end(), std::size_t{0});

  switch (mode) {
    case PartitionMode::replicate:
      for (auto& p : parts) p = order;
      return parts;
    case PartitionMode::per_robot: {
      if (robot_ids.size() != n_points) {
        throw ValidationError("partition: per_robot mode needs a robot id for every point");
      }
      std::map<int, std::size_t> rank;
      for (int id : robot_ids) {
        if (id < 0) throw ValidationError("partition: per_robot mode found a point without robot id");
        rank.emplace(id, 0);
      }
      if (rank.size() != n) {
        throw ValidationError("partition: data has " + std::to_string(rank.size()) +
                              " robots but " + std::to_string(n) + " agents were requested");
      }
      std::size_t r = 0;
      for (auto& [id, slot] : rank) slot = r++;
      for (std::size_t i = 0; i < n_points; ++i) parts[rank.at(robot_ids[i])].push_back(i);
      return parts;
    }
    case PartitionMode::random: {
      std::mt19937_64 rng(seed);
      std::shuffle(order.begin(), order.end(), rng);
      break;
    }
    case PartitionMode::contiguous_trajectory:
      break;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t begin = k * n_points / n;
    const std::size_t end = (k + 1) * n_points / n;
    parts[k].assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                    order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return parts;
}

std::vector<std::vector<LabeledPoint>> partition_dataset(std::span<const LabeledPoint> points,
                                                         int n_agents, PartitionMode mode,
                                                         std::uint64_t seed) {
  std::vector<int> robots;
  if (mode == PartitionMode::per_robot) {
    robots.reserve(points.size());
    for (const auto& p : points) robots.push_back(p.robot);
  }
  const auto idx = partition_indices(points.size(), n_agents, mode, seed, robots);
  std::vector<std::vector<LabeledPoint>> out;
  out.reserve(idx.size());
  for (const auto& part : idx) out.push_back(gather<LabeledPoint>(points, part));
  return out;
}

SplitIndices split_indices(std::size_t n_points, const SplitFractions& f, SplitMode mode,
                           std::uint64_t seed, std::optional<std::size_t> verify_cap,
                           int n_slices) {
  for (double v : {f.train, f.test, f.verify}) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("split fractions must lie in [0, 1]");
  }
  if (f.train + f.test + f.verify > 1.0 + 1e-9) {
    throw ValidationError("split fractions sum to more than 1");
  }
  if (n_slices < 1) throw ValidationError("split: n_slices must be >= 1");

  SplitIndices out;
  if (mode == SplitMode::random) {
    std::vector<std::size_t> order(n_points);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    auto it = order.begin();
    auto take = [&](std::size_t count, std::vector<std::size_t>& dst) {
      dst.assign(it, it + static_cast<std::ptrdiff_t>(count));
      it += static_cast<std::ptrdiff_t>(count);
    };
    take(floor_count(f.train, n_points), out.train);
    take(floor_count(f.test, n_points), out.test);
    take(floor_count(f.verify, n_points), out.verify);
    if (verify_cap && out.verify.size() > *verify_cap) out.verify.resize(*verify_cap);
    return out;
  }

  const auto slices = static_cast<std::size_t>(n_slices);
  for (std::size_t k = 0; k < slices; ++k) {
    const std::size_t begin = k * n_points / slices;
    const std::size_t end = (k + 1) * n_points / slices;
    std::size_t pos = begin;
    auto take = [&](double fraction, std::vector<std::size_t>& dst) {
      const std::size_t count = floor_count(fraction, end) - floor_count(fraction, begin);
      for (std::size_t i = 0; i < count && pos < end; ++i) dst.push_back(pos++);
    };
    take(f.train, out.train);
    take(f.test, out.test);
    take(f.verify, out.verify);
  }
  if (verify_cap && out.verify.size() > *verify_cap) {
    // Evenly spaced along the trajectory.
    std::vector<std::size_t> kept;
    kept.reserve(*verify_cap);
    for (std::size_t i = 0; i < *verify_cap; ++i) {
      kept.push_back(out.verify[i * out.verify.size() / *verify_cap]);
    }
    out.verify = std::move(kept);
  }
  return out;
}

LabeledSplit split_train_test_verify(std::span<const LabeledPoint> points,
                                     const SplitFractions& fractions, SplitMode mode,
                                     std::uint64_t seed, std::optional<std::size_t> verify_cap,
                                     int n_slices) {
  const auto idx = split_indices(points.size(), fractions, mode, seed, verify_cap, n_slices);
  return {gather<LabeledPoint>(points, idx.train), gather<LabeledPoint>(points, idx.test),
          gather<LabeledPoint>(points, idx.verify)};
}

std::vector<LabeledPoint> load_labeled_csv(const std::filesystem::path& path) {
  std::vector<LabeledPoint> out;
  read_numeric_csv(path, 3, 4, [&](const std::vector<double>& v, std::size_t line_no) {
    int label = 0;
    if (v[2] == 1.0) {
      label = 1;
    } else if (v[2] == 0.0 || v[2] == -1.0) {
      label = 0;
    } else {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": label must be -1, 0 or 1");
    }
    const int robot = v.size() == 4 ? static_cast<int>(v[3]) : -1;
    out.push_back({Eigen::Vector2d(v[0], v[1]), label, robot});
  });
  return out;
}

void write_labeled_csv(const std::filesystem::path& path, std::span<const LabeledPoint> points,
                       bool with_robot) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.precision(17);
  out << (with_robot ? "x,y,label,robot\n" : "x,y,label\n");
  for (const auto& p : points) {
    out << p.x[0] << ',' << p.x[1] << ',' << p.label;
    if (with_robot) out << ',' << p.robot;
    out << '\n';
  }
}

std::vector<TargetPoint> load_target_csv(const std::filesystem::path& path) {
  std::vector<TargetPoint> out;
  read_numeric_csv(path, 3, 3, [&](const std::vector<double>& v, std::size_t) {
    out.push_back({Eigen::Vector2d(v[0], v[1]), v[2]});
  });
  return out;
}

void for_each_scan_jsonl(const std::filesystem::path& path,
                         const std::function<void(const LidarScan&)>& fn) {
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LidarScan s;
      const auto pose = j.at("pose").get<std::vector<double>>();
      if (pose.size() != 3) throw ValidationError("pose must have 3 entries");
      s.pose = Eigen::Vector3d(pose[0], pose[1], pose[2]);
      s.angles = j.at("angles").get<std::vector<double>>();
      s.ranges = j.at("ranges").get<std::vector<double>>();
      s.max_range = j.at("max_range").get<double>();
      s.robot = j.value("robot", -1);
      if (s.angles.size() != s.ranges.size()) {
        throw ValidationError("angles and ranges differ in length");
      }
      fn(s);
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::vector<LidarScan> read_scans_jsonl(const std::filesystem::path& path) {
  std::vector<LidarScan> scans;
  for_each_scan_jsonl(path, [&](const LidarScan& s) { scans.push_back(s); });
  return scans;
}

void write_scans_jsonl(const std::filesystem::path& path, std::span<const LidarScan> scans) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& s : scans) {
    nlohmann::json j;
    j["robot"] = s.robot;
    j["pose"] = {s.pose[0], s.pose[1], s.pose[2]};
    j["angles"] = s.angles;
    j["ranges"] = s.ranges;
    j["max_range"] = s.max_range;
    out << j.dump() << '\n';
  }
}

}  // namespace dgvi
