#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "dgvi/data.hpp"
#include "dgvi/errors.hpp"

namespace dgvi {
namespace {

struct Segment {
  Eigen::Vector2d a;
  Eigen::Vector2d b;
};

void add_box(std::vector<Segment>& walls, double x0, double x1, double y0, double y1) {
  const Eigen::Vector2d p00(x0, y0), p10(x1, y0), p11(x1, y1), p01(x0, y1);
  walls.push_back({p00, p10});
  walls.push_back({p10, p11});
  walls.push_back({p11, p01});
  walls.push_back({p01, p00});
}

// 20 m x 10 m floor split by a wall at x = 10 with a 2 m doorway.
std::vector<Segment> two_room_walls() {
  std::vector<Segment> walls;
  add_box(walls, 0.0, 20.0, 0.0, 10.0);
  walls.push_back({{10.0, 0.0}, {10.0, 4.0}});
  walls.push_back({{10.0, 6.0}, {10.0, 10.0}});
  add_box(walls, 3.0, 5.0, 3.0, 4.5);
  add_box(walls, 2.0, 3.0, 7.5, 8.5);
  add_box(walls, 6.5, 7.3, 7.0, 7.8);
  add_box(walls, 14.5, 16.5, 6.5, 7.5);
  add_box(walls, 15.5, 16.5, 2.0, 3.0);
  return walls;
}

// Closed rectangular loops, one per robot slot; robots beyond four reuse them.
const std::array<std::array<double, 4>, 4> kLoops = {{
    {1.5, 8.5, 1.5, 5.5},
    {1.5, 8.5, 6.0, 9.0},
    {11.5, 18.5, 1.2, 5.0},
    {11.5, 18.5, 5.5, 9.0},
}};

// Point and heading at arc-length fraction u in [0, 1) around the rectangle.
std::pair<Eigen::Vector2d, double> loop_pose(const std::array<double, 4>& r, double u) {
  const double w = r[1] - r[0];
  const double h = r[3] - r[2];
  double s = u * 2.0 * (w + h);
  if (s < w) return {{r[0] + s, r[2]}, 0.0};
  s -= w;
  if (s < h) return {{r[1], r[2] + s}, std::numbers::pi / 2};
  s -= h;
  if (s < w) return {{r[1] - s, r[3]}, std::numbers::pi};
  s -= w;
  return {{r[0], r[3] - s}, -std::numbers::pi / 2};
}

double cast(const std::vector<Segment>& walls, const Eigen::Vector2d& o, const Eigen::Vector2d& d) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& w : walls) {
    const Eigen::Vector2d e = w.b - w.a;
    const double denom = d.x() * e.y() - d.y() * e.x();
    if (std::abs(denom) < 1e-12) continue;
    const Eigen::Vector2d ao = w.a - o;
    const double t = (ao.x() * e.y() - ao.y() * e.x()) / denom;
    const double s = (ao.x() * d.y() - ao.y() * d.x()) / denom;
    if (t > 1e-9 && s >= 0.0 && s <= 1.0) best = std::min(best, t);
  }
  return best;
}

}  // namespace

std::vector<LidarScan> simulate_two_room_scans(const TwoRoomOptions& opt, std::uint64_t seed) {
  if (opt.n_robots < 1 || opt.scans_per_robot < 1 || opt.beams_per_scan < 1) {
    throw ValidationError("two-room simulation: counts must be positive");
  }
  if (!(opt.max_range > 0.0) || opt.range_noise < 0.0) {
    throw ValidationError("two-room simulation: bad range settings");
  }
  const auto walls = two_room_walls();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<LidarScan> scans;
  scans.reserve(static_cast<std::size_t>(opt.n_robots * opt.scans_per_robot));
  for (int robot = 0; robot < opt.n_robots; ++robot) {
    const auto& loop = kLoops[static_cast<std::size_t>(robot) % kLoops.size()];
    const double phase = unit(rng);
    for (int k = 0; k < opt.scans_per_robot; ++k) {
      const double u = std::fmod(phase + static_cast<double>(k) / opt.scans_per_robot, 1.0);
      auto [pos, heading] = loop_pose(loop, u);
      pos += 0.1 * Eigen::Vector2d(noise(rng), noise(rng));
      heading += 0.05 * noise(rng);

      LidarScan scan;
      scan.robot = robot;
      scan.pose = Eigen::Vector3d(pos.x(), pos.y(), heading);
      scan.max_range = opt.max_range;
      const double offset = unit(rng) * 2.0 * std::numbers::pi / opt.beams_per_scan;
      for (int b = 0; b < opt.beams_per_scan; ++b) {
        const double angle =
            -std::numbers::pi + offset + 2.0 * std::numbers::pi * b / opt.beams_per_scan;
        const double theta = heading + angle;
        const Eigen::Vector2d dir(std::cos(theta), std::sin(theta));
        double r = cast(walls, pos, dir);
        if (r >= opt.max_range) {
          r = opt.max_range;
        } else {
          r = std::clamp(r + opt.range_noise * noise(rng), 1e-3, opt.max_range * (1 - 1e-9));
        }
        scan.angles.push_back(angle);
        scan.ranges.push_back(r);
      }
      scans.push_back(std::move(scan));
    }
  }
  return scans;
}

}  // namespace dgvi
