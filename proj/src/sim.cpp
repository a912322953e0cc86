#include "dgvi/sim.hpp"

#include <algorithm>
#include <barrier>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <thread>

#include "dgvi/errors.hpp"

namespace dgvi {
namespace {

using nlohmann::json;

constexpr double kProbClamp = 1e-12;

// Persistent workers released once per parallel section by a barrier pair.
// Item i runs on worker i % threads; the calling thread acts as worker 0.
class WorkerPool {
 public:
  explicit WorkerPool(int threads)
      : threads_(std::max(1, threads)), start_(threads_), done_(threads_), errors_(threads_) {
    for (int t = 1; t < threads_; ++t) {
      workers_.emplace_back([this, t] {
        for (;;) {
          start_.arrive_and_wait();
          if (stop_) return;
          run_slice(t);
          done_.arrive_and_wait();
        }
      });
    }
  }

  ~WorkerPool() {
    if (threads_ > 1) {
      stop_ = true;
      start_.arrive_and_wait();
    }
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  void for_each(int n, const std::function<void(int)>& fn) {
    job_ = &fn;
    n_ = n;
    if (threads_ == 1) {
      run_slice(0);
    } else {
      start_.arrive_and_wait();
      run_slice(0);
      done_.arrive_and_wait();
    }
    for (auto& e : errors_) {
      if (e) {
        auto err = e;
        for (auto& x : errors_) x = nullptr;
        std::rethrow_exception(err);
      }
    }
  }

 private:
  void run_slice(int t) {
    try {
      for (int i = t; i < n_; i += threads_) (*job_)(i);
    } catch (...) {
      errors_[static_cast<std::size_t>(t)] = std::current_exception();
    }
  }

  int threads_;
  std::barrier<> start_;
  std::barrier<> done_;
  std::vector<std::exception_ptr> errors_;
  const std::function<void(int)>* job_ = nullptr;
  int n_ = 0;
  bool stop_ = false;
  std::vector<std::jthread> workers_;
};

// Re-raise with round/agent context, keeping the error category.
[[noreturn]] void rethrow_with_context(int round, int agent) {
  const std::string where =
      "round " + std::to_string(round) + ", agent " + std::to_string(agent) + ": ";
  try {
    throw;
  } catch (const ValidationError& e) {
    throw ValidationError(where + e.what());
  } catch (const std::exception& e) {
    throw NumericalError(where + e.what());
  }
}

std::mt19937_64 agent_rng(std::uint64_t seed, int id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id), 0x9e3779b9u};
  return std::mt19937_64(seq);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

Task parse_task(const std::string& s) {
  if (s == "classify") return Task::classify;
  if (s == "regress") return Task::regress;
  throw ValidationError("config: unknown task '" + s + "'");
}

Representation parse_representation(const std::string& s) {
  if (s == "full") return Representation::full;
  if (s == "diagonal") return Representation::diagonal;
  throw ValidationError("config: unknown representation '" + s + "'");
}

std::vector<LabeledPoint> load_classification_points(const DataSpec& d) {
  if (d.source == "csv") return load_labeled_csv(d.path);
  std::vector<LidarScan> scans;
  if (d.source == "scans") {
    scans = read_scans_jsonl(d.path);
  } else if (d.source == "two_room") {
    scans = simulate_two_room_scans(d.two_room, d.two_room_seed);
  } else {
    throw ValidationError("config: unknown data source '" + d.source + "'");
  }
  std::vector<LabeledPoint> points;
  for (const auto& s : scans) {
    auto p = lidar_scan_to_points(s, d.n_free_per_ray, d.hit_epsilon);
    points.insert(points.end(), p.begin(), p.end());
  }
  return points;
}

Eigen::MatrixXd target_matrix(std::span<const TargetPoint> points) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(points.size()), 2);
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = points[i].x.transpose();
  }
  return out;
}

// Fused prior of agent i from the previous round's messages.
AnyBelief fused_prior(const AgentState& agent, const WeightMatrix& a,
                      const std::vector<RoundMessage>& messages) {
  const auto nbrs = a.in_neighbors(agent.id);
  if (nbrs.size() == 1 && nbrs.front() == agent.id) return agent.belief;
  std::vector<double> w;
  std::vector<Eigen::VectorXd> etas;
  w.reserve(nbrs.size());
  etas.reserve(nbrs.size());
  for (int j : nbrs) {
    w.push_back(a(agent.id, j));
    etas.push_back(messages[static_cast<std::size_t>(j)].information_mean);
  }
  if (std::holds_alternative<GaussianBelief>(agent.belief)) {
    std::vector<Eigen::MatrixXd> infos;
    infos.reserve(nbrs.size());
    for (int j : nbrs) infos.push_back(messages[static_cast<std::size_t>(j)].information);
    return fuse_information(infos, etas, w);
  }
  std::vector<Eigen::VectorXd> infos;
  infos.reserve(nbrs.size());
  for (int j : nbrs) infos.push_back(messages[static_cast<std::size_t>(j)].information.col(0));
  return fuse_information_diag(infos, etas, w);
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  if (graph.n < 1) throw ValidationError("config: graph.n must be >= 1");
  if (run.n_rounds < 1) throw ValidationError("config: run.n_rounds must be >= 1");
  if (run.obs_per_round < 0) throw ValidationError("config: run.obs_per_round must be >= 0");
  if (run.eval_every < 1) throw ValidationError("config: run.eval_every must be >= 1");
  if (run.threads < 1) throw ValidationError("config: run.threads must be >= 1");
  if (!(prior_information > 0.0)) throw ValidationError("config: prior.information must be > 0");
  if (kernel.n_random < 0 || kernel.n_occupied < 0 || kernel.n_random + kernel.n_occupied < 1) {
    throw ValidationError("config: kernel needs at least one center");
  }
  if (kernel.center_source != "train" && kernel.center_source != "test" &&
      kernel.center_source != "all") {
    throw ValidationError("config: kernel.center_source must be train, test or all");
  }
  if (data.source == "csv" || data.source == "scans") {
    if (data.path.empty()) throw ValidationError("config: data.path is required");
    if (!std::filesystem::exists(data.path)) {
      throw ValidationError("config: data file not found: " + data.path.string());
    }
  } else if (data.source != "two_room") {
    throw ValidationError("config: unknown data.source '" + data.source + "'");
  }
  if (task == Task::regress) {
    if (data.source != "csv") throw ValidationError("config: regression needs a csv source");
    if (representation != Representation::full) {
      throw ValidationError("config: regression supports the full representation only");
    }
    if (!(data.noise_precision > 0.0)) {
      throw ValidationError("config: data.noise_precision must be > 0");
    }
    if (kernel.n_occupied != 0) {
      throw ValidationError("config: kernel.n_occupied must be 0 for regression");
    }
  }
  if (exports.grid && exports.grid->resolution < 2) {
    throw ValidationError("config: export.grid.resolution must be >= 2");
  }
  if (exports.grid && (exports.grid->agent < 0 || exports.grid->agent >= graph.n)) {
    throw ValidationError("config: export.grid.agent out of range");
  }
  update.validate();
}

ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  auto resolve = [&](const std::string& p) -> std::filesystem::path {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  ExperimentConfig c;
  try {
    c.task = parse_task(get_or<std::string>(j, "task", "classify"));
    c.representation = parse_representation(get_or<std::string>(j, "representation", "full"));

    const json g = j.value("graph", json::object());
    if (g.contains("file")) {
      c.graph = graph_from_json(read_json(resolve(g.at("file").get<std::string>())));
    } else {
      c.graph = graph_from_json(g.contains("n") ? g : json{{"n", 1}});
    }

    const json k = j.value("kernel", json::object());
    c.kernel.n_random = get_or(k, "n_random", c.kernel.n_random);
    c.kernel.n_occupied = get_or(k, "n_occupied", c.kernel.n_occupied);
    c.kernel.scale = get_or(k, "scale", c.kernel.scale);
    c.kernel.lengthscale = get_or(k, "lengthscale", c.kernel.lengthscale);
    if (k.contains("lengthscale_occupied") && !k.at("lengthscale_occupied").is_null()) {
      c.kernel.lengthscale_occupied = k.at("lengthscale_occupied").get<double>();
    }
    c.kernel.center_source = get_or<std::string>(k, "center_source", c.kernel.center_source);
    c.kernel.seed = get_or<std::uint64_t>(k, "seed", c.kernel.seed);

    const json d = j.value("data", json::object());
    c.data.source = get_or<std::string>(d, "source", c.data.source);
    if (d.contains("path")) c.data.path = resolve(d.at("path").get<std::string>());
    const json tr = d.value("two_room", json::object());
    c.data.two_room.n_robots = get_or(tr, "n_robots", c.data.two_room.n_robots);
    c.data.two_room.scans_per_robot = get_or(tr, "scans_per_robot", c.data.two_room.scans_per_robot);
    c.data.two_room.beams_per_scan = get_or(tr, "beams_per_scan", c.data.two_room.beams_per_scan);
    c.data.two_room.max_range = get_or(tr, "max_range", c.data.two_room.max_range);
    c.data.two_room.range_noise = get_or(tr, "range_noise", c.data.two_room.range_noise);
    c.data.two_room_seed = get_or<std::uint64_t>(tr, "seed", c.data.two_room_seed);
    const json li = d.value("lidar", json::object());
    c.data.n_free_per_ray = get_or(li, "n_free_per_ray", c.data.n_free_per_ray);
    c.data.hit_epsilon = get_or(li, "hit_epsilon", c.data.hit_epsilon);

    const json sp = d.value("split", json::object());
    c.data.split.train = get_or(sp, "train", c.data.split.train);
    c.data.split.test = get_or(sp, "test", c.data.split.test);
    c.data.split.verify = get_or(sp, "verify", c.data.split.verify);
    c.data.split_mode = parse_split_mode(get_or<std::string>(sp, "mode", "random"));
    if (sp.contains("verify_cap") && !sp.at("verify_cap").is_null()) {
      c.data.verify_cap = sp.at("verify_cap").get<std::size_t>();
    }
    c.data.n_slices = get_or(sp, "slices", c.data.n_slices);
    c.data.split_seed = get_or<std::uint64_t>(sp, "seed", c.data.split_seed);

    const json pa = d.value("partition", json::object());
    c.data.partition =
        parse_partition_mode(get_or<std::string>(pa, "mode", "contiguous_trajectory"));
    c.data.partition_seed = get_or<std::uint64_t>(pa, "seed", c.data.partition_seed);

    const json rp = d.value("replay", json::object());
    if (rp.contains("free_ratio")) {
      const auto& r = rp.at("free_ratio");
      c.data.replay_free_ratio = r.is_null() ? std::nullopt : std::optional(r.get<double>());
    }
    c.data.replay_capacity = get_or<std::size_t>(rp, "capacity", c.data.replay_capacity);
    c.data.ingest_per_round = get_or(rp, "ingest_per_round", c.data.ingest_per_round);
    c.data.noise_precision = get_or(d, "noise_precision", c.data.noise_precision);

    const json r = j.value("run", json::object());
    c.run.n_rounds = get_or(r, "n_rounds", c.run.n_rounds);
    c.run.obs_per_round = get_or(r, "obs_per_round", c.run.obs_per_round);
    c.run.eval_every = get_or(r, "eval_every", c.run.eval_every);
    c.run.seed = get_or<std::uint64_t>(r, "seed", c.run.seed);
    c.run.threads = get_or(r, "threads", c.run.threads);
    c.run.shared_stream = get_or(r, "shared_stream", c.run.shared_stream);
    c.run.record_wall_clock = get_or(r, "record_wall_clock", c.run.record_wall_clock);

    const json u = j.value("update", json::object());
    c.update.xi = get_or(u, "xi", c.update.xi);
    c.update.mean_update_matrix = parse_mean_update_matrix(
        get_or<std::string>(u, "mean_update_matrix", to_string(c.update.mean_update_matrix)));
    c.update.likelihood_weight = get_or(u, "likelihood_weight", c.update.likelihood_weight);

    c.prior_information = get_or(j.value("prior", json::object()), "information", 1.0);

    const json e = j.value("export", json::object());
    if (e.contains("grid") && !e.at("grid").is_null()) {
      const json& gj = e.at("grid");
      GridSpec grid;
      const auto b = gj.at("bounds").get<std::vector<double>>();
      if (b.size() != 4) throw ValidationError("config: export.grid.bounds needs 4 numbers");
      grid.bounds = {b[0], b[1], b[2], b[3]};
      grid.resolution = get_or(gj, "resolution", grid.resolution);
      grid.agent = get_or(gj, "agent", grid.agent);
      c.exports.grid = grid;
    }
    c.exports.feature_stats = get_or(e, "feature_stats", c.exports.feature_stats);
    c.exports.consensus_trace = get_or(e, "consensus_trace", c.exports.consensus_trace);
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("config: ") + ex.what());
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ValidationError("config file not found: " + path.string());
  }
  auto c = config_from_json(read_json(path), path.parent_path());
  c.validate();
  return c;
}

void override_seed(ExperimentConfig& config, std::uint64_t seed) {
  config.run.seed = seed;
  config.kernel.seed = seed;
  config.data.split_seed = seed;
  config.data.partition_seed = seed;
  config.data.two_room_seed = seed;
}

// ---------------------------------------------------------------------------
// Evaluation and export

RoundMessage make_message(int sender, const AnyBelief& belief) {
  if (const auto* full = std::get_if<GaussianBelief>(&belief)) {
    return {sender, full->information(), full->information_mean()};
  }
  const auto& diag = std::get<DiagGaussianBelief>(belief);
  return {sender, Eigen::MatrixXd(diag.info_diag()), diag.info_diag().cwiseProduct(diag.mean())};
}

namespace {

EvalResult score(std::span<const double> probs, std::span<const LabeledPoint> points) {
  double correct = 0.0;
  double bce = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double p = std::clamp(probs[i], kProbClamp, 1.0 - kProbClamp);
    const int predicted = probs[i] >= 0.5 ? 1 : 0;
    if (predicted == points[i].label) correct += 1.0;
    bce -= points[i].label == 1 ? std::log(p) : std::log(1.0 - p);
  }
  const double n = static_cast<double>(points.size());
  return {correct / n, bce / n};
}

}  // namespace

EvalResult evaluate(const GaussianBelief& belief, const KernelModel& model,
                    std::span<const LabeledPoint> points, double xi) {
  if (points.empty()) throw ValidationError("evaluate: empty point set");
  return score(predict_batch(belief, model, points_matrix(points), xi), points);
}

EvalResult evaluate(const DiagGaussianBelief& belief, const KernelModel& model,
                    std::span<const LabeledPoint> points, double xi) {
  if (points.empty()) throw ValidationError("evaluate: empty point set");
  return score(predict_batch(belief, model, points_matrix(points), xi), points);
}

EvalResult evaluate(const AnyBelief& belief, const KernelModel& model,
                    std::span<const LabeledPoint> points, double xi) {
  return std::visit([&](const auto& b) { return evaluate(b, model, points, xi); }, belief);
}

EvalResult evaluate_regression(const AnyBelief& belief, const KernelModel& model,
                               std::span<const TargetPoint> points) {
  if (points.empty()) throw ValidationError("evaluate: empty point set");
  const auto pred = predict_mean_batch(mean_of(belief), model, target_matrix(points));
  double mean_target = 0.0;
  for (const auto& p : points) mean_target += p.target;
  mean_target /= static_cast<double>(points.size());
  double sse = 0.0;
  double sst = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    sse += (pred[i] - points[i].target) * (pred[i] - points[i].target);
    sst += (points[i].target - mean_target) * (points[i].target - mean_target);
  }
  const double n = static_cast<double>(points.size());
  return {sst > 0.0 ? 1.0 - sse / sst : 0.0, sse / n};
}

void export_grid(const AnyBelief& belief, const KernelModel& model,
                 const std::array<double, 4>& bounds, int resolution,
                 const std::filesystem::path& path, double xi) {
  if (resolution < 2) throw ValidationError("export_grid: resolution must be >= 2");
  const auto [xmin, xmax, ymin, ymax] = bounds;
  const Eigen::Index n = static_cast<Eigen::Index>(resolution) * resolution;
  Eigen::MatrixXd pts(n, 2);
  for (int r = 0; r < resolution; ++r) {
    for (int c = 0; c < resolution; ++c) {
      pts(r * resolution + c, 0) = xmin + (xmax - xmin) * c / (resolution - 1);
      pts(r * resolution + c, 1) = ymin + (ymax - ymin) * r / (resolution - 1);
    }
  }
  const auto probs = std::visit(
      [&](const auto& b) { return predict_batch(b, model, pts, xi); }, belief);
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "x,y,prob\n";
  for (Eigen::Index i = 0; i < n; ++i) {
    out << format_double(pts(i, 0)) << ',' << format_double(pts(i, 1)) << ','
        << format_double(probs[static_cast<std::size_t>(i)]) << '\n';
  }
}

void export_feature_stats(const AnyBelief& belief, const KernelModel& model,
                          const std::filesystem::path& path) {
  const Vector& mean = mean_of(belief);
  if (mean.size() != model.feature_dim()) {
    throw ValidationError("export_feature_stats: belief and kernel model dimensions differ");
  }
  Vector variance;
  if (const auto* full = std::get_if<GaussianBelief>(&belief)) {
    variance = full->covariance().diagonal();
  } else {
    variance = std::get<DiagGaussianBelief>(belief).variance();
  }
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "cx,cy,mean,variance\n";
  for (int s = 0; s < model.num_centers(); ++s) {
    const double cy = model.input_dim() > 1 ? model.centers()(s, 1) : 0.0;
    out << format_double(model.centers()(s, 0)) << ',' << format_double(cy) << ','
        << format_double(mean[s + 1]) << ',' << format_double(variance[s + 1]) << '\n';
  }
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRecord> records) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "round,agent,consensus_err,verif_bce,verif_acc,ms\n";
  for (const auto& r : records) {
    out << r.round << ',' << r.agent << ',' << format_double(r.consensus_err) << ','
        << format_double(r.verif_bce) << ',' << format_double(r.verif_acc) << ','
        << format_double(r.ms) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Round engine

RunArtifacts run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };

  const WeightMatrix weights = build_weight_matrix(config.graph);
  const int n_agents = weights.size();
  const bool classify = config.task == Task::classify;
  const auto& d = config.data;

  // Data: load, split, choose centers, hand out to agents.
  std::vector<LabeledPoint> labeled;
  std::vector<TargetPoint> targets;
  std::size_t n_points = 0;
  if (classify) {
    labeled = load_classification_points(d);
    n_points = labeled.size();
  } else {
    targets = load_target_csv(d.path);
    n_points = targets.size();
  }
  if (n_points == 0) throw ValidationError("data source produced no points");
  const SplitIndices split =
      split_indices(n_points, d.split, d.split_mode, d.split_seed, d.verify_cap, d.n_slices);
  if (split.train.empty()) throw ValidationError("training split is empty");

  std::vector<LabeledPoint> as_labeled = labeled;
  if (!classify) {
    for (const auto& t : targets) as_labeled.push_back({t.x, 0, -1});
  }
  std::vector<std::size_t> center_pool;
  if (config.kernel.center_source == "train") {
    center_pool = split.train;
  } else if (config.kernel.center_source == "test") {
    center_pool = split.test;
  } else {
    center_pool.resize(n_points);
    for (std::size_t i = 0; i < n_points; ++i) center_pool[i] = i;
  }
  const auto center_points = gather<LabeledPoint>(as_labeled, center_pool);
  const auto& ks = config.kernel;
  const KernelModel model =
      select_centers(center_points, ks.n_occupied, ks.n_random,
                     ks.lengthscale_occupied.value_or(ks.lengthscale), ks.lengthscale, ks.scale,
                     ks.seed);

  std::vector<int> robot_ids;
  if (d.partition == PartitionMode::per_robot) {
    for (auto i : split.train) robot_ids.push_back(classify ? labeled[i].robot : -1);
  }
  const auto parts =
      partition_indices(split.train.size(), n_agents, d.partition, d.partition_seed, robot_ids);

  std::vector<std::vector<LabeledPoint>> local_labeled(static_cast<std::size_t>(n_agents));
  std::vector<std::vector<TargetPoint>> local_targets(static_cast<std::size_t>(n_agents));
  for (int i = 0; i < n_agents; ++i) {
    for (auto k : parts[static_cast<std::size_t>(i)]) {
      const auto idx = split.train[k];
      if (classify) {
        local_labeled[static_cast<std::size_t>(i)].push_back(labeled[idx]);
      } else {
        local_targets[static_cast<std::size_t>(i)].push_back(targets[idx]);
      }
    }
  }
  const auto verify_l = classify ? gather<LabeledPoint>(labeled, split.verify)
                                 : std::vector<LabeledPoint>{};
  const auto test_l = classify ? gather<LabeledPoint>(labeled, split.test)
                               : std::vector<LabeledPoint>{};
  const auto verify_t = classify ? std::vector<TargetPoint>{}
                                 : gather<TargetPoint>(targets, split.verify);
  const auto test_t = classify ? std::vector<TargetPoint>{}
                               : gather<TargetPoint>(targets, split.test);

  // Agents.
  const Eigen::Index dim = model.feature_dim();
  std::vector<AgentState> agents;
  agents.reserve(static_cast<std::size_t>(n_agents));
  for (int i = 0; i < n_agents; ++i) {
    AnyBelief prior = config.representation == Representation::full
                          ? AnyBelief(GaussianBelief::isotropic(dim, config.prior_information))
                          : AnyBelief(DiagGaussianBelief::isotropic(dim, config.prior_information));
    const std::size_t capacity = classify ? d.replay_capacity : 1;
    AgentState agent{i, std::move(prior), ReplayBuffer(capacity, d.replay_free_ratio),
                     agent_rng(config.run.seed, config.run.shared_stream ? 0 : i + 1)};
    if (classify && d.ingest_per_round == 0) {
      agent.replay.push(local_labeled[static_cast<std::size_t>(i)]);
    }
    agents.push_back(std::move(agent));
  }
  std::vector<std::size_t> cursor(static_cast<std::size_t>(n_agents), 0);

  std::vector<RoundMessage> messages(static_cast<std::size_t>(n_agents));
  auto publish = [&] {
    for (int i = 0; i < n_agents; ++i) {
      messages[static_cast<std::size_t>(i)] = make_message(i, agents[static_cast<std::size_t>(i)].belief);
    }
  };
  publish();

  WorkerPool pool(std::min(config.run.threads, n_agents));
  const Eigen::MatrixXd precision =
      Eigen::MatrixXd::Constant(1, 1, config.data.noise_precision);

  auto step_agent = [&](int i) {
    auto& agent = agents[static_cast<std::size_t>(i)];
    AnyBelief belief = fused_prior(agent, weights, messages);
    Eigen::VectorXd phi;
    if (classify) {
      auto& local = local_labeled[static_cast<std::size_t>(i)];
      auto& cur = cursor[static_cast<std::size_t>(i)];
      for (int k = 0; k < d.ingest_per_round && cur < local.size(); ++k) {
        agent.replay.push(local[cur++]);
      }
      if (agent.replay.size() == 0) {
        agent.belief = std::move(belief);
        return;
      }
      for (int k = 0; k < config.run.obs_per_round; ++k) {
        const LabeledPoint obs = agent.replay.draw_one(agent.rng);
        featurize_into(model, obs.x, phi);
        if (auto* full = std::get_if<GaussianBelief>(&belief)) {
          belief = gvi_classify_update(*full, phi, obs.label, config.update);
        } else {
          belief = diag_gvi_classify_update(std::get<DiagGaussianBelief>(belief), phi, obs.label,
                                            config.update);
        }
      }
    } else {
      const auto& local = local_targets[static_cast<std::size_t>(i)];
      if (!local.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, local.size() - 1);
        for (int k = 0; k < config.run.obs_per_round; ++k) {
          const TargetPoint& obs = local[pick(agent.rng)];
          featurize_into(model, obs.x, phi);
          belief = gvi_regression_update(std::get<GaussianBelief>(belief), phi,
                                         Eigen::VectorXd::Constant(1, obs.target), precision,
                                         config.update);
        }
      }
    }
    agent.belief = std::move(belief);
  };

  RunArtifacts out{{}, model, weights, {}, {}, {}, split.train.size(), split.test.size(),
                   split.verify.size(), 0.0};
  std::vector<EvalResult> eval_buf(static_cast<std::size_t>(n_agents));
  std::vector<Eigen::VectorXd> means(static_cast<std::size_t>(n_agents));

  auto evaluate_all = [&](int round, const std::vector<double>& consensus) {
    const bool have_verify = classify ? !verify_l.empty() : !verify_t.empty();
    if (have_verify) {
      pool.for_each(n_agents, [&](int i) {
        const auto& b = agents[static_cast<std::size_t>(i)].belief;
        eval_buf[static_cast<std::size_t>(i)] =
            classify ? evaluate(b, model, verify_l, config.update.xi)
                     : evaluate_regression(b, model, verify_t);
      });
    }
    const double ms = config.run.record_wall_clock ? elapsed_ms() : 0.0;
    for (int i = 0; i < n_agents; ++i) {
      const auto& e = eval_buf[static_cast<std::size_t>(i)];
      const double nan = std::numeric_limits<double>::quiet_NaN();
      out.metrics.push_back({round, i, consensus[static_cast<std::size_t>(i)],
                             have_verify ? e.bce : nan, have_verify ? e.accuracy : nan, ms});
    }
  };

  auto consensus_now = [&] {
    for (int i = 0; i < n_agents; ++i) {
      means[static_cast<std::size_t>(i)] = mean_of(agents[static_cast<std::size_t>(i)].belief);
    }
    return consensus_error(means);
  };

  evaluate_all(0, consensus_now());
  if (config.exports.consensus_trace) {
    out.consensus_trace.reserve(static_cast<std::size_t>(config.run.n_rounds));
  }
  int round = 0;
  const std::function<void(int)> step = [&](int i) {
    try {
      step_agent(i);
    } catch (...) {
      rethrow_with_context(round, i);
    }
  };
  for (round = 1; round <= config.run.n_rounds; ++round) {
    pool.for_each(n_agents, step);
    publish();
    const auto consensus = consensus_now();
    if (config.exports.consensus_trace) out.consensus_trace.push_back(consensus);
    if (round % config.run.eval_every == 0 || round == config.run.n_rounds) {
      evaluate_all(round, consensus);
    }
  }

  const bool have_test = classify ? !test_l.empty() : !test_t.empty();
  for (const auto& agent : agents) {
    out.final_beliefs.push_back(agent.belief);
    if (have_test) {
      out.test_results.push_back(classify ? evaluate(agent.belief, model, test_l, config.update.xi)
                                          : evaluate_regression(agent.belief, model, test_t));
    }
  }
  out.elapsed_ms = elapsed_ms();
  return out;
}

void write_artifacts(const RunArtifacts& artifacts, const ExperimentConfig& config,
                     const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ValidationError("cannot create output directory " + out_dir.string());

  write_metrics_csv(out_dir / "metrics.csv", artifacts.metrics);
  write_json(out_dir / "kernel.json", kernel_to_json(artifacts.model));
  for (std::size_t i = 0; i < artifacts.final_beliefs.size(); ++i) {
    write_json(out_dir / ("belief_" + std::to_string(i) + ".json"),
               belief_to_json(artifacts.final_beliefs[i]));
  }
  GraphSpec normalized{artifacts.weights.size(), config.graph.edges, artifacts.weights.entries()};
  write_json(out_dir / "weights.json", graph_to_json(normalized));

  json summary;
  summary["task"] = config.task == Task::classify ? "classify" : "regress";
  summary["representation"] = config.representation == Representation::full ? "full" : "diagonal";
  summary["n_agents"] = artifacts.weights.size();
  summary["n_rounds"] = config.run.n_rounds;
  summary["observations_per_agent"] =
      static_cast<long long>(config.run.n_rounds) * config.run.obs_per_round;
  summary["n_train"] = artifacts.n_train;
  summary["n_test"] = artifacts.n_test;
  summary["n_verify"] = artifacts.n_verify;
  summary["feature_dim"] = artifacts.model.feature_dim();
  summary["test"] = json::array();
  const char* acc_key = config.task == Task::classify ? "accuracy" : "r2";
  const char* loss_key = config.task == Task::classify ? "bce" : "mse";
  for (std::size_t i = 0; i < artifacts.test_results.size(); ++i) {
    summary["test"].push_back({{"agent", i},
                               {acc_key, artifacts.test_results[i].accuracy},
                               {loss_key, artifacts.test_results[i].bce}});
  }
  write_json(out_dir / "summary.json", summary);

  if (config.exports.consensus_trace) {
    std::ofstream out(out_dir / "consensus.csv");
    if (!out) throw ValidationError("cannot write consensus.csv");
    out << "round,agent,consensus_err\n";
    for (std::size_t r = 0; r < artifacts.consensus_trace.size(); ++r) {
      for (std::size_t i = 0; i < artifacts.consensus_trace[r].size(); ++i) {
        out << r + 1 << ',' << i << ',' << format_double(artifacts.consensus_trace[r][i]) << '\n';
      }
    }
  }
  const int export_agent = config.exports.grid ? config.exports.grid->agent : 0;
  const auto& belief = artifacts.final_beliefs.at(static_cast<std::size_t>(export_agent));
  if (config.exports.grid) {
    export_grid(belief, artifacts.model, config.exports.grid->bounds,
                config.exports.grid->resolution, out_dir / "grid.csv", config.update.xi);
  }
  if (config.exports.feature_stats) {
    export_feature_stats(belief, artifacts.model, out_dir / "feature_stats.csv");
  }
}

}  // namespace dgvi
