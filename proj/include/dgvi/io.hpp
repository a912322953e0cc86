#pragma once

#include <filesystem>
#include <optional>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "dgvi/belief.hpp"
#include "dgvi/features.hpp"
#include "dgvi/network.hpp"

namespace dgvi {

using AnyBelief = std::variant<GaussianBelief, DiagGaussianBelief>;

const Vector& mean_of(const AnyBelief& b);

// Belief snapshot: {"dim", "mean", "information" (row-major)} or {"dim", "mean", "info_diag"}.
nlohmann::json belief_to_json(const GaussianBelief& b);
nlohmann::json belief_to_json(const DiagGaussianBelief& b);
nlohmann::json belief_to_json(const AnyBelief& b);
AnyBelief belief_from_json(const nlohmann::json& j);

// KernelModel: {"scale", "centers": [[..]], "lengthscales": [..]}.
nlohmann::json kernel_to_json(const KernelModel& m);
KernelModel kernel_from_json(const nlohmann::json& j);

/// Graph file {"n", "edges": [[i, j], ...], "weights": optional n x n}.
struct GraphSpec {
  int n = 1;
  std::vector<Edge> edges;
  std::optional<Eigen::MatrixXd> weights;
};

GraphSpec graph_from_json(const nlohmann::json& j);
nlohmann::json graph_to_json(const GraphSpec& g);
/// Explicit weights are Sinkhorn-normalized; otherwise Metropolis weights on the edges.
WeightMatrix build_weight_matrix(const GraphSpec& g);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace dgvi
