#include "dgvi/io.hpp"

#include <fstream>
#include <string>

#include "dgvi/errors.hpp"

namespace dgvi {
namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd matrix_from_rows(const nlohmann::json& rows, const char* what) {
  if (!rows.is_array() || rows.empty()) {
    throw ValidationError(std::string(what) + " must be a nonempty array of rows");
  }
  const auto n_rows = static_cast<Eigen::Index>(rows.size());
  const auto n_cols = static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd m(n_rows, n_cols);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const auto row = rows[static_cast<std::size_t>(r)].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != n_cols) {
      throw ValidationError(std::string(what) + " rows have different lengths");
    }
    for (Eigen::Index c = 0; c < n_cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

}  // namespace

const Vector& mean_of(const AnyBelief& b) {
  return std::visit([](const auto& x) -> const Vector& { return x.mean(); }, b);
}

nlohmann::json belief_to_json(const GaussianBelief& b) {
  std::vector<double> info;
  info.reserve(static_cast<std::size_t>(b.dim() * b.dim()));
  for (Eigen::Index r = 0; r < b.dim(); ++r) {
    for (Eigen::Index c = 0; c < b.dim(); ++c) info.push_back(b.information()(r, c));
  }
  return {{"dim", b.dim()}, {"mean", to_std(b.mean())}, {"information", info}};
}

nlohmann::json belief_to_json(const DiagGaussianBelief& b) {
  return {{"dim", b.dim()}, {"mean", to_std(b.mean())}, {"info_diag", to_std(b.info_diag())}};
}

nlohmann::json belief_to_json(const AnyBelief& b) {
  return std::visit([](const auto& x) { return belief_to_json(x); }, b);
}

AnyBelief belief_from_json(const nlohmann::json& j) {
  try {
    const auto dim = j.at("dim").get<Eigen::Index>();
    const Vector mean = to_eigen(j.at("mean").get<std::vector<double>>());
    if (mean.size() != dim) throw ValidationError("belief snapshot: mean length != dim");
    if (j.contains("info_diag")) {
      Vector d = to_eigen(j.at("info_diag").get<std::vector<double>>());
      if (d.size() != dim) throw ValidationError("belief snapshot: info_diag length != dim");
      return DiagGaussianBelief(mean, std::move(d));
    }
    const auto flat = j.at("information").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat.size()) != dim * dim) {
      throw ValidationError("belief snapshot: information must have dim*dim entries");
    }
    Matrix info(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r) {
      for (Eigen::Index c = 0; c < dim; ++c) info(r, c) = flat[static_cast<std::size_t>(r * dim + c)];
    }
    return GaussianBelief(mean, std::move(info));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("belief snapshot: ") + e.what());
  }
}

nlohmann::json kernel_to_json(const KernelModel& m) {
  nlohmann::json centers = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.centers().rows(); ++r) {
    centers.push_back(to_std(m.centers().row(r).transpose()));
  }
  return {{"scale", m.scale()}, {"centers", centers}, {"lengthscales", to_std(m.lengthscales())}};
}

KernelModel kernel_from_json(const nlohmann::json& j) {
  try {
    Eigen::MatrixXd centers = matrix_from_rows(j.at("centers"), "kernel centers");
    const auto& ls = j.at("lengthscales");
    Vector lengthscales = ls.is_number()
                              ? Vector::Constant(centers.rows(), ls.get<double>())
                              : to_eigen(ls.get<std::vector<double>>());
    return KernelModel(std::move(centers), j.at("scale").get<double>(), std::move(lengthscales));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("kernel model: ") + e.what());
  }
}

GraphSpec graph_from_json(const nlohmann::json& j) {
  try {
    GraphSpec g;
    g.n = j.at("n").get<int>();
    if (g.n < 1) throw ValidationError("graph: n must be >= 1");
    for (const auto& e : j.value("edges", nlohmann::json::array())) {
      const auto pair = e.get<std::vector<int>>();
      if (pair.size() != 2) throw ValidationError("graph: each edge needs two endpoints");
      g.edges.emplace_back(pair[0], pair[1]);
    }
    if (j.contains("weights") && !j.at("weights").is_null()) {
      g.weights = matrix_from_rows(j.at("weights"), "graph weights");
      if (g.weights->rows() != g.n || g.weights->cols() != g.n) {
        throw ValidationError("graph: weights must be n x n");
      }
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("graph: ") + e.what());
  }
}

nlohmann::json graph_to_json(const GraphSpec& g) {
  nlohmann::json j;
  j["n"] = g.n;
  j["edges"] = nlohmann::json::array();
  for (const auto& [a, b] : g.edges) j["edges"].push_back({a, b});
  if (g.weights) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < g.weights->rows(); ++r) {
      rows.push_back(to_std(g.weights->row(r).transpose()));
    }
    j["weights"] = rows;
  }
  return j;
}

WeightMatrix build_weight_matrix(const GraphSpec& g) {
  if (g.weights) return sinkhorn_normalize(*g.weights);
  return metropolis_weights(g.edges, g.n);
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace dgvi
