#include "cas/gm_json.hpp"

#include "cas/errors.hpp"

#include <fmt/format.h>

#include <fstream>

namespace cas {

using nlohmann::json;

json to_json(const GaussianMixture& gm) {
  json weights = json::array();
  json means = json::array();
  json covs = json::array();
  for (int k = 0; k < gm.components(); ++k) {
    weights.push_back(gm.weight(k));
    json m = json::array();
    for (Eigen::Index i = 0; i < gm.mean(k).size(); ++i) m.push_back(gm.mean(k)(i));
    means.push_back(std::move(m));
    json c = json::array();
    for (Eigen::Index r = 0; r < gm.cov(k).rows(); ++r) {
      json row = json::array();
      for (Eigen::Index col = 0; col < gm.cov(k).cols(); ++col) row.push_back(gm.cov(k)(r, col));
      c.push_back(std::move(row));
    }
    covs.push_back(std::move(c));
  }
  return json{{"weights", std::move(weights)}, {"means", std::move(means)}, {"covs", std::move(covs)}};
}

namespace {

Vector vector_from(const json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(fmt::format("mixture JSON: {} must be an array", what));
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(fmt::format("mixture JSON: {} holds a non-number", what));
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

}  // namespace

GaussianMixture mixture_from_json(const json& j) {
  if (!j.is_object() || !j.contains("weights") || !j.contains("means") || !j.contains("covs")) {
    throw ConfigError("mixture JSON needs an object with weights, means and covs");
  }
  Vector weights = vector_from(j.at("weights"), "weights");
  const json& jm = j.at("means");
  const json& jc = j.at("covs");
  if (!jm.is_array() || !jc.is_array()) throw ConfigError("mixture JSON: means/covs must be arrays");
  std::vector<Vector> means;
  for (const auto& m : jm) means.push_back(vector_from(m, "mean"));
  std::vector<Matrix> covs;
  for (const auto& c : jc) {
    if (!c.is_array()) throw ConfigError("mixture JSON: covariance must be an array of rows");
    const auto rows = static_cast<Eigen::Index>(c.size());
    Matrix s(rows, rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      Vector row = vector_from(c[static_cast<std::size_t>(r)], "covariance row");
      if (row.size() != rows) throw ConfigError("mixture JSON: covariance must be square");
      s.row(r) = row.transpose();
    }
    covs.push_back(std::move(s));
  }
  return GaussianMixture(std::move(weights), std::move(means), std::move(covs));
}

json to_json(const std::vector<GaussianMixture>& list) {
  json out = json::array();
  for (const auto& gm : list) out.push_back(to_json(gm));
  return out;
}

std::vector<GaussianMixture> mixtures_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("expected a JSON array of mixtures");
  std::vector<GaussianMixture> out;
  out.reserve(j.size());
  for (const auto& item : j) out.push_back(mixture_from_json(item));
  return out;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open {}", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_json_file(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << j.dump(2) << '\n';
}

GaussianMixture load_gm_file(const std::filesystem::path& path) {
  return mixture_from_json(read_json_file(path));
}

void save_gm_file(const GaussianMixture& gm, const std::filesystem::path& path) {
  write_json_file(to_json(gm), path);
}

}  // namespace cas
