#pragma once

#include "cas/gaussian_mixture.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace cas {

/// {"weights":[...], "means":[[...]], "covs":[[[...]]]}, row-major full matrices.
nlohmann::json to_json(const GaussianMixture& gm);

/// Parses and validates. Throws ConfigError on schema problems and
/// ValidationError when the parameters violate a mixture invariant.
GaussianMixture mixture_from_json(const nlohmann::json& j);

nlohmann::json to_json(const std::vector<GaussianMixture>& list);
std::vector<GaussianMixture> mixtures_from_json(const nlohmann::json& j);

GaussianMixture load_gm_file(const std::filesystem::path& path);
void save_gm_file(const GaussianMixture& gm, const std::filesystem::path& path);

/// Reads a whole JSON document; ConfigError on I/O or parse failure.
nlohmann::json read_json_file(const std::filesystem::path& path);
/// Writes with full round-trip precision.
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);

}  // namespace cas
