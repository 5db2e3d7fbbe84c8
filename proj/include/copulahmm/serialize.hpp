#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "copulahmm/data.hpp"
#include "copulahmm/inference.hpp"
#include "copulahmm/params.hpp"

namespace copulahmm {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.3.0";

// Shortest decimal string that reads back to the same double.
std::string format_double(double v);

// Writes to a sibling temp file and renames it over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t h);
std::string file_hash(const std::filesystem::path& path);

// Pretty-printed with a trailing newline.
std::string dump(const json& j);

json to_json(const PriorSettings& p);
PriorSettings priors_from_json(const json& j);
json to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const json& j);
json to_json(const RiskFactorEncoding& enc);
RiskFactorEncoding encoding_from_json(const json& j);
json to_json(const ModelParams& m);
ModelParams params_from_json(const json& j);

// Everything needed to score new patients.
struct FittedModel {
  ModelSpec spec;
  RiskFactorEncoding encoding;
  ModelParams params;
  Eigen::MatrixXd R;
};

json to_json(const FittedModel& f);
FittedModel fitted_from_json(const json& j);
FittedModel read_fitted_model(const std::filesystem::path& path);

// One row per post-warmup draw: chain, lp__, then constrained parameters.
std::string draws_csv(const PosteriorDraws& draws);
PosteriorDraws read_draws_csv(const std::filesystem::path& path, const ModelSpec& spec, Eigen::Index P);

json diagnostics_json(const PosteriorDraws& draws);

}  // namespace copulahmm
