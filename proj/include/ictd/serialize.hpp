// JSON documents for parameters, tasks and training configurations.
//
// Doubles are written in shortest round-trip form, so every document reads
// back bit-exactly.

#pragma once

#include <string>

#include "json.hpp"
#include "ictd/attention.hpp"
#include "ictd/mrp.hpp"
#include "ictd/training.hpp"

namespace ictd {

using Json = nlohmann::json;

/// Thrown on malformed documents: missing or unknown keys, wrong types,
/// unsupported schema versions.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

/// {"rows": r, "cols": c, "data": [row-major entries]}
Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

Json params_to_json(const TransformerParams& params);
TransformerParams params_from_json(const Json& j);

Json two_head_to_json(const TwoHeadParams& params);
TwoHeadParams two_head_from_json(const Json& j);

/// Finite tasks store (p0, P, r, Phi); CartPole tasks store the physics,
/// policy, tiling and tile-oracle seed, from which the environment is rebuilt.
Json task_to_json(const Task& task);
Task task_from_json(const Json& j);

/// Every TrainConfig field plus "schema_version". Reading rejects unknown
/// keys; absent keys keep their defaults.
Json config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const Json& j);
/// Applies the keys present in `j` on top of `base`.
void merge_config(TrainConfig& base, const Json& j);

Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

}  // namespace ictd
