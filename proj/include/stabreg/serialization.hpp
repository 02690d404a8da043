#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "stabreg/evaluation.hpp"
#include "stabreg/scm.hpp"
#include "stabreg/simulations.hpp"
#include "stabreg/stabilized_regression.hpp"

namespace stabreg {

using Json = nlohmann::ordered_json;

inline constexpr const char* kModelVersion = "stabreg-model/1";
inline constexpr const char* kScmVersion = "stabreg-scm/1";
inline constexpr const char* kTruthVersion = "stabreg-truth/1";
inline constexpr const char* kBenchVersion = "stabreg-bench/1";

// `jobs` is deliberately not serialized: outputs must not depend on it.
Json to_json(const SRConfig& config);
SRConfig sr_config_from_json(const Json& j);

Json to_json(const SRModel& model);

Json to_json(const LinearSCM& scm);
LinearSCM scm_from_json(const Json& j);

// Blanket sets as predictor column names ("X1".."Xd").
Json truth_to_json(const BlanketTruth& truth, const std::vector<std::string>& names);

Json to_json(const SimDesign& design);
SimDesign design_from_json(const Json& j);

Json to_json(const BenchmarkResult& result);
BenchmarkResult benchmark_from_json(const Json& j);

// Structural checks against the documented formats; throw ValidationError
// naming the offending field.
void validate_model_json(const Json& j);
void validate_scm_json(const Json& j);
void validate_truth_json(const Json& j);
void validate_bench_json(const Json& j);
void validate_thresholds_json(const Json& j);

// Two-space indentation and a trailing newline.
std::string dump(const Json& j);
void write_text(const std::filesystem::path& path, const std::string& text);
Json read_json(const std::filesystem::path& path);

}  // namespace stabreg
