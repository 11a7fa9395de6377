#pragma once

#include <json.hpp>

#include <map>
#include <string>

#include "lossdisc/discrepancy.hpp"
#include "lossdisc/empirical.hpp"
#include "lossdisc/shift.hpp"

namespace lossdisc {

// JSON bindings (nlohmann ADL hooks). Matrices serialize as row-major nested
// arrays, vectors as flat arrays.

void to_json(nlohmann::json& j, const GroupSpec& g);
void from_json(const nlohmann::json& j, GroupSpec& g);
void to_json(nlohmann::json& j, const TrueLinearModel& m);
void from_json(const nlohmann::json& j, TrueLinearModel& m);
void to_json(nlohmann::json& j, const NoiseSpec& n);
void from_json(const nlohmann::json& j, NoiseSpec& n);
void to_json(nlohmann::json& j, const PopulationSpec& p);
void from_json(const nlohmann::json& j, PopulationSpec& p);
void to_json(nlohmann::json& j, const LinearPredictor& p);
void from_json(const nlohmann::json& j, LinearPredictor& p);
void to_json(nlohmann::json& j, const DiscrepancyReport& r);
void from_json(const nlohmann::json& j, DiscrepancyReport& r);
void to_json(nlohmann::json& j, const ShiftScenario& s);
void from_json(const nlohmann::json& j, ShiftScenario& s);

nlohmann::json mat_to_json(const Mat& m);
Mat mat_from_json(const nlohmann::json& j);
nlohmann::json vec_to_json(const Vec& v);
Vec vec_from_json(const nlohmann::json& j);

/// How a CSV column set maps onto a Dataset: the target column, the group
/// column, and the string-value-to-{0,1} mapping for the group labels. All
/// remaining columns become features.
struct CsvSchema {
  std::string target_column;
  std::string group_column;
  std::map<std::string, int> group_mapping;
};

/// Loads a dataset from a CSV file with a header row. Throws ConfigError on
/// missing columns, unmapped group values, or non-numeric cells.
Dataset load_dataset_csv(const std::string& path, const CsvSchema& schema);

/// FNV-1a 64-bit hash, used to fingerprint configs in output metadata.
std::uint64_t fnv1a64(std::string_view bytes);

/// Fixed-width hex rendering of a hash.
std::string hash_hex(std::uint64_t h);

/// Shortest round-trippable decimal rendering of a double (stable across
/// runs, no locale effects).
std::string format_double(double v);

}  // namespace lossdisc
