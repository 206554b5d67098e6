#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dora/calib.hpp"
#include "dora/experiment.hpp"
#include "dora/policy.hpp"
#include "dora/trainer.hpp"
#include "dora/world.hpp"

namespace dora {

using Json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

Json to_json(const Table& t);
Table table_from_json(const Json& j);

Json to_json(const World& w);
World world_from_json(const Json& j);

Json to_json(const MixtureSpec& s);
MixtureSpec mixture_from_json(const Json& j);

Json to_json(const Dataset& d);
Dataset dataset_from_json(const Json& j);

Json to_json(const ClassifierModel& m);
ClassifierModel classifier_from_json(const Json& j);

Json to_json(const PolicyModel& p);
PolicyModel policy_from_json(const Json& j);

// Config sections. Parsing rejects unknown keys and reports the offending path.
Json to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const Json& j);

Json to_json(const EvalReport& r);
EvalReport report_from_json(const Json& j);

Json to_json(const SweepChunk& c);
SweepChunk chunk_from_json(const Json& j);

// Wraps a payload with format version, kind, config hash and seed.
Json envelope(std::string_view kind, Json payload, const std::string& hash, std::uint64_t seed);
// Returns the payload after checking kind and version.
Json open_envelope(const Json& doc, std::string_view kind);

// Write to a sibling temporary file, then rename over the destination.
void write_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);
Json read_json(const std::filesystem::path& path);

// CSV output: a provenance comment line, then the header, then rows.
std::string csv_preamble(const std::string& hash, std::uint64_t seed);

std::string calibration_csv(const std::vector<CalibrationRecord>& records, const std::string& hash,
                            std::uint64_t seed);
std::string training_log_csv(const TrainingLog& log, const std::string& hash, std::uint64_t seed);
std::string reports_csv(const std::vector<EvalReport>& reports, const std::string& hash, std::uint64_t seed);

}  // namespace dora
