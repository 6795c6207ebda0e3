#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tailshape/config.hpp"
#include "tailshape/experiment.hpp"

namespace tailshape {

using Json = nlohmann::ordered_json;

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Structured per-scenario report: regime rates, network, kernel, gamma
/// estimates, tail fit against alpha_th, truncation bound, audits, seed.
Json scenario_report(const Scenario& sc, const EnsembleResult& res, const std::string& config_sha256);

/// Machine-readable audit failures of one ensemble; empty when all pass.
std::vector<std::string> audit_failures(const EnsembleResult& res);

Json comparison_report(const ComparisonReport& cmp, const std::vector<EnsembleResult>& results);
Json sweep_report(const SweepTable& table, const std::string& scenario);

/// Writes "value" with 17 significant digits.
std::string fmt17(double v);

/// Raw files of an ensemble directory, in write order.
inline const std::vector<std::string>& raw_file_names() {
    static const std::vector<std::string> names{"bursts.csv",        "dwell.csv",  "cone.csv",
                                                "regime_dwells.csv", "audits.csv", "bands.csv"};
    return names;
}

/// config.yaml (verbatim), kernel.csv, the raw CSVs, ccdf.csv and
/// report.json. Returns the files written, relative to `dir`.
std::vector<std::string> write_ensemble_dir(const std::filesystem::path& dir, const RunConfig& rc, const Scenario& sc,
                                            const EnsembleRaw& raw, const EnsembleResult& res);

/// Rebuilds the raw ensemble output from the CSVs of an ensemble directory.
EnsembleRaw read_ensemble_raw(const std::filesystem::path& dir);

void write_text_atomic(const std::filesystem::path& path, const std::string& text);

struct ManifestInfo {
    std::string command;
    std::string config_sha256;
    std::uint64_t seed = 0;
    std::string started;
    std::string finished;
    bool complete = true;
};

/// manifest.json listing every file with its SHA-256 checksum; written
/// last, through a temporary file and a rename.
void write_manifest(const std::filesystem::path& dir, const ManifestInfo& info, const std::vector<std::string>& files);

/// Checks every checksum listed in a manifest. Returns mismatching paths.
std::vector<std::string> verify_manifest(const std::filesystem::path& dir);

std::string utc_timestamp();

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace tailshape
