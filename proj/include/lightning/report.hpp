#pragma once

#include "lightning/device.hpp"
#include "lightning/executor.hpp"
#include "lightning/genetic.hpp"
#include "lightning/sensitivity.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lightning {

std::string_view tool_version();

/// Written as the first line of every output file: a '#' comment in CSV
/// files and a {"provenance": ...} object in JSON-lines files.
struct Provenance {
    std::string command;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
};

/// FNV-1a of the normalised configuration text.
std::uint64_t config_hash(std::string_view text);
std::string provenance_comment(const Provenance& p);

std::string summary_csv(const Provenance& p, const CampaignReport& r);
std::string confusion_csv(const Provenance& p, const CampaignReport& r);
std::string records_jsonl(const Provenance& p, const std::vector<TrialResult>& records, std::size_t classes);
std::string sensitivity_csv(const Provenance& p, const std::vector<SensitivityEntry>& entries);
std::string calibration_csv(const Provenance& p, const std::vector<CalibrationCell>& cells);
std::string trace_csv(const Provenance& p, const GaResult& result);

/// Parses records_jsonl output back; the provenance line and class count are
/// returned through the out-parameters.
std::vector<TrialResult> parse_records_jsonl(std::string_view text, std::size_t& classes, Provenance& provenance);

/// Human-readable summary for the terminal.
std::string summary_text(const CampaignReport& r);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

} // namespace lightning
