#pragma once

#include "lightning/device.hpp"
#include "lightning/executor.hpp"
#include "lightning/genetic.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lightning {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Flat `key = value` text. '#' starts a comment, blank lines are ignored,
/// a repeated key is an error. `origin` names the source in messages.
std::map<std::string, std::string> parse_key_values(std::string_view text, const std::string& origin);

/// Profile text: optional `base = default|ideal` (default first), then any
/// profile field by name. Pairs are written `reference_pairs = 1200:600, 1350:700`.
DeviceProfile parse_profile(std::string_view text, const std::string& origin = "profile");
DeviceProfile load_profile(const std::filesystem::path& path);
/// `default`, `ideal`, or a profile file path.
DeviceProfile resolve_profile(const std::string& name_or_path);
std::string format_profile(const DeviceProfile& profile);

struct GaSettings {
    GaConfig ga;
    std::size_t fitness_trials = 50;
    std::uint64_t eval_seed = 0;
    std::size_t fitness_inputs = 100; // first items of the data set
    std::optional<double> rough_t_w;  // default: the planned first wait
    std::filesystem::path out_trace;
};

/// Everything a campaign, baseline or evolve run needs.
struct RunConfig {
    std::filesystem::path model;
    std::filesystem::path data_images, data_labels;
    std::size_t data_limit = 0; // 0: all
    std::filesystem::path train_images, train_labels;
    std::size_t sample_size = 256;
    std::uint64_t sample_seed = 0;
    std::string profile_name = "default";
    DeviceProfile profile = DeviceProfile::default_profile();
    FaultParams params;
    CampaignConfig campaign;
    GaSettings evolve;
    std::filesystem::path out_summary, out_records, out_confusion;
    std::string text; // normalised key=value listing, hashed into provenance headers
};

/// Unknown keys, missing required keys and out-of-range values throw ConfigError.
/// Relative input paths resolve against `base_dir`; output paths are used as
/// given (relative to the working directory).
RunConfig parse_run_config(std::string_view text, const std::string& origin = "config",
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

} // namespace lightning
