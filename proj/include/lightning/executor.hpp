#pragma once

#include "lightning/device.hpp"
#include "lightning/engine.hpp"
#include "lightning/io.hpp"
#include "lightning/sensitivity.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string_view>
#include <vector>

namespace lightning {

/// One planned glitch. Targets whose windows overlap share an attempt that
/// spans all of them, so `duration` can exceed the configured T_d.
struct PlannedAttempt {
    std::vector<CandidateTarget> targets;
    double T_W = 0.0;
    double duration = 0.0;
    std::optional<FaultParams> params; // overrides the trial's parameters (random-fault baseline)
};

/// T_W = window midpoint - T_d / 2 (clamped at 0) per target, ascending,
/// overlapping glitch windows merged.
std::vector<PlannedAttempt> plan_injections(const ExecutionSchedule& schedule, const TargetSet& targets,
                                            const FaultParams& params);

struct AttackMode {
    bool targeted = false;
    std::size_t target_class = 0;

    static AttackMode non_targeted() { return {}; }
    static AttackMode toward(std::size_t t) { return {true, t}; }
};

struct InjectionAttempt {
    std::vector<CandidateTarget> targets;
    double T_W = 0.0;
    double duration = 0.0;
    GlitchOutcome outcome;
};

enum class TrialStatus : std::uint8_t { Completed, DeviceCrash, DeviceNoResponse };

std::string_view to_string(TrialStatus s);

struct TrialResult {
    std::size_t input_id = 0;
    std::size_t true_label = 0;
    AttackMode mode;
    std::vector<InjectionAttempt> attempts;
    TrialStatus status = TrialStatus::Completed;
    std::size_t baseline_class = 0;
    std::size_t final_class = 0; // meaningful when Completed; class count when no class
    std::size_t flips_applied = 0;
};

/// Simulates one inference under attack. The whole schedule is shifted by a
/// single jitter draw; attempt i samples from rng.split(i). `time_offset`
/// moves every planned glitch.
TrialResult run_attack_trial(const Model& model, const Tensor& x, std::size_t label, const AttackMode& mode,
                             const std::vector<PlannedAttempt>& plan, const ExecutionSchedule& schedule,
                             const DeviceProfile& profile, const FaultParams& params, Rng& rng,
                             double time_offset = 0.0);

/// Per-input top sets, computed once per input from a single flip response
/// and shared by every scheme and objective registered at construction.
class TargetCache {
public:
    TargetCache(const Model& model, const Dataset& data, std::vector<Scheme> schemes, std::size_t n_max,
                bool all_targets = false);

    /// Computes every input in `inputs` not already cached.
    void prepare(const std::vector<std::size_t>& inputs, unsigned jobs = 1);
    /// Top n (n <= n_max). Computes the input on a miss.
    TargetSet get(std::size_t input, Scheme scheme, const Objective& obj, std::size_t n);

private:
    struct Entry {
        std::map<std::pair<Scheme, std::size_t>, TargetSet> untargeted; // key label
        std::map<std::pair<Scheme, std::size_t>, TargetSet> toward;     // key target class
    };
    Entry compute(std::size_t input) const;

    const Model& model_;
    const Dataset& data_;
    std::vector<Scheme> schemes_;
    std::size_t n_max_;
    bool all_targets_;
    std::map<std::size_t, Entry> entries_;
    std::mutex mutex_;
};

enum class TargetSource : std::uint8_t {
    Dependent,   // per-input search
    Independent, // one search over a sample
    RandomSet,   // N uniformly drawn (element, bit) candidates per trial
    RandomFault, // no targets: N glitches at random times with random faulting parameters
};

std::string_view to_string(TargetSource s);
TargetSource parse_target_source(std::string_view name);

/// How faults reach the targets: through the device model, or as one exact
/// flip per target (Bit: the anchor; parts and elements: a uniform bit inside).
enum class Delivery : std::uint8_t { Device, Precise };

struct CampaignConfig {
    TargetSource source = TargetSource::Dependent;
    Delivery delivery = Delivery::Device;
    Scheme scheme = Scheme::Bit;
    std::size_t n = 10;
    bool targeted = false;
    std::optional<std::size_t> target_class; // targeted without a class: every ordered pair
    std::size_t trials = 1000;
    std::uint64_t seed = 0;
    double time_offset = 0.0;
    unsigned jobs = 1;
    bool keep_records = true;
};

struct CampaignReport {
    std::size_t classes = 0;
    std::size_t trials = 0;
    std::size_t completed = 0;
    std::size_t crashed = 0;
    std::size_t no_response = 0;
    std::size_t baseline_correct = 0;  // over all trials
    std::size_t completed_correct = 0; // attacked, over completed trials
    std::size_t effective_correct = 0; // failed trials counted at their baseline prediction
    std::size_t flips = 0;
    std::size_t no_class = 0; // completed trials whose logits were all NaN
    std::size_t targeted_eligible = 0;
    std::size_t targeted_success = 0;
    std::vector<std::size_t> confusion;      // classes x classes, completed trials, rows true
    std::vector<std::size_t> pair_eligible;  // classes x classes, rows true, columns t*
    std::vector<std::size_t> pair_success;
    std::vector<TrialResult> records;

    double baseline_accuracy() const;
    double attacked_accuracy() const;
    double effective_accuracy() const;
    /// Percentage points: baseline accuracy minus attacked accuracy.
    double degradation() const;
    double effective_degradation() const;
    double crash_rate() const;
    double no_response_rate() const;
    double targeted_success_rate() const;
    /// Mean success over ordered pairs (true != t*) that had eligible trials.
    double mean_pair_success() const;
};

/// Aggregates trial records; records keep no reference to the campaign.
CampaignReport tally_trials(const std::vector<TrialResult>& results, std::size_t classes);

/// Trial i attacks input i mod |data|. In every-pair targeted mode the target
/// for trial i is the ((i / |data|) mod (C - 1))-th class other than the true
/// label. `independent_sample` feeds Independent searches; `cache` (optional)
/// supplies Dependent top sets.
CampaignReport run_campaign(const Model& model, const Dataset& data, const CampaignConfig& config,
                            const DeviceProfile& profile, const FaultParams& params,
                            const Dataset* independent_sample = nullptr, TargetCache* cache = nullptr);

/// Target set for a campaign's Independent source (non-targeted or toward t).
TargetSet independent_targets(const Model& model, const Dataset& sample, const CampaignConfig& config,
                              std::optional<std::size_t> toward);

/// Campaign over fixed, precomputed top sets (one per target class when
/// targeted in every-pair mode; index 0 otherwise).
CampaignReport run_campaign_with_sets(const Model& model, const Dataset& data, const CampaignConfig& config,
                                      const DeviceProfile& profile, const FaultParams& params,
                                      const std::vector<TargetSet>& sets);

} // namespace lightning
