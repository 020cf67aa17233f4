#include "lightning/executor.hpp"

#include "lightning/parallel.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>
#include <string>

namespace lightning {

std::vector<PlannedAttempt> plan_injections(const ExecutionSchedule& schedule, const TargetSet& targets,
                                            const FaultParams& params)
{
    if (!(params.T_d > 0.0)) {
        throw std::invalid_argument("glitch duration T_d must be positive");
    }
    std::vector<PlannedAttempt> single;
    for (const auto& t : targets.targets) {
        const std::size_t k = schedule.position_of(t.target.addr);
        const double mid = 0.5 * (schedule.start[k] + schedule.end[k]);
        single.push_back({{t.target}, std::max(0.0, mid - 0.5 * params.T_d), params.T_d, std::nullopt});
    }
    std::stable_sort(single.begin(), single.end(),
                     [](const PlannedAttempt& a, const PlannedAttempt& b) { return a.T_W < b.T_W; });
    std::vector<PlannedAttempt> out;
    for (auto& a : single) {
        if (!out.empty() && a.T_W < out.back().T_W + out.back().duration) {
            auto& m = out.back();
            const double end = std::max(m.T_W + m.duration, a.T_W + a.duration);
            m.duration = end - m.T_W;
            m.targets.insert(m.targets.end(), a.targets.begin(), a.targets.end());
        } else {
            out.push_back(std::move(a));
        }
    }
    return out;
}

std::string_view to_string(TrialStatus s)
{
    switch (s) {
    case TrialStatus::Completed: return "completed";
    case TrialStatus::DeviceCrash: return "crash";
    case TrialStatus::DeviceNoResponse: return "no_response";
    }
    return "?";
}

TrialResult run_attack_trial(const Model& model, const Tensor& x, std::size_t label, const AttackMode& mode,
                             const std::vector<PlannedAttempt>& plan, const ExecutionSchedule& schedule,
                             const DeviceProfile& profile, const FaultParams& params, Rng& rng, double time_offset)
{
    TrialResult res;
    res.true_label = label;
    res.mode = mode;
    res.baseline_class = forward(model, x, label).predicted_class;

    // preparation: the device starts from (F_G, V_G) and the jitter is redrawn
    const double u = rng.uniform();
    const double shift = profile.jitter_ms > 0.0 ? profile.jitter_ms * (2.0 * u - 1.0) : 0.0;

    InjectionPlan flips;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const auto& a = plan[i];
        FaultParams p = a.params ? *a.params : params;
        p.T_W = std::max(0.0, a.T_W + time_offset);
        p.T_d = a.duration;
        Rng attempt_rng = rng.split(i);
        InjectionAttempt rec{a.targets, p.T_W, p.T_d, sample_glitch_outcome(profile, p, schedule, attempt_rng, shift)};
        const GlitchKind kind = rec.outcome.kind;
        if (kind == GlitchKind::Faults) {
            for (const auto& f : rec.outcome.positions) {
                flips.toggle(f.addr, f.loc);
            }
        }
        res.attempts.push_back(std::move(rec));
        if (kind == GlitchKind::Crash) {
            res.status = TrialStatus::DeviceCrash;
            return res;
        }
        if (kind == GlitchKind::NoResponse) {
            res.status = TrialStatus::DeviceNoResponse;
            return res;
        }
        // recover: back to (F_G, V_G) before the next wait
    }
    res.flips_applied = flips.size();
    res.final_class = flips.empty() ? res.baseline_class : forward(model, x, label, flips).predicted_class;
    return res;
}

TargetCache::TargetCache(const Model& model, const Dataset& data, std::vector<Scheme> schemes, std::size_t n_max,
                         bool all_targets)
    : model_(model), data_(data), schemes_(std::move(schemes)), n_max_(n_max), all_targets_(all_targets)
{
    if (n_max_ == 0) {
        throw std::invalid_argument("target cache needs N >= 1");
    }
}

TargetCache::Entry TargetCache::compute(std::size_t input) const
{
    Entry e;
    FlipResponse r(model_, data_.inputs.at(input));
    const std::size_t label = data_.labels[input];
    auto fill = [&](const Objective& obj, auto& into) {
        const auto g = r.gradients(obj);
        for (auto s : schemes_) {
            into[{s, obj.label}] = get_top_set(build_table(model_, g, s), n_max_);
        }
    };
    fill(Objective::untargeted(label), e.untargeted);
    if (all_targets_) {
        for (std::size_t t = 0; t < model_.class_count(); ++t) {
            if (t != label) {
                fill(Objective::toward(t), e.toward);
            }
        }
    }
    return e;
}

void TargetCache::prepare(const std::vector<std::size_t>& inputs, unsigned jobs)
{
    std::vector<std::size_t> missing;
    {
        std::lock_guard lock(mutex_);
        for (auto i : inputs) {
            if (!entries_.count(i) && std::find(missing.begin(), missing.end(), i) == missing.end()) {
                missing.push_back(i);
            }
        }
    }
    std::vector<Entry> fresh(missing.size());
    parallel_for(missing.size(), jobs, [&](std::size_t k) { fresh[k] = compute(missing[k]); });
    std::lock_guard lock(mutex_);
    for (std::size_t k = 0; k < missing.size(); ++k) {
        entries_.emplace(missing[k], std::move(fresh[k]));
    }
}

TargetSet TargetCache::get(std::size_t input, Scheme scheme, const Objective& obj, std::size_t n)
{
    if (n == 0 || n > n_max_) {
        throw std::invalid_argument("requested top-set size outside [1, " + std::to_string(n_max_) + "]");
    }
    if (std::find(schemes_.begin(), schemes_.end(), scheme) == schemes_.end()) {
        throw std::invalid_argument("target cache was not built for scheme " + std::string(to_string(scheme)));
    }
    std::unique_lock lock(mutex_);
    auto it = entries_.find(input);
    if (it == entries_.end()) {
        lock.unlock();
        Entry e = compute(input);
        lock.lock();
        it = entries_.emplace(input, std::move(e)).first;
    }
    const auto& table = obj.targeted ? it->second.toward : it->second.untargeted;
    auto found = table.find({scheme, obj.label});
    if (found == table.end()) {
        throw std::invalid_argument("target cache holds no sets for this objective");
    }
    TargetSet out = found->second;
    out.n_max = n;
    if (out.targets.size() > n) {
        out.targets.resize(n);
    }
    return out;
}

std::string_view to_string(TargetSource s)
{
    switch (s) {
    case TargetSource::Dependent: return "dependent";
    case TargetSource::Independent: return "independent";
    case TargetSource::RandomSet: return "random_set";
    case TargetSource::RandomFault: return "random_fault";
    }
    return "?";
}

TargetSource parse_target_source(std::string_view name)
{
    for (auto s : {TargetSource::Dependent, TargetSource::Independent, TargetSource::RandomSet,
                   TargetSource::RandomFault}) {
        if (name == to_string(s)) {
            return s;
        }
    }
    if (name == "dep") {
        return TargetSource::Dependent;
    }
    if (name == "indep") {
        return TargetSource::Independent;
    }
    throw std::invalid_argument("unknown target source '" + std::string(name) + "'");
}

double CampaignReport::baseline_accuracy() const
{
    return trials ? static_cast<double>(baseline_correct) / trials : 0.0;
}

double CampaignReport::attacked_accuracy() const
{
    return completed ? static_cast<double>(completed_correct) / completed : baseline_accuracy();
}

double CampaignReport::effective_accuracy() const
{
    return trials ? static_cast<double>(effective_correct) / trials : 0.0;
}

double CampaignReport::degradation() const
{
    return 100.0 * (baseline_accuracy() - attacked_accuracy());
}

double CampaignReport::effective_degradation() const
{
    return 100.0 * (baseline_accuracy() - effective_accuracy());
}

double CampaignReport::crash_rate() const
{
    return trials ? static_cast<double>(crashed) / trials : 0.0;
}

double CampaignReport::no_response_rate() const
{
    return trials ? static_cast<double>(no_response) / trials : 0.0;
}

double CampaignReport::targeted_success_rate() const
{
    return targeted_eligible ? static_cast<double>(targeted_success) / targeted_eligible : 0.0;
}

double CampaignReport::mean_pair_success() const
{
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < pair_eligible.size(); ++i) {
        if (pair_eligible[i]) {
            sum += static_cast<double>(pair_success[i]) / pair_eligible[i];
            ++pairs;
        }
    }
    return pairs ? sum / pairs : 0.0;
}

namespace {

// Stream layout under a trial's generator.
constexpr std::uint64_t kAttackStream = 1;
constexpr std::uint64_t kSelectStream = 2;
constexpr std::uint64_t kPreciseStream = 3;

AttackMode mode_for_trial(const CampaignConfig& c, std::size_t trial, std::size_t data_size, std::size_t label,
                          std::size_t classes)
{
    if (!c.targeted) {
        return AttackMode::non_targeted();
    }
    if (c.target_class) {
        return AttackMode::toward(*c.target_class);
    }
    const std::size_t k = (trial / data_size) % (classes - 1);
    return AttackMode::toward(k < label ? k : k + 1);
}

TargetSet random_set(const Model& model, std::size_t n, Rng& rng)
{
    std::vector<std::size_t> offsets(model.feature_map_count() + 1, 0);
    for (std::size_t j = 0; j < model.feature_map_count(); ++j) {
        offsets[j + 1] = offsets[j] + model.feature_map_size(j);
    }
    const std::size_t total = offsets.back();
    TargetSet s;
    s.n_max = n;
    n = std::min(n, total * kWordBits);
    while (s.targets.size() < n) {
        const std::size_t e = rng.below(total);
        const auto j = static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), e) - offsets.begin()) - 1;
        CandidateTarget t{{static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(e - offsets[j])},
                          Granularity::Bit,
                          BitLoc(static_cast<unsigned>(rng.below(kWordBits)))};
        bool dup = false;
        for (const auto& u : s.targets) {
            dup = dup || u.target == t;
        }
        if (!dup) {
            s.targets.push_back({t, 0.0});
        }
    }
    return s;
}

std::vector<PlannedAttempt> random_fault_plan(const DeviceProfile& profile, const ExecutionSchedule& schedule,
                                              const FaultParams& base, std::size_t n, Rng& rng)
{
    std::vector<PlannedAttempt> plan;
    for (std::size_t i = 0; i < n; ++i) {
        FaultParams p = base;
        do {
            p.V_l = rng.uniform(profile.v_min, profile.v_max);
            p.F_h = rng.uniform(profile.f_min, profile.f_max);
        } while (stress(profile, p) <= 0.0);
        p.T_d = rng.uniform(profile.td_min, profile.td_max);
        p.T_W = rng.uniform(0.0, schedule.total);
        plan.push_back({{}, p.T_W, p.T_d, p});
    }
    std::stable_sort(plan.begin(), plan.end(),
                     [](const PlannedAttempt& a, const PlannedAttempt& b) { return a.T_W < b.T_W; });
    return plan;
}

using SetProvider = std::function<TargetSet(std::size_t trial, std::size_t input, const AttackMode& mode, Rng& select)>;

CampaignReport campaign_core(const Model& model, const Dataset& data, const CampaignConfig& config,
                             const DeviceProfile& profile, const FaultParams& params, const SetProvider& sets)
{
    if (config.trials == 0) {
        throw std::invalid_argument("campaign needs at least one trial");
    }
    if (data.empty()) {
        throw std::invalid_argument("campaign dataset is empty");
    }
    if (config.n == 0) {
        throw std::invalid_argument("campaign N must be at least 1");
    }
    const std::size_t C = model.class_count();
    if (config.targeted && config.target_class && *config.target_class >= C) {
        throw std::invalid_argument("target class outside the model's classes");
    }
    if (config.targeted && !config.target_class && C < 2) {
        throw std::invalid_argument("every-pair targeted mode needs at least two classes");
    }
    validate(params, profile);
    profile.validate();

    const ExecutionSchedule schedule = build_schedule(model, profile, params.F_G);
    const Rng root(config.seed);
    std::vector<TrialResult> results(config.trials);

    parallel_for(config.trials, config.jobs, [&](std::size_t i) {
        const std::size_t input = i % data.size();
        const Tensor& x = data.inputs[input];
        const std::size_t label = data.labels[input];
        const AttackMode mode = mode_for_trial(config, i, data.size(), label, C);
        const Rng trial_rng = root.split(i);
        Rng select = trial_rng.split(kSelectStream);
        Rng attack = trial_rng.split(kAttackStream);

        TrialResult r;
        if (config.source == TargetSource::RandomFault) {
            auto plan = random_fault_plan(profile, schedule, params, config.n, select);
            r = run_attack_trial(model, x, label, mode, plan, schedule, profile, params, attack, config.time_offset);
        } else {
            const TargetSet targets = sets(i, input, mode, select);
            if (config.delivery == Delivery::Precise) {
                Rng pick = trial_rng.split(kPreciseStream);
                r.true_label = label;
                r.mode = mode;
                r.baseline_class = forward(model, x, label).predicted_class;
                InjectionPlan flips;
                for (const auto& t : targets.targets) {
                    const auto g = t.target.granularity;
                    const unsigned k = g == Granularity::Bit ? 0 : static_cast<unsigned>(pick.below(bit_count(g)));
                    flips.toggle(t.target.addr, nth_bit(g, k, t.target.anchor));
                }
                r.flips_applied = flips.size();
                r.final_class = flips.empty() ? r.baseline_class : forward(model, x, label, flips).predicted_class;
            } else {
                const auto plan = plan_injections(schedule, targets, params);
                r = run_attack_trial(model, x, label, mode, plan, schedule, profile, params, attack,
                                     config.time_offset);
            }
        }
        r.input_id = input;
        results[i] = std::move(r);
    });

    CampaignReport rep = tally_trials(results, C);
    if (config.keep_records) {
        rep.records = std::move(results);
    }
    return rep;
}

} // namespace

CampaignReport tally_trials(const std::vector<TrialResult>& results, std::size_t C)
{
    CampaignReport rep;
    rep.classes = C;
    rep.trials = results.size();
    rep.confusion.assign(C * C, 0);
    rep.pair_eligible.assign(C * C, 0);
    rep.pair_success.assign(C * C, 0);
    for (const auto& r : results) {
        const bool base_ok = r.baseline_class == r.true_label;
        rep.baseline_correct += base_ok;
        switch (r.status) {
        case TrialStatus::Completed:
            ++rep.completed;
            rep.completed_correct += r.final_class == r.true_label;
            rep.effective_correct += r.final_class == r.true_label;
            if (r.final_class < C) {
                rep.confusion[r.true_label * C + r.final_class]++;
            } else {
                ++rep.no_class;
            }
            rep.flips += r.flips_applied;
            if (r.mode.targeted && base_ok && r.true_label != r.mode.target_class) {
                const std::size_t cell = r.true_label * C + r.mode.target_class;
                ++rep.targeted_eligible;
                ++rep.pair_eligible[cell];
                if (r.final_class == r.mode.target_class) {
                    ++rep.targeted_success;
                    ++rep.pair_success[cell];
                }
            }
            break;
        case TrialStatus::DeviceCrash:
            ++rep.crashed;
            rep.effective_correct += base_ok;
            break;
        case TrialStatus::DeviceNoResponse:
            ++rep.no_response;
            rep.effective_correct += base_ok;
            break;
        }
    }
    return rep;
}

TargetSet independent_targets(const Model& model, const Dataset& sample, const CampaignConfig& config,
                              std::optional<std::size_t> toward)
{
    DatasetObjective obj;
    if (toward) {
        obj.targeted = true;
        obj.target_class = *toward;
    }
    return input_independent_search(model, sample, obj, config.n, config.scheme, config.jobs);
}

CampaignReport run_campaign_with_sets(const Model& model, const Dataset& data, const CampaignConfig& config,
                                      const DeviceProfile& profile, const FaultParams& params,
                                      const std::vector<TargetSet>& sets)
{
    const bool per_class = config.targeted && !config.target_class;
    if (sets.size() != (per_class ? model.class_count() : 1)) {
        throw std::invalid_argument("need one target set per class in every-pair mode, otherwise one");
    }
    return campaign_core(model, data, config, profile, params,
                         [&](std::size_t, std::size_t, const AttackMode& mode, Rng&) {
                             return sets[per_class ? mode.target_class : 0];
                         });
}

CampaignReport run_campaign(const Model& model, const Dataset& data, const CampaignConfig& config,
                            const DeviceProfile& profile, const FaultParams& params,
                            const Dataset* independent_sample, TargetCache* cache)
{
    switch (config.source) {
    case TargetSource::Independent: {
        if (!independent_sample || independent_sample->empty()) {
            throw std::invalid_argument("independent search needs a non-empty sample");
        }
        std::vector<TargetSet> sets;
        if (config.targeted && !config.target_class) {
            for (std::size_t t = 0; t < model.class_count(); ++t) {
                sets.push_back(independent_targets(model, *independent_sample, config, t));
            }
        } else {
            sets.push_back(independent_targets(model, *independent_sample, config,
                                               config.targeted ? config.target_class : std::nullopt));
        }
        return run_campaign_with_sets(model, data, config, profile, params, sets);
    }
    case TargetSource::Dependent: {
        std::optional<TargetCache> local;
        if (!cache) {
            local.emplace(model, data, std::vector<Scheme>{config.scheme}, config.n, config.targeted);
            cache = &*local;
        }
        std::vector<std::size_t> inputs;
        for (std::size_t i = 0; i < std::min(config.trials, data.size()); ++i) {
            inputs.push_back(i);
        }
        cache->prepare(inputs, config.jobs);
        return campaign_core(model, data, config, profile, params,
                             [&](std::size_t, std::size_t input, const AttackMode& mode, Rng&) {
                                 const Objective obj = mode.targeted ? Objective::toward(mode.target_class)
                                                                     : Objective::untargeted(data.labels[input]);
                                 if (mode.targeted && mode.target_class == data.labels[input]) {
                                     return TargetSet{config.n, {}};
                                 }
                                 return cache->get(input, config.scheme, obj, config.n);
                             });
    }
    case TargetSource::RandomSet:
        return campaign_core(model, data, config, profile, params,
                             [&](std::size_t, std::size_t, const AttackMode&, Rng& select) {
                                 return random_set(model, config.n, select);
                             });
    case TargetSource::RandomFault:
        return campaign_core(model, data, config, profile, params,
                             [](std::size_t, std::size_t, const AttackMode&, Rng&) { return TargetSet{}; });
    }
    throw std::invalid_argument("unknown target source");
}

} // namespace lightning
