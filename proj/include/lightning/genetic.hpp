#pragma once

#include "lightning/device.hpp"
#include "lightning/executor.hpp"
#include "lightning/rng.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace lightning {

/// Genes in order (F_h MHz, V_l mV, T_W ms, T_d ms).
struct Seed {
    std::array<double, 4> genes{};

    double F_h() const { return genes[0]; }
    double V_l() const { return genes[1]; }
    double T_W() const { return genes[2]; }
    double T_d() const { return genes[3]; }
    auto operator<=>(const Seed&) const = default;
};

Seed make_seed(double f_h, double v_l, double t_w, double t_d);

/// Legal range and mutation step per gene. Steps default to 1 MHz, 10 mV,
/// 1 ms and 1 ms.
struct SeedRanges {
    std::array<double, 4> lo{1500.0, 550.0, 0.0, 1.0};
    std::array<double, 4> hi{1970.0, 790.0, 1000.0, 3.0};
    std::array<double, 4> step{1.0, 10.0, 1.0, 1.0};

    static SeedRanges from_profile(const DeviceProfile& profile, double t_w_max);
};

Seed clamp(Seed s, const SeedRanges& r);

/// Swaps genes [lo, hi) between a and b; lo <= hi <= 4.
std::pair<Seed, Seed> crossover_range(const Seed& a, const Seed& b, std::size_t lo, std::size_t hi,
                                      const SeedRanges& r);
/// Random contiguous range, possibly empty or full.
std::pair<Seed, Seed> crossover(const Seed& a, const Seed& b, Rng& rng, const SeedRanges& r);
/// Each gene moves one step up or down with probability `p`.
Seed mutate(const Seed& s, Rng& rng, const SeedRanges& r, double p = 0.005);
/// One step of gene `gene`, clamped.
Seed step_gene(const Seed& s, std::size_t gene, bool up, const SeedRanges& r);

/// What a seed is scored against: a fixed target set attacked on a fixed
/// input sample. The same evaluation seed is used for every call, so equal
/// seeds score equally.
struct FitnessContext {
    const Model* model = nullptr;
    const Dataset* data = nullptr;
    TargetSet targets;
    DeviceProfile profile;
    FaultParams base; // F_G, V_G and the CPU knobs
    std::size_t trials = 50;
    std::uint64_t eval_seed = 0;
};

/// Glitch parameters a seed stands for; T_W of the seed is the wait before
/// the first planned glitch.
FaultParams seed_params(const Seed& s, const FaultParams& base);

/// Percentage points of accuracy lost, with crashed and hung trials counted
/// at their clean prediction (a rerun), so crashing parameters gain nothing.
double fitness(const Seed& s, const FitnessContext& ctx);

/// Planned wait before the first glitch for a given T_d.
double planned_first_wait(const FitnessContext& ctx, double t_d);

std::vector<Seed> initial_population(const Seed& rough, std::size_t size, const SeedRanges& r, Rng& rng,
                                     const std::array<double, 4>& spread_steps = {40, 3, 2, 1});

struct GaConfig {
    std::size_t population = 32;
    std::size_t generations = 200;
    double mutation = 0.005;
    std::size_t max_selections = 20;
    std::optional<double> target_fitness; // stop once reached
    std::uint64_t seed = 0;
    unsigned jobs = 1;
};

struct GenerationStats {
    std::size_t generation = 0;
    double best = 0.0;        // best so far
    double generation_best = 0.0;
    double mean = 0.0;
    Seed best_seed;
};

struct GaResult {
    Seed best;
    double best_fitness = 0.0;
    std::vector<GenerationStats> trace;
    std::size_t evaluations = 0;
    std::size_t max_selection_count = 0; // largest count seen at any selection decision
};

using FitnessFn = std::function<double(const Seed&)>;

GaResult refine_parameters(const std::vector<Seed>& initial, const FitnessFn& fitness_fn, const GaConfig& config,
                           const SeedRanges& ranges);

/// Exhaustive search over the product of the four axes.
std::pair<Seed, double> grid_search(const std::array<std::vector<double>, 4>& axes, const FitnessFn& fitness_fn,
                                    unsigned jobs = 1);

} // namespace lightning
