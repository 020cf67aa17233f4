#include "lightning/genetic.hpp"

#include "lightning/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lightning {

Seed make_seed(double f_h, double v_l, double t_w, double t_d)
{
    return Seed{{f_h, v_l, t_w, t_d}};
}

SeedRanges SeedRanges::from_profile(const DeviceProfile& profile, double t_w_max)
{
    SeedRanges r;
    r.lo = {profile.f_min, profile.v_min, 0.0, profile.td_min};
    r.hi = {profile.f_max, profile.v_max, t_w_max, profile.td_max};
    return r;
}

Seed clamp(Seed s, const SeedRanges& r)
{
    for (std::size_t g = 0; g < 4; ++g) {
        s.genes[g] = std::clamp(s.genes[g], r.lo[g], r.hi[g]);
    }
    return s;
}

std::pair<Seed, Seed> crossover_range(const Seed& a, const Seed& b, std::size_t lo, std::size_t hi,
                                      const SeedRanges& r)
{
    if (lo > hi || hi > 4) {
        throw std::invalid_argument("crossover range must satisfy lo <= hi <= 4");
    }
    Seed x = a, y = b;
    for (std::size_t g = lo; g < hi; ++g) {
        std::swap(x.genes[g], y.genes[g]);
    }
    return {clamp(x, r), clamp(y, r)};
}

std::pair<Seed, Seed> crossover(const Seed& a, const Seed& b, Rng& rng, const SeedRanges& r)
{
    const std::size_t lo = rng.below(5);
    const std::size_t hi = lo + rng.below(5 - lo);
    return crossover_range(a, b, lo, hi, r);
}

Seed step_gene(const Seed& s, std::size_t gene, bool up, const SeedRanges& r)
{
    Seed out = s;
    out.genes.at(gene) += up ? r.step[gene] : -r.step[gene];
    return clamp(out, r);
}

Seed mutate(const Seed& s, Rng& rng, const SeedRanges& r, double p)
{
    Seed out = s;
    for (std::size_t g = 0; g < 4; ++g) {
        if (rng.bernoulli(p)) {
            out = step_gene(out, g, rng.bernoulli(0.5), r);
        }
    }
    return out;
}

FaultParams seed_params(const Seed& s, const FaultParams& base)
{
    FaultParams p = base;
    p.F_h = s.F_h();
    p.V_l = s.V_l();
    p.T_d = s.T_d();
    p.T_W = 0.0;
    return p;
}

double planned_first_wait(const FitnessContext& ctx, double t_d)
{
    FaultParams p = ctx.base;
    p.T_d = t_d;
    const auto schedule = build_schedule(*ctx.model, ctx.profile, p.F_G);
    const auto plan = plan_injections(schedule, ctx.targets, p);
    return plan.empty() ? 0.0 : plan.front().T_W;
}

double fitness(const Seed& s, const FitnessContext& ctx)
{
    if (!ctx.model || !ctx.data) {
        throw std::invalid_argument("fitness context needs a model and data");
    }
    if (ctx.trials == 0) {
        throw std::invalid_argument("fitness needs at least one trial");
    }
    CampaignConfig config;
    config.source = TargetSource::Independent;
    config.n = std::max<std::size_t>(1, ctx.targets.targets.size());
    config.trials = ctx.trials;
    config.seed = ctx.eval_seed;
    config.keep_records = false;
    config.time_offset = s.T_W() - planned_first_wait(ctx, s.T_d());
    const auto rep = run_campaign_with_sets(*ctx.model, *ctx.data, config, ctx.profile, seed_params(s, ctx.base),
                                            {ctx.targets});
    return rep.effective_degradation();
}

std::vector<Seed> initial_population(const Seed& rough, std::size_t size, const SeedRanges& r, Rng& rng,
                                     const std::array<double, 4>& spread_steps)
{
    if (size == 0) {
        throw std::invalid_argument("population size must be positive");
    }
    std::vector<Seed> pop{clamp(rough, r)};
    while (pop.size() < size) {
        Seed s = rough;
        for (std::size_t g = 0; g < 4; ++g) {
            const auto k = static_cast<std::int64_t>(spread_steps[g]);
            const auto d = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(2 * k + 1))) - k;
            s.genes[g] += static_cast<double>(d) * r.step[g];
        }
        pop.push_back(clamp(s, r));
    }
    return pop;
}

namespace {

// Stand-in when every contender is exhausted: a one-step neighbour of the
// tournament winner, so the search keeps probing around good seeds.
Seed neighbour(const Seed& s, Rng& rng, const SeedRanges& r)
{
    const std::size_t gene = rng.below(4);
    return step_gene(s, gene, rng.bernoulli(0.5), r);
}

} // namespace

GaResult refine_parameters(const std::vector<Seed>& initial, const FitnessFn& fitness_fn, const GaConfig& config,
                           const SeedRanges& ranges)
{
    if (initial.empty()) {
        throw std::invalid_argument("initial population is empty");
    }
    if (config.generations == 0) {
        throw std::invalid_argument("generation budget must be at least 1");
    }
    const std::size_t size = config.population ? config.population : initial.size();
    std::vector<Seed> pop;
    for (std::size_t i = 0; i < size; ++i) {
        pop.push_back(clamp(initial[i % initial.size()], ranges));
    }

    std::map<Seed, double> cache;
    std::map<Seed, std::size_t> selected;
    GaResult result;
    bool have_best = false;
    const Rng root(config.seed);

    for (std::size_t gen = 0; gen < config.generations; ++gen) {
        std::vector<Seed> todo;
        for (const auto& s : pop) {
            if (!cache.count(s) && std::find(todo.begin(), todo.end(), s) == todo.end()) {
                todo.push_back(s);
            }
        }
        std::vector<double> scores(todo.size());
        parallel_for(todo.size(), config.jobs, [&](std::size_t i) { scores[i] = fitness_fn(todo[i]); });
        for (std::size_t i = 0; i < todo.size(); ++i) {
            cache.emplace(todo[i], scores[i]);
        }
        result.evaluations += todo.size();

        std::vector<double> fit(pop.size());
        std::size_t elite = 0;
        double sum = 0.0;
        for (std::size_t i = 0; i < pop.size(); ++i) {
            fit[i] = cache.at(pop[i]);
            sum += fit[i];
            if (fit[i] > fit[elite]) {
                elite = i;
            }
        }
        if (!have_best || fit[elite] > result.best_fitness) {
            result.best = pop[elite];
            result.best_fitness = fit[elite];
            have_best = true;
        }
        result.trace.push_back({gen, result.best_fitness, fit[elite], sum / static_cast<double>(pop.size()),
                                result.best});
        if (config.target_fitness && result.best_fitness >= *config.target_fitness) {
            break;
        }
        if (gen + 1 == config.generations) {
            break;
        }

        Rng rng = root.split(gen);
        auto select = [&]() -> Seed {
            std::size_t first_winner = 0;
            for (int attempt = 0; attempt < 8; ++attempt) {
                const std::size_t i = rng.below(pop.size());
                const std::size_t j = rng.below(pop.size());
                const bool i_wins = fit[i] > fit[j] || (fit[i] == fit[j] && i <= j);
                const std::size_t win = i_wins ? i : j;
                const std::size_t lose = i_wins ? j : i;
                if (attempt == 0) {
                    first_winner = win;
                }
                for (std::size_t pick : {win, lose}) {
                    auto& count = selected[pop[pick]];
                    if (count <= config.max_selections) {
                        result.max_selection_count = std::max(result.max_selection_count, count);
                        ++count;
                        return pop[pick];
                    }
                }
            }
            return neighbour(pop[first_winner], rng, ranges);
        };

        std::vector<Seed> next{pop[elite]};
        while (next.size() < size) {
            const Seed a = select();
            const Seed b = select();
            auto [x, y] = crossover(a, b, rng, ranges);
            next.push_back(mutate(x, rng, ranges, config.mutation));
            if (next.size() < size) {
                next.push_back(mutate(y, rng, ranges, config.mutation));
            }
        }
        pop = std::move(next);
    }
    return result;
}

std::pair<Seed, double> grid_search(const std::array<std::vector<double>, 4>& axes, const FitnessFn& fitness_fn,
                                    unsigned jobs)
{
    std::vector<Seed> cells;
    for (double a : axes[0]) {
        for (double b : axes[1]) {
            for (double c : axes[2]) {
                for (double d : axes[3]) {
                    cells.push_back(make_seed(a, b, c, d));
                }
            }
        }
    }
    if (cells.empty()) {
        throw std::invalid_argument("grid search needs a value on every axis");
    }
    std::vector<double> scores(cells.size());
    parallel_for(cells.size(), jobs, [&](std::size_t i) { scores[i] = fitness_fn(cells[i]); });
    const auto best = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
    return {cells[best], scores[best]};
}

} // namespace lightning
