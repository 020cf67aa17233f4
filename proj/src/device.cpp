#include "lightning/device.hpp"

#include "lightning/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lightning {

namespace {

double logistic(double x)
{
    return 1.0 / (1.0 + std::exp(-x));
}

void require(bool ok, const std::string& what)
{
    if (!ok) {
        throw std::invalid_argument(what);
    }
}

} // namespace

void DeviceProfile::validate() const
{
    require(boundary_slope >= 0.0, "profile: boundary slope must be non-negative");
    require(stress_scale > 0.0, "profile: stress scale must be positive");
    require(fault_rate > 0.0, "profile: fault rate must be positive");
    require(ms_per_mac > 0.0 && reference_mhz > 0.0, "profile: timing constants must be positive");
    require(jitter_ms >= 0.0, "profile: jitter must be non-negative");
    require(v_min > 0.0 && v_min <= v_max && f_min > 0.0 && f_min <= f_max && td_min > 0.0 &&
                td_min <= td_max,
            "profile: bad legal ranges");
    if (crashes) {
        require(crash_width > 0.0 && noresp_width > 0.0, "profile: logistic widths must be positive");
        require(noresp_dose > 0.0 && noresp_dose < crash_dose,
                "profile: need 0 < no-response dose < crash dose");
    }
    for (const auto& [f, v] : reference_pairs) {
        require(f > 0.0 && v > 0.0, "profile: reference pairs must be positive");
        require(safe_boundary_voltage(*this, f) <= v,
                "profile: reference pair (" + std::to_string(f) + " MHz, " + std::to_string(v) +
                    " mV) lies below the safe boundary");
    }
}

DeviceProfile DeviceProfile::default_profile()
{
    DeviceProfile p;
    p.name = "default";
    p.reference_pairs = {{1200, 600}, {1350, 700}, {1500, 790}, {1650, 850}, {1800, 920}};
    // 47 MHz of overclock costs exactly 30 mV of margin, so a 20 mV x 47 MHz
    // grid lands on stress levels 0.5, 1.5, 2.5, ...; only 0.5 faults
    // without mostly crashing. The boundary passes 5 mV above 710 mV at 1735 MHz.
    p.boundary_slope = 30.0 / 47.0;
    p.boundary_intercept = 715.0 - p.boundary_slope * 1735.0;
    p.stress_scale = 10.0;
    p.crash_dose = 2.0;
    p.crash_width = 0.25;
    p.noresp_dose = 1.8;
    p.noresp_width = 0.2;
    p.fault_rate = 1.0;
    p.ms_per_mac = 0.05;
    p.reference_mhz = 1500.0;
    p.jitter_ms = 0.5;
    return p;
}

DeviceProfile DeviceProfile::ideal_profile()
{
    DeviceProfile p = default_profile();
    p.name = "ideal";
    p.crashes = false;
    p.fault_rate = 1000.0;
    p.max_bits_per_glitch = 1;
    p.jitter_ms = 0.0;
    return p;
}

void validate(const FaultParams& p, const DeviceProfile& profile)
{
    for (double v : {p.F_C, p.V_C, p.F_G, p.V_G, p.F_h, p.V_l, p.T_d}) {
        require(v > 0.0 && std::isfinite(v), "fault parameters must be positive");
    }
    require(p.T_W >= 0.0 && std::isfinite(p.T_W), "wait time T_W must be non-negative");
    require(p.V_G >= safe_boundary_voltage(profile, p.F_G),
            "baseline V_G " + std::to_string(p.V_G) + " mV cannot sustain F_G " + std::to_string(p.F_G) + " MHz");
}

double safe_boundary_voltage(const DeviceProfile& profile, double mhz)
{
    return profile.boundary_intercept + profile.boundary_slope * mhz;
}

double stress(const DeviceProfile& profile, double v_l, double f_h)
{
    return std::max(0.0, (safe_boundary_voltage(profile, f_h) - v_l) / profile.stress_scale);
}

double stress(const DeviceProfile& profile, const FaultParams& p)
{
    return stress(profile, p.V_l, p.F_h);
}

std::string_view to_string(GlitchKind k)
{
    switch (k) {
    case GlitchKind::NoEffect: return "no_effect";
    case GlitchKind::Faults: return "faults";
    case GlitchKind::Crash: return "crash";
    case GlitchKind::NoResponse: return "no_response";
    }
    return "?";
}

std::size_t ExecutionSchedule::position_of(ElementAddr addr) const
{
    auto it = std::lower_bound(elements.begin(), elements.end(), addr);
    if (it == elements.end() || *it != addr) {
        throw std::out_of_range("element (" + std::to_string(addr.layer) + ", " + std::to_string(addr.index) +
                                ") is not in the schedule");
    }
    return static_cast<std::size_t>(it - elements.begin());
}

std::pair<std::size_t, std::size_t> ExecutionSchedule::overlapping(double lo, double hi, double shift) const
{
    const std::size_t n = elements.size();
    std::size_t first = 0, len = n;
    while (len > 0) { // first i with end[i] + shift > lo
        const std::size_t half = len / 2;
        if (end[first + half] + shift <= lo) {
            first += half + 1;
            len -= half + 1;
        } else {
            len = half;
        }
    }
    std::size_t last = first;
    len = n - first;
    while (len > 0) { // first i with start[i] + shift >= hi
        const std::size_t half = len / 2;
        if (start[last + half] + shift < hi) {
            last += half + 1;
            len -= half + 1;
        } else {
            len = half;
        }
    }
    return {first, last};
}

ExecutionSchedule build_schedule(const Model& model, const DeviceProfile& profile, double mhz)
{
    if (!(mhz > 0.0)) {
        throw std::invalid_argument("schedule frequency must be positive");
    }
    ExecutionSchedule s;
    s.mhz = mhz;
    s.elements = enumerate_elements(model);
    s.start.reserve(s.elements.size());
    s.end.reserve(s.elements.size());
    const double scale = profile.reference_mhz / mhz;
    double t = 0.0;
    for (const auto& e : s.elements) {
        const auto& layer = model.layers()[model.feature_layers()[e.layer]];
        const double cost = static_cast<double>(layer.ops_per_element()) * profile.ms_per_mac * scale;
        s.start.push_back(t);
        t += cost;
        s.end.push_back(t);
    }
    s.total = t;
    return s;
}

OutcomeRates expected_rates(const DeviceProfile& profile, double v_l, double f_h, double t_d)
{
    OutcomeRates r;
    const double s = stress(profile, v_l, f_h);
    if (s <= 0.0) {
        r.no_effect = 1.0;
        return r;
    }
    const double dose = s * t_d;
    const double pc = profile.crashes ? logistic((dose - profile.crash_dose) / profile.crash_width) : 0.0;
    const double pn = profile.crashes ? logistic((dose - profile.noresp_dose) / profile.noresp_width) : 0.0;
    r.crash = pc;
    r.noresp = (1.0 - pc) * pn;
    const double survive = (1.0 - pc) * (1.0 - pn);
    const double lambda = profile.fault_rate * dose;
    const double p0 = std::exp(-lambda);
    r.faults = survive * (1.0 - p0);
    r.no_effect = survive * p0;
    const std::uint64_t cap = profile.max_bits_per_glitch;
    r.single_bit = survive * (cap == 1 ? 1.0 - p0 : lambda * p0);
    if (cap == 0) {
        r.mean_bits = survive * lambda;
    } else {
        // E[min(N, cap)] = sum_{k<cap} P(N > k)
        double pk = p0, cdf = p0, e = 0.0;
        for (std::uint64_t k = 0; k < cap; ++k) {
            e += 1.0 - cdf;
            pk *= lambda / static_cast<double>(k + 1);
            cdf += pk;
        }
        r.mean_bits = survive * e;
    }
    return r;
}

std::pair<GlitchKind, std::uint64_t> sample_glitch_count(const DeviceProfile& profile, double stress_value,
                                                         double t_d, Rng& rng)
{
    const double u_crash = rng.uniform();
    const double u_noresp = rng.uniform();
    const double u_count = rng.uniform();
    if (stress_value <= 0.0) {
        return {GlitchKind::NoEffect, 0};
    }
    const double dose = stress_value * t_d;
    if (profile.crashes) {
        if (u_crash < logistic((dose - profile.crash_dose) / profile.crash_width)) {
            return {GlitchKind::Crash, 0};
        }
        if (u_noresp < logistic((dose - profile.noresp_dose) / profile.noresp_width)) {
            return {GlitchKind::NoResponse, 0};
        }
    }
    std::uint64_t n = poisson_quantile(profile.fault_rate * dose, u_count);
    if (profile.max_bits_per_glitch) {
        n = std::min<std::uint64_t>(n, profile.max_bits_per_glitch);
    }
    return {n ? GlitchKind::Faults : GlitchKind::NoEffect, n};
}

GlitchOutcome sample_glitch_outcome(const DeviceProfile& profile, const FaultParams& params,
                                    const ExecutionSchedule& schedule, Rng& rng, double shift)
{
    auto [kind, n] = sample_glitch_count(profile, stress(profile, params), params.T_d, rng);
    GlitchOutcome out;
    out.kind = kind;
    if (kind != GlitchKind::Faults) {
        return out;
    }
    const auto [first, last] = schedule.overlapping(params.T_W, params.T_W + params.T_d, shift);
    if (first >= last) {
        out.kind = GlitchKind::NoEffect;
        return out;
    }
    const std::uint64_t m = last - first;
    n = std::min<std::uint64_t>(n, m * kWordBits);
    while (out.positions.size() < n) {
        const Injection f{schedule.elements[first + rng.below(m)], BitLoc(static_cast<unsigned>(rng.below(kWordBits)))};
        if (std::find(out.positions.begin(), out.positions.end(), f) == out.positions.end()) {
            out.positions.push_back(f);
        }
    }
    return out;
}

std::vector<CalibrationCell> calibrate_sweep(const DeviceProfile& profile, const std::vector<double>& v_grid,
                                             const std::vector<double>& f_grid, double t_d, std::uint64_t trials,
                                             std::uint64_t seed, unsigned jobs)
{
    if (v_grid.empty() || f_grid.empty()) {
        throw std::invalid_argument("calibration grid is empty");
    }
    if (trials == 0) {
        throw std::invalid_argument("calibration needs at least one trial per cell");
    }
    if (!(t_d > 0.0)) {
        throw std::invalid_argument("glitch duration must be positive");
    }
    std::vector<CalibrationCell> cells(v_grid.size() * f_grid.size());
    const Rng root(seed);
    parallel_for(cells.size(), jobs, [&](std::size_t i) {
        CalibrationCell& c = cells[i];
        c.v_l = v_grid[i / f_grid.size()];
        c.f_h = f_grid[i % f_grid.size()];
        c.stress = stress(profile, c.v_l, c.f_h);
        c.trials = trials;
        for (std::uint64_t k = 0; k < trials; ++k) {
            Rng rng = root.split(k);
            const auto [kind, n] = sample_glitch_count(profile, c.stress, t_d, rng);
            switch (kind) {
            case GlitchKind::NoEffect: ++c.no_effect; break;
            case GlitchKind::Faults:
                ++c.faults;
                c.single_bit += n == 1;
                c.bits += n;
                break;
            case GlitchKind::Crash: ++c.crash; break;
            case GlitchKind::NoResponse: ++c.noresp; break;
            }
        }
    });
    return cells;
}

std::vector<CorridorSummary> summarize_corridors(const std::vector<CalibrationCell>& cells, double f_g, double v_g)
{
    std::vector<CorridorSummary> out(3);
    out[0].name = "undervolt_only";
    out[1].name = "overclock_only";
    out[2].name = "combined";
    std::vector<double> failure_sum(3, 0.0);
    std::vector<bool> have_best(3, false);
    for (const auto& c : cells) {
        int k = -1;
        if (c.f_h == f_g && c.v_l < v_g) {
            k = 0;
        } else if (c.v_l == v_g && c.f_h > f_g) {
            k = 1;
        } else if (c.v_l < v_g && c.f_h > f_g) {
            k = 2;
        }
        if (k < 0 || c.no_effect == c.trials) {
            continue;
        }
        auto& s = out[k];
        const double failure = c.rate(c.crash + c.noresp);
        ++s.faulting_cells;
        failure_sum[k] += failure;
        const double single = c.rate(c.single_bit);
        if (!have_best[k] || single > s.best_single_bit) {
            have_best[k] = true;
            s.best_single_bit = single;
            s.failure_at_best = failure;
        }
    }
    for (int k = 0; k < 3; ++k) {
        if (out[k].faulting_cells) {
            out[k].mean_failure = failure_sum[k] / static_cast<double>(out[k].faulting_cells);
        }
    }
    return out;
}

std::vector<double> grid_range(double lo, double hi, double step)
{
    if (!(step > 0.0) || hi < lo) {
        throw std::invalid_argument("grid range needs lo <= hi and a positive step");
    }
    std::vector<double> v;
    for (std::size_t k = 0;; ++k) {
        const double x = lo + static_cast<double>(k) * step;
        if (x > hi + 1e-9 * step) {
            break;
        }
        v.push_back(x);
    }
    return v;
}

} // namespace lightning
