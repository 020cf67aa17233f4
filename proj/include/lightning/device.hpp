#pragma once

#include "lightning/engine.hpp"
#include "lightning/model.hpp"
#include "lightning/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lightning {

/// Fault injection parameters. Units: MHz, mV, ms. F_C and V_C are carried
/// for completeness and never influence an outcome.
struct FaultParams {
    double F_C = 3000.0;
    double V_C = 1100.0;
    double F_G = 1500.0;
    double V_G = 790.0;
    double F_h = 1500.0;
    double V_l = 790.0;
    double T_W = 0.0;
    double T_d = 1.0;
};

/// Parametric DVFS fault model. The safe boundary is V_min(F) = a + b*F;
/// stress is the deficit below it in units of sigma, and dose is stress * T_d.
/// Crash and no-response probabilities are logistic in dose; the fault count
/// is Poisson with mean fault_rate * dose.
struct DeviceProfile {
    std::string name = "default";
    std::vector<std::pair<double, double>> reference_pairs; // (MHz, mV)
    double boundary_intercept = 0.0; // a, mV
    double boundary_slope = 0.0;     // b, mV per MHz
    double stress_scale = 10.0;      // sigma, mV
    double crash_dose = 2.0;
    double crash_width = 0.25;
    double noresp_dose = 1.8;
    double noresp_width = 0.2;
    bool crashes = true;             // false: the device never crashes or hangs
    double fault_rate = 1.0;         // c, bits per unit stress per ms
    std::uint32_t max_bits_per_glitch = 0; // 0: unlimited
    double ms_per_mac = 0.05;
    double reference_mhz = 1500.0;
    double jitter_ms = 0.5;
    // legal operating ranges for random and evolved parameters
    double v_min = 550.0, v_max = 790.0;
    double f_min = 1500.0, f_max = 1970.0;
    double td_min = 1.0, td_max = 3.0;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument when an invariant fails.
    void validate() const;

    /// Calibrated stand-in: the best single-bit cell of the default grid is
    /// (710 mV, 1500 + 235 MHz) at T_d = 2 ms.
    static DeviceProfile default_profile();
    /// Every glitch lands exactly one bit in the targeted element: no jitter,
    /// no crashes, saturated fault rate capped at one bit.
    static DeviceProfile ideal_profile();
};

/// Throws std::invalid_argument for nonpositive fields or an unsafe baseline.
void validate(const FaultParams& p, const DeviceProfile& profile);

double safe_boundary_voltage(const DeviceProfile& profile, double mhz);
double stress(const DeviceProfile& profile, const FaultParams& p);
double stress(const DeviceProfile& profile, double v_l, double f_h);

enum class GlitchKind : std::uint8_t { NoEffect, Faults, Crash, NoResponse };

std::string_view to_string(GlitchKind k);

struct GlitchOutcome {
    GlitchKind kind = GlitchKind::NoEffect;
    std::vector<Injection> positions; // Faults only; distinct, in draw order

    std::size_t count() const { return positions.size(); }
};

struct ExecutionSchedule {
    std::vector<ElementAddr> elements; // enumerate_elements order
    std::vector<double> start;         // ms
    std::vector<double> end;
    double total = 0.0;
    double mhz = 0.0;

    std::size_t position_of(ElementAddr addr) const;
    /// Indices of elements whose window, shifted by `shift`, meets [lo, hi).
    std::pair<std::size_t, std::size_t> overlapping(double lo, double hi, double shift = 0.0) const;
};

ExecutionSchedule build_schedule(const Model& model, const DeviceProfile& profile, double mhz);

/// Outcome probabilities of one glitch, without positions.
struct OutcomeRates {
    double no_effect = 0.0;
    double faults = 0.0;
    double crash = 0.0;
    double noresp = 0.0;
    double single_bit = 0.0;
    double mean_bits = 0.0;
};

OutcomeRates expected_rates(const DeviceProfile& profile, double v_l, double f_h, double t_d);

/// Kind and fault count only. Consumes exactly three uniforms.
std::pair<GlitchKind, std::uint64_t> sample_glitch_count(const DeviceProfile& profile, double stress_value,
                                                         double t_d, Rng& rng);

/// One glitch against a running inference. The window is [T_W, T_W + T_d)
/// and the schedule is shifted by `shift` (the trial's jitter draw).
GlitchOutcome sample_glitch_outcome(const DeviceProfile& profile, const FaultParams& params,
                                    const ExecutionSchedule& schedule, Rng& rng, double shift = 0.0);

struct CalibrationCell {
    double v_l = 0.0;
    double f_h = 0.0;
    double stress = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t no_effect = 0, faults = 0, crash = 0, noresp = 0, single_bit = 0;
    std::uint64_t bits = 0;

    double rate(std::uint64_t n) const { return trials ? static_cast<double>(n) / trials : 0.0; }
    double mean_bits() const { return rate(bits); }
};

/// Empirical outcome rates per (V_l, F_h) cell. Trial k of every cell uses
/// the same random stream, so cells at equal stress give equal tallies.
std::vector<CalibrationCell> calibrate_sweep(const DeviceProfile& profile, const std::vector<double>& v_grid,
                                             const std::vector<double>& f_grid, double t_d, std::uint64_t trials,
                                             std::uint64_t seed, unsigned jobs = 1);

/// Corridor comparison on a sweep: undervolt-only cells (F_h == F_G),
/// overclock-only cells (V_l == V_G) and combined cells (both moved).
struct CorridorSummary {
    std::string name;
    std::size_t faulting_cells = 0;    // cells with any fault, crash or hang
    double best_single_bit = 0.0;      // highest single-bit rate in the corridor
    double failure_at_best = 1.0;      // crash + no-response rate at that cell
    double mean_failure = 1.0;         // crash + no-response averaged over faulting cells
};

std::vector<CorridorSummary> summarize_corridors(const std::vector<CalibrationCell>& cells, double f_g, double v_g);

std::vector<double> grid_range(double lo, double hi, double step);

} // namespace lightning
