#include "helpers.hpp"

#include "lightning/device.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace lightning;
using testutil::random_tensor;

namespace {

FaultParams at(double v_l, double f_h, double t_d, double t_w = 0.0)
{
    FaultParams p;
    p.V_l = v_l;
    p.F_h = f_h;
    p.T_d = t_d;
    p.T_W = t_w;
    return p;
}

ExecutionSchedule one_element_schedule()
{
    ExecutionSchedule s;
    s.elements = {{0, 0}};
    s.start = {0.0};
    s.end = {1e9};
    s.total = 1e9;
    s.mhz = 1500;
    return s;
}

} // namespace

TEST(Device, DefaultAndIdealProfilesValidate)
{
    EXPECT_NO_THROW(DeviceProfile::default_profile().validate());
    EXPECT_NO_THROW(DeviceProfile::ideal_profile().validate());
    DeviceProfile bad = DeviceProfile::default_profile();
    bad.noresp_dose = 3.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = DeviceProfile::default_profile();
    bad.reference_pairs.push_back({1800, 700});
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Device, BoundaryShape)
{
    DeviceProfile flat = DeviceProfile::default_profile();
    flat.boundary_slope = 0.0;
    flat.boundary_intercept = 640.0;
    EXPECT_EQ(safe_boundary_voltage(flat, 100), 640.0);
    EXPECT_EQ(safe_boundary_voltage(flat, 2500), 640.0);
    const auto p = DeviceProfile::default_profile();
    for (auto [f, v] : p.reference_pairs) {
        EXPECT_LE(safe_boundary_voltage(p, f), v);
    }
    for (double f = 1000; f < 2000; f += 10) {
        EXPECT_LE(safe_boundary_voltage(p, f), safe_boundary_voltage(p, f + 10));
    }
    EXPECT_NEAR(safe_boundary_voltage(p, 1735), 715.0, 1e-9);
}

TEST(Device, StressValues)
{
    const auto p = DeviceProfile::default_profile();
    const double b = safe_boundary_voltage(p, 1600);
    EXPECT_EQ(stress(p, at(b, 1600, 1)), 0.0);
    EXPECT_EQ(stress(p, at(b + 40, 1600, 1)), 0.0);
    EXPECT_NEAR(stress(p, at(b - p.stress_scale, 1600, 1)), 1.0, 1e-12);
    EXPECT_NEAR(stress(p, 710, 1735), 0.5, 1e-9);
}

TEST(Device, FaultParamValidation)
{
    const auto p = DeviceProfile::default_profile();
    EXPECT_NO_THROW(validate(at(710, 1735, 2), p));
    FaultParams bad = at(710, 1735, 2);
    bad.V_G = 500;
    EXPECT_THROW(validate(bad, p), std::invalid_argument);
    bad = at(710, 1735, 0);
    EXPECT_THROW(validate(bad, p), std::invalid_argument);
}

TEST(Device, SafeCellsNeverFault)
{
    const auto p = DeviceProfile::default_profile();
    const auto s = one_element_schedule();
    Rng rng(1);
    for (int i = 0; i < 10000; ++i) {
        EXPECT_EQ(sample_glitch_outcome(p, at(790, 1500, 3), s, rng).kind, GlitchKind::NoEffect);
    }
}

TEST(Device, PoissonMeanMatchesAnalytic)
{
    DeviceProfile p = DeviceProfile::default_profile();
    p.crashes = false;
    const auto s = one_element_schedule();
    for (double t_d : {1.0, 2.0, 4.0}) {
        Rng rng(static_cast<std::uint64_t>(t_d * 10));
        const auto params = at(690, 1735, t_d); // stress 2.5
        const double mean = p.fault_rate * stress(p, params) * t_d;
        double sum = 0;
        const int n = 10000;
        for (int i = 0; i < n; ++i) {
            sum += static_cast<double>(sample_glitch_outcome(p, params, s, rng).count());
        }
        EXPECT_NEAR(sum / n, mean, 3 * std::sqrt(mean / n)) << t_d;
    }
}

TEST(Device, MeanBitsGrowWithDurationAndStress)
{
    DeviceProfile p = DeviceProfile::default_profile();
    p.crashes = false;
    auto mean_bits = [&](double v, double t_d) {
        auto cells = calibrate_sweep(p, {v}, {1735}, t_d, 10000, 3);
        return cells[0].mean_bits();
    };
    EXPECT_LT(mean_bits(710, 1), mean_bits(710, 2));
    EXPECT_LT(mean_bits(710, 2), mean_bits(710, 3));
    EXPECT_LT(mean_bits(710, 2), mean_bits(700, 2));
}

TEST(Device, CpuKnobsAreInert)
{
    const auto p = DeviceProfile::default_profile();
    const auto s = build_schedule(testutil::tiny_cnn(1), p, 1500);
    FaultParams a = at(700, 1735, 2, 1.0), b = a;
    b.F_C = 1200;
    b.V_C = 800;
    Rng ra(4), rb(4);
    for (int i = 0; i < 2000; ++i) {
        auto oa = sample_glitch_outcome(p, a, s, ra, 0.1);
        auto ob = sample_glitch_outcome(p, b, s, rb, 0.1);
        ASSERT_EQ(oa.kind, ob.kind);
        ASSERT_EQ(oa.positions, ob.positions);
    }
}

TEST(Device, PositionsStayInsideGlitchWindow)
{
    DeviceProfile p = DeviceProfile::default_profile();
    p.crashes = false;
    const Model m = testutil::tiny_cnn(2);
    const auto s = build_schedule(m, p, 1500);
    Rng rng(5);
    const auto params = at(680, 1735, 3.0, 10.0);
    for (int i = 0; i < 500; ++i) {
        const double shift = rng.uniform(-0.5, 0.5);
        auto o = sample_glitch_outcome(p, params, s, rng, shift);
        for (std::size_t a = 0; a < o.positions.size(); ++a) {
            const auto k = s.position_of(o.positions[a].addr);
            EXPECT_LT(s.start[k] + shift, params.T_W + params.T_d);
            EXPECT_GT(s.end[k] + shift, params.T_W);
            for (std::size_t b = 0; b < a; ++b) {
                EXPECT_NE(o.positions[a], o.positions[b]);
            }
        }
    }
    // a glitch after the inference ends touches nothing
    Rng late(6);
    for (int i = 0; i < 200; ++i) {
        EXPECT_EQ(sample_glitch_outcome(p, at(680, 1735, 3.0, s.total + 1), s, late).kind, GlitchKind::NoEffect);
    }
}

TEST(Device, ScheduleTilesAndScales)
{
    const auto p = DeviceProfile::default_profile();
    Rng rng(1);
    Model d({dense(4, 10, random_tensor({10, 4}, rng), random_tensor({10}, rng))});
    const auto s = build_schedule(d, p, 3000);
    ASSERT_EQ(s.elements.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
        EXPECT_DOUBLE_EQ(s.end[i] - s.start[i], 4 * p.ms_per_mac * 0.5);
        if (i) {
            EXPECT_EQ(s.start[i], s.end[i - 1]);
        }
    }
    EXPECT_EQ(s.start[0], 0.0);
    EXPECT_EQ(s.end.back(), s.total);

    const Model m = testutil::tiny_cnn(3);
    EXPECT_EQ(build_schedule(m, p, 3000).total * 2, build_schedule(m, p, 1500).total);
}

TEST(Device, ScheduleTotalMatchesMacFormula)
{
    const auto p = DeviceProfile::default_profile();
    const Model& m = testutil::toy_model();
    // conv1 8x8x8 outs * 1*3*3 taps; relu 512; pool 8x4x4 * 4; conv2 16x4x4 * 8*3*3;
    // relu 256; pool 16x2x2 * 4; dense 64*64; relu 64; dense 32*64; relu 32; dense 10*32
    const double ops = 512.0 * 9 + 512 + 128 * 4 + 256 * 72 + 256 + 64 * 4 + 64 * 64 + 64 + 32 * 64 + 32 + 10 * 32;
    EXPECT_NEAR(build_schedule(m, p, 1500).total, ops * p.ms_per_mac, 1e-9 * ops);
    EXPECT_NEAR(build_schedule(m, p, 1750).total, ops * p.ms_per_mac * 1500 / 1750, 1e-9 * ops);
}

TEST(Device, OverlapQuery)
{
    ExecutionSchedule s;
    s.elements = {{0, 0}, {0, 1}, {0, 2}};
    s.start = {0, 1, 2};
    s.end = {1, 2, 3};
    s.total = 3;
    EXPECT_EQ(s.overlapping(1.0, 2.0), (std::pair<std::size_t, std::size_t>{1, 2}));
    EXPECT_EQ(s.overlapping(0.5, 2.5), (std::pair<std::size_t, std::size_t>{0, 3}));
    EXPECT_EQ(s.overlapping(3.0, 4.0).first, s.overlapping(3.0, 4.0).second);
    EXPECT_EQ(s.overlapping(1.0, 2.0, 0.5), (std::pair<std::size_t, std::size_t>{0, 2}));
    EXPECT_THROW(s.position_of({1, 0}), std::out_of_range);
}

TEST(Device, SweepRatesPartitionAndReproduce)
{
    const auto p = DeviceProfile::default_profile();
    auto v = grid_range(650, 790, 20);
    auto f = grid_range(1500, 1970, 47);
    auto a = calibrate_sweep(p, v, f, 2.0, 400, 9);
    auto b = calibrate_sweep(p, v, f, 2.0, 400, 9, 3);
    ASSERT_EQ(a.size(), v.size() * f.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& c = a[i];
        EXPECT_EQ(c.no_effect + c.faults + c.crash + c.noresp, c.trials);
        EXPECT_EQ(c.crash, b[i].crash);
        EXPECT_EQ(c.bits, b[i].bits);
    }
    auto safe = calibrate_sweep(p, {790}, {1500, 1547}, 2.0, 1000, 2);
    for (const auto& c : safe) {
        EXPECT_EQ(c.no_effect, c.trials);
    }
    EXPECT_THROW(calibrate_sweep(p, {}, f, 2.0, 10, 1), std::invalid_argument);
    EXPECT_THROW(calibrate_sweep(p, v, f, 2.0, 0, 1), std::invalid_argument);
}

TEST(Device, ExpectedRatesMatchSweep)
{
    const auto p = DeviceProfile::default_profile();
    auto cells = calibrate_sweep(p, {690, 710, 730}, {1735, 1782}, 2.0, 20000, 4);
    for (const auto& c : cells) {
        const auto r = expected_rates(p, c.v_l, c.f_h, 2.0);
        const double se = 0.5 / std::sqrt(20000.0);
        EXPECT_NEAR(c.rate(c.crash), r.crash, 4 * se);
        EXPECT_NEAR(c.rate(c.noresp), r.noresp, 4 * se);
        EXPECT_NEAR(c.rate(c.single_bit), r.single_bit, 4 * se);
        EXPECT_NEAR(c.rate(c.no_effect) + c.rate(c.faults) + c.rate(c.crash) + c.rate(c.noresp), 1.0, 1e-12);
    }
}

TEST(Device, IdealProfileLandsOneBit)
{
    const auto p = DeviceProfile::ideal_profile();
    const auto r = expected_rates(p, 710, 1735, 0.04);
    EXPECT_EQ(r.crash, 0.0);
    EXPECT_GT(r.single_bit, 0.999);
    EXPECT_NEAR(r.mean_bits, r.single_bit, 1e-12);
}
