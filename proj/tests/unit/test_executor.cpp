#include "helpers.hpp"

#include "lightning/executor.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace lightning;
using testutil::random_tensor;
using testutil::tiny_cnn;

namespace {

// Inputs labelled with the model's own clean prediction.
Dataset self_labelled(const Model& m, std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    Dataset d;
    for (std::size_t i = 0; i < n; ++i) {
        d.inputs.push_back(random_tensor(m.input_shape(), rng));
        d.labels.push_back(forward(m, d.inputs.back(), 0).predicted_class);
    }
    return d;
}

TargetSet element_targets(std::initializer_list<ElementAddr> addrs)
{
    TargetSet t;
    t.n_max = addrs.size();
    for (auto a : addrs) {
        t.targets.push_back({{a, Granularity::Element, std::nullopt}, 1.0});
    }
    return t;
}

ExecutionSchedule manual_schedule()
{
    // three elements at [0,10), [10,12), [12,40)
    ExecutionSchedule s;
    s.elements = {{0, 0}, {0, 1}, {0, 2}};
    s.start = {0.0, 10.0, 12.0};
    s.end = {10.0, 12.0, 40.0};
    s.total = 40.0;
    s.mhz = 1500.0;
    return s;
}

FaultParams glitch(double v_l, double f_h, double t_d)
{
    FaultParams p;
    p.V_l = v_l;
    p.F_h = f_h;
    p.T_d = t_d;
    return p;
}

} // namespace

TEST(Plan, TimingIsWindowMidpointMinusHalfDuration)
{
    const auto s = manual_schedule();
    const auto plan = plan_injections(s, element_targets({{0, 2}, {0, 0}}), glitch(710, 1735, 2.0));
    ASSERT_EQ(plan.size(), 2u);
    EXPECT_DOUBLE_EQ(plan[0].T_W, 4.0); // mid 5
    EXPECT_DOUBLE_EQ(plan[1].T_W, 25.0); // mid 26
    EXPECT_DOUBLE_EQ(plan[0].duration, 2.0);
    EXPECT_EQ(plan[0].targets[0].addr, (ElementAddr{0, 0}));
}

TEST(Plan, OverlappingWindowsMergeAndEarlyTargetsClampAtZero)
{
    const auto s = manual_schedule();
    // mids 5 and 11; with T_d = 8 the windows [1,9) and [7,15) overlap
    const auto plan = plan_injections(s, element_targets({{0, 1}, {0, 0}}), glitch(710, 1735, 8.0));
    ASSERT_EQ(plan.size(), 1u);
    EXPECT_DOUBLE_EQ(plan[0].T_W, 1.0);
    EXPECT_DOUBLE_EQ(plan[0].duration, 14.0);
    EXPECT_EQ(plan[0].targets.size(), 2u);

    const auto early = plan_injections(s, element_targets({{0, 0}}), glitch(710, 1735, 20.0));
    EXPECT_DOUBLE_EQ(early[0].T_W, 0.0);
    EXPECT_THROW(plan_injections(s, element_targets({{0, 0}}), glitch(710, 1735, 0.0)), std::invalid_argument);
}

TEST(Trial, SafeParametersAlwaysCompleteWithBaselinePrediction)
{
    const Model m = tiny_cnn(3);
    const auto data = self_labelled(m, 20, 5);
    const auto profile = DeviceProfile::default_profile();
    const auto schedule = build_schedule(m, profile, 1500);
    const auto targets = element_targets({{0, 3}, {2, 1}, {4, 2}});
    const FaultParams safe = glitch(790, 1500, 2.0);
    const auto plan = plan_injections(schedule, targets, safe);
    for (std::size_t i = 0; i < data.size(); ++i) {
        Rng rng(i);
        const auto r = run_attack_trial(m, data.inputs[i], data.labels[i], {}, plan, schedule, profile, safe, rng);
        EXPECT_EQ(r.status, TrialStatus::Completed);
        EXPECT_EQ(r.final_class, r.baseline_class);
        EXPECT_EQ(r.flips_applied, 0u);
        for (const auto& a : r.attempts) {
            EXPECT_EQ(a.outcome.kind, GlitchKind::NoEffect);
        }
    }
}

TEST(Trial, RecordedFaultsReproduceTheFinalPrediction)
{
    const Model m = tiny_cnn(4);
    const auto data = self_labelled(m, 30, 6);
    const auto profile = DeviceProfile::ideal_profile();
    const auto schedule = build_schedule(m, profile, 1500);
    const auto targets = element_targets({{0, 10}, {2, 4}, {4, 1}, {5, 1}});
    const FaultParams p = glitch(710, 1735, 0.04);
    const auto plan = plan_injections(schedule, targets, p);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        Rng rng(100 + i);
        const auto r = run_attack_trial(m, data.inputs[i], data.labels[i], {}, plan, schedule, profile, p, rng);
        ASSERT_EQ(r.status, TrialStatus::Completed);
        InjectionPlan flips;
        for (std::size_t a = 0; a < r.attempts.size(); ++a) {
            const auto& att = r.attempts[a];
            ASSERT_EQ(att.outcome.kind, GlitchKind::Faults);
            ASSERT_EQ(att.outcome.count(), 1u);
            // the ideal device lands on the targeted element itself
            EXPECT_EQ(att.outcome.positions[0].addr, att.targets[0].addr);
            flips.toggle(att.outcome.positions[0].addr, att.outcome.positions[0].loc);
        }
        EXPECT_EQ(r.flips_applied, flips.size());
        EXPECT_EQ(r.final_class, forward(m, data.inputs[i], data.labels[i], flips).predicted_class);
        changed += r.final_class != r.baseline_class;
    }
    EXPECT_GT(changed, 0u);
}

TEST(Trial, TimeOffsetMovesEveryGlitch)
{
    const Model m = tiny_cnn(3);
    const auto data = self_labelled(m, 1, 5);
    const auto profile = DeviceProfile::ideal_profile();
    const auto schedule = build_schedule(m, profile, 1500);
    const FaultParams p = glitch(710, 1735, 0.04);
    const auto plan = plan_injections(schedule, element_targets({{0, 20}, {4, 0}}), p);
    Rng a(1), b(1);
    const auto r0 = run_attack_trial(m, data.inputs[0], data.labels[0], {}, plan, schedule, profile, p, a);
    const auto r1 = run_attack_trial(m, data.inputs[0], data.labels[0], {}, plan, schedule, profile, p, b, 3.5);
    ASSERT_EQ(r0.attempts.size(), r1.attempts.size());
    for (std::size_t i = 0; i < r0.attempts.size(); ++i) {
        EXPECT_DOUBLE_EQ(r1.attempts[i].T_W, r0.attempts[i].T_W + 3.5);
    }
}

TEST(Campaign, SameSeedGivesIdenticalRecordsAcrossJobCounts)
{
    const Model m = tiny_cnn(7);
    const auto data = self_labelled(m, 12, 8);
    CampaignConfig c;
    c.source = TargetSource::RandomSet;
    c.n = 4;
    c.trials = 60;
    c.seed = 42;
    FaultParams p = glitch(700, 1735, 1.0);
    const auto profile = DeviceProfile::default_profile();
    const auto a = run_campaign(m, data, c, profile, p);
    c.jobs = 3;
    const auto b = run_campaign(m, data, c, profile, p);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        const auto &x = a.records[i], &y = b.records[i];
        EXPECT_EQ(x.input_id, y.input_id);
        EXPECT_EQ(x.status, y.status);
        EXPECT_EQ(x.final_class, y.final_class);
        ASSERT_EQ(x.attempts.size(), y.attempts.size());
        for (std::size_t k = 0; k < x.attempts.size(); ++k) {
            EXPECT_EQ(x.attempts[k].outcome.kind, y.attempts[k].outcome.kind);
            EXPECT_EQ(x.attempts[k].outcome.positions.size(), y.attempts[k].outcome.positions.size());
            EXPECT_EQ(x.attempts[k].targets, y.attempts[k].targets);
        }
    }
    EXPECT_EQ(a.completed_correct, b.completed_correct);
}

TEST(Campaign, BookkeepingAddsUp)
{
    const Model m = tiny_cnn(9);
    const auto data = self_labelled(m, 15, 10);
    CampaignConfig c;
    c.source = TargetSource::RandomFault;
    c.n = 2;
    c.trials = 300;
    c.seed = 3;
    const auto r = run_campaign(m, data, c, DeviceProfile::default_profile(), FaultParams{});
    EXPECT_EQ(r.completed + r.crashed + r.no_response, r.trials);
    std::size_t cells = r.no_class;
    for (auto v : r.confusion) {
        cells += v;
    }
    EXPECT_EQ(cells, r.completed);
    EXPECT_EQ(r.baseline_correct, r.trials); // self-labelled data
    EXPECT_GT(r.crashed, 0u);
    EXPECT_NEAR(r.crash_rate(), static_cast<double>(r.crashed) / r.trials, 1e-15);
    EXPECT_LE(r.effective_correct, r.trials);
    EXPECT_GE(r.effective_correct, r.completed_correct);
}

TEST(Campaign, EmptyTargetSetsLeaveAccuracyAtBaseline)
{
    const auto& m = testutil::toy_model();
    const auto data = testutil::toy_test_set().slice(0, 50);
    CampaignConfig c;
    c.trials = 100;
    c.seed = 1;
    const auto r = run_campaign_with_sets(m, data, c, DeviceProfile::default_profile(), glitch(710, 1735, 2.0),
                                          {TargetSet{10, {}}});
    EXPECT_EQ(r.completed, r.trials);
    EXPECT_EQ(r.completed_correct, r.baseline_correct);
    EXPECT_EQ(r.flips, 0u);
    EXPECT_DOUBLE_EQ(r.degradation(), 0.0);
}

TEST(Campaign, TargetedBookkeepingSkipsTheTrueClass)
{
    const Model m = tiny_cnn(11);
    const auto data = self_labelled(m, 9, 12);
    CampaignConfig c;
    c.source = TargetSource::RandomSet;
    c.delivery = Delivery::Precise;
    c.targeted = true;
    c.n = 3;
    c.trials = 9 * 2 * 3;
    c.seed = 5;
    const auto r = run_campaign(m, data, c, DeviceProfile::ideal_profile(), FaultParams{});
    const std::size_t C = m.class_count();
    for (std::size_t t = 0; t < C; ++t) {
        EXPECT_EQ(r.pair_eligible[t * C + t], 0u);
    }
    // every trial attacks some class other than its own label
    for (const auto& rec : r.records) {
        EXPECT_NE(rec.mode.target_class, rec.true_label);
    }
    EXPECT_EQ(r.targeted_eligible, r.trials);
    // each (input, other class) pair is visited equally often
    std::size_t sum = 0;
    for (auto e : r.pair_eligible) {
        sum += e;
    }
    EXPECT_EQ(sum, r.trials);
}

TEST(Campaign, PreciseBitFlipsMatchTheirAnchors)
{
    const Model m = tiny_cnn(13);
    const auto data = self_labelled(m, 4, 14);
    CampaignConfig c;
    c.scheme = Scheme::Bit;
    c.delivery = Delivery::Precise;
    c.n = 5;
    c.trials = 4;
    const auto r = run_campaign(m, data, c, DeviceProfile::ideal_profile(), FaultParams{});
    for (std::size_t i = 0; i < r.records.size(); ++i) {
        const auto& rec = r.records[i];
        const auto top = input_dependent_search(m, data.inputs[rec.input_id], Objective::untargeted(rec.true_label),
                                                5, Scheme::Bit);
        InjectionPlan flips;
        for (const auto& t : top.targets) {
            flips.toggle(t.target.addr, *t.target.anchor);
        }
        EXPECT_EQ(rec.flips_applied, flips.size());
        EXPECT_EQ(rec.final_class, forward(m, data.inputs[rec.input_id], rec.true_label, flips).predicted_class);
    }
}

TEST(Campaign, SensitiveBitsBeatRandomBitsOnTheToyModel)
{
    const auto& m = testutil::toy_model();
    const auto data = testutil::toy_test_set().slice(0, 100);
    CampaignConfig c;
    c.scheme = Scheme::Bit;
    c.delivery = Delivery::Precise;
    c.n = 3;
    c.trials = 100;
    c.seed = 2;
    c.keep_records = false;
    const auto top = run_campaign(m, data, c, DeviceProfile::ideal_profile(), FaultParams{});
    c.source = TargetSource::RandomSet;
    const auto rnd = run_campaign(m, data, c, DeviceProfile::ideal_profile(), FaultParams{});
    EXPECT_GT(top.degradation(), rnd.degradation());
}

TEST(Campaign, RejectsBadConfigurations)
{
    const Model m = tiny_cnn(3);
    const auto data = self_labelled(m, 3, 1);
    CampaignConfig c;
    c.trials = 0;
    EXPECT_THROW(run_campaign(m, data, c, DeviceProfile::ideal_profile(), FaultParams{}), std::invalid_argument);
    c.trials = 1;
    c.targeted = true;
    c.target_class = 7;
    EXPECT_THROW(run_campaign(m, data, c, DeviceProfile::ideal_profile(), FaultParams{}), std::invalid_argument);
    c = {};
    c.source = TargetSource::Independent;
    EXPECT_THROW(run_campaign(m, data, c, DeviceProfile::ideal_profile(), FaultParams{}), std::invalid_argument);
    EXPECT_EQ(parse_target_source("indep"), TargetSource::Independent);
    EXPECT_THROW(parse_target_source("nope"), std::invalid_argument);
}
