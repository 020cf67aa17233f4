#include "helpers.hpp"

#include "lightning/report.hpp"

#include <gtest/gtest.h>

using namespace lightning;

namespace {

CampaignReport small_campaign()
{
    const Model m = testutil::tiny_cnn(21);
    Rng rng(4);
    Dataset d;
    for (int i = 0; i < 6; ++i) {
        d.inputs.push_back(testutil::random_tensor(m.input_shape(), rng));
        d.labels.push_back(static_cast<std::size_t>(i % 3));
    }
    CampaignConfig c;
    c.source = TargetSource::RandomSet;
    c.targeted = true;
    c.n = 3;
    c.trials = 30;
    c.seed = 8;
    return run_campaign(m, d, c, DeviceProfile::default_profile(), [] {
        FaultParams p;
        p.V_l = 700;
        p.F_h = 1735;
        p.T_d = 1;
        return p;
    }());
}

} // namespace

TEST(Report, ProvenanceLineCarriesSeedHashAndVersion)
{
    const Provenance p{"attack", 7, config_hash("a=1\n")};
    const auto line = provenance_comment(p);
    EXPECT_EQ(line.rfind("# lightning-sim ", 0), 0u);
    EXPECT_NE(line.find("seed=7"), std::string::npos);
    EXPECT_NE(line.find(std::string(tool_version())), std::string::npos);
    EXPECT_NE(config_hash("a=1\n"), config_hash("a=2\n"));
}

TEST(Report, RecordsRoundTripThroughJsonLines)
{
    const auto rep = small_campaign();
    const Provenance p{"attack", 8, 0x1234abcd};
    const auto text = records_jsonl(p, rep.records, rep.classes);
    std::size_t classes = 0;
    Provenance back;
    const auto records = parse_records_jsonl(text, classes, back);
    EXPECT_EQ(classes, rep.classes);
    EXPECT_EQ(back.seed, 8u);
    EXPECT_EQ(back.config_hash, 0x1234abcdu);
    ASSERT_EQ(records.size(), rep.records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        EXPECT_EQ(records[i].status, rep.records[i].status);
        EXPECT_EQ(records[i].final_class, rep.records[i].final_class);
        EXPECT_EQ(records[i].mode.target_class, rep.records[i].mode.target_class);
        ASSERT_EQ(records[i].attempts.size(), rep.records[i].attempts.size());
        for (std::size_t k = 0; k < records[i].attempts.size(); ++k) {
            const auto &x = records[i].attempts[k], &y = rep.records[i].attempts[k];
            EXPECT_EQ(x.T_W, y.T_W);
            EXPECT_EQ(x.targets, y.targets);
            EXPECT_EQ(x.outcome.kind, y.outcome.kind);
            EXPECT_EQ(x.outcome.positions, y.outcome.positions);
        }
    }
    // re-serialising gives the same bytes, and the tallies agree
    EXPECT_EQ(records_jsonl(p, records, classes), text);
    const auto again = tally_trials(records, classes);
    EXPECT_EQ(summary_csv(p, again), summary_csv(p, rep));
    EXPECT_EQ(confusion_csv(p, again), confusion_csv(p, rep));
}

TEST(Report, CorruptRecordsNameTheLine)
{
    const auto rep = small_campaign();
    auto text = records_jsonl({"attack", 1, 2}, rep.records, rep.classes);
    text += "{\"input_id\": 1}\n";
    std::size_t classes = 0;
    Provenance p;
    try {
        parse_records_jsonl(text, classes, p);
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("line " + std::to_string(rep.records.size() + 2)), std::string::npos);
    }
    EXPECT_THROW(parse_records_jsonl("", classes, p), std::runtime_error);
}

TEST(Report, ConfusionCsvLayout)
{
    const auto rep = small_campaign();
    const auto csv = confusion_csv({"attack", 0, 0}, rep);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line[0], '#');
    std::getline(in, line);
    EXPECT_EQ(line, "true,pred_0,pred_1,pred_2");
    std::size_t rows = 0, total = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        while (std::getline(ss, cell, ',')) {
            total += std::stoul(cell);
        }
    }
    EXPECT_EQ(rows, 3u);
    EXPECT_EQ(total + rep.no_class, rep.completed);
}

TEST(Report, CalibrationAndTraceHeaders)
{
    const auto cells = calibrate_sweep(DeviceProfile::default_profile(), {710}, {1735}, 2.0, 10, 1);
    const auto cal = calibration_csv({"calibrate", 1, 0}, cells);
    EXPECT_NE(cal.find("\nV_l,F_h,stress,trials,rate_no_effect,rate_fault,rate_crash,rate_noresp,"), std::string::npos);
    GaResult g;
    g.trace.push_back({0, 1.5, 1.5, 0.5, make_seed(1735, 710, 3, 2)});
    const auto tr = trace_csv({"evolve", 1, 0}, g);
    EXPECT_NE(tr.find("\n0,1.5,1.5,0.5,1735,710,3,2\n"), std::string::npos);
}
