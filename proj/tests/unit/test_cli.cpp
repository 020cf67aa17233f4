#include "helpers.hpp"

#include "lightning/cli.hpp"
#include "lightning/report.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

using namespace lightning;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code;
    std::string out, err;
};

CliRun cli(std::vector<std::string> args)
{
    args.insert(args.begin(), "lightning-sim");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("lightning_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string write_config(const std::string& name, const std::string& extra)
    {
        const auto path = dir_ / name;
        write_text(path, "model = " + testutil::fixture("toy_lenet.lsnm") +
                             "\ndata_images = " + testutil::fixture("digits-test-images.idx") +
                             "\ndata_labels = " + testutil::fixture("digits-test-labels.idx") + "\n" + extra);
        return path.string();
    }
    std::string out(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

} // namespace

TEST_F(CliTest, UsageErrorsExitOneAndNameTheFlag)
{
    auto r = cli({});
    EXPECT_EQ(r.code, 1);
    r = cli({"sensitivity", "--data", "x", "--labels", "y", "--out", "z"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("--model"), std::string::npos);
    r = cli({"frobnicate"});
    EXPECT_EQ(r.code, 1);
    r = cli({"calibrate", "--v-grid", "700", "--out", out("c.csv")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("--v-grid"), std::string::npos);
}

TEST_F(CliTest, RuntimeErrorsExitTwo)
{
    auto r = cli({"attack", "--config", out("missing.conf")});
    EXPECT_EQ(r.code, 2);
    const auto bad = write_config("bad.conf", "colour = blue\n");
    r = cli({"attack", "--config", bad});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("colour"), std::string::npos);
}

TEST_F(CliTest, SameSeedGivesByteIdenticalOutputs)
{
    const std::string body = "data_limit = 20\nsource = random_set\nn = 5\ntrials = 60\nF_h = 1735\nV_l = 700\n"
                             "T_d = 1\nout_summary = " + out("s.csv") + "\nout_records = " + out("r.jsonl") +
                             "\nout_confusion = " + out("c.csv") + "\n";
    const auto cfg = write_config("a.conf", body);
    ASSERT_EQ(cli({"--seed", "7", "attack", "--config", cfg}).code, 0);
    const auto s1 = read_text_file(out("s.csv")), r1 = read_text_file(out("r.jsonl")),
               c1 = read_text_file(out("c.csv"));
    ASSERT_EQ(cli({"attack", "--config", cfg, "--seed", "7", "--jobs", "2"}).code, 0);
    EXPECT_EQ(read_text_file(out("s.csv")), s1);
    EXPECT_EQ(read_text_file(out("r.jsonl")), r1);
    EXPECT_EQ(read_text_file(out("c.csv")), c1);
    EXPECT_NE(s1.find("seed=7"), std::string::npos);
    ASSERT_EQ(cli({"--seed", "8", "attack", "--config", cfg}).code, 0);
    EXPECT_NE(read_text_file(out("r.jsonl")), r1);

    // report rebuilds the same confusion matrix from the records
    ASSERT_EQ(cli({"report", "--in", out("r.jsonl"), "--confusion", out("c2.csv")}).code, 0);
    const auto c2 = read_text_file(out("c2.csv"));
    EXPECT_EQ(c2.substr(c2.find('\n')), read_text_file(out("c.csv")).substr(c2.find('\n')));
}

TEST_F(CliTest, BaselineCalibrateAndSensitivityWriteProvenance)
{
    const auto cfg = write_config("b.conf", "data_limit = 30\nn = 1\ntrials = 100\nout_summary = " +
                                                out("b.csv") + "\n");
    ASSERT_EQ(cli({"--seed", "3", "baseline", "--config", cfg}).code, 0);
    EXPECT_EQ(read_text_file(out("b.csv")).rfind("# lightning-sim", 0), 0u);

    ASSERT_EQ(cli({"--seed", "3", "calibrate", "--trials", "50", "--v-grid", "690:730:20", "--f-grid",
                   "1688:1782:47", "--out", out("cal.csv")})
                  .code,
              0);
    const auto cal = read_text_file(out("cal.csv"));
    ASSERT_EQ(cli({"--seed", "3", "calibrate", "--trials", "50", "--v-grid", "690:730:20", "--f-grid",
                   "1688:1782:47", "--out", out("cal.csv")})
                  .code,
              0);
    EXPECT_EQ(read_text_file(out("cal.csv")), cal);

    const CliRun r = cli({"sensitivity", "--model", testutil::fixture("toy_lenet.lsnm"), "--data",
                       testutil::fixture("digits-test-images.idx"), "--labels",
                       testutil::fixture("digits-test-labels.idx"), "--granularity", "part", "--n", "4", "--out",
                       out("s.csv")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto s = read_text_file(out("s.csv"));
    EXPECT_NE(s.find("rank,layer,element,granularity,anchor_bit,S\n"), std::string::npos);
}
