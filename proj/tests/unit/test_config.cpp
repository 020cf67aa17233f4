#include "helpers.hpp"

#include "lightning/config.hpp"

#include <gtest/gtest.h>

using namespace lightning;

namespace {

const char* kMinimal = "model = m.lsnm\ndata_images = a.idx\ndata_labels = b.idx\n";

} // namespace

TEST(KeyValues, CommentsBlankLinesAndWhitespace)
{
    const auto kv = parse_key_values("# header\n\n a = 1 \nb=two words # trailing\n", "t");
    ASSERT_EQ(kv.size(), 2u);
    EXPECT_EQ(kv.at("a"), "1");
    EXPECT_EQ(kv.at("b"), "two words");
}

TEST(KeyValues, MalformedLinesAndDuplicatesNameTheLine)
{
    try {
        parse_key_values("a = 1\nnot a pair\n", "cfg");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("cfg:2"), std::string::npos);
    }
    EXPECT_THROW(parse_key_values("a = 1\na = 2\n", "cfg"), ConfigError);
    EXPECT_THROW(parse_key_values(" = 2\n", "cfg"), ConfigError);
}

TEST(RunConfigParse, MinimalConfigUsesDefaults)
{
    const auto rc = parse_run_config(kMinimal, "t", "/base");
    EXPECT_EQ(rc.model, "/base/m.lsnm");
    EXPECT_EQ(rc.campaign.n, 10u);
    EXPECT_EQ(rc.campaign.source, TargetSource::Dependent);
    EXPECT_EQ(rc.profile.name, "default");
    EXPECT_EQ(rc.evolve.ga.population, 32u);
    EXPECT_EQ(rc.evolve.fitness_trials, 50u);
}

TEST(RunConfigParse, FullKeysAndProfileOverrides)
{
    const std::string text = std::string(kMinimal) +
                             "source = random_set\ngranularity = part\nn = 5\ntrials = 77\nseed = 9\n"
                             "targeted = true\ntarget_class = 3\ndelivery = precise\nprofile = ideal\n"
                             "profile.jitter_ms = 0.25\nF_h = 1700\nV_l = 700\nT_d = 1.5\nout_summary = s.csv\n"
                             "ga.generations = 12\nga.target_fitness = 30\n";
    const auto rc = parse_run_config(text, "t");
    EXPECT_EQ(rc.campaign.source, TargetSource::RandomSet);
    EXPECT_EQ(rc.campaign.scheme, Scheme::Part);
    EXPECT_EQ(rc.campaign.n, 5u);
    EXPECT_EQ(rc.campaign.trials, 77u);
    EXPECT_EQ(rc.campaign.seed, 9u);
    EXPECT_TRUE(rc.campaign.targeted);
    EXPECT_EQ(rc.campaign.target_class, 3u);
    EXPECT_EQ(rc.campaign.delivery, Delivery::Precise);
    EXPECT_FALSE(rc.profile.crashes);
    EXPECT_DOUBLE_EQ(rc.profile.jitter_ms, 0.25);
    EXPECT_DOUBLE_EQ(rc.params.F_h, 1700);
    EXPECT_DOUBLE_EQ(rc.params.T_d, 1.5);
    EXPECT_EQ(rc.out_summary, "s.csv");
    EXPECT_EQ(rc.evolve.ga.generations, 12u);
    EXPECT_DOUBLE_EQ(*rc.evolve.ga.target_fitness, 30.0);
}

TEST(RunConfigParse, RejectsUnknownMissingAndOutOfRange)
{
    EXPECT_THROW(parse_run_config(std::string(kMinimal) + "colour = red\n", "t"), ConfigError);
    EXPECT_THROW(parse_run_config("model = m\ndata_images = a\n", "t"), ConfigError);
    EXPECT_THROW(parse_run_config(std::string(kMinimal) + "n = 0\n", "t"), ConfigError);
    EXPECT_THROW(parse_run_config(std::string(kMinimal) + "n = -3\n", "t"), ConfigError);
    EXPECT_THROW(parse_run_config(std::string(kMinimal) + "trials = ten\n", "t"), ConfigError);
    EXPECT_THROW(parse_run_config(std::string(kMinimal) + "granularity = nibble\n", "t"), ConfigError);
    EXPECT_THROW(parse_run_config(std::string(kMinimal) + "target_class = 2\n", "t"), ConfigError);
    EXPECT_THROW(parse_run_config(std::string(kMinimal) + "source = indep\n", "t"), ConfigError);
    EXPECT_THROW(parse_run_config(std::string(kMinimal) + "V_l = 900\n", "t"), ConfigError);
    EXPECT_THROW(parse_run_config(std::string(kMinimal) + "profile.bogus = 1\n", "t"), ConfigError);
    EXPECT_THROW(parse_run_config(std::string(kMinimal) + "profile.stress_scale = 0\n", "t"), ConfigError);
    EXPECT_THROW(parse_run_config(std::string(kMinimal) + "ga.mutation = 2\n", "t"), ConfigError);
}

TEST(Profiles, FormatThenParseRoundTrips)
{
    for (const auto& p : {DeviceProfile::default_profile(), DeviceProfile::ideal_profile()}) {
        const auto q = parse_profile(format_profile(p));
        EXPECT_EQ(format_profile(q), format_profile(p));
        EXPECT_EQ(q.boundary_slope, p.boundary_slope);
        EXPECT_EQ(q.boundary_intercept, p.boundary_intercept);
        EXPECT_EQ(q.reference_pairs, p.reference_pairs);
        EXPECT_EQ(q.crashes, p.crashes);
        EXPECT_EQ(q.max_bits_per_glitch, p.max_bits_per_glitch);
    }
}

TEST(Profiles, ShippedFilesMatchBuiltIns)
{
    const std::string dir = std::string(LIGHTNING_SOURCE_DIR) + "/profiles/";
    EXPECT_EQ(format_profile(load_profile(dir + "default.profile")),
              format_profile(DeviceProfile::default_profile()));
    EXPECT_EQ(format_profile(load_profile(dir + "ideal.profile")), format_profile(DeviceProfile::ideal_profile()));
}

TEST(Profiles, ReferencePairBelowBoundaryIsRejected)
{
    EXPECT_THROW(parse_profile("reference_pairs = 1900:600\n"), ConfigError);
    EXPECT_THROW(parse_profile("base = turbo\n"), ConfigError);
    EXPECT_THROW(parse_profile("crashes = maybe\n"), ConfigError);
}
