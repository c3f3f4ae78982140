#include <gtest/gtest.h>

#include "invcorr/config.hpp"

using namespace invcorr;

TEST(ConfigParse, SectionsKeysAndComments) {
    const Config c = Config::parse(
        "# header\n"
        "[envs]\n"
        "train = 0.1, 0.2, none   # trailing\n"
        "train = 0.1, 0.25, gaussian(0.1, 0.02)\n"
        "; other comment style\n"
        "[optim]\n"
        "learning_rate=0.05\n");
    EXPECT_EQ(c.sections(), (std::vector<std::string>{"envs", "optim"}));
    EXPECT_EQ(c.get_all("envs", "train").size(), 2u);
    EXPECT_EQ(c.get_all("envs", "train")[0], "0.1, 0.2, none");
    EXPECT_DOUBLE_EQ(c.get_double("optim", "learning_rate", 0.0), 0.05);
    EXPECT_DOUBLE_EQ(c.get_double("optim", "missing", 7.0), 7.0);
}

TEST(ConfigParse, HashInsideValueWithoutSpaceIsKept) {
    const Config c = Config::parse("[a]\nk = x#y\n");
    EXPECT_EQ(c.get("a", "k"), "x#y");
}

TEST(ConfigParse, MalformedLinesReportLocation) {
    try {
        Config::parse("[a]\nno equals here\n", "f.ini");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("f.ini:2"), std::string::npos);
    }
    EXPECT_THROW(Config::parse("k = v\n"), ConfigError);
    EXPECT_THROW(Config::parse("[unterminated\n"), ConfigError);
    EXPECT_THROW(Config::parse("[]\n"), ConfigError);
    EXPECT_THROW(Config::parse("[a]\n = v\n"), ConfigError);
}

TEST(ConfigParse, GetRejectsRepeatsAndMissing) {
    const Config c = Config::parse("[a]\nk = 1\nk = 2\n");
    EXPECT_THROW(c.get("a", "k"), ConfigError);
    EXPECT_THROW(c.get("a", "nope"), ConfigError);
    EXPECT_EQ(c.get_or("a", "nope", "d"), "d");
}

TEST(ConfigParse, TypedAccessors) {
    const Config c = Config::parse("[s]\nn = 1e6\nm = 42\nbad = 1.5\nseed = 18446744073709551615\nb = yes\nq = maybe\n");
    EXPECT_EQ(c.get_count("s", "n", 0), 1000000u);
    EXPECT_EQ(c.get_count("s", "m", 0), 42u);
    EXPECT_THROW(c.get_count("s", "bad", 0), ConfigError);
    EXPECT_EQ(c.get_seed("s", "seed", 0), 18446744073709551615ULL);
    EXPECT_THROW(c.get_seed("s", "bad", 0), ConfigError);
    EXPECT_TRUE(c.get_bool("s", "b", false));
    EXPECT_THROW(c.get_bool("s", "q", false), ConfigError);
}

TEST(ConfigParse, LoadMissingFileThrows) {
    EXPECT_THROW(Config::load("/nonexistent/dir/x.ini"), ConfigError);
}

TEST(DomainParsers, SplitListRespectsParentheses) {
    EXPECT_EQ(split_list("0.1, 0.2, gaussian(0.2, 0.01)"),
              (std::vector<std::string>{"0.1", "0.2", "gaussian(0.2, 0.01)"}));
    EXPECT_THROW(split_list("a), b"), std::invalid_argument);
}

TEST(DomainParsers, NoiseForms) {
    EXPECT_EQ(parse_noise("none"), NoiseSpec::none());
    EXPECT_EQ(parse_noise("0"), NoiseSpec::none());
    EXPECT_EQ(parse_noise("gaussian(0, 0)"), NoiseSpec::none());
    const NoiseSpec g = parse_noise("gaussian(0.2, 0.01)");
    EXPECT_EQ(g.kind, NoiseKind::gaussian);
    EXPECT_DOUBLE_EQ(g.mean, 0.2);
    EXPECT_NEAR(g.variance(), 0.01, 1e-15);
    EXPECT_EQ(parse_noise("uniform(0, 0.5)").kind, NoiseKind::uniform);
    EXPECT_EQ(parse_noise("poisson(0.1, 2)").kind, NoiseKind::poisson_centered);
    EXPECT_THROW(parse_noise("gaussian(0.1, -0.01)"), std::invalid_argument);
    EXPECT_THROW(parse_noise("gaussian(0.1)"), std::invalid_argument);
    EXPECT_THROW(parse_noise("laplace(0, 1)"), std::invalid_argument);
    EXPECT_THROW(parse_noise("gaussian(0.1, 0.2"), std::invalid_argument);
}

TEST(DomainParsers, NoiseRoundTrip) {
    for (const char* text : {"none", "gaussian(0.2, 0.01)", "uniform(0.1, 0.3)", "poisson(0.5, 2)"})
        EXPECT_EQ(parse_noise(format_noise(parse_noise(text))), parse_noise(text)) << text;
}

TEST(DomainParsers, Environment) {
    const EnvironmentSpec e = parse_env("0.1, 0.25, gaussian(0.1, 0.02)");
    EXPECT_DOUBLE_EQ(e.alpha, 0.1);
    EXPECT_DOUBLE_EQ(e.beta, 0.25);
    EXPECT_EQ(e.noise.kind, NoiseKind::gaussian);
    EXPECT_THROW(parse_env("0.1, 0.2"), std::invalid_argument);
    EXPECT_THROW(parse_env("1.5, 0.2, none"), std::invalid_argument);
}

TEST(DomainParsers, Log2Grid) {
    EXPECT_EQ(parse_log2_grid("-1, 0..3"), (std::vector<double>{-1, 0, 1, 2, 3}));
    EXPECT_EQ(parse_log2_grid("-1"), (std::vector<double>{-1}));
    EXPECT_EQ(parse_log2_grid("2.5, 7"), (std::vector<double>{2.5, 7}));
    EXPECT_THROW(parse_log2_grid("3..1"), std::invalid_argument);
    EXPECT_THROW(parse_log2_grid("1, , 2"), std::invalid_argument);
    EXPECT_THROW(parse_log2_grid("2, 1"), std::invalid_argument);
    EXPECT_THROW(parse_log2_grid("0, -1"), std::invalid_argument);
}

TEST(OptimSection, DefaultsAndOverrides) {
    const OptimConfig d = optim_from_config(Config::parse("[envs]\n"));
    EXPECT_EQ(d.method, OptimMethod::hybrid);
    const OptimConfig o = optim_from_config(Config::parse(
        "[optim]\nmethod = gd\nlearning_rate = 0.5\nmax_steps = 1e4\ninit = 1, -1\n[sweep]\nwarm_start = true\n"));
    EXPECT_EQ(o.method, OptimMethod::gradient_descent);
    EXPECT_DOUBLE_EQ(o.learning_rate, 0.5);
    EXPECT_EQ(o.max_steps, 10000u);
    EXPECT_EQ(o.init, (LinearParams{1.0, -1.0}));
    EXPECT_TRUE(o.warm_start);
    EXPECT_THROW(optim_from_config(Config::parse("[optim]\nmethod = adam\n")), ConfigError);
    EXPECT_THROW(optim_from_config(Config::parse("[optim]\nlearning_rate = -1\n")), ConfigError);
    EXPECT_THROW(optim_from_config(Config::parse("[optim]\ninit = 1\n")), ConfigError);
}

TEST(SemSection, DefaultModeWithOverrides) {
    const auto sems = sems_from_config(Config::parse(
        "[sem]\ngamma = 1, -0.5\nd_s = 2\nlabel_noise_var = 0.1\n"
        "env = 0.2, gaussian(0.2, 0.01), none\nenv = 0.7, none, uniform(0, 0.2)\nenv = 0.9, none, none\n"));
    ASSERT_EQ(sems.size(), 1u);
    EXPECT_EQ(sems[0].d_inv, 2);
    EXPECT_EQ(sems[0].d_s, 2);
    EXPECT_EQ(sems[0].mixing.rows(), 4);
    EXPECT_EQ(sems[0].envs.size(), 3u);
    EXPECT_DOUBLE_EQ(sems[0].label_noise_var, 0.1);
}

TEST(SemSection, RandomModeCount) {
    const auto sems = sems_from_config(Config::parse("[sem]\nmode = random\ncount = 4\nseed = 9\nenvs = 3\n"));
    ASSERT_EQ(sems.size(), 4u);
    for (const auto& s : sems) EXPECT_EQ(s.envs.size(), 3u);
}

TEST(SemSection, ZeroGammaRejectedAtLoad) {
    EXPECT_THROW(sems_from_config(Config::parse("[sem]\ngamma = 0\n")), ConfigError);
    EXPECT_THROW(sems_from_config(Config::parse("[sem]\nmode = other\n")), ConfigError);
    EXPECT_THROW(sems_from_config(Config::parse("[sem]\nenv = 0.2, none\n")), ConfigError);
}
