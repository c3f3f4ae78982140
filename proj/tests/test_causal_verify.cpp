#include <gtest/gtest.h>

#include <cmath>

#include "invcorr/causal_verify.hpp"
#include "invcorr/rng.hpp"

using namespace invcorr;

namespace {

SemConfig scalar_sem(NoiseSpec e1, NoiseSpec e2, double label_var = 0.0) {
    SemConfig cfg = default_sem(7);
    cfg.label_noise_var = label_var;
    cfg.envs[0].eta_inv = e1;
    cfg.envs[1].eta_inv = e2;
    return cfg;
}

const NoiseSpec kN1 = NoiseSpec::gaussian_var(0.2, 0.01);
const NoiseSpec kN2 = NoiseSpec::gaussian_var(0.1, 0.02);

}  // namespace

TEST(InvariantCorrelation, DefaultSemConfirmedWithUnitCorrelation) {
    const CheckReport r = check_invariant_correlation(scalar_sem(kN1, kN2), 200000, 1, 1);
    EXPECT_EQ(r.verdict, Verdict::confirmed) << r.summary();
    ASSERT_EQ(r.rows.size(), 2u);
    for (const auto& row : r.rows) {
        EXPECT_DOUBLE_EQ(row.analytic, 1.0);
        EXPECT_NEAR(row.estimate, 1.0, 5 * row.se);
    }
}

TEST(InvariantCorrelation, NoiselessIsExactUpToSampling) {
    const CheckReport r = check_invariant_correlation(scalar_sem(NoiseSpec::none(), NoiseSpec::none()), 100000, 1, 2);
    EXPECT_EQ(r.verdict, Verdict::confirmed);
    for (const auto& row : r.rows) EXPECT_NEAR(row.estimate, 1.0, 1e-3);
}

TEST(InvariantCorrelation, CrossEnvSpreadShrinksLikeInverseN) {
    const SemConfig cfg = scalar_sem(kN1, kN2, 0.3);
    double small = 0.0, large = 0.0;
    for (std::uint64_t s = 0; s < 8; ++s) {
        small += check_invariant_correlation(cfg, 10000, 1, 100 + s).cross_env;
        large += check_invariant_correlation(cfg, 1000000, 1, 200 + s).cross_env;
    }
    const double decades = std::log10(small / large);
    EXPECT_GT(decades, 1.3);
    EXPECT_LT(decades, 2.7);
}

TEST(InvariantCorrelation, RepsPoolSamples) {
    const SemConfig cfg = scalar_sem(kN1, kN2, 0.2);
    const CheckReport one = check_invariant_correlation(cfg, 50000, 1, 3);
    const CheckReport four = check_invariant_correlation(cfg, 50000, 4, 3);
    EXPECT_NEAR(four.rows[0].se / one.rows[0].se, 0.5, 0.05);
}

TEST(InvariantCorrelation, PropagatesInvalidInput) {
    const SemConfig cfg = scalar_sem(kN1, kN2);
    SemConfig bad = cfg;
    bad.mixing(0, 0) = 0.0;
    bad.mixing(0, 1) = 0.0;
    EXPECT_THROW(check_invariant_correlation(bad, 1000, 1, 4), std::invalid_argument);
    EXPECT_THROW(check_invariant_correlation(cfg, 1000, 0, 4), std::invalid_argument);
    SemConfig one_env = cfg;
    one_env.envs.pop_back();
    EXPECT_THROW(check_invariant_correlation(one_env, 1000, 1, 4), std::invalid_argument);
}

// Property: the invariance holds on every member of the random SEM family.
TEST(InvariantCorrelation, RandomFamilyConfirmed) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const SemConfig cfg = random_sem(500 + s);
        const CheckReport r = check_invariant_correlation(cfg, 200000, 1, 900 + s);
        EXPECT_EQ(r.verdict, Verdict::confirmed) << "cfg " << s << "\n" << r.summary();
        for (const auto& row : r.rows) EXPECT_DOUBLE_EQ(row.analytic, cfg.gamma.squaredNorm());
    }
}

TEST(CorollaryGradient, WorkedExample) {
    SemConfig cfg = scalar_sem(kN1, kN2);
    EXPECT_NEAR(analytic_dummy_gradient(cfg, 0), 0.05, 1e-15);
    const CheckReport r = check_corollary_gradient(cfg, 0, 400000, 5);
    EXPECT_EQ(r.verdict, Verdict::confirmed) << r.summary();
    EXPECT_NEAR(r.rows[0].estimate, 0.05, 5 * r.rows[0].se);
}

TEST(CorollaryGradient, CleanEnvIsVacuous) {
    const SemConfig cfg = scalar_sem(NoiseSpec::none(), kN2);
    EXPECT_EQ(analytic_dummy_gradient(cfg, 0), 0.0);
    const CheckReport r = check_corollary_gradient(cfg, 0, 1000, 5);
    EXPECT_EQ(r.verdict, Verdict::inconclusive);
    EXPECT_EQ(r.message, "corollary vacuous here");
}

TEST(CorollaryGradient, DistinctNoisesGiveDistinctValues) {
    const SemConfig cfg = scalar_sem(kN1, kN2);
    EXPECT_NE(analytic_dummy_gradient(cfg, 0), analytic_dummy_gradient(cfg, 1));
    EXPECT_NEAR(analytic_dummy_gradient(cfg, 1), 0.01 + 0.02, 1e-15);
}

TEST(CorollaryRisk, WorkedExample) {
    const SemConfig cfg = scalar_sem(kN1, kN2);
    EXPECT_NEAR(analytic_oracle_risk(cfg, 0), 0.025, 1e-15);
    EXPECT_NEAR(analytic_oracle_risk(cfg, 1), 0.015, 1e-15);
    const CheckReport r = check_corollary_risk_variance(cfg, 0, 1, 400000, 6);
    EXPECT_EQ(r.verdict, Verdict::confirmed) << r.summary();
    EXPECT_NEAR(r.cross_env, 0.01, 5 * r.cross_se);
}

TEST(CorollaryRisk, IdenticalNoisesAreInconclusive) {
    const CheckReport r = check_corollary_risk_variance(scalar_sem(kN1, kN1), 0, 1, 100000, 6);
    EXPECT_EQ(r.verdict, Verdict::inconclusive);
    EXPECT_LT(std::abs(r.cross_env), 5 * r.cross_se);
}

TEST(CorollaryRisk, ScalingGammaScalesRisksByFour) {
    SemConfig cfg = scalar_sem(kN1, kN2);
    const double r0 = analytic_oracle_risk(cfg, 0);
    cfg.gamma *= 2.0;
    EXPECT_NEAR(analytic_oracle_risk(cfg, 0), 4.0 * r0, 1e-15);
    const CheckReport r = check_corollary_risk_variance(cfg, 0, 1, 200000, 7);
    EXPECT_EQ(r.verdict, Verdict::confirmed) << r.summary();
    EXPECT_NEAR(r.rows[0].estimate, 4.0 * r0, 5 * r.rows[0].se);
}

TEST(CorollaryRisk, RejectsBadPairs) {
    const SemConfig cfg = scalar_sem(kN1, kN2);
    EXPECT_THROW(check_corollary_risk_variance(cfg, 0, 0, 1000, 1), std::invalid_argument);
    EXPECT_THROW(check_corollary_risk_variance(cfg, 0, 5, 1000, 1), std::out_of_range);
}

// Property: analytic and MC agree within 5 SE across the random family.
TEST(Corollaries, AnalyticMatchesMonteCarloOnRandomFamily) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const SemConfig cfg = random_sem(700 + s);
        for (std::size_t e = 0; e < cfg.envs.size(); ++e) {
            const CheckReport g = check_corollary_gradient(cfg, e, 100000, 40 + s);
            EXPECT_LT(std::abs(g.rows[0].estimate - g.rows[0].analytic), 5 * g.rows[0].se) << s;
        }
        const CheckReport r = check_corollary_risk_variance(cfg, 0, 1, 100000, 60 + s);
        for (const auto& row : r.rows) EXPECT_LT(std::abs(row.estimate - row.analytic), 5 * row.se) << s;
    }
}

TEST(DegeneratePenalty, IbErmConditionalVarianceIncludesNoise) {
    const SemConfig cfg = scalar_sem(NoiseSpec::gaussian_var(0.0, 0.04), kN2);
    const CheckReport r = check_degenerate_penalty(PenaltyKind::ib_erm, cfg, 0, 1, 200000, 8);
    EXPECT_EQ(r.verdict, Verdict::confirmed) << r.summary();
    EXPECT_DOUBLE_EQ(r.rows[0].analytic, 0.04);
    EXPECT_GE(r.rows[0].estimate, 0.04 - 3 * r.rows[0].se);
    EXPECT_NEAR(r.rows[0].estimate, 0.04, 5 * r.rows[0].se);
}

TEST(DegeneratePenalty, IbErmWithoutNoiseIsVacuous) {
    const SemConfig cfg = scalar_sem(NoiseSpec::none(), NoiseSpec::none());
    EXPECT_EQ(check_degenerate_penalty(PenaltyKind::ib_erm, cfg, 0, 1, 1000, 8).verdict, Verdict::inconclusive);
}

TEST(DegeneratePenalty, IgaIdenticalNoisesHaveNoMismatch) {
    const CheckReport r = check_degenerate_penalty(PenaltyKind::iga, scalar_sem(kN1, kN1), 0, 1, 100000, 9);
    EXPECT_EQ(r.verdict, Verdict::inconclusive);
    EXPECT_LT(std::abs(r.cross_env), 5 * r.cross_se);
}

TEST(DegeneratePenalty, IgaDistinctNoisesConfirmed) {
    const CheckReport r = check_degenerate_penalty(PenaltyKind::iga, scalar_sem(kN1, kN2), 0, 1, 200000, 9);
    EXPECT_EQ(r.verdict, Verdict::confirmed) << r.summary();
    EXPECT_NEAR(r.cross_env, 0.02, 5 * r.cross_se);
}

TEST(DegeneratePenalty, FishrMismatchGrowsWithVarianceGap) {
    double prev = 0.0;
    for (double var2 : {0.02, 0.08, 0.2}) {
        const SemConfig cfg =
            scalar_sem(NoiseSpec::gaussian_var(0.0, 0.01), NoiseSpec::gaussian_var(0.0, var2));
        const CheckReport r = check_degenerate_penalty(PenaltyKind::fishr, cfg, 0, 1, 200000, 10);
        EXPECT_EQ(r.verdict, Verdict::confirmed) << r.summary();
        const double gap = std::abs(r.cross_env);
        EXPECT_GT(gap, prev + 3 * r.cross_se) << var2;
        prev = gap;
    }
}

TEST(DegeneratePenalty, RejectsOtherPenalties) {
    EXPECT_THROW(check_degenerate_penalty(PenaltyKind::icorr, scalar_sem(kN1, kN2), 0, 1, 100, 1),
                 std::invalid_argument);
}

// Every confirmed verdict survives a change of seed.
TEST(Verdicts, StableAcrossFiveSeeds) {
    const SemConfig cfg = scalar_sem(kN1, kN2, 0.1);
    for (std::uint64_t s = 0; s < 5; ++s) {
        EXPECT_EQ(check_invariant_correlation(cfg, 100000, 1, 1000 + s).verdict, Verdict::confirmed);
        EXPECT_EQ(check_corollary_gradient(cfg, 0, 100000, 1000 + s).verdict, Verdict::confirmed);
        EXPECT_EQ(check_corollary_gradient(cfg, 1, 100000, 1000 + s).verdict, Verdict::confirmed);
        EXPECT_EQ(check_corollary_risk_variance(cfg, 0, 1, 100000, 1000 + s).verdict, Verdict::confirmed);
        for (auto k : {PenaltyKind::iga, PenaltyKind::fishr, PenaltyKind::ib_erm})
            EXPECT_EQ(check_degenerate_penalty(k, cfg, 0, 1, 100000, 1000 + s).verdict, Verdict::confirmed)
                << to_string(k);
    }
}

TEST(Reports, CsvAndSummaryLayout) {
    const SemConfig cfg = scalar_sem(kN1, kN2);
    std::vector<CheckReport> reps{check_invariant_correlation(cfg, 5000, 1, 1), check_corollary_gradient(cfg, 0, 5000, 1)};
    const std::string csv = reports_to_csv(reps).str();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "check,env,estimate,se,analytic,cross_env,cross_se,verdict");
    EXPECT_EQ(reports_to_csv(reps).rows(), 3u);
    const std::string text = reports_summary(reps);
    EXPECT_NE(text.find("== invariant_correlation"), std::string::npos);
    EXPECT_NE(text.find("S~ is the first d_inv rows"), std::string::npos);
    const std::string again = reports_to_csv({check_invariant_correlation(cfg, 5000, 1, 1)}).str();
    EXPECT_EQ(again, reports_to_csv({reps[0]}).str());
}
