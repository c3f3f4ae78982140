#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "invcorr/csv.hpp"
#include "invcorr/popmath.hpp"
#include "invcorr/sem.hpp"

namespace invcorr {

enum class Verdict { confirmed, violated, inconclusive };

std::string_view to_string(Verdict v);

struct CheckRow {
    std::string env;
    double estimate = 0.0;
    double se = 0.0;
    double analytic = 0.0;  // NaN when no closed form is reported
};

/// Result of one check. Every claim is tested at 3 Monte-Carlo standard
/// errors: "nonzero" means the estimate clears 3 SE, "matches" means the
/// estimate is within 3 SE of the analytic value.
struct CheckReport {
    std::string check;
    std::vector<std::string> notes;  // assumptions printed above the summary
    std::vector<CheckRow> rows;
    double cross_env = 0.0;
    double cross_se = 0.0;
    Verdict verdict = Verdict::inconclusive;
    std::string message;

    std::string summary() const;
};

/// check, env, estimate, se, analytic, cross_env, cross_se, verdict
CsvTable reports_to_csv(const std::vector<CheckReport>& reports);
std::string reports_summary(const std::vector<CheckReport>& reports);

/// Fixes f to the oracle gamma' S~ x and estimates rho_e = Cov(f, y) in
/// every environment from n * reps draws. Confirmed iff each rho_e is
/// within 3 SE of |gamma|^2 and the chi-square homogeneity statistic
/// across environments stays below its 3-sigma quantile.
CheckReport check_invariant_correlation(const SemConfig& cfg, std::size_t n, std::size_t reps, std::uint64_t seed);

/// E[(f - y) f] for the oracle in one environment, against
/// (gamma'mu)^2 + gamma'Sigma gamma + (gamma'mu)(gamma'E[x_inv_hat]).
CheckReport check_corollary_gradient(const SemConfig& cfg, std::size_t env, std::size_t n,
                                     std::uint64_t seed);

/// Oracle risks in two environments against
/// 1/2 ((gamma'mu)^2 + gamma'Sigma gamma + Var eta_y), plus their difference.
CheckReport check_corollary_risk_variance(const SemConfig& cfg, std::size_t e1, std::size_t e2,
                                          std::size_t n, std::uint64_t seed);

/// iga: difference of the oracle's dummy gradients; fishr: difference of
/// per-sample gradient variances; ib_erm: Var(f | sign y) per environment.
CheckReport check_degenerate_penalty(PenaltyKind kind, const SemConfig& cfg, std::size_t e1, std::size_t e2,
                             std::size_t n, std::uint64_t seed);

/// Closed forms used by the checks, exposed for tests.
double analytic_dummy_gradient(const SemConfig& cfg, std::size_t env);
double analytic_oracle_risk(const SemConfig& cfg, std::size_t env);

}  // namespace invcorr
