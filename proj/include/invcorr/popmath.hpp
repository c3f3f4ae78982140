#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "invcorr/envs.hpp"

namespace invcorr {

/// Weights of f = w1 * x1 + w2 * x2.
struct LinearParams {
    double w1 = 0.0;
    double w2 = 0.0;

    double operator()(double x1, double x2) const { return w1 * x1 + w2 * x2; }
    double norm() const;
    bool finite() const;

    friend bool operator==(const LinearParams&, const LinearParams&) = default;
};

using Grad2 = std::array<double, 2>;

enum class PenaltyKind { icorr, irmv1, vrex, iga, fishr, ib_erm };

std::string_view to_string(PenaltyKind kind);
/// Throws std::invalid_argument listing the valid names.
PenaltyKind parse_penalty(std::string_view name);
std::span<const PenaltyKind> all_penalties();
std::string penalty_names();

/// lambda = +infinity marks constraint mode; only the oracle consumes it.
struct Objective {
    PenaltyKind penalty = PenaltyKind::icorr;
    double lambda = 0.0;

    static constexpr double infinite = std::numeric_limits<double>::infinity();
    bool is_constraint() const { return lambda == infinite; }
};

/// Plug-in fourth-order statistics of z = (x1, x2, y) weighted by x_k^2, from
/// which Var(r * x_k) with r = w'x - y is an exact quadratic form in (w, -1).
struct GradientVarianceStats {
    std::array<std::array<std::array<double, 3>, 3>, 2> quad{};  // E[z_i z_j x_k^2]
    std::array<std::array<double, 3>, 2> lin{};                  // E[z_i x_k]
    std::size_t samples = 0;
};

GradientVarianceStats gradient_variance_stats(const Dataset& data);

/// Everything the penalties need to know about one environment.
struct EnvSummary {
    Moments moments;
    /// Cov(x | y = -1) and Cov(x | y = +1), each {c11, c12, c22}.
    std::array<std::array<double, 3>, 2> conditional_cov{};
    std::optional<GradientVarianceStats> fishr;
};

struct SummaryOptions {
    /// Attach the fixed-seed Monte-Carlo statistics used by the Fishr penalty.
    bool fishr_mc = false;
    std::size_t fishr_samples = 1'000'000;
    std::uint64_t seed = 20240611;
};

/// Exact moments (none/gaussian noise) plus optional Fishr MC statistics.
EnvSummary summarize(const EnvironmentSpec& env, const SummaryOptions& opts = {});
/// Plug-in summary of a finite sample.
EnvSummary summarize(const Dataset& data);
std::vector<EnvSummary> summarize_all(std::span<const EnvironmentSpec> envs,
                                      const SummaryOptions& opts = {});

double population_risk(const Moments& m, LinearParams w);
Grad2 risk_gradient(const Moments& m, LinearParams w);
/// E[(f - E f) y].
double population_correlation(const Moments& m, LinearParams w);
/// E[f y]; equals the centered value whenever E[y] = 0.
double population_correlation_uncentered(const Moments& m, LinearParams w);
/// dR/dv at v = 1, i.e. E[(f - y) f].
double population_dummy_gradient(const Moments& m, LinearParams w);
/// Var(f | y) for y = -1 (index 0) and y = +1 (index 1).
std::array<double, 2> conditional_output_variance(const EnvSummary& s, LinearParams w);
/// Var(r x1), Var(r x2) of the per-sample gradient.
std::array<double, 2> gradient_variances(const GradientVarianceStats& s, LinearParams w);

double training_risk(std::span<const EnvSummary> envs, LinearParams w);
Grad2 training_risk_gradient(std::span<const EnvSummary> envs, LinearParams w);

/// Cross-environment penalties. Variances across environments divide by m.
/// IGA and Fishr use 4 * mean_e |g_e - mean g|^2, which is the pairwise
/// squared distance |g_1 - g_2|^2 when m = 2.
double penalty_value(PenaltyKind kind, std::span<const EnvSummary> envs, LinearParams w);
Grad2 penalty_gradient(PenaltyKind kind, std::span<const EnvSummary> envs, LinearParams w);

/// (sum_e R_e + lambda * P) / (1 + lambda). Same minimizers as the
/// unnormalized objective, but bounded scale for every finite lambda.
double normalized_objective(const Objective& obj, std::span<const EnvSummary> envs,
                            LinearParams w);
Grad2 normalized_objective_gradient(const Objective& obj, std::span<const EnvSummary> envs,
                                    LinearParams w);

}  // namespace invcorr
