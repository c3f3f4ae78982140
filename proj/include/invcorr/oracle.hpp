#pragma once

#include <map>
#include <string>
#include <vector>

#include "invcorr/csv.hpp"
#include "invcorr/popmath.hpp"

namespace invcorr {

/// One-parameter line {w[fixed_coord] = fixed_value, other coordinate free}.
struct SolutionFamily {
    int fixed_coord = 1;  // 0 -> w1 fixed, 1 -> w2 fixed
    double fixed_value = 0.0;

    bool contains(LinearParams w, double tol = 1e-12) const;
    LinearParams at(double free_value) const;
};

struct SolutionSet {
    std::vector<LinearParams> isolated;
    std::vector<SolutionFamily> families;

    bool empty() const { return isolated.empty() && families.empty(); }
};

/// Exact minimizer of the summed training risk along a family.
LinearParams family_minimizer(const SolutionFamily& fam, std::span<const EnvSummary> envs);

/// Constraint-mode solution sets for a two-environment pair sharing alpha
/// with distinct beta. A pair is "clean" when both noises are none and
/// "noisy" when both are gaussian and differ; anything else throws.
SolutionSet irmv1_solution_set(std::span<const EnvironmentSpec> envs);
SolutionSet vrex_solution_set(std::span<const EnvironmentSpec> envs);
SolutionSet icorr_solution_set(std::span<const EnvironmentSpec> envs);
/// IGA, Fishr and IB-ERM; only the noisy pair has a closed form.
std::map<PenaltyKind, SolutionSet> degenerate_solution_sets(std::span<const EnvironmentSpec> envs);
SolutionSet solution_set(PenaltyKind kind, std::span<const EnvironmentSpec> envs);

/// Member with the least sum of training risks; ties go to smaller norm,
/// then smaller w2.
LinearParams select_min_training_risk(const SolutionSet& set, std::span<const EnvSummary> envs);

/// Exact least squares on the summed normal equations.
LinearParams erm_solution(std::span<const EnvSummary> envs);

/// The invariant predictor: best weight on x1 alone.
LinearParams oracle_solution(std::span<const EnvSummary> envs);

enum class TableMethod { oracle, erm, irmv1_inf, vrex_inf, icorr_inf, iga_inf, fishr_inf, ib_erm_inf };

std::string to_string(TableMethod m);
TableMethod parse_table_method(const std::string& name);

struct RiskRow {
    std::string method;
    EnvironmentSpec eval;
    double risk = 0.0;
};

struct RiskTable {
    std::vector<RiskRow> rows;

    /// Risk of `method` on eval row `index` (in insertion order per method).
    double at(const std::string& method, std::size_t index) const;
    std::vector<double> column(const std::string& method) const;
    CsvTable to_csv() const;
};

struct LabeledPredictor {
    std::string label;
    LinearParams w;
};

LinearParams method_solution(TableMethod method, std::span<const EnvironmentSpec> train_envs);

RiskTable evaluate_predictors(const std::vector<LabeledPredictor>& predictors,
                              std::span<const EnvironmentSpec> eval_envs);

RiskTable reproduce_risk_table(const std::vector<TableMethod>& methods,
                               std::span<const EnvironmentSpec> train_envs,
                               std::span<const EnvironmentSpec> eval_envs);

/// Every nonzero w with zero dummy gradient in both environments, found by
/// a polar scan. Used to audit the isolated-point claims above.
std::vector<LinearParams> irmv1_common_roots(const Moments& e1, const Moments& e2);

}  // namespace invcorr
