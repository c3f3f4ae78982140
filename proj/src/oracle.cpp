#include "invcorr/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace invcorr {

namespace {

enum class PairKind { clean, noisy };

PairKind classify_pair(std::span<const EnvironmentSpec> envs) {
    if (envs.size() != 2)
        throw std::invalid_argument("closed-form solution sets need exactly 2 environments");
    const auto& e1 = envs[0];
    const auto& e2 = envs[1];
    e1.validate();
    e2.validate();
    if (e1.alpha != e2.alpha)
        throw std::invalid_argument("closed-form solution sets need a shared alpha");
    if (e1.beta == e2.beta)
        throw std::invalid_argument("degenerate pair: both environments have beta = " +
                                    format_real(e1.beta));
    const auto k1 = e1.noise.kind, k2 = e2.noise.kind;
    if (k1 == NoiseKind::none && k2 == NoiseKind::none) return PairKind::clean;
    if (k1 == NoiseKind::gaussian && k2 == NoiseKind::gaussian && !(e1.noise == e2.noise))
        return PairKind::noisy;
    throw std::invalid_argument("no closed form for the pair " + describe(e1) + " / " +
                                describe(e2) + "; use the sweep trainer");
}

double origin_norm_tiebreak(LinearParams w) { return w.norm(); }

}  // namespace

bool SolutionFamily::contains(LinearParams w, double tol) const {
    const double v = fixed_coord == 0 ? w.w1 : w.w2;
    return std::abs(v - fixed_value) <= tol;
}

LinearParams SolutionFamily::at(double free_value) const {
    return fixed_coord == 0 ? LinearParams{fixed_value, free_value}
                            : LinearParams{free_value, fixed_value};
}

LinearParams family_minimizer(const SolutionFamily& fam, std::span<const EnvSummary> envs) {
    // d/dt of sum_e R_e along the family is linear in the free coordinate t.
    double curvature = 0.0, slope_at_zero = 0.0;
    for (const auto& s : envs) {
        const Moments& m = s.moments;
        if (fam.fixed_coord == 1) {
            curvature += m.m11;
            slope_at_zero += m.m12 * fam.fixed_value - m.m1y;
        } else {
            curvature += m.m22;
            slope_at_zero += m.m12 * fam.fixed_value - m.m2y;
        }
    }
    if (curvature <= 0.0) throw std::domain_error("family risk is not strictly convex");
    return fam.at(-slope_at_zero / curvature);
}

SolutionSet irmv1_solution_set(std::span<const EnvironmentSpec> envs) {
    SolutionSet set;
    if (classify_pair(envs) == PairKind::noisy) {
        set.isolated.push_back({0.0, 0.0});
        return set;
    }
    const double a = envs[0].a();
    set.isolated.push_back({0.0, 0.0});
    if (a != 0.0) set.isolated.push_back({a, 0.0});
    if (a * a > 0.5) {
        const double w1 = 1.0 / (2.0 * a);
        const double w2 = std::sqrt(0.5 - 1.0 / (4.0 * a * a));
        set.isolated.push_back({w1, w2});
        set.isolated.push_back({w1, -w2});
    }
    return set;
}

SolutionSet vrex_solution_set(std::span<const EnvironmentSpec> envs) {
    SolutionSet set;
    if (classify_pair(envs) == PairKind::noisy) {
        set.isolated.push_back({0.0, 0.0});
        return set;
    }
    const double a = envs[0].a();
    if (a != 0.0) set.families.push_back({0, 1.0 / a});
    set.families.push_back({1, 0.0});
    return set;
}

SolutionSet icorr_solution_set(std::span<const EnvironmentSpec> envs) {
    classify_pair(envs);
    SolutionSet set;
    set.families.push_back({1, 0.0});
    return set;
}

std::map<PenaltyKind, SolutionSet> degenerate_solution_sets(std::span<const EnvironmentSpec> envs) {
    if (classify_pair(envs) == PairKind::clean)
        throw std::invalid_argument(
            "constraint-mode solutions of iga/fishr/ib_erm are not derived for clean pairs; "
            "use the sweep trainer");
    std::map<PenaltyKind, SolutionSet> out;
    for (auto k : {PenaltyKind::iga, PenaltyKind::fishr, PenaltyKind::ib_erm})
        out[k].isolated.push_back({0.0, 0.0});
    return out;
}

SolutionSet solution_set(PenaltyKind kind, std::span<const EnvironmentSpec> envs) {
    switch (kind) {
        case PenaltyKind::irmv1: return irmv1_solution_set(envs);
        case PenaltyKind::vrex: return vrex_solution_set(envs);
        case PenaltyKind::icorr: return icorr_solution_set(envs);
        default: return degenerate_solution_sets(envs).at(kind);
    }
}

LinearParams select_min_training_risk(const SolutionSet& set, std::span<const EnvSummary> envs) {
    if (set.empty()) throw std::invalid_argument("select_min_training_risk: empty solution set");
    std::vector<LinearParams> candidates = set.isolated;
    for (const auto& fam : set.families) candidates.push_back(family_minimizer(fam, envs));

    LinearParams best = candidates.front();
    double best_risk = training_risk(envs, best);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const LinearParams c = candidates[i];
        const double r = training_risk(envs, c);
        const double tol = 1e-12 * std::max(1.0, std::abs(best_risk));
        bool take = r < best_risk - tol;
        if (!take && std::abs(r - best_risk) <= tol) {
            const double nc = origin_norm_tiebreak(c), nb = origin_norm_tiebreak(best);
            take = nc < nb - 1e-12 || (std::abs(nc - nb) <= 1e-12 && c.w2 < best.w2);
        }
        if (take) {
            best = c;
            best_risk = r;
        }
    }
    return best;
}

LinearParams erm_solution(std::span<const EnvSummary> envs) {
    double h11 = 0, h12 = 0, h22 = 0, c1 = 0, c2 = 0;
    for (const auto& s : envs) {
        h11 += s.moments.m11;
        h12 += s.moments.m12;
        h22 += s.moments.m22;
        c1 += s.moments.m1y;
        c2 += s.moments.m2y;
    }
    const double det = h11 * h22 - h12 * h12;
    if (std::abs(det) <= 1e-14 * std::max(1.0, h11 * h22))
        throw std::domain_error("ERM normal equations are singular");
    return {(h22 * c1 - h12 * c2) / det, (h11 * c2 - h12 * c1) / det};
}

LinearParams oracle_solution(std::span<const EnvSummary> envs) {
    return family_minimizer({1, 0.0}, envs);
}

std::string to_string(TableMethod m) {
    switch (m) {
        case TableMethod::oracle: return "oracle";
        case TableMethod::erm: return "erm";
        case TableMethod::irmv1_inf: return "irmv1_inf";
        case TableMethod::vrex_inf: return "vrex_inf";
        case TableMethod::icorr_inf: return "icorr_inf";
        case TableMethod::iga_inf: return "iga_inf";
        case TableMethod::fishr_inf: return "fishr_inf";
        case TableMethod::ib_erm_inf: return "ib_erm_inf";
    }
    return "?";
}

TableMethod parse_table_method(const std::string& name) {
    for (auto m : {TableMethod::oracle, TableMethod::erm, TableMethod::irmv1_inf,
                   TableMethod::vrex_inf, TableMethod::icorr_inf, TableMethod::iga_inf,
                   TableMethod::fishr_inf, TableMethod::ib_erm_inf})
        if (to_string(m) == name) return m;
    throw std::invalid_argument("unknown table method '" + name + "'");
}

double RiskTable::at(const std::string& method, std::size_t index) const {
    const auto col = column(method);
    if (index >= col.size())
        throw std::out_of_range("risk table has no row " + std::to_string(index) + " for " +
                                method);
    return col[index];
}

std::vector<double> RiskTable::column(const std::string& method) const {
    std::vector<double> out;
    for (const auto& r : rows)
        if (r.method == method) out.push_back(r.risk);
    return out;
}

CsvTable RiskTable::to_csv() const {
    CsvTable t({"method", "alpha", "beta", "noise_mean", "noise_var", "risk"});
    for (const auto& r : rows)
        t.add_row({r.method, format_real(r.eval.alpha), format_real(r.eval.beta),
                   format_real(r.eval.noise.mean), format_real(r.eval.noise.variance()),
                   format_real(r.risk)});
    return t;
}

LinearParams method_solution(TableMethod method, std::span<const EnvironmentSpec> train_envs) {
    const auto summaries = summarize_all(train_envs);
    switch (method) {
        case TableMethod::oracle: return oracle_solution(summaries);
        case TableMethod::erm: return erm_solution(summaries);
        case TableMethod::irmv1_inf:
            return select_min_training_risk(irmv1_solution_set(train_envs), summaries);
        case TableMethod::vrex_inf:
            return select_min_training_risk(vrex_solution_set(train_envs), summaries);
        case TableMethod::icorr_inf:
            return select_min_training_risk(icorr_solution_set(train_envs), summaries);
        case TableMethod::iga_inf:
            return select_min_training_risk(solution_set(PenaltyKind::iga, train_envs), summaries);
        case TableMethod::fishr_inf:
            return select_min_training_risk(solution_set(PenaltyKind::fishr, train_envs),
                                            summaries);
        case TableMethod::ib_erm_inf:
            return select_min_training_risk(solution_set(PenaltyKind::ib_erm, train_envs),
                                            summaries);
    }
    throw std::logic_error("unhandled table method");
}

RiskTable evaluate_predictors(const std::vector<LabeledPredictor>& predictors,
                              std::span<const EnvironmentSpec> eval_envs) {
    RiskTable table;
    std::vector<Moments> moments;
    for (const auto& e : eval_envs) moments.push_back(two_bit_moments(e));
    for (const auto& p : predictors)
        for (std::size_t i = 0; i < eval_envs.size(); ++i)
            table.rows.push_back({p.label, eval_envs[i], population_risk(moments[i], p.w)});
    return table;
}

RiskTable reproduce_risk_table(const std::vector<TableMethod>& methods,
                               std::span<const EnvironmentSpec> train_envs,
                               std::span<const EnvironmentSpec> eval_envs) {
    std::vector<LabeledPredictor> predictors;
    for (auto m : methods) predictors.push_back({to_string(m), method_solution(m, train_envs)});
    return evaluate_predictors(predictors, eval_envs);
}

std::vector<LinearParams> irmv1_common_roots(const Moments& e1, const Moments& e2) {
    // On the ray w = r u(theta), d_e = r^2 q_e - r l_e, so a shared nonzero
    // root needs l1 q2 - l2 q1 = 0 and then r = l1 / q1.
    auto quad = [](const Moments& m, double c, double s) {
        return m.m11 * c * c + 2.0 * m.m12 * c * s + m.m22 * s * s;
    };
    auto lin = [](const Moments& m, double c, double s) { return m.m1y * c + m.m2y * s; };
    auto h = [&](double t) {
        const double c = std::cos(t), s = std::sin(t);
        return lin(e1, c, s) * quad(e2, c, s) - lin(e2, c, s) * quad(e1, c, s);
    };

    constexpr int kSteps = 20000;
    const double pi = std::numbers::pi;
    double hmax = 0.0;
    for (int i = 0; i < kSteps; ++i) hmax = std::max(hmax, std::abs(h(pi * i / kSteps)));
    if (hmax < 1e-13) throw std::invalid_argument("environments coincide: root set is a curve");

    auto bisect = [&](double lo, double hi, double hlo) {
        for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double hm = h(mid);
            if ((hm < 0.0) == (hlo < 0.0)) {
                lo = mid;
                hlo = hm;
            } else {
                hi = mid;
            }
        }
        return 0.5 * (lo + hi);
    };

    // theta = pi is the same line as theta = 0, so a sign change in the last
    // cell that lands on pi is not a new root.
    std::vector<double> thetas;
    double t0 = 0.0, h0 = h(0.0);
    for (int i = 1; i <= kSteps; ++i) {
        const double t1 = pi * i / kSteps;
        const double h1 = h(t1);
        if (h0 == 0.0) {
            thetas.push_back(t0);
        } else if (h1 != 0.0 && (h0 < 0.0) != (h1 < 0.0)) {
            const double t = bisect(t0, t1, h0);
            if (pi - t > 1e-9) thetas.push_back(t);
        }
        t0 = t1;
        h0 = h1;
    }

    std::vector<LinearParams> roots;
    for (double t : thetas) {
        const double c = std::cos(t), s = std::sin(t);
        const double q = quad(e1, c, s);
        const double r = lin(e1, c, s) / q;
        if (std::abs(r) < 1e-12) continue;
        const LinearParams w{r * c, r * s};
        const bool dup = std::any_of(roots.begin(), roots.end(), [&](LinearParams o) {
            return std::hypot(o.w1 - w.w1, o.w2 - w.w2) < 1e-9;
        });
        if (!dup) roots.push_back(w);
    }
    std::sort(roots.begin(), roots.end(),
              [](LinearParams x, LinearParams y) { return x.w1 < y.w1; });
    return roots;
}

}  // namespace invcorr
