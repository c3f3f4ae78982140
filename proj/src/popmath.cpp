#include "invcorr/popmath.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace invcorr {

double LinearParams::norm() const { return std::hypot(w1, w2); }
bool LinearParams::finite() const { return std::isfinite(w1) && std::isfinite(w2); }

namespace {

constexpr PenaltyKind kAllPenalties[] = {PenaltyKind::icorr, PenaltyKind::irmv1,
                                         PenaltyKind::vrex,  PenaltyKind::iga,
                                         PenaltyKind::fishr, PenaltyKind::ib_erm};

void require_two(std::span<const EnvSummary> envs) {
    if (envs.size() < 2)
        throw std::invalid_argument("penalties need at least 2 environments, got " +
                                    std::to_string(envs.size()));
}

// Population variance over environments, and its gradient given per-env
// values v_e and gradients dv_e.
struct VarianceAcc {
    double value = 0.0;
    Grad2 grad{0.0, 0.0};
};

VarianceAcc variance_over_envs(const std::vector<double>& v, const std::vector<Grad2>& dv) {
    const double m = static_cast<double>(v.size());
    double mean = 0.0;
    Grad2 dmean{0.0, 0.0};
    for (std::size_t e = 0; e < v.size(); ++e) {
        mean += v[e] / m;
        dmean[0] += dv[e][0] / m;
        dmean[1] += dv[e][1] / m;
    }
    VarianceAcc acc;
    for (std::size_t e = 0; e < v.size(); ++e) {
        const double d = v[e] - mean;
        acc.value += d * d / m;
        acc.grad[0] += 2.0 * d * (dv[e][0] - dmean[0]) / m;
        acc.grad[1] += 2.0 * d * (dv[e][1] - dmean[1]) / m;
    }
    return acc;
}

Grad2 dummy_gradient_grad(const Moments& m, LinearParams w) {
    return {2.0 * (w.w1 * m.m11 + w.w2 * m.m12) - m.m1y,
            2.0 * (w.w2 * m.m22 + w.w1 * m.m12) - m.m2y};
}

const GradientVarianceStats& fishr_stats(const EnvSummary& s) {
    if (!s.fishr)
        throw std::invalid_argument(
            "fishr penalty needs Monte-Carlo gradient statistics; summarize with fishr_mc "
            "enabled");
    return *s.fishr;
}

// d Var_k / d w for the quadratic form Var_k = u'A_k u - (u.B_k)^2.
std::array<Grad2, 2> gradient_variance_grads(const GradientVarianceStats& s, LinearParams w) {
    const std::array<double, 3> u{w.w1, w.w2, -1.0};
    std::array<Grad2, 2> out{};
    for (int k = 0; k < 2; ++k) {
        double ub = 0.0;
        for (int i = 0; i < 3; ++i) ub += u[i] * s.lin[k][i];
        for (int i = 0; i < 2; ++i) {
            double au = 0.0;
            for (int j = 0; j < 3; ++j) au += s.quad[k][i][j] * u[j];
            out[k][i] = 2.0 * au - 2.0 * ub * s.lin[k][i];
        }
    }
    return out;
}

// 4 * mean_e |v_e - mean v|^2 over vector-valued per-env summaries.
VarianceAcc spread_of_vectors(const std::vector<Grad2>& v, const std::vector<std::array<Grad2, 2>>& dv) {
    VarianceAcc total;
    for (int k = 0; k < 2; ++k) {
        std::vector<double> comp(v.size());
        std::vector<Grad2> dcomp(v.size());
        for (std::size_t e = 0; e < v.size(); ++e) {
            comp[e] = v[e][k];
            dcomp[e] = dv[e][k];
        }
        const VarianceAcc part = variance_over_envs(comp, dcomp);
        total.value += 4.0 * part.value;
        total.grad[0] += 4.0 * part.grad[0];
        total.grad[1] += 4.0 * part.grad[1];
    }
    return total;
}

VarianceAcc evaluate_penalty(PenaltyKind kind, std::span<const EnvSummary> envs, LinearParams w) {
    require_two(envs);
    const std::size_t m = envs.size();
    switch (kind) {
        case PenaltyKind::icorr: {
            std::vector<double> v(m);
            std::vector<Grad2> dv(m);
            for (std::size_t e = 0; e < m; ++e) {
                const Moments& mo = envs[e].moments;
                v[e] = population_correlation(mo, w);
                dv[e] = {mo.m1y - mo.m1 * mo.my, mo.m2y - mo.m2 * mo.my};
            }
            return variance_over_envs(v, dv);
        }
        case PenaltyKind::vrex: {
            std::vector<double> v(m);
            std::vector<Grad2> dv(m);
            for (std::size_t e = 0; e < m; ++e) {
                v[e] = population_risk(envs[e].moments, w);
                dv[e] = risk_gradient(envs[e].moments, w);
            }
            return variance_over_envs(v, dv);
        }
        case PenaltyKind::irmv1: {
            VarianceAcc acc;
            for (const auto& s : envs) {
                const double d = population_dummy_gradient(s.moments, w);
                const Grad2 dd = dummy_gradient_grad(s.moments, w);
                acc.value += d * d;
                acc.grad[0] += 2.0 * d * dd[0];
                acc.grad[1] += 2.0 * d * dd[1];
            }
            return acc;
        }
        case PenaltyKind::iga: {
            std::vector<Grad2> g(m);
            std::vector<std::array<Grad2, 2>> dg(m);
            for (std::size_t e = 0; e < m; ++e) {
                const Moments& mo = envs[e].moments;
                g[e] = risk_gradient(mo, w);
                dg[e] = {Grad2{mo.m11, mo.m12}, Grad2{mo.m12, mo.m22}};
            }
            return spread_of_vectors(g, dg);
        }
        case PenaltyKind::fishr: {
            std::vector<Grad2> v(m);
            std::vector<std::array<Grad2, 2>> dv(m);
            for (std::size_t e = 0; e < m; ++e) {
                const auto& st = fishr_stats(envs[e]);
                const auto var = gradient_variances(st, w);
                v[e] = {var[0], var[1]};
                dv[e] = gradient_variance_grads(st, w);
            }
            return spread_of_vectors(v, dv);
        }
        case PenaltyKind::ib_erm: {
            VarianceAcc acc;
            for (const auto& s : envs) {
                for (const auto& c : s.conditional_cov) {
                    acc.value += w.w1 * w.w1 * c[0] + 2.0 * w.w1 * w.w2 * c[1] + w.w2 * w.w2 * c[2];
                    acc.grad[0] += 2.0 * (w.w1 * c[0] + w.w2 * c[1]);
                    acc.grad[1] += 2.0 * (w.w2 * c[2] + w.w1 * c[1]);
                }
            }
            return acc;
        }
    }
    throw std::logic_error("unhandled penalty kind");
}

}  // namespace

std::string_view to_string(PenaltyKind kind) {
    switch (kind) {
        case PenaltyKind::icorr: return "icorr";
        case PenaltyKind::irmv1: return "irmv1";
        case PenaltyKind::vrex: return "vrex";
        case PenaltyKind::iga: return "iga";
        case PenaltyKind::fishr: return "fishr";
        case PenaltyKind::ib_erm: return "ib_erm";
    }
    return "?";
}

std::span<const PenaltyKind> all_penalties() { return kAllPenalties; }

std::string penalty_names() {
    std::string out;
    for (auto k : kAllPenalties) {
        if (!out.empty()) out += ", ";
        out += to_string(k);
    }
    return out;
}

PenaltyKind parse_penalty(std::string_view name) {
    for (auto k : kAllPenalties)
        if (to_string(k) == name) return k;
    if (name == "ib-erm") return PenaltyKind::ib_erm;
    throw std::invalid_argument("unknown penalty '" + std::string(name) +
                                "'; valid: " + penalty_names());
}

GradientVarianceStats gradient_variance_stats(const Dataset& data) {
    if (data.empty()) throw std::invalid_argument("gradient_variance_stats: empty dataset");
    GradientVarianceStats s;
    const double inv_n = 1.0 / static_cast<double>(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::array<double, 3> z{data.x1[i], data.x2[i], data.y[i]};
        for (int k = 0; k < 2; ++k) {
            const double xk = z[k];
            const double xk2 = xk * xk;
            for (int a = 0; a < 3; ++a) {
                s.lin[k][a] += z[a] * xk * inv_n;
                for (int b = a; b < 3; ++b) s.quad[k][a][b] += z[a] * z[b] * xk2 * inv_n;
            }
        }
    }
    for (int k = 0; k < 2; ++k)
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < a; ++b) s.quad[k][a][b] = s.quad[k][b][a];
    s.samples = data.size();
    return s;
}

EnvSummary summarize(const Dataset& data) {
    EnvSummary s;
    s.moments = empirical_moments(data);
    for (int cls = 0; cls < 2; ++cls) {
        const double label = cls == 0 ? -1.0 : 1.0;
        double n = 0, s1 = 0, s2 = 0, s11 = 0, s12 = 0, s22 = 0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if ((data.y[i] > 0) != (label > 0)) continue;
            const double a = data.x1[i], b = data.x2[i];
            n += 1;
            s1 += a;
            s2 += b;
            s11 += a * a;
            s12 += a * b;
            s22 += b * b;
        }
        if (n == 0) continue;
        const double m1 = s1 / n, m2 = s2 / n;
        s.conditional_cov[cls] = {s11 / n - m1 * m1, s12 / n - m1 * m2, s22 / n - m2 * m2};
    }
    s.fishr = gradient_variance_stats(data);
    return s;
}

EnvSummary summarize(const EnvironmentSpec& env, const SummaryOptions& opts) {
    env.validate();
    const bool closed_form = env.noise.kind == NoiseKind::none || env.noise.kind == NoiseKind::gaussian;
    if (!closed_form) {
        if (!opts.fishr_mc) throw NoClosedForm(env.noise.kind);
        return summarize(sample_two_bit(env, opts.fishr_samples, opts.seed));
    }
    EnvSummary s;
    s.moments = two_bit_moments(env);
    const double a = env.a(), b = env.b(), var = env.noise.variance();
    for (auto& c : s.conditional_cov) c = {1.0 - a * a + var, var, 1.0 - b * b + var};
    if (opts.fishr_mc) s.fishr = gradient_variance_stats(sample_two_bit(env, opts.fishr_samples, opts.seed));
    return s;
}

std::vector<EnvSummary> summarize_all(std::span<const EnvironmentSpec> envs,
                                      const SummaryOptions& opts) {
    std::vector<EnvSummary> out;
    out.reserve(envs.size());
    for (const auto& e : envs) out.push_back(summarize(e, opts));
    return out;
}

double population_risk(const Moments& m, LinearParams w) {
    return 0.5 * (w.w1 * w.w1 * m.m11 + w.w2 * w.w2 * m.m22 + 2.0 * w.w1 * w.w2 * m.m12 -
                  2.0 * w.w1 * m.m1y - 2.0 * w.w2 * m.m2y + m.myy);
}

Grad2 risk_gradient(const Moments& m, LinearParams w) {
    return {w.w1 * m.m11 + w.w2 * m.m12 - m.m1y, w.w2 * m.m22 + w.w1 * m.m12 - m.m2y};
}

double population_correlation(const Moments& m, LinearParams w) {
    return w.w1 * (m.m1y - m.m1 * m.my) + w.w2 * (m.m2y - m.m2 * m.my);
}

double population_correlation_uncentered(const Moments& m, LinearParams w) {
    return w.w1 * m.m1y + w.w2 * m.m2y;
}

double population_dummy_gradient(const Moments& m, LinearParams w) {
    return w.w1 * w.w1 * m.m11 + 2.0 * w.w1 * w.w2 * m.m12 + w.w2 * w.w2 * m.m22 -
           w.w1 * m.m1y - w.w2 * m.m2y;
}

std::array<double, 2> conditional_output_variance(const EnvSummary& s, LinearParams w) {
    std::array<double, 2> out{};
    for (int cls = 0; cls < 2; ++cls) {
        const auto& c = s.conditional_cov[cls];
        out[cls] = w.w1 * w.w1 * c[0] + 2.0 * w.w1 * w.w2 * c[1] + w.w2 * w.w2 * c[2];
    }
    return out;
}

std::array<double, 2> gradient_variances(const GradientVarianceStats& s, LinearParams w) {
    const std::array<double, 3> u{w.w1, w.w2, -1.0};
    std::array<double, 2> out{};
    for (int k = 0; k < 2; ++k) {
        double quad = 0.0, ub = 0.0;
        for (int i = 0; i < 3; ++i) {
            ub += u[i] * s.lin[k][i];
            for (int j = 0; j < 3; ++j) quad += u[i] * s.quad[k][i][j] * u[j];
        }
        out[k] = quad - ub * ub;
    }
    return out;
}

double training_risk(std::span<const EnvSummary> envs, LinearParams w) {
    double total = 0.0;
    for (const auto& s : envs) total += population_risk(s.moments, w);
    return total;
}

Grad2 training_risk_gradient(std::span<const EnvSummary> envs, LinearParams w) {
    Grad2 g{0.0, 0.0};
    for (const auto& s : envs) {
        const Grad2 ge = risk_gradient(s.moments, w);
        g[0] += ge[0];
        g[1] += ge[1];
    }
    return g;
}

double penalty_value(PenaltyKind kind, std::span<const EnvSummary> envs, LinearParams w) {
    // Rounding can push an exact zero variance a hair negative.
    return std::max(0.0, evaluate_penalty(kind, envs, w).value);
}

Grad2 penalty_gradient(PenaltyKind kind, std::span<const EnvSummary> envs, LinearParams w) {
    return evaluate_penalty(kind, envs, w).grad;
}

double normalized_objective(const Objective& obj, std::span<const EnvSummary> envs,
                            LinearParams w) {
    if (obj.is_constraint() || !(obj.lambda >= 0.0))
        throw std::invalid_argument("objective lambda must be finite and >= 0");
    const double risk = training_risk(envs, w);
    if (obj.lambda == 0.0) return risk;
    return (risk + obj.lambda * evaluate_penalty(obj.penalty, envs, w).value) / (1.0 + obj.lambda);
}

Grad2 normalized_objective_gradient(const Objective& obj, std::span<const EnvSummary> envs,
                                    LinearParams w) {
    if (obj.is_constraint() || !(obj.lambda >= 0.0))
        throw std::invalid_argument("objective lambda must be finite and >= 0");
    Grad2 g = training_risk_gradient(envs, w);
    if (obj.lambda == 0.0) return g;
    const Grad2 p = evaluate_penalty(obj.penalty, envs, w).grad;
    const double scale = 1.0 / (1.0 + obj.lambda);
    return {(g[0] + obj.lambda * p[0]) * scale, (g[1] + obj.lambda * p[1]) * scale};
}

}  // namespace invcorr
