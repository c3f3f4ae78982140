#include "invcorr/causal_verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

#include "invcorr/rng.hpp"

namespace invcorr {

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::confirmed: return "confirmed";
        case Verdict::violated: return "violated";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

namespace {

constexpr double kSigmas = 3.0;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::size_t kChunk = 1 << 16;

const char* kUnmixNote = "S~ is the first d_inv rows of S^-1 (square invertible S only)";

struct OracleDraw {
    std::vector<double> f, y;
};

// Oracle outputs f = gamma' S~ x and labels for n draws from one env. Chunks
// get their own derived seeds so memory stays bounded by the output.
OracleDraw draw_oracle(const SemConfig& cfg, std::size_t env, std::size_t n, std::uint64_t seed) {
    cfg.validate();
    if (env >= cfg.envs.size()) throw std::out_of_range("SEM env index out of range");
    if (n < 2) throw std::invalid_argument("checks need n >= 2");
    const Eigen::VectorXd w = cfg.unmix().transpose() * cfg.gamma;
    OracleDraw out;
    out.f.reserve(n);
    out.y.reserve(n);
    for (std::size_t start = 0, chunk = 0; start < n; start += kChunk, ++chunk) {
        const std::size_t m = std::min(kChunk, n - start);
        const SemSample s = sem_generate(cfg, env, m, derive_seed(seed, chunk));
        const Eigen::VectorXd f = s.x * w;
        for (Eigen::Index i = 0; i < f.size(); ++i) {
            out.f.push_back(f(i));
            out.y.push_back(s.y(i));
        }
    }
    return out;
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

template <class F>
MeanSe mean_se(std::size_t n, F&& value) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += value(i);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = value(i) - mean;
        ss += d * d;
    }
    const double var = ss / static_cast<double>(n - 1);
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

double average(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

MeanSe covariance(const OracleDraw& d) {
    const double fbar = average(d.f), ybar = average(d.y);
    return mean_se(d.f.size(), [&](std::size_t i) { return (d.f[i] - fbar) * (d.y[i] - ybar); });
}

MeanSe dummy_gradient(const OracleDraw& d) {
    return mean_se(d.f.size(), [&](std::size_t i) { return (d.f[i] - d.y[i]) * d.f[i]; });
}

MeanSe risk(const OracleDraw& d) {
    return mean_se(d.f.size(), [&](std::size_t i) {
        const double r = d.f[i] - d.y[i];
        return 0.5 * r * r;
    });
}

MeanSe gradient_variance(const OracleDraw& d) {
    std::vector<double> g(d.f.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (d.f[i] - d.y[i]) * d.f[i];
    const double gbar = average(g);
    return mean_se(g.size(), [&](std::size_t i) { return (g[i] - gbar) * (g[i] - gbar); });
}

// Average over the two label classes of Var(f | sign y).
MeanSe conditional_variance(const OracleDraw& d) {
    MeanSe out;
    for (bool positive : {true, false}) {
        std::vector<double> f;
        for (std::size_t i = 0; i < d.f.size(); ++i)
            if ((d.y[i] > 0.0) == positive) f.push_back(d.f[i]);
        if (f.size() < 2) throw std::runtime_error("a label class has fewer than 2 samples");
        const double fbar = average(f);
        const MeanSe c = mean_se(f.size(), [&](std::size_t i) { return (f[i] - fbar) * (f[i] - fbar); });
        out.mean += 0.5 * c.mean;
        out.se += 0.25 * c.se * c.se;
    }
    out.se = std::sqrt(out.se);
    return out;
}

bool noise_is_zero(const NoiseSpec& s) { return s.mean == 0.0 && s.variance() == 0.0; }

std::string env_name(std::size_t e) { return "e" + std::to_string(e); }

bool within(double est, double target, double se) { return std::abs(est - target) <= kSigmas * se; }
bool nonzero(double est, double se) { return std::abs(est) > kSigmas * se; }

void check_pair(const SemConfig& cfg, std::size_t e1, std::size_t e2) {
    if (e1 >= cfg.envs.size() || e2 >= cfg.envs.size())
        throw std::out_of_range("SEM env index out of range");
    if (e1 == e2) throw std::invalid_argument("an environment pair needs two distinct indices");
}

}  // namespace

double analytic_dummy_gradient(const SemConfig& cfg, std::size_t env) {
    const NoiseSpec& eta = cfg.envs.at(env).eta_inv;
    const double gmu = eta.mean * cfg.gamma.sum();
    const double gsg = eta.variance() * cfg.gamma.squaredNorm();
    // Both invariant laws are centred, so gamma'E[x_inv_hat] = 0.
    const double gex = 0.0;
    return gmu * gmu + gsg + gmu * gex;
}

double analytic_oracle_risk(const SemConfig& cfg, std::size_t env) {
    const NoiseSpec& eta = cfg.envs.at(env).eta_inv;
    const double gmu = eta.mean * cfg.gamma.sum();
    const double gsg = eta.variance() * cfg.gamma.squaredNorm();
    return 0.5 * (gmu * gmu + gsg + cfg.label_noise_var);
}

CheckReport check_invariant_correlation(const SemConfig& cfg, std::size_t n, std::size_t reps, std::uint64_t seed) {
    cfg.validate();
    if (cfg.envs.size() < 2) throw std::invalid_argument("invariant-correlation check needs >= 2 environments");
    if (reps < 1) throw std::invalid_argument("reps must be >= 1");
    CheckReport rep;
    rep.check = "invariant_correlation";
    rep.notes.push_back(kUnmixNote);
    const double target = cfg.invariant_signal_variance();

    std::vector<MeanSe> rho;
    bool each_ok = true;
    for (std::size_t e = 0; e < cfg.envs.size(); ++e) {
        const MeanSe c = covariance(draw_oracle(cfg, e, n * reps, derive_seed(seed, e)));
        rho.push_back(c);
        rep.rows.push_back({env_name(e), c.mean, c.se, target});
        each_ok = each_ok && within(c.mean, target, c.se);
    }

    // Homogeneity: inverse-variance weighted spread against chi-square(m - 1).
    double wsum = 0.0, wmean = 0.0;
    for (const auto& r : rho) {
        wsum += 1.0 / (r.se * r.se);
        wmean += r.mean / (r.se * r.se);
    }
    wmean /= wsum;
    double q = 0.0, mean = 0.0, s2 = 0.0;
    for (const auto& r : rho) {
        q += (r.mean - wmean) * (r.mean - wmean) / (r.se * r.se);
        mean += r.mean;
        s2 += r.se * r.se;
    }
    const double m = static_cast<double>(rho.size());
    mean /= m;
    s2 /= m;
    for (const auto& r : rho) rep.cross_env += (r.mean - mean) * (r.mean - mean) / m;
    // Null standard deviation of the population variance of m estimates.
    rep.cross_se = s2 / m * std::sqrt(2.0 * (m - 1.0));

    const boost::math::chi_squared chi(m - 1.0);
    const double threshold = boost::math::quantile(chi, 0.9973);
    const bool homogeneous = q <= threshold;

    std::ostringstream msg;
    msg << "Q = " << format_real(q) << " vs chi2(" << m - 1 << ") 3-sigma quantile "
        << format_real(threshold) << "; target |gamma|^2 = " << format_real(target);
    rep.message = msg.str();
    rep.verdict = each_ok && homogeneous ? Verdict::confirmed : Verdict::violated;
    return rep;
}

CheckReport check_corollary_gradient(const SemConfig& cfg, std::size_t env, std::size_t n,
                                     std::uint64_t seed) {
    cfg.validate();
    CheckReport rep;
    rep.check = "corollary_gradient";
    rep.notes.push_back(kUnmixNote);
    const double analytic = analytic_dummy_gradient(cfg, env);
    if (noise_is_zero(cfg.envs.at(env).eta_inv)) {
        rep.rows.push_back({env_name(env), kNaN, kNaN, analytic});
        rep.cross_env = kNaN;
        rep.cross_se = kNaN;
        rep.message = "corollary vacuous here";
        return rep;
    }
    const MeanSe g = dummy_gradient(draw_oracle(cfg, env, n, derive_seed(seed, env)));
    rep.rows.push_back({env_name(env), g.mean, g.se, analytic});
    rep.cross_env = kNaN;
    rep.cross_se = kNaN;
    const bool agrees = within(g.mean, analytic, g.se);
    const bool clears = nonzero(g.mean, g.se);
    rep.verdict = agrees && clears ? Verdict::confirmed : Verdict::violated;
    rep.message = std::string(agrees ? "MC matches analytic" : "MC disagrees with analytic") +
                  (clears ? "; gradient nonzero" : "; gradient not distinguishable from 0");
    return rep;
}

CheckReport check_corollary_risk_variance(const SemConfig& cfg, std::size_t e1, std::size_t e2,
                                          std::size_t n, std::uint64_t seed) {
    cfg.validate();
    check_pair(cfg, e1, e2);
    CheckReport rep;
    rep.check = "corollary_risk_variance";
    rep.notes.push_back(kUnmixNote);
    bool agrees = true;
    MeanSe r[2];
    const std::size_t idx[2] = {e1, e2};
    for (int k = 0; k < 2; ++k) {
        r[k] = risk(draw_oracle(cfg, idx[k], n, derive_seed(seed, idx[k])));
        const double analytic = analytic_oracle_risk(cfg, idx[k]);
        rep.rows.push_back({env_name(idx[k]), r[k].mean, r[k].se, analytic});
        agrees = agrees && within(r[k].mean, analytic, r[k].se);
    }
    rep.cross_env = r[0].mean - r[1].mean;
    rep.cross_se = std::hypot(r[0].se, r[1].se);
    if (cfg.envs[e1].eta_inv == cfg.envs[e2].eta_inv ||
        analytic_oracle_risk(cfg, e1) == analytic_oracle_risk(cfg, e2)) {
        rep.message = "identical invariant-noise moments; corollary vacuous here";
        return rep;
    }
    const bool differs = nonzero(rep.cross_env, rep.cross_se);
    rep.verdict = agrees && differs ? Verdict::confirmed : Verdict::violated;
    rep.message = std::string(agrees ? "risks match analytic" : "risks disagree with analytic") +
                  (differs ? "; cross-env difference nonzero" : "; difference not distinguishable from 0");
    return rep;
}

CheckReport check_degenerate_penalty(PenaltyKind kind, const SemConfig& cfg, std::size_t e1, std::size_t e2,
                             std::size_t n, std::uint64_t seed) {
    cfg.validate();
    check_pair(cfg, e1, e2);
    CheckReport rep;
    rep.notes.push_back(kUnmixNote);
    const std::size_t idx[2] = {e1, e2};

    if (kind == PenaltyKind::ib_erm) {
        rep.check = "ib_erm_floor";
        rep.cross_env = kNaN;
        rep.cross_se = kNaN;
        bool any = false, all = true;
        for (std::size_t e : idx) {
            const double bound = cfg.envs[e].eta_inv.variance() * cfg.gamma.squaredNorm();
            if (noise_is_zero(cfg.envs[e].eta_inv)) {
                rep.rows.push_back({env_name(e), kNaN, kNaN, bound});
                continue;
            }
            const MeanSe v = conditional_variance(draw_oracle(cfg, e, n, derive_seed(seed, e)));
            rep.rows.push_back({env_name(e), v.mean, v.se, bound});
            any = true;
            all = all && nonzero(v.mean, v.se) && v.mean >= bound - kSigmas * v.se;
        }
        if (!any) {
            rep.message = "no invariant noise; corollary vacuous here";
            return rep;
        }
        rep.verdict = all ? Verdict::confirmed : Verdict::violated;
        rep.message = "analytic column is the lower bound gamma' Sigma gamma";
        return rep;
    }

    if (kind != PenaltyKind::iga && kind != PenaltyKind::fishr)
        throw std::invalid_argument("degenerate-penalty checks cover iga, fishr and ib_erm only");
    const bool iga = kind == PenaltyKind::iga;
    rep.check = iga ? "iga_mismatch" : "fishr_mismatch";
    MeanSe s[2];
    for (int k = 0; k < 2; ++k) {
        const OracleDraw d = draw_oracle(cfg, idx[k], n, derive_seed(seed, idx[k]));
        s[k] = iga ? dummy_gradient(d) : gradient_variance(d);
        rep.rows.push_back({env_name(idx[k]), s[k].mean, s[k].se,
                            iga ? analytic_dummy_gradient(cfg, idx[k]) : kNaN});
    }
    rep.cross_env = s[0].mean - s[1].mean;
    rep.cross_se = std::hypot(s[0].se, s[1].se);
    if (cfg.envs[e1].eta_inv == cfg.envs[e2].eta_inv) {
        rep.message = "identical invariant noise; corollary vacuous here";
        return rep;
    }
    rep.verdict = nonzero(rep.cross_env, rep.cross_se) ? Verdict::confirmed : Verdict::violated;
    rep.message = iga ? "mismatch of oracle dummy gradients" : "mismatch of per-sample gradient variances";
    return rep;
}

std::string CheckReport::summary() const {
    std::ostringstream s;
    s << "== " << check << ": " << to_string(verdict) << "\n";
    for (const auto& n : notes) s << "   note: " << n << "\n";
    for (const auto& r : rows) {
        s << "   " << r.env << "  estimate " << format_real(r.estimate) << " +- " << format_real(r.se);
        if (!std::isnan(r.analytic)) s << "  analytic " << format_real(r.analytic);
        s << "\n";
    }
    if (!std::isnan(cross_env))
        s << "   cross-env " << format_real(cross_env) << " (se " << format_real(cross_se) << ")\n";
    if (!message.empty()) s << "   " << message << "\n";
    return s.str();
}

CsvTable reports_to_csv(const std::vector<CheckReport>& reports) {
    CsvTable t({"check", "env", "estimate", "se", "analytic", "cross_env", "cross_se", "verdict"});
    for (const auto& rep : reports)
        for (const auto& r : rep.rows)
            t.add_row({rep.check, r.env, format_real(r.estimate), format_real(r.se), format_real(r.analytic),
                       format_real(rep.cross_env), format_real(rep.cross_se),
                       std::string(to_string(rep.verdict))});
    return t;
}

std::string reports_summary(const std::vector<CheckReport>& reports) {
    std::string out;
    for (const auto& r : reports) out += r.summary();
    return out;
}

}  // namespace invcorr
