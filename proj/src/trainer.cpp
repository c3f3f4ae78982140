#include "invcorr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "invcorr/parallel.hpp"
#include "invcorr/rng.hpp"

namespace invcorr {

std::string_view to_string(OptimMethod m) {
    switch (m) {
        case OptimMethod::gradient_descent: return "gd";
        case OptimMethod::newton: return "newton";
        case OptimMethod::hybrid: return "hybrid";
    }
    return "?";
}

OptimMethod parse_optim_method(std::string_view name) {
    if (name == "newton") return OptimMethod::newton;
    if (name == "gd" || name == "gradient_descent") return OptimMethod::gradient_descent;
    if (name == "hybrid") return OptimMethod::hybrid;
    throw std::invalid_argument("unknown optimizer '" + std::string(name) +
                                "'; valid: gd, newton, hybrid");
}

void OptimConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
    if (!(grad_tol > 0.0)) throw std::invalid_argument("grad_tol must be > 0");
    if (!(switch_tol > 0.0)) throw std::invalid_argument("switch_tol must be > 0");
    if (!init.finite()) throw std::invalid_argument("init must be finite");
}

namespace {

double norm2(Grad2 g) { return std::hypot(g[0], g[1]); }

struct NewtonStep {
    LinearParams next;
    bool ok = false;
};

// Hessian from central differences of the analytic gradient, shifted to be
// positive definite, then Armijo backtracking on the objective.
NewtonStep newton_step(const std::function<double(LinearParams)>& f,
                       const std::function<Grad2(LinearParams)>& grad, LinearParams w, Grad2 g) {
    double h[2][2];
    for (int j = 0; j < 2; ++j) {
        const double wj = j == 0 ? w.w1 : w.w2;
        const double step = 1e-5 * std::max(1.0, std::abs(wj));
        LinearParams plus = w, minus = w;
        (j == 0 ? plus.w1 : plus.w2) += step;
        (j == 0 ? minus.w1 : minus.w2) -= step;
        const Grad2 gp = grad(plus), gm = grad(minus);
        for (int i = 0; i < 2; ++i) h[i][j] = (gp[i] - gm[i]) / (2.0 * step);
    }
    const double off = 0.5 * (h[0][1] + h[1][0]);
    const double tr = h[0][0] + h[1][1];
    const double disc = std::sqrt(std::max(0.0, 0.25 * (h[0][0] - h[1][1]) * (h[0][0] - h[1][1]) + off * off));
    const double lo = 0.5 * tr - disc, hi = 0.5 * tr + disc;
    const double floor = 1e-12 * std::max(1.0, std::abs(hi));
    const double shift = lo < floor ? floor - lo : 0.0;
    const double a = h[0][0] + shift, d = h[1][1] + shift, b = off;
    const double det = a * d - b * b;
    if (!(det > 0.0) || !std::isfinite(det)) return {};
    const Grad2 p{-(d * g[0] - b * g[1]) / det, -(a * g[1] - b * g[0]) / det};

    const double f0 = f(w);
    const double slope = g[0] * p[0] + g[1] * p[1];
    // Once the predicted decrease is below rounding, Armijo would accept a
    // step shrunk to nothing, so go straight to the gradient test.
    if (-slope > 1e-15 * std::max(1.0, std::abs(f0))) {
        for (double t = 1.0; t > 1e-12; t *= 0.5) {
            const LinearParams cand{w.w1 + t * p[0], w.w2 + t * p[1]};
            if (cand == w) break;
            const double fc = f(cand);
            if (std::isfinite(fc) && fc <= f0 + 1e-4 * t * slope) return {cand, true};
        }
    }
    // Rounding hides any decrease this close to a minimum; accept the full
    // step when it still shrinks the gradient.
    const LinearParams full{w.w1 + p[0], w.w2 + p[1]};
    if (norm2(grad(full)) < norm2(g)) return {full, true};
    return {};
}

}  // namespace

TrainResult train_population(std::span<const EnvSummary> envs, const Objective& objective,
                             const OptimConfig& cfg) {
    cfg.validate();
    if (objective.is_constraint() || !(objective.lambda >= 0.0))
        throw std::invalid_argument("train_population needs a finite lambda >= 0");
    if (envs.size() < 2) throw std::invalid_argument("train_population needs >= 2 environments");

    const auto f = [&](LinearParams w) { return normalized_objective(objective, envs, w); };
    const auto grad = [&](LinearParams w) {
        return normalized_objective_gradient(objective, envs, w);
    };

    TrainResult res;
    LinearParams w = cfg.init;
    if (cfg.record_trajectory) res.trajectory.push_back(w);
    Grad2 g = grad(w);
    // Hybrid keeps a small Newton budget after the descent phase.
    constexpr std::size_t kPolishBudget = 500;
    bool polishing = cfg.method == OptimMethod::newton;
    for (;;) {
        res.grad_norm = norm2(g);
        if (!w.finite() || !std::isfinite(res.grad_norm)) {
            res.diverged = true;
            res.diverged_at = res.steps;
            break;
        }
        if (res.grad_norm < cfg.grad_tol) {
            res.converged = true;
            break;
        }
        if (res.steps >= cfg.max_steps) break;
        if (cfg.method == OptimMethod::hybrid && !polishing &&
            (res.grad_norm < cfg.switch_tol || res.steps + kPolishBudget >= cfg.max_steps))
            polishing = true;
        if (!polishing) {
            w = {w.w1 - cfg.learning_rate * g[0], w.w2 - cfg.learning_rate * g[1]};
        } else {
            const NewtonStep step = newton_step(f, grad, w, g);
            if (!step.ok) break;  // stalled: reported as not converged
            w = step.next;
        }
        ++res.steps;
        if (cfg.record_trajectory) res.trajectory.push_back(w);
        g = grad(w);
    }
    res.w = w;
    res.objective = w.finite() ? f(w) : std::numeric_limits<double>::quiet_NaN();
    return res;
}

double SweepRecord::mean_risk() const {
    if (env_risks.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::accumulate(env_risks.begin(), env_risks.end(), 0.0) /
           static_cast<double>(env_risks.size());
}

double lambda_from_log2(double log2_lambda) {
    return log2_lambda == -1.0 ? 0.0 : std::exp2(log2_lambda);
}

std::vector<double> default_log2_grid() {
    std::vector<double> grid{-1.0};
    for (int k = 0; k <= 30; ++k) grid.push_back(k);
    return grid;
}

void validate_log2_grid(const std::vector<double>& grid) {
    if (grid.empty()) throw std::invalid_argument("lambda grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(grid[i])) throw std::invalid_argument("lambda grid values must be finite");
        if (i > 0 && grid[i] == -1.0)
            throw std::invalid_argument("the -1 (lambda = 0) sentinel is only allowed at the head");
        if (i > 0 && !(grid[i] > grid[i - 1]))
            throw std::invalid_argument("lambda grid must be strictly ascending");
    }
}

namespace {

SweepRecord sweep_point(std::span<const EnvSummary> envs, PenaltyKind kind, double log2_lambda,
                        OptimConfig cfg, LinearParams init) {
    SweepRecord rec;
    rec.penalty = kind;
    rec.log2_lambda = log2_lambda;
    cfg.init = init;
    try {
        const TrainResult r = train_population(envs, {kind, lambda_from_log2(log2_lambda)}, cfg);
        rec.w = r.w;
        rec.converged = r.converged;
        if (r.diverged) rec.error = "diverged at step " + std::to_string(r.diverged_at);
    } catch (const std::exception& e) {
        rec.w = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
        rec.error = e.what();
    }
    rec.g_pp = rec.w.w1 + rec.w.w2;
    rec.g_pm = rec.w.w1 - rec.w.w2;
    rec.g_mp = -rec.w.w1 + rec.w.w2;
    rec.g_mm = -rec.w.w1 - rec.w.w2;
    for (const auto& s : envs) rec.env_risks.push_back(population_risk(s.moments, rec.w));
    return rec;
}

}  // namespace

std::vector<SweepRecord> lambda_sweep(std::span<const EnvSummary> envs, PenaltyKind kind,
                                      const std::vector<double>& log2_grid,
                                      const OptimConfig& cfg, std::size_t jobs) {
    validate_log2_grid(log2_grid);
    cfg.validate();
    std::vector<SweepRecord> out(log2_grid.size());
    if (cfg.warm_start) {
        LinearParams init = cfg.init;
        for (std::size_t i = 0; i < log2_grid.size(); ++i) {
            out[i] = sweep_point(envs, kind, log2_grid[i], cfg, init);
            if (out[i].w.finite()) init = out[i].w;
        }
    } else {
        parallel_for(log2_grid.size(), jobs, [&](std::size_t i) {
            out[i] = sweep_point(envs, kind, log2_grid[i], cfg, cfg.init);
        });
    }
    return out;
}

CsvTable sweep_to_csv(const std::vector<SweepRecord>& records) {
    CsvTable t({"penalty", "log2_lambda", "w1", "w2", "g_pp", "g_pm", "g_mp", "g_mm", "risk_e1",
                "risk_e2", "converged"});
    for (const auto& r : records) {
        auto risk = [&](std::size_t i) {
            return i < r.env_risks.size() ? format_real(r.env_risks[i]) : std::string("nan");
        };
        t.add_row({std::string(to_string(r.penalty)), format_real(r.log2_lambda), format_real(r.w.w1),
                   format_real(r.w.w2), format_real(r.g_pp), format_real(r.g_pm), format_real(r.g_mp),
                   format_real(r.g_mm), risk(0), risk(1), r.converged ? "1" : "0"});
    }
    return t;
}

std::string sweep_to_svg(const std::vector<SweepRecord>& records, const std::string& title) {
    constexpr double W = 640, H = 400, left = 60, right = 150, top = 40, bottom = 50;
    double xmin = 0, xmax = 1, ymin = -1, ymax = 1;
    if (!records.empty()) {
        xmin = records.front().log2_lambda;
        xmax = records.back().log2_lambda;
        if (xmax <= xmin) xmax = xmin + 1;
        ymin = 1e300;
        ymax = -1e300;
        for (const auto& r : records)
            for (double v : {r.g_pp, r.g_pm, r.g_mp, r.g_mm})
                if (std::isfinite(v)) {
                    ymin = std::min(ymin, v);
                    ymax = std::max(ymax, v);
                }
        if (!(ymax > ymin)) {
            ymin -= 1;
            ymax += 1;
        }
        const double pad = 0.05 * (ymax - ymin);
        ymin -= pad;
        ymax += pad;
    }
    auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (W - left - right); };
    auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * (H - top - bottom); };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << title
      << "</text>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\""
      << H - bottom << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
      << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        s << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
          << format_real(std::round(yv * 100) / 100) << "</text>\n";
        const double xv = xmin + (xmax - xmin) * i / 4.0;
        s << "<text x=\"" << px(xv) << "\" y=\"" << H - bottom + 18 << "\" text-anchor=\"middle\">"
          << format_real(std::round(xv * 10) / 10) << "</text>\n";
    }
    s << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\">log2 lambda (-1 is lambda = 0)</text>\n";

    struct Series {
        const char* label;
        const char* color;
        double SweepRecord::*field;
    };
    const Series series[] = {{"g(1,1)", "#1f77b4", &SweepRecord::g_pp},
                             {"g(1,-1)", "#d62728", &SweepRecord::g_pm},
                             {"g(-1,1)", "#2ca02c", &SweepRecord::g_mp},
                             {"g(-1,-1)", "#9467bd", &SweepRecord::g_mm}};
    int row = 0;
    for (const auto& ser : series) {
        s << "<polyline fill=\"none\" stroke=\"" << ser.color << "\" stroke-width=\"2\" points=\"";
        bool first = true;
        for (const auto& r : records) {
            const double v = r.*(ser.field);
            if (!std::isfinite(v)) continue;
            if (!first) s << ' ';
            s << format_real(px(r.log2_lambda)) << ',' << format_real(py(v));
            first = false;
        }
        s << "\"/>\n";
        const double ly = top + 20 + 20 * row++;
        s << "<line x1=\"" << W - right + 15 << "\" y1=\"" << ly << "\" x2=\"" << W - right + 40
          << "\" y2=\"" << ly << "\" stroke=\"" << ser.color << "\" stroke-width=\"2\"/>\n";
        s << "<text x=\"" << W - right + 46 << "\" y=\"" << ly + 4 << "\">" << ser.label << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

// ---------------------------------------------------------------------------
// MLP

void MlpSpec::validate() const {
    if (widths.size() < 2) throw std::invalid_argument("MLP needs at least input and output widths");
    if (widths.front() != 2) throw std::invalid_argument("MLP input width must be 2");
    if (widths.back() != 1) throw std::invalid_argument("MLP output width must be 1");
    for (int w : widths)
        if (w < 1) throw std::invalid_argument("MLP widths must be positive");
}

Mlp::Mlp(const MlpSpec& spec) : spec_(spec) {
    spec_.validate();
    Rng rng(spec_.seed, 0x1417);
    for (std::size_t l = 0; l + 1 < spec_.widths.size(); ++l) {
        const int in = spec_.widths[l], out = spec_.widths[l + 1];
        offsets_.push_back(params_.size());
        const double bound = std::sqrt(6.0 / in);
        for (int i = 0; i < out * in; ++i) params_.push_back(bound * (2.0 * rng.uniform01() - 1.0));
        for (int i = 0; i < out; ++i) params_.push_back(0.0);
    }
}

void Mlp::forward(double x1, double x2, Tape& tape) const {
    const std::size_t layers = spec_.widths.size() - 1;
    tape.activations.resize(layers);
    tape.activations[0].assign({x1, x2});
    for (std::size_t l = 0; l < layers; ++l) {
        const int in = spec_.widths[l], out = spec_.widths[l + 1];
        const double* W = params_.data() + offsets_[l];
        const double* b = W + static_cast<std::size_t>(out) * in;
        const auto& a = tape.activations[l];
        if (l + 1 == layers) {
            double z = b[0];
            for (int i = 0; i < in; ++i) z += W[i] * a[i];
            tape.output = z;
        } else {
            auto& next = tape.activations[l + 1];
            next.resize(out);
            for (int o = 0; o < out; ++o) {
                double z = b[o];
                for (int i = 0; i < in; ++i) z += W[o * in + i] * a[i];
                next[o] = z > 0.0 ? z : 0.0;
            }
        }
    }
    tape.head = tape.activations.back();
    tape.head.push_back(1.0);
}

double Mlp::predict(double x1, double x2) const {
    Tape t;
    forward(x1, x2, t);
    return t.output;
}

void Mlp::backward(const Tape& tape, double d_output, std::span<const double> d_head,
                   std::vector<double>& grad) const {
    const std::size_t layers = spec_.widths.size() - 1;
    if (grad.size() != params_.size()) grad.assign(params_.size(), 0.0);
    std::vector<double> delta(tape.activations.back().size(), 0.0);
    // Output layer.
    {
        const std::size_t l = layers - 1;
        const int in = spec_.widths[l];
        const double* W = params_.data() + offsets_[l];
        double* gW = grad.data() + offsets_[l];
        const auto& a = tape.activations[l];
        for (int i = 0; i < in; ++i) {
            gW[i] += d_output * a[i];
            delta[i] = d_output * W[i];
            if (!d_head.empty()) delta[i] += d_head[i];
        }
        gW[in] += d_output;
    }
    // Hidden layers; delta holds d loss / d post-ReLU activation of layer l.
    for (std::size_t l = layers - 1; l-- > 0;) {
        const int in = spec_.widths[l], out = spec_.widths[l + 1];
        const double* W = params_.data() + offsets_[l];
        double* gW = grad.data() + offsets_[l];
        double* gb = gW + static_cast<std::size_t>(out) * in;
        const auto& a_in = tape.activations[l];
        const auto& a_out = tape.activations[l + 1];
        std::vector<double> prev(in, 0.0);
        for (int o = 0; o < out; ++o) {
            if (a_out[o] <= 0.0) continue;
            const double dz = delta[o];
            gb[o] += dz;
            for (int i = 0; i < in; ++i) {
                gW[o * in + i] += dz * a_in[i];
                prev[i] += dz * W[o * in + i];
            }
        }
        delta.swap(prev);
    }
}

double TrainedModel::predict(double x1, double x2) const {
    return kind == ModelKind::linear ? linear(x1, x2) : mlp.predict(x1, x2);
}

std::vector<double> model_params(const TrainedModel& model) {
    if (model.kind == ModelKind::linear) return {model.linear.w1, model.linear.w2};
    return model.mlp.params();
}

void set_model_params(TrainedModel& model, const std::vector<double>& params) {
    if (model.kind == ModelKind::linear) {
        if (params.size() != 2) throw std::invalid_argument("linear model has 2 parameters");
        model.linear = {params[0], params[1]};
        return;
    }
    if (params.size() != model.mlp.parameter_count())
        throw std::invalid_argument("parameter count mismatch");
    model.mlp.params() = params;
}

void EmpiricalConfig::validate() const {
    if (objective.is_constraint() || !(objective.lambda >= 0.0))
        throw std::invalid_argument("empirical training needs a finite lambda >= 0");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (model == ModelKind::mlp) mlp.validate();
    if (batch_size == 1 && objective.lambda > 0.0 && objective.penalty != PenaltyKind::irmv1)
        throw std::invalid_argument("variance-based penalties need env batches of size >= 2");
}

namespace {

struct EnvPass {
    std::vector<double> f, y;
    std::vector<double> head;  // n x k, row-major
    std::vector<Mlp::Tape> tapes;
    std::size_t k = 0;
    std::vector<double> df;  // d objective / d f_i
    std::vector<double> dh;  // d objective / d head_i
};

bool variance_based(PenaltyKind kind) { return kind != PenaltyKind::irmv1; }

// Adds lambda-weighted penalty sensitivities into each pass; returns P.
double add_penalty(PenaltyKind kind, std::vector<EnvPass>& passes, double weight) {
    const double m = static_cast<double>(passes.size());
    switch (kind) {
        case PenaltyKind::icorr: {
            std::vector<double> rho(passes.size());
            std::vector<double> ybar(passes.size());
            for (std::size_t e = 0; e < passes.size(); ++e) {
                const auto& p = passes[e];
                const double n = static_cast<double>(p.f.size());
                ybar[e] = std::accumulate(p.y.begin(), p.y.end(), 0.0) / n;
                double acc = 0.0;
                for (std::size_t i = 0; i < p.f.size(); ++i) acc += p.f[i] * (p.y[i] - ybar[e]);
                rho[e] = acc / n;
            }
            const double mean = std::accumulate(rho.begin(), rho.end(), 0.0) / m;
            double pen = 0.0;
            for (std::size_t e = 0; e < passes.size(); ++e) {
                auto& p = passes[e];
                const double n = static_cast<double>(p.f.size());
                pen += (rho[e] - mean) * (rho[e] - mean) / m;
                const double dr = weight * 2.0 * (rho[e] - mean) / m;
                for (std::size_t i = 0; i < p.f.size(); ++i) p.df[i] += dr * (p.y[i] - ybar[e]) / n;
            }
            return pen;
        }
        case PenaltyKind::irmv1: {
            double pen = 0.0;
            for (auto& p : passes) {
                const double n = static_cast<double>(p.f.size());
                double d = 0.0;
                for (std::size_t i = 0; i < p.f.size(); ++i) d += (p.f[i] - p.y[i]) * p.f[i];
                d /= n;
                pen += d * d;
                for (std::size_t i = 0; i < p.f.size(); ++i)
                    p.df[i] += weight * 2.0 * d * (2.0 * p.f[i] - p.y[i]) / n;
            }
            return pen;
        }
        case PenaltyKind::vrex: {
            std::vector<double> risk(passes.size());
            for (std::size_t e = 0; e < passes.size(); ++e) {
                const auto& p = passes[e];
                double acc = 0.0;
                for (std::size_t i = 0; i < p.f.size(); ++i) acc += 0.5 * (p.f[i] - p.y[i]) * (p.f[i] - p.y[i]);
                risk[e] = acc / static_cast<double>(p.f.size());
            }
            const double mean = std::accumulate(risk.begin(), risk.end(), 0.0) / m;
            double pen = 0.0;
            for (std::size_t e = 0; e < passes.size(); ++e) {
                auto& p = passes[e];
                const double n = static_cast<double>(p.f.size());
                pen += (risk[e] - mean) * (risk[e] - mean) / m;
                const double dr = weight * 2.0 * (risk[e] - mean) / m;
                for (std::size_t i = 0; i < p.f.size(); ++i) p.df[i] += dr * (p.f[i] - p.y[i]) / n;
            }
            return pen;
        }
        case PenaltyKind::iga:
        case PenaltyKind::fishr: {
            const std::size_t k = passes.front().k;
            // Per-env summary vector: mean gradient (iga) or gradient variance (fishr).
            std::vector<std::vector<double>> stat(passes.size(), std::vector<double>(k, 0.0));
            std::vector<std::vector<double>> gbar(passes.size(), std::vector<double>(k, 0.0));
            for (std::size_t e = 0; e < passes.size(); ++e) {
                const auto& p = passes[e];
                const double n = static_cast<double>(p.f.size());
                std::vector<double> sq(k, 0.0);
                for (std::size_t i = 0; i < p.f.size(); ++i) {
                    const double r = p.f[i] - p.y[i];
                    for (std::size_t c = 0; c < k; ++c) {
                        const double g = r * p.head[i * k + c];
                        gbar[e][c] += g / n;
                        sq[c] += g * g / n;
                    }
                }
                for (std::size_t c = 0; c < k; ++c)
                    stat[e][c] = kind == PenaltyKind::iga ? gbar[e][c] : sq[c] - gbar[e][c] * gbar[e][c];
            }
            std::vector<double> mean(k, 0.0);
            for (const auto& s : stat)
                for (std::size_t c = 0; c < k; ++c) mean[c] += s[c] / m;
            double pen = 0.0;
            for (std::size_t e = 0; e < passes.size(); ++e) {
                auto& p = passes[e];
                const double n = static_cast<double>(p.f.size());
                std::vector<double> dstat(k);
                for (std::size_t c = 0; c < k; ++c) {
                    const double dev = stat[e][c] - mean[c];
                    pen += 4.0 * dev * dev / m;
                    dstat[c] = weight * 8.0 * dev / m;
                }
                for (std::size_t i = 0; i < p.f.size(); ++i) {
                    const double r = p.f[i] - p.y[i];
                    for (std::size_t c = 0; c < k; ++c) {
                        const double h = p.head[i * k + c];
                        const double dg = kind == PenaltyKind::iga
                                              ? dstat[c] / n
                                              : dstat[c] * 2.0 * (r * h - gbar[e][c]) / n;
                        p.df[i] += dg * h;
                        p.dh[i * k + c] += dg * r;
                    }
                }
            }
            return pen;
        }
        case PenaltyKind::ib_erm: {
            double pen = 0.0;
            for (auto& p : passes) {
                for (int cls = 0; cls < 2; ++cls) {
                    double n = 0.0, sum = 0.0;
                    for (std::size_t i = 0; i < p.f.size(); ++i)
                        if ((p.y[i] > 0) == (cls == 1)) {
                            n += 1;
                            sum += p.f[i];
                        }
                    if (n < 1) continue;
                    const double mean = sum / n;
                    for (std::size_t i = 0; i < p.f.size(); ++i)
                        if ((p.y[i] > 0) == (cls == 1)) {
                            const double d = p.f[i] - mean;
                            pen += d * d / n;
                            p.df[i] += weight * 2.0 * d / n;
                        }
                }
            }
            return pen;
        }
    }
    throw std::logic_error("unhandled penalty kind");
}

}  // namespace

BatchObjective batch_objective(const TrainedModel& model, std::span<const Dataset> batches,
                               const Objective& objective) {
    if (batches.size() < 2) throw std::invalid_argument("need >= 2 environment batches");
    if (objective.is_constraint() || !(objective.lambda >= 0.0))
        throw std::invalid_argument("objective lambda must be finite and >= 0");
    const bool mlp = model.kind == ModelKind::mlp;
    const std::size_t k = mlp ? model.mlp.head_size() : 2;

    // Reused across calls so full-batch runs on large samples do not
    // reallocate every step.
    thread_local std::vector<EnvPass> passes;
    passes.resize(batches.size());
    for (std::size_t e = 0; e < batches.size(); ++e) {
        const Dataset& d = batches[e];
        if (d.empty()) throw std::invalid_argument("empty environment batch");
        if (objective.lambda > 0.0 && variance_based(objective.penalty) && d.size() < 2)
            throw std::invalid_argument("variance-based penalties need env batches of size >= 2");
        EnvPass& p = passes[e];
        const std::size_t n = d.size();
        p.k = k;
        p.f.resize(n);
        p.y.assign(d.y.begin(), d.y.end());
        p.head.resize(n * k);
        p.df.assign(n, 0.0);
        p.dh.assign(n * k, 0.0);
        if (mlp) p.tapes.resize(n);
        else p.tapes.clear();
        for (std::size_t i = 0; i < n; ++i) {
            if (mlp) {
                model.mlp.forward(d.x1[i], d.x2[i], p.tapes[i]);
                p.f[i] = p.tapes[i].output;
                std::copy(p.tapes[i].head.begin(), p.tapes[i].head.end(), p.head.begin() + i * k);
            } else {
                p.f[i] = model.linear(d.x1[i], d.x2[i]);
                p.head[i * k] = d.x1[i];
                p.head[i * k + 1] = d.x2[i];
            }
        }
    }

    const double lambda = objective.lambda;
    const double scale = 1.0 / (1.0 + lambda);
    double total_risk = 0.0;
    for (auto& p : passes) {
        const double n = static_cast<double>(p.f.size());
        for (std::size_t i = 0; i < p.f.size(); ++i) {
            const double r = p.f[i] - p.y[i];
            total_risk += 0.5 * r * r / n;
            p.df[i] += scale * r / n;
        }
    }
    double pen = 0.0;
    if (lambda > 0.0) pen = add_penalty(objective.penalty, passes, lambda * scale);

    BatchObjective out;
    out.value = (total_risk + lambda * pen) * scale;
    if (mlp) {
        out.grad.assign(model.mlp.parameter_count(), 0.0);
        for (auto& p : passes)
            for (std::size_t i = 0; i < p.f.size(); ++i)
                model.mlp.backward(p.tapes[i], p.df[i],
                                   std::span<const double>(p.dh.data() + i * k, k), out.grad);
    } else {
        out.grad.assign(2, 0.0);
        for (auto& p : passes)
            for (std::size_t i = 0; i < p.f.size(); ++i) {
                out.grad[0] += p.df[i] * p.head[i * k];
                out.grad[1] += p.df[i] * p.head[i * k + 1];
            }
    }
    return out;
}

EmpiricalResult train_empirical(std::span<const Dataset> datasets, const EmpiricalConfig& cfg) {
    cfg.validate();
    if (datasets.size() < 2) throw std::invalid_argument("train_empirical needs >= 2 env datasets");
    for (const auto& d : datasets)
        if (d.empty()) throw std::invalid_argument("train_empirical: empty env dataset");

    EmpiricalResult res;
    res.model.kind = cfg.model;
    if (cfg.model == ModelKind::mlp)
        res.model.mlp = Mlp(cfg.mlp);
    else
        res.model.linear = cfg.linear_init;

    std::size_t min_n = datasets.front().size();
    for (const auto& d : datasets) min_n = std::min(min_n, d.size());
    const bool full = cfg.batch_size == 0 || cfg.batch_size >= min_n;
    const std::size_t batch = full ? min_n : cfg.batch_size;
    const std::size_t steps_per_epoch = full ? 1 : min_n / batch;

    std::vector<std::vector<std::size_t>> order(datasets.size());
    std::vector<Dataset> batches(datasets.size());
    std::vector<double> params = model_params(res.model);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (!full) {
            for (std::size_t e = 0; e < datasets.size(); ++e) {
                order[e].resize(datasets[e].size());
                std::iota(order[e].begin(), order[e].end(), std::size_t{0});
                Rng rng(cfg.seed, epoch * datasets.size() + e);
                std::shuffle(order[e].begin(), order[e].end(), rng.engine());
            }
        }
        for (std::size_t s = 0; s < steps_per_epoch; ++s) {
            std::span<const Dataset> view = datasets;
            if (!full) {
                for (std::size_t e = 0; e < datasets.size(); ++e) {
                    Dataset& b = batches[e];
                    b.x1.resize(batch);
                    b.x2.resize(batch);
                    b.y.resize(batch);
                    for (std::size_t i = 0; i < batch; ++i) {
                        const std::size_t j = order[e][s * batch + i];
                        b.x1[i] = datasets[e].x1[j];
                        b.x2[i] = datasets[e].x2[j];
                        b.y[i] = datasets[e].y[j];
                    }
                }
                view = batches;
            }
            Objective obj = cfg.objective;
            if (res.steps < cfg.penalty_anneal_steps) obj.lambda = 0.0;
            const BatchObjective bo = batch_objective(res.model, view, obj);
            if (!std::isfinite(bo.value))
                throw std::runtime_error("non-finite loss at step " + std::to_string(res.steps) +
                                         " (penalty " + std::string(to_string(obj.penalty)) +
                                         ", lambda " + format_real(obj.lambda) + ")");
            res.loss_history.push_back(bo.value);
            for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg.learning_rate * bo.grad[i];
            set_model_params(res.model, params);
            ++res.steps;
        }
    }
    return res;
}

Evaluation evaluate(const TrainedModel& model, const Dataset& data) {
    if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
    double risk = 0.0, correct = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double f = model.predict(data.x1[i], data.x2[i]);
        risk += 0.5 * (f - data.y[i]) * (f - data.y[i]);
        if (f * data.y[i] > 0.0) correct += 1.0;
    }
    const double n = static_cast<double>(data.size());
    return {risk / n, correct / n};
}

}  // namespace invcorr
