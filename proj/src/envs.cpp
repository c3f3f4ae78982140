#include "invcorr/envs.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "invcorr/csv.hpp"
#include "invcorr/rng.hpp"

namespace invcorr {

std::string_view to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::none: return "none";
        case NoiseKind::gaussian: return "gaussian";
        case NoiseKind::uniform: return "uniform";
        case NoiseKind::poisson_centered: return "poisson";
    }
    return "unknown";
}

NoiseKind parse_noise_kind(std::string_view name) {
    if (name == "none") return NoiseKind::none;
    if (name == "gaussian") return NoiseKind::gaussian;
    if (name == "uniform") return NoiseKind::uniform;
    if (name == "poisson" || name == "poisson-centered") return NoiseKind::poisson_centered;
    throw std::invalid_argument("unknown noise kind '" + std::string(name) + "'");
}

NoiseSpec NoiseSpec::gaussian(double mean, double stddev) {
    return {NoiseKind::gaussian, mean, stddev};
}

NoiseSpec NoiseSpec::gaussian_var(double mean, double variance) {
    if (variance < 0.0) throw std::invalid_argument("noise variance must be >= 0");
    return {NoiseKind::gaussian, mean, std::sqrt(variance)};
}

NoiseSpec NoiseSpec::uniform(double mean, double half_width) {
    return {NoiseKind::uniform, mean, half_width};
}

NoiseSpec NoiseSpec::poisson_centered(double mean, double rate) {
    return {NoiseKind::poisson_centered, mean, rate};
}

double NoiseSpec::variance() const {
    switch (kind) {
        case NoiseKind::none: return 0.0;
        case NoiseKind::gaussian: return scale * scale;
        case NoiseKind::uniform: return scale * scale / 3.0;
        case NoiseKind::poisson_centered: return scale;
    }
    return 0.0;
}

void NoiseSpec::validate() const {
    if (!std::isfinite(mean) || !std::isfinite(scale))
        throw std::invalid_argument("noise parameters must be finite");
    if (scale < 0.0) throw std::invalid_argument("noise scale must be >= 0");
    if (kind == NoiseKind::none && (mean != 0.0 || scale != 0.0))
        throw std::invalid_argument("noise kind 'none' requires mean = scale = 0");
}

void EnvironmentSpec::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
    noise.validate();
}

std::string describe(const EnvironmentSpec& env) {
    std::ostringstream os;
    os << "(" << env.alpha << ", " << env.beta << ", ";
    if (env.noise.kind == NoiseKind::none) {
        os << "0";
    } else {
        os << to_string(env.noise.kind) << "[" << env.noise.mean << ", " << env.noise.variance()
           << "]";
    }
    os << ")";
    return os.str();
}

NoClosedForm::NoClosedForm(NoiseKind kind)
    : std::domain_error("no closed-form moments for noise kind '" + std::string(to_string(kind)) +
                        "'; use the sampler") {}

Moments two_bit_moments(const EnvironmentSpec& env) {
    env.validate();
    if (env.noise.kind != NoiseKind::none && env.noise.kind != NoiseKind::gaussian)
        throw NoClosedForm(env.noise.kind);
    const double a = env.a();
    const double b = env.b();
    const double mu = env.noise.mean;
    // Shared draw: E[eta^2] enters both squares and the cross moment.
    const double s = mu * mu + env.noise.variance();
    Moments m;
    m.m11 = 1.0 + s;
    m.m22 = 1.0 + s;
    m.m12 = a * b + s;
    m.m1y = a;
    m.m2y = b;
    m.m1 = mu;
    m.m2 = mu;
    m.myy = 1.0;
    m.my = 0.0;
    return m;
}

double Rng::noise(const NoiseSpec& spec) {
    switch (spec.kind) {
        case NoiseKind::none: return 0.0;
        case NoiseKind::gaussian: return spec.mean + spec.scale * normal();
        case NoiseKind::uniform: return spec.mean + spec.scale * (2.0 * uniform01() - 1.0);
        case NoiseKind::poisson_centered: {
            if (spec.scale == 0.0) return spec.mean;
            std::poisson_distribution<long> draw(spec.scale);
            return static_cast<double>(draw(engine())) - spec.scale + spec.mean;
        }
    }
    return 0.0;
}

Dataset sample_two_bit(const EnvironmentSpec& env, std::size_t n, std::uint64_t seed) {
    env.validate();
    if (n == 0) throw std::invalid_argument("sample_two_bit: n must be >= 1");
    Dataset d;
    d.spec = env;
    d.seed = seed;
    d.x1.resize(n);
    d.x2.resize(n);
    d.y.resize(n);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const double x1_hat = rng.rademacher(0.5);
        const double y = x1_hat * rng.rademacher(env.alpha);
        const double x2_hat = y * rng.rademacher(env.beta);
        const double eta = rng.noise(env.noise);
        d.x1[i] = x1_hat + eta;
        d.x2[i] = x2_hat + eta;
        d.y[i] = y;
    }
    return d;
}

Moments empirical_moments(const Dataset& data) {
    if (data.empty()) throw std::invalid_argument("empirical_moments: empty dataset");
    Moments m;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double x1 = data.x1[i], x2 = data.x2[i], y = data.y[i];
        m.m11 += x1 * x1;
        m.m22 += x2 * x2;
        m.m12 += x1 * x2;
        m.m1y += x1 * y;
        m.m2y += x2 * y;
        m.m1 += x1;
        m.m2 += x2;
        m.myy += y * y;
        m.my += y;
    }
    const double n = static_cast<double>(data.size());
    for (double* f : {&m.m11, &m.m22, &m.m12, &m.m1y, &m.m2y, &m.m1, &m.m2, &m.myy, &m.my})
        *f /= n;
    return m;
}

Dataset concat(const Dataset& a, const Dataset& b) {
    Dataset out = a;
    out.x1.insert(out.x1.end(), b.x1.begin(), b.x1.end());
    out.x2.insert(out.x2.end(), b.x2.begin(), b.x2.end());
    out.y.insert(out.y.end(), b.y.begin(), b.y.end());
    return out;
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
    CsvTable t({"x1", "x2", "y"});
    for (std::size_t i = 0; i < data.size(); ++i)
        t.add_row({format_real(data.x1[i]), format_real(data.x2[i]), format_real(data.y[i])});
    t.write_atomic(path);
}

}  // namespace invcorr
