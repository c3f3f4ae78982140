#include "invcorr/sem.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "invcorr/rng.hpp"

namespace invcorr {

InvariantLaw parse_invariant_law(const std::string& name) {
    if (name == "rademacher") return InvariantLaw::rademacher;
    if (name == "gaussian") return InvariantLaw::gaussian;
    throw std::invalid_argument("unknown invariant feature law '" + name + "'");
}

std::string to_string(InvariantLaw law) {
    return law == InvariantLaw::rademacher ? "rademacher" : "gaussian";
}

double condition_number(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    if (s.size() == 0) return std::numeric_limits<double>::infinity();
    const double smallest = s(s.size() - 1);
    if (smallest == 0.0) return std::numeric_limits<double>::infinity();
    return s(0) / smallest;
}

void SemConfig::validate() const {
    if (d_inv < 1 || d_s < 1) throw std::invalid_argument("SEM dimensions must be positive");
    if (gamma.size() != d_inv)
        throw std::invalid_argument("gamma must have d_inv = " + std::to_string(d_inv) +
                                    " entries");
    if (gamma.squaredNorm() == 0.0) throw std::invalid_argument("gamma must be nonzero");
    if (!gamma.allFinite()) throw std::invalid_argument("gamma must be finite");
    if (label_noise_var < 0.0) throw std::invalid_argument("label_noise_var must be >= 0");
    if (mixing.rows() != dim() || mixing.cols() != dim())
        throw std::invalid_argument("mixing matrix must be square of size d_inv + d_s");
    if (!std::isfinite(condition_number(mixing)) || condition_number(mixing) > 1e12)
        throw std::invalid_argument("mixing matrix S is not invertible");
    for (const auto& e : envs) {
        if (!(e.beta >= 0.0 && e.beta <= 1.0))
            throw std::invalid_argument("SEM env beta must lie in [0, 1]");
        e.eta_inv.validate();
        e.eta_s.validate();
    }
}

Eigen::MatrixXd SemConfig::unmix() const {
    return mixing.inverse().topRows(d_inv);
}

Eigen::MatrixXd random_mixing(int dim, std::uint64_t seed, double max_condition) {
    Rng rng(seed, 0x5eed);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Eigen::MatrixXd m(dim, dim);
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) m(i, j) = rng.normal();
        m = Eigen::MatrixXd::Identity(dim, dim) + m / std::sqrt(static_cast<double>(dim));
        if (condition_number(m) <= max_condition) return m;
    }
    throw std::runtime_error("random_mixing: no well-conditioned draw found");
}

SemSample sem_generate(const SemConfig& cfg, std::size_t env_index, std::size_t n,
                       std::uint64_t seed) {
    cfg.validate();
    if (env_index >= cfg.envs.size()) throw std::out_of_range("SEM env index out of range");
    if (n == 0) throw std::invalid_argument("sem_generate: n must be >= 1");
    const SemEnvironment& env = cfg.envs[env_index];
    const int di = cfg.d_inv, ds = cfg.d_s, d = cfg.dim();
    const double label_sd = std::sqrt(cfg.label_noise_var);

    SemSample s;
    s.x.resize(static_cast<Eigen::Index>(n), d);
    s.y.resize(static_cast<Eigen::Index>(n));
    s.hidden_inv.resize(static_cast<Eigen::Index>(n), di);
    s.latent_inv.resize(static_cast<Eigen::Index>(n), di);

    Rng rng(seed, env_index);
    Eigen::VectorXd latent(d);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
        double y = 0.0;
        for (int k = 0; k < di; ++k) {
            const double xh =
                cfg.inv_law == InvariantLaw::rademacher ? rng.rademacher(0.5) : rng.normal();
            s.hidden_inv(i, k) = xh;
            y += cfg.gamma(k) * xh;
        }
        y += label_sd * rng.normal();
        s.y(i) = y;
        for (int k = 0; k < di; ++k) {
            latent(k) = s.hidden_inv(i, k) + rng.noise(env.eta_inv);
            s.latent_inv(i, k) = latent(k);
        }
        for (int k = 0; k < ds; ++k) latent(di + k) = y * rng.rademacher(env.beta) + rng.noise(env.eta_s);
        s.x.row(i).noalias() = (cfg.mixing * latent).transpose();
    }
    return s;
}

SemConfig default_sem(std::uint64_t mixing_seed) {
    SemConfig cfg;
    cfg.d_inv = 1;
    cfg.d_s = 1;
    cfg.gamma = Eigen::VectorXd::Ones(1);
    cfg.mixing = random_mixing(2, mixing_seed);
    cfg.envs = {
        {0.2, NoiseSpec::gaussian_var(0.2, 0.01), NoiseSpec::gaussian_var(0.2, 0.01)},
        {0.25, NoiseSpec::gaussian_var(0.1, 0.02), NoiseSpec::gaussian_var(0.1, 0.02)},
    };
    return cfg;
}

SemConfig random_sem(std::uint64_t seed, std::size_t n_envs) {
    Rng rng(seed, 0xfa111);
    SemConfig cfg;
    cfg.d_inv = rng.uniform01() < 0.5 ? 1 : 2;
    cfg.d_s = rng.uniform01() < 0.5 ? 1 : 2;
    cfg.gamma.resize(cfg.d_inv);
    for (int k = 0; k < cfg.d_inv; ++k)
        cfg.gamma(k) = (0.5 + rng.uniform01()) * rng.rademacher(0.5);
    cfg.label_noise_var = 0.5 * rng.uniform01();
    cfg.mixing = random_mixing(cfg.dim(), mix64(seed));
    for (std::size_t e = 0; e < n_envs; ++e) {
        SemEnvironment env;
        env.beta = rng.uniform01();
        env.eta_inv = NoiseSpec::gaussian_var(0.5 * rng.uniform01(), 0.5 * rng.uniform01());
        env.eta_s = NoiseSpec::gaussian_var(0.5 * rng.uniform01(), 0.5 * rng.uniform01());
        cfg.envs.push_back(env);
    }
    return cfg;
}

}  // namespace invcorr
