#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "invcorr/envs.hpp"

namespace invcorr {

enum class InvariantLaw { rademacher, gaussian };

InvariantLaw parse_invariant_law(const std::string& name);
std::string to_string(InvariantLaw law);

/// Per-environment part of the anti-causal generator. Noise specs apply
/// independently to every coordinate of eta_inv / eta_s.
struct SemEnvironment {
    double beta = 0.0;  // spurious link x_s_hat_j = y * Rad(beta)
    NoiseSpec eta_inv;
    NoiseSpec eta_s;
};

/// y = gamma' x_inv_hat + eta_y;  x = S (x_inv_hat + eta_inv ; x_s_hat + eta_s).
struct SemConfig {
    int d_inv = 1;
    int d_s = 1;
    Eigen::VectorXd gamma;
    InvariantLaw inv_law = InvariantLaw::rademacher;
    double label_noise_var = 0.0;
    std::vector<SemEnvironment> envs;
    Eigen::MatrixXd mixing;  // square, size d_inv + d_s

    int dim() const { return d_inv + d_s; }

    /// Throws std::invalid_argument on gamma = 0, bad dimensions or a
    /// singular mixing matrix.
    void validate() const;

    /// First d_inv rows of S^-1, so unmix() * S * (a; b) == a.
    Eigen::MatrixXd unmix() const;

    /// Var(gamma' x_inv_hat) = |gamma|^2 for both supported unit-variance laws.
    double invariant_signal_variance() const { return gamma.squaredNorm(); }
    double gamma_sum() const { return gamma.sum(); }
};

/// Random invertible matrix with condition number <= max_condition, drawn
/// deterministically from seed.
Eigen::MatrixXd random_mixing(int dim, std::uint64_t seed, double max_condition = 10.0);

double condition_number(const Eigen::MatrixXd& m);

struct SemSample {
    Eigen::MatrixXd x;           // n x dim, observed
    Eigen::VectorXd y;           // n
    Eigen::MatrixXd hidden_inv;  // n x d_inv, x_inv_hat (oracle checks only)
    Eigen::MatrixXd latent_inv;  // n x d_inv, x_inv_hat + eta_inv before mixing
};

SemSample sem_generate(const SemConfig& cfg, std::size_t env_index, std::size_t n,
                       std::uint64_t seed);

/// Default generator used by the CLI and tests: gamma = 1, Rademacher
/// invariant law, one spurious coordinate.
SemConfig default_sem(std::uint64_t mixing_seed = 7);

/// Random family: d_inv, d_s in [1, 2], random invertible S, noise means
/// and variances in [0, 0.5], `n_envs` environments.
SemConfig random_sem(std::uint64_t seed, std::size_t n_envs = 2);

}  // namespace invcorr
