#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace invcorr {

enum class NoiseKind { none, gaussian, uniform, poisson_centered };

std::string_view to_string(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view name);

// Additive environmental noise. `scale` means: standard deviation (gaussian),
// half-width of the support (uniform), Poisson rate (poisson_centered, where a
// sample is draw - rate + mean).
struct NoiseSpec {
    NoiseKind kind = NoiseKind::none;
    double mean = 0.0;
    double scale = 0.0;

    static NoiseSpec none() { return {}; }
    static NoiseSpec gaussian(double mean, double stddev);
    /// Gaussian noise given as N(mean, variance), the way the tables write it.
    static NoiseSpec gaussian_var(double mean, double variance);
    static NoiseSpec uniform(double mean, double half_width);
    static NoiseSpec poisson_centered(double mean, double rate);

    double variance() const;
    void validate() const;

    friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

/// One two-bit environment (alpha, beta, eta).
struct EnvironmentSpec {
    double alpha = 0.0;
    double beta = 0.0;
    NoiseSpec noise;

    double a() const { return 1.0 - 2.0 * alpha; }
    double b() const { return 1.0 - 2.0 * beta; }
    void validate() const;

    friend bool operator==(const EnvironmentSpec&, const EnvironmentSpec&) = default;
};

std::string describe(const EnvironmentSpec& env);

/// Second moments of (x1, x2, y) for one environment.
struct Moments {
    double m11 = 0.0;  // E[x1^2]
    double m22 = 0.0;  // E[x2^2]
    double m12 = 0.0;  // E[x1 x2]
    double m1y = 0.0;  // E[x1 y]
    double m2y = 0.0;  // E[x2 y]
    double m1 = 0.0;   // E[x1]
    double m2 = 0.0;   // E[x2]
    double myy = 0.0;  // E[y^2]
    double my = 0.0;   // E[y]; zero for every two-bit environment
};

class NoClosedForm : public std::domain_error {
public:
    explicit NoClosedForm(NoiseKind kind);
};

/// Exact population moments. Only none/gaussian noise have a closed form;
/// other kinds throw NoClosedForm.
Moments two_bit_moments(const EnvironmentSpec& env);

struct Dataset {
    std::vector<double> x1;
    std::vector<double> x2;
    std::vector<double> y;
    EnvironmentSpec spec;
    std::uint64_t seed = 0;

    std::size_t size() const { return y.size(); }
    bool empty() const { return y.empty(); }
};

/// x1_hat ~ Rad(0.5), y = x1_hat * Rad(alpha), x2_hat = y * Rad(beta), and a
/// single noise draw per sample added to both observed features.
Dataset sample_two_bit(const EnvironmentSpec& env, std::size_t n, std::uint64_t seed);

Moments empirical_moments(const Dataset& data);

/// Concatenate b onto a (spec/seed of a kept).
Dataset concat(const Dataset& a, const Dataset& b);

void write_dataset_csv(const Dataset& data, const std::string& path);

}  // namespace invcorr
