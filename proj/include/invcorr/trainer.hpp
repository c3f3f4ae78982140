#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "invcorr/csv.hpp"
#include "invcorr/popmath.hpp"

namespace invcorr {

enum class OptimMethod {
    gradient_descent,  // fixed step on the normalized objective
    newton,            // damped Newton with Armijo backtracking
    hybrid,            // fixed-step descent into a basin, then Newton polish
};

std::string_view to_string(OptimMethod m);
OptimMethod parse_optim_method(std::string_view name);

struct OptimConfig {
    OptimMethod method = OptimMethod::hybrid;
    double learning_rate = 0.1;
    std::size_t max_steps = 200000;
    double grad_tol = 1e-10;
    /// Hybrid only: gradient norm at which descent hands over to Newton.
    double switch_tol = 1e-5;
    LinearParams init{0.1, 0.1};
    bool warm_start = false;
    bool record_trajectory = false;

    void validate() const;
};

struct TrainResult {
    LinearParams w;
    std::vector<LinearParams> trajectory;  // includes the starting point
    std::size_t steps = 0;
    bool converged = false;
    bool diverged = false;
    std::size_t diverged_at = 0;
    double objective = 0.0;
    double grad_norm = 0.0;
};

/// Minimizes (sum_e R_e + lambda P) / (1 + lambda) over w.
TrainResult train_population(std::span<const EnvSummary> envs, const Objective& objective,
                             const OptimConfig& cfg);

struct SweepRecord {
    PenaltyKind penalty = PenaltyKind::icorr;
    double log2_lambda = -1.0;  // -1 encodes lambda = 0
    LinearParams w;
    double g_pp = 0.0, g_pm = 0.0, g_mp = 0.0, g_mm = 0.0;
    std::vector<double> env_risks;
    bool converged = false;
    std::string error;

    double mean_risk() const;
};

/// lambda for a grid value; -1 maps to 0.
double lambda_from_log2(double log2_lambda);
/// -1, 0, 1, ..., 30.
std::vector<double> default_log2_grid();
/// Rejects unsorted grids and a -1 anywhere but the head.
void validate_log2_grid(const std::vector<double>& grid);

/// Trains at every grid point. Warm starts run sequentially; cold starts are
/// split across `jobs` threads with identical results for any job count.
std::vector<SweepRecord> lambda_sweep(std::span<const EnvSummary> envs, PenaltyKind kind,
                                      const std::vector<double>& log2_grid,
                                      const OptimConfig& cfg, std::size_t jobs = 1);

CsvTable sweep_to_csv(const std::vector<SweepRecord>& records);
/// Line chart of the four corner outputs against log2 lambda.
std::string sweep_to_svg(const std::vector<SweepRecord>& records, const std::string& title);

// ---------------------------------------------------------------------------
// Sampled data.

struct MlpSpec {
    std::vector<int> widths{2, 16, 16, 1};
    std::uint64_t seed = 1;

    void validate() const;
};

/// Fully connected ReLU network with a linear scalar output.
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(const MlpSpec& spec);

    std::size_t parameter_count() const { return params_.size(); }
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    const MlpSpec& spec() const { return spec_; }

    double predict(double x1, double x2) const;

    /// Forward pass that keeps activations. `head` is the input of the final
    /// linear layer followed by a constant 1 for its bias.
    struct Tape {
        std::vector<std::vector<double>> activations;  // input, then each hidden layer post-ReLU
        std::vector<double> head;
        double output = 0.0;
    };
    void forward(double x1, double x2, Tape& tape) const;
    std::size_t head_size() const { return static_cast<std::size_t>(spec_.widths[spec_.widths.size() - 2]) + 1; }

    /// Adds d loss / d params given d loss / d output and d loss / d head.
    void backward(const Tape& tape, double d_output, std::span<const double> d_head,
                  std::vector<double>& grad) const;

private:
    MlpSpec spec_;
    std::vector<double> params_;
    std::vector<std::size_t> offsets_;  // start of each layer's weights
};

enum class ModelKind { linear, mlp };

struct TrainedModel {
    ModelKind kind = ModelKind::linear;
    LinearParams linear;
    Mlp mlp;

    double predict(double x1, double x2) const;
};

struct EmpiricalConfig {
    ModelKind model = ModelKind::linear;
    MlpSpec mlp;
    LinearParams linear_init{0.1, 0.1};
    Objective objective;
    std::size_t epochs = 50;
    std::size_t batch_size = 0;  // 0 means full batch
    double learning_rate = 0.1;
    /// Steps run with lambda = 0 before the penalty switches on.
    std::size_t penalty_anneal_steps = 0;
    std::uint64_t seed = 1;

    void validate() const;
};

struct EmpiricalResult {
    TrainedModel model;
    std::vector<double> loss_history;  // normalized objective per step
    std::size_t steps = 0;
};

/// Mini-batch gradient descent on (sum_e R_e + lambda P) / (1 + lambda) with
/// per-env batch estimates of the penalty. Throws std::runtime_error on a
/// non-finite loss.
EmpiricalResult train_empirical(std::span<const Dataset> datasets, const EmpiricalConfig& cfg);

/// Objective and exact parameter gradient on one set of per-env batches.
/// Exposed for gradient checks.
struct BatchObjective {
    double value = 0.0;
    std::vector<double> grad;
};
BatchObjective batch_objective(const TrainedModel& model, std::span<const Dataset> batches,
                               const Objective& objective);
std::vector<double> model_params(const TrainedModel& model);
void set_model_params(TrainedModel& model, const std::vector<double>& params);

struct Evaluation {
    double risk = 0.0;
    double accuracy = 0.0;  // f * y > 0 counts as correct; f = 0 never does
};

Evaluation evaluate(const TrainedModel& model, const Dataset& data);

}  // namespace invcorr
