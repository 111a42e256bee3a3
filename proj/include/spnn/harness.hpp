#pragma once

// Training (teacher-forced one-step), autoregressive rollout, evaluation
// metrics and the hyperparameter/data sweep runner.

#include "spnn/bracket.hpp"
#include "spnn/dataset.hpp"
#include "spnn/nn.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace spnn::harness {

using bracket::Formalism;

struct TrainConfig {
    Formalism formalism = Formalism::Generic;
    long long epochs = 12000;
    double base_lr = 1e-4;
    // Empty means {epochs/3, 2 epochs/3}.
    std::vector<long long> milestones;
    double gamma = 0.1;
    double lambda_d = 1e2;
    double lambda_r = 1e-5;
    int hidden_layers = 5;
    Eigen::Index hidden_width = 200;
    std::uint64_t seed = 0;
    double train_fraction = 0.8;
    std::uint64_t split_seed = 0;
    // Checkpoint diagnostics (degeneracy loss vs dH/dt along rollouts).
    bool monitor_degeneracy = true;
    double divergence_threshold = 1e12;

    void validate() const;
    nn::SchedulerSpec scheduler() const;
};

// One batched forward pass: every column of `z` is a state.
struct Transition {
    nn::BoundNet net;
    ad::Var z;
    bracket::BracketHead head;
    bracket::Operators ops;
    ad::Var grad_primary;  // dF/dz or dH/dz
    ad::Var grad_entropy;  // dS/dz (GENERIC)
    ad::Var next;
    std::optional<bracket::Residuals> residuals;  // GENERIC only
};

Transition build_transition(ad::Graph& g, const nn::NetParams& params, const Matrix& states,
                            double dt, Formalism f);

struct LossTerms {
    ad::Var data;
    ad::Var degen;  // unset for the single generator
    ad::Var reg;
    ad::Var total;
};

ad::Var data_loss(ad::Var pred, ad::Var truth);

// GENERIC:  lambda_d data + degen + lambda_r reg
// single:   lambda_d data + lambda_r reg  (degeneracy is not defined)
LossTerms combine_losses(ad::Var data, ad::Var degen, ad::Var reg, const TrainConfig& cfg,
                         Formalism f);

LossTerms losses(const Transition& tr, ad::Var truth, const TrainConfig& cfg);

struct LossValues {
    double data = 0.0;
    std::optional<double> degen;
    double reg = 0.0;
    double total = 0.0;
};

LossValues values(const LossTerms& t);

// Teacher-forced losses of `params` on the given trajectories, no update.
LossValues teacher_forced_loss(const nn::NetParams& params, const data::Dataset& ds,
                               const std::vector<Eigen::Index>& trajectories,
                               const TrainConfig& cfg);

// Per-snapshot degeneracy residual |L dS|^2 + |M dH|^2 under teacher forcing.
std::vector<double> teacher_forced_degeneracy(const nn::NetParams& params,
                                              const data::Dataset& ds,
                                              const std::vector<Eigen::Index>& trajectories);

struct LossCurves {
    std::vector<double> data;
    std::vector<double> degen;  // empty for the single generator
    std::vector<double> reg;
    std::vector<double> total;
};

struct CheckpointDiagnostic {
    long long epoch = 0;
    double degen_loss = 0.0;
    double median_energy_rate = 0.0;  // median |dH/dz . M dS/dz| along rollouts
};

struct Rollout {
    Matrix states;                 // dim x n, states(:, 0) = z0
    Eigen::Index failure_step = -1;  // first non-finite step, -1 if none
    // Per recorded state (before the step taken from it).
    std::vector<double> reversible_norm;    // |L dH| (GENERIC) or |L dF|
    std::vector<double> dissipative_norm;   // |M dS| (GENERIC) or |M dF|
    std::vector<double> residual_L;         // |L dS|  (GENERIC)
    std::vector<double> residual_M;         // |M dH|  (GENERIC)
    std::vector<double> energy_rate;        // dH/dz . M dS/dz (GENERIC)
};

// Autoregressive: the network sees its own prediction from step 1 on.
Rollout rollout(const nn::NetParams& params, const Vector& z0, Eigen::Index n_states, double dt,
                Formalism f);

struct TrajectoryMetrics {
    Eigen::Index trajectory = 0;
    Vector mse;                  // per variable, averaged over time
    double mse_total = 0.0;      // mean over variables
    std::vector<double> energy_error;  // |E(z_net) - E(z_GT)| per snapshot
    std::vector<double> residual_L;
    std::vector<double> residual_M;
    Eigen::Index failure_step = -1;
};

struct RunMetrics {
    Formalism formalism = Formalism::Generic;
    LossCurves curves;
    std::vector<CheckpointDiagnostic> checkpoints;
    std::vector<TrajectoryMetrics> trajectories;
    int failed_rollouts = 0;
    Vector mse_per_variable;      // over successful trajectories
    double median_mse = 0.0;
    double median_energy_error = 0.0;
    double median_dissipative = 0.0;
    double median_reversible = 0.0;
    bool trivial_solution = false;
    std::map<std::string, double> scalars;  // extra named diagnostics
};

// |M dS| median below this fraction of the |L dH| median flags M = 0.
inline constexpr double kTrivialRatio = 1e-6;

bool trivial_solution(double median_dissipative, double median_reversible);

enum class TrainStatus { Ok, Diverged };

struct MilestoneCheckpoint {
    long long epoch = 0;
    nn::NetParams params;
};

struct TrainResult {
    nn::NetParams params;
    nn::NetParams initial;
    RunMetrics metrics;
    data::Split split;
    TrainStatus status = TrainStatus::Ok;
    std::string message;
    long long epochs_run = 0;
    std::vector<MilestoneCheckpoint> milestones;
};

using EpochCallback = std::function<void(long long epoch, const LossValues& epoch_loss)>;

TrainResult train(const data::Dataset& ds, const TrainConfig& cfg, const data::Split& split,
                  const EpochCallback& on_epoch = {});
// Splits by cfg.train_fraction / cfg.split_seed.
TrainResult train(const data::Dataset& ds, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// Total system energy of each snapshot column (pendulum: analytic energy;
// Couette: the internal energy component).
using EnergyFn = std::function<Vector(const Matrix& states)>;
EnergyFn system_energy(const data::Dataset& ds);

RunMetrics evaluate(const nn::NetParams& params, const data::Dataset& ds,
                    const std::vector<Eigen::Index>& trajectories, Formalism f,
                    const EnergyFn& energy);

// Long-format CSV rows: run_id,cell,metric,trajectory,variable,value
void append_csv(std::string& out, const std::string& run_id, const std::string& cell,
                const RunMetrics& m);
std::string csv_header();
std::string summary_json(const std::string& run_id, const TrainConfig& cfg, const RunMetrics& m,
                         const TrainResult* tr = nullptr);

// ---------------------------------------------------------------------------
// Sweeps

struct DataSpec {
    data::System system = data::System::Pendulum;
    int n_traj = 50;           // pendulum trajectories / Couette nodes
    int snapshots = 200;
    double horizon = 60.0;     // pendulum only; dt_out = horizon / snapshots
    double Re = 0.1;
    double We = 1.0;
    int K = 10000;
    std::uint64_t seed = 0;
    // Pendulum RK4 step upper bound; substeps = ceil(dt_out / max_step).
    double max_step = 0.015;
    // With n_test > 0 the first n_test trajectories are the test set and the
    // next n_traj are the training set, so test sets agree across cells.
    int n_test = 0;
};

struct SweepCell {
    std::string id;
    TrainConfig train;
    DataSpec data;
};

struct SweepSpec {
    TrainConfig base_train;
    DataSpec base_data;
    std::vector<Formalism> formalisms{Formalism::Generic, Formalism::SingleGenerator};
    std::vector<long long> epochs;
    std::vector<double> learning_rates;
    std::vector<Eigen::Index> widths;
    std::vector<int> snapshots;
    std::vector<int> trajectories;
    std::vector<double> reynolds;
    std::vector<double> weissenberg;

    std::vector<SweepCell> cells() const;
};

struct SweepRow {
    SweepCell cell;
    bool ok = false;
    std::string error;
    RunMetrics metrics;
    std::vector<double> test_mse;  // per test trajectory
};

data::Dataset make_dataset(const DataSpec& spec, unsigned jobs = 1);
data::Split cell_split(const DataSpec& spec, const data::Dataset& ds, const TrainConfig& cfg);

// Trains and evaluates on the held-out partition.
SweepRow run_cell(const SweepCell& cell, const data::Dataset* prebuilt = nullptr);

std::vector<SweepRow> sweep(const SweepSpec& spec, unsigned jobs = 1);

std::string sweep_csv(const std::vector<SweepRow>& rows);

double median(std::vector<double> v);
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace spnn::harness
