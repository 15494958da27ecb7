// Synthetic preference data, reference pretraining, the preference-training
// loop with its diagnostics, margin scans, and one-axis sweeps.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prefdyn/dynamics.hpp"

namespace prefdyn::experiments {

enum class DataMode { best_of_k, near_duplicate };

const char* data_mode_name(DataMode m);
std::optional<DataMode> parse_data_mode(const std::string& name);

struct DataConfig {
    std::uint64_t seed = 0;
    std::size_t n_pairs = 256;
    std::size_t candidates_per_condition = 4;
    DataMode mode = DataMode::best_of_k;
    double duplicate_eps = 0.05;
    std::size_t condition_dim = 2;
    std::size_t data_dim = 2;

    void validate() const;
};

// Clean-sample preference pair. Latents are built per step from these.
struct PairSample {
    Vec x0_w, x0_l, c;
};

// best_of_k: candidates are center(c) + unit Gaussian draws, scored by
// -|x0 - center(c)|^2; argmax is chosen, argmin rejected, ties resolved to
// the lowest index. near_duplicate: rejected = chosen + duplicate_eps * noise.
std::vector<PairSample> gen_pairs(const DataConfig& cfg);

struct RunConfig {
    losses::LossConfig loss;
    DataConfig data;
    std::size_t sched_T = 50;
    double sched_beta_min = 1e-4;
    double sched_beta_max = 0.02;
    std::size_t hidden_width = 64;
    std::size_t hidden_layers = 2;
    double eta = 1e-3;
    double pretrain_eta = 0.05;
    std::size_t steps = 2000;
    std::size_t pretrain_steps = 1000;
    std::size_t eval_every = 100;
    std::size_t eval_set_size = 64;
    std::uint64_t seed = 0;
    bool record_trace = false;

    void validate() const;
    net::Arch arch() const;
    diffusion::Schedule schedule() const;
};

struct PretrainResult {
    net::ParamVector params;
    double mse_start = 0.0;  // noise-prediction error on a frozen probe set
    double mse_end = 0.0;
};

// Trains a fresh denoiser on all clean samples (chosen and rejected) with the
// noise-prediction MSE objective and plain gradient descent.
PretrainResult pretrain_reference(const RunConfig& cfg);

struct EvalRecord {
    std::size_t step = 0;
    double chosen_logp = 0.0;    // mean over the frozen eval set
    double rejected_logp = 0.0;
    double margin = 0.0;
    double alpha = 0.0;
    double gamma = 0.0;
    double grad_norm = 0.0;
    double gamma_advantage = 0.0;       // last training step's value
    double frac_gamma_positive = 0.0;   // running fraction over steps so far
};

struct TraceRow {
    std::size_t step = 0;
    double margin = 0.0;
    double alpha = 0.5;
    double gamma = 0.5;
    double gamma_advantage = 0.0;
};

struct RunResult {
    std::vector<EvalRecord> records;
    std::vector<TraceRow> trace;  // filled when record_trace is set
    net::ParamVector ref_params;
    net::ParamVector final_params;
    double pretrain_mse_start = 0.0;
    double pretrain_mse_end = 0.0;
    double mean_realized_alpha = 0.0;
    double mean_realized_gamma = 0.0;
    double frac_gamma_positive = 0.0;
    double final_param_dist = 0.0;  // |theta_final - theta_ref|
    std::size_t completed_steps = 0;
    bool aborted = false;
    std::string abort_reason;
};

// Pretrains the reference, then runs preference training from the reference
// snapshot: per step sample a pair index, an eligible timestep (sigma_t > 0),
// and one forward-noise draw shared by both pair members and both latents.
RunResult train(const RunConfig& cfg);

struct ScanRow {
    double margin = 0.0;
    double grad_norm = 0.0;
    double similarity_factor = 0.0;  // meas_dlogp_w - meas_dlogp_l after a probe step
    double pred_dlogp_w = 0.0;
    double pred_dlogp_l = 0.0;
    double meas_dlogp_w = 0.0;
    double meas_dlogp_l = 0.0;
};

// Scatter over n_points probe pairs drawn half best_of_k, half
// near_duplicate; each row takes one DPO probe step of size cfg.eta.
std::vector<ScanRow> margin_scan(const RunConfig& cfg, const net::ParamVector& params,
                                 const net::ParamVector& ref_params,
                                 std::size_t n_points);

// Geometry-fixed variant: one probe pair, margins shifted additively across
// the grid (equivalent to rescaling the reference likelihoods), so the
// gradient geometry is constant and only the sigmoid strength moves.
std::vector<ScanRow> margin_scan_scaled(const RunConfig& cfg,
                                        const net::ParamVector& params,
                                        const net::ParamVector& ref_params,
                                        std::size_t n_points);

enum class SweepAxis { k1, k2, beta };

const char* sweep_axis_name(SweepAxis a);
std::optional<SweepAxis> parse_sweep_axis(const std::string& name);

struct SweepEntry {
    double value = 0.0;
    RunResult result;
};

// Independent train() per value; thread count capped by PREFDYN_THREADS.
std::vector<SweepEntry> sweep(const RunConfig& base, SweepAxis axis,
                              const std::vector<double>& values);

}  // namespace prefdyn::experiments
