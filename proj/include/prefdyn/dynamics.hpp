// First-order analysis of one gradient step: parameter-space kernels of the
// reverse-transition mean, predicted log-likelihood changes at observer
// points, and the measured counterparts.
#pragma once

#include "prefdyn/losses.hpp"

namespace prefdyn::dynamics {

using losses::LossConfig;
using losses::PreferencePair;
using losses::TransitionPoint;

// (x_prev - mean_theta(x_t)) / sigma_t^2, the gradient of the transition
// log-likelihood with respect to the mean.
Vec g_term(const net::Arch& arch, const net::ParamVector& params,
           const Vec& x_prev, const Vec& x_t, std::size_t t, const Vec& c,
           const diffusion::Schedule& sched);

// K(a, b) = J_a J_b^T where J is the Jacobian of the reverse-transition mean
// (posterior_mean of the net output) with respect to the parameters.
Mat ntk_kernel(const net::Arch& arch, const net::ParamVector& params,
               const Vec& x_t_a, std::size_t t_a, const Vec& c_a,
               const Vec& x_t_b, std::size_t t_b, const Vec& c_b,
               const diffusion::Schedule& sched);

// First-order change of log p(observer) after one gradient-descent step of
// size eta on the SFT loss at the updater: eta g_o^T K(o, u) g_u.
double predicted_dlogp_sft(const net::Arch& arch, const net::ParamVector& params,
                           const TransitionPoint& observer,
                           const TransitionPoint& updater, double eta,
                           const diffusion::Schedule& sched);

// Same for one DPO step on the pair:
// eta beta T (1-a) [g_o^T K(o,w) g_w - g_o^T K(o,l) g_l].
double predicted_dlogp_dpo(const net::Arch& arch, const net::ParamVector& params,
                           const net::ParamVector& ref_params,
                           const TransitionPoint& observer,
                           const PreferencePair& pair, const LossConfig& cfg,
                           double eta, const diffusion::Schedule& sched);

double measured_dlogp(const net::Arch& arch, const net::ParamVector& before,
                      const net::ParamVector& after, const TransitionPoint& point,
                      const diffusion::Schedule& sched);

// First-order advantage of the PG-DPO step over the DPO step for the chosen
// sample's log-likelihood: -eta grad_logp_w . (grad_pgdpo - grad_dpo).
// Exactly zero when the two gradients coincide.
double gamma_advantage(const net::Arch& arch, const net::ParamVector& params,
                       const net::ParamVector& ref_params, const PreferencePair& pair,
                       const LossConfig& cfg, double eta,
                       const diffusion::Schedule& sched);

// Partial derivatives of L = -ln(x1^beta / (x1^beta + x2^beta)) with respect
// to the raw likelihoods x1 (preferred) and x2 (rejected); both positive.
struct Partials {
    double d1 = 0.0;  // dL/dx1, negative
    double d2 = 0.0;  // dL/dx2, positive; |d2|/|d1| == x1/x2
};
Partials dpo_partials(double x1, double x2, double beta);

// margin - 1/(2 beta); the IPO gradient scale up to a factor of 2.
double strength_factor_ipo(double margin, double beta);

// 1 while the SLiC hinge is active (delta - log_ratio > 0), else 0.
int slic_gate(double log_ratio, double delta);

// Per-step instrumentation emitted by the experiment drivers.
struct StepDiagnostics {
    std::size_t step = 0;
    double margin = 0.0;
    double strength = 0.0;  // a = sigmoid(beta T margin)
    double alpha = 0.5;
    double gamma = 0.5;
    double grad_norm = 0.0;
    double pred_dlogp_w = 0.0;
    double pred_dlogp_l = 0.0;
    double pred_dlogp_obs = 0.0;
    double meas_dlogp_w = 0.0;
    double meas_dlogp_l = 0.0;
    double meas_dlogp_obs = 0.0;
    double similarity_factor = 0.0;  // meas_dlogp_w - meas_dlogp_l
    double gamma_advantage = 0.0;
};

}  // namespace prefdyn::dynamics
