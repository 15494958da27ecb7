// Forward process, reverse-transition mean, and exact Gaussian transition
// log-densities for a DDPM-style discrete schedule, plus one Euler-Maruyama
// step of a stochastic interpolant sampler as an alternative transition.
#pragma once

#include "prefdyn/types.hpp"

namespace prefdyn::diffusion {

// alpha_bar[0] == 1 and sigma[0] == 0 pad the t = 0 slot; usable timesteps
// are 1..T. sigma[1] is 0 under the DDPM posterior (the t=1 transition is
// deterministic and carries no log-likelihood).
struct Schedule {
    std::size_t T = 0;
    Vec alpha_bar;  // T+1 entries, cumulative product of (1 - beta_t)
    Vec sigma;      // T+1 entries, reverse transition std at each step
};

// Linearly spaced beta_t in [beta_min, beta_max]; requires T >= 1 and
// 0 < beta_min <= beta_max < 1.
Schedule make_ddpm_schedule(std::size_t T, double beta_min, double beta_max);

// sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps, t in [1, T]
Vec q_sample(const Vec& x0, std::size_t t, const Vec& eps, const Schedule& sched);

// (x_t - sqrt(1 - alpha_bar_t) eps_hat) / sqrt(alpha_bar_t)
Vec predict_x0(const Vec& x_t, std::size_t t, const Vec& eps_hat, const Schedule& sched);

// Mean of the reverse transition p(x_{t-1} | x_t) implied by eps_hat:
//   sqrt(ab_{t-1}) xhat0 + sqrt(1 - ab_{t-1} - sigma_t^2) (x_t - sqrt(ab_t) xhat0)/sqrt(1 - ab_t)
Vec posterior_mean(const Vec& x_t, std::size_t t, const Vec& eps_hat, const Schedule& sched);

// d(posterior_mean)/d(eps_hat) is this scalar times the identity.
double posterior_mean_eps_coeff(std::size_t t, const Schedule& sched);

// log N(x_prev; mean, sigma^2 I); requires sigma > 0.
double transition_log_prob(const Vec& x_prev, const Vec& mean, double sigma_t);

// Diffusion coefficient of the stochastic interpolant sampler, a sqrt(t/(1-t)).
double flow_sigma(double t, double a);

// x + (v + sigma_t^2/(2t) (x + (1-t) v)) dt + sigma_t sqrt(dt) noise, t in (0,1).
Vec flow_em_step(const Vec& x_t, double t, double dt, const Vec& v,
                 double a, const Vec& noise);

}  // namespace prefdyn::diffusion
