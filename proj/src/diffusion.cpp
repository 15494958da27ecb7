#include "prefdyn/diffusion.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "prefdyn/kernels.hpp"

namespace prefdyn::diffusion {

namespace {

void check_t(const Schedule& sched, std::size_t t) {
    if (sched.T < 1 || sched.alpha_bar.size() != sched.T + 1 ||
        sched.sigma.size() != sched.T + 1)
        throw std::invalid_argument("diffusion: malformed schedule");
    if (t < 1 || t > sched.T)
        throw std::invalid_argument("diffusion: timestep out of range");
}

void check_dim(const Vec& a, const Vec& b, const char* what) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument(std::string("diffusion: dimension mismatch in ") + what);
}

}  // namespace

Schedule make_ddpm_schedule(std::size_t T, double beta_min, double beta_max) {
    if (T < 1) throw std::invalid_argument("diffusion: T must be >= 1");
    if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0))
        throw std::invalid_argument("diffusion: need 0 < beta_min <= beta_max < 1");
    Schedule s;
    s.T = T;
    s.alpha_bar.assign(T + 1, 1.0);
    s.sigma.assign(T + 1, 0.0);
    for (std::size_t t = 1; t <= T; ++t) {
        const double frac = T > 1 ? static_cast<double>(t - 1) / static_cast<double>(T - 1) : 0.0;
        const double beta = beta_min + (beta_max - beta_min) * frac;
        s.alpha_bar[t] = s.alpha_bar[t - 1] * (1.0 - beta);
        s.sigma[t] = std::sqrt((1.0 - s.alpha_bar[t - 1]) / (1.0 - s.alpha_bar[t]) * beta);
    }
    return s;
}

Vec q_sample(const Vec& x0, std::size_t t, const Vec& eps, const Schedule& sched) {
    check_t(sched, t);
    check_dim(x0, eps, "q_sample");
    const double a = std::sqrt(sched.alpha_bar[t]);
    const double b = std::sqrt(1.0 - sched.alpha_bar[t]);
    Vec out(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * eps[i];
    return out;
}

Vec predict_x0(const Vec& x_t, std::size_t t, const Vec& eps_hat, const Schedule& sched) {
    check_t(sched, t);
    check_dim(x_t, eps_hat, "predict_x0");
    const double a = std::sqrt(sched.alpha_bar[t]);
    const double b = std::sqrt(1.0 - sched.alpha_bar[t]);
    Vec out(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) out[i] = (x_t[i] - b * eps_hat[i]) / a;
    return out;
}

namespace {

// sqrt(1 - ab_{t-1} - sigma_t^2) with a guard against rounding pushing the
// argument a hair below zero.
double dir_coeff(const Schedule& sched, std::size_t t) {
    const double v = 1.0 - sched.alpha_bar[t - 1] - sched.sigma[t] * sched.sigma[t];
    if (v < -1e-12)
        throw std::invalid_argument("diffusion: sigma_t too large for posterior mean");
    return std::sqrt(v > 0.0 ? v : 0.0);
}

}  // namespace

Vec posterior_mean(const Vec& x_t, std::size_t t, const Vec& eps_hat, const Schedule& sched) {
    check_t(sched, t);
    check_dim(x_t, eps_hat, "posterior_mean");
    const Vec xhat0 = predict_x0(x_t, t, eps_hat, sched);
    const double ab_prev = sched.alpha_bar[t - 1];
    const double sq_ab_t = std::sqrt(sched.alpha_bar[t]);
    const double sq_1m_ab_t = std::sqrt(1.0 - sched.alpha_bar[t]);
    const double c_dir = dir_coeff(sched, t);
    const double c_prev = std::sqrt(ab_prev);
    Vec out(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i)
        out[i] = c_prev * xhat0[i] + c_dir * (x_t[i] - sq_ab_t * xhat0[i]) / sq_1m_ab_t;
    return out;
}

double posterior_mean_eps_coeff(std::size_t t, const Schedule& sched) {
    check_t(sched, t);
    const double sq_ab_t = std::sqrt(sched.alpha_bar[t]);
    const double sq_1m_ab_t = std::sqrt(1.0 - sched.alpha_bar[t]);
    const double c_prev = std::sqrt(sched.alpha_bar[t - 1]);
    return dir_coeff(sched, t) - c_prev * sq_1m_ab_t / sq_ab_t;
}

double transition_log_prob(const Vec& x_prev, const Vec& mean, double sigma_t) {
    check_dim(x_prev, mean, "transition_log_prob");
    if (!(sigma_t > 0.0))
        throw std::invalid_argument("diffusion: transition_log_prob needs sigma > 0");
    const double m = static_cast<double>(x_prev.size());
    const double var = sigma_t * sigma_t;
    const double sq = kernels::sqdist(x_prev.data(), mean.data(), x_prev.size());
    return -0.5 * m * std::log(2.0 * std::numbers::pi * var) - sq / (2.0 * var);
}

double flow_sigma(double t, double a) {
    if (!(t > 0.0) || !(t < 1.0))
        throw std::invalid_argument("diffusion: flow time must lie in (0, 1)");
    if (a < 0.0) throw std::invalid_argument("diffusion: flow noise scale must be >= 0");
    return a * std::sqrt(t / (1.0 - t));
}

Vec flow_em_step(const Vec& x_t, double t, double dt, const Vec& v,
                 double a, const Vec& noise) {
    check_dim(x_t, v, "flow_em_step");
    check_dim(x_t, noise, "flow_em_step");
    if (dt < 0.0) throw std::invalid_argument("diffusion: flow step needs dt >= 0");
    const double sig = flow_sigma(t, a);
    const double amp = sig * sig / (2.0 * t);
    const double root_dt = std::sqrt(dt);
    Vec out(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) {
        const double drift = v[i] + amp * (x_t[i] + (1.0 - t) * v[i]);
        out[i] = x_t[i] + drift * dt + sig * root_dt * noise[i];
    }
    return out;
}

}  // namespace prefdyn::diffusion
