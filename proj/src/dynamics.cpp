#include "prefdyn/dynamics.hpp"

#include <cmath>
#include <stdexcept>

#include "prefdyn/kernels.hpp"

namespace prefdyn::dynamics {

namespace {

double t_norm_of(std::size_t t, const diffusion::Schedule& sched) {
    return static_cast<double>(t) / static_cast<double>(sched.T);
}

// g_o^T K g_u for an m x m kernel block.
double quad_form(const Vec& g_o, const Mat& k, const Vec& g_u) {
    double acc = 0.0;
    for (std::size_t i = 0; i < k.rows; ++i)
        acc += g_o[i] * kernels::dot(k.row(i), g_u.data(), k.cols);
    return acc;
}

}  // namespace

Vec g_term(const net::Arch& arch, const net::ParamVector& params,
           const Vec& x_prev, const Vec& x_t, std::size_t t, const Vec& c,
           const diffusion::Schedule& sched) {
    const Vec eps_hat = net::forward(arch, params, x_t, t_norm_of(t, sched), c);
    const Vec mean = diffusion::posterior_mean(x_t, t, eps_hat, sched);
    const double sigma = sched.sigma[t];
    if (!(sigma > 0.0))
        throw std::invalid_argument("dynamics: g_term needs sigma > 0");
    const double var = sigma * sigma;
    Vec g(x_prev.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (x_prev[i] - mean[i]) / var;
    return g;
}

Mat ntk_kernel(const net::Arch& arch, const net::ParamVector& params,
               const Vec& x_t_a, std::size_t t_a, const Vec& c_a,
               const Vec& x_t_b, std::size_t t_b, const Vec& c_b,
               const diffusion::Schedule& sched) {
    const Mat ja = net::jacobian(arch, params, x_t_a, t_norm_of(t_a, sched), c_a);
    const Mat jb = net::jacobian(arch, params, x_t_b, t_norm_of(t_b, sched), c_b);
    const double sa = diffusion::posterior_mean_eps_coeff(t_a, sched);
    const double sb = diffusion::posterior_mean_eps_coeff(t_b, sched);
    const double scale = sa * sb;
    Mat k(ja.rows, jb.rows);
    for (std::size_t i = 0; i < ja.rows; ++i)
        for (std::size_t j = 0; j < jb.rows; ++j)
            k.at(i, j) = scale * kernels::dot(ja.row(i), jb.row(j), ja.cols);
    return k;
}

double predicted_dlogp_sft(const net::Arch& arch, const net::ParamVector& params,
                           const TransitionPoint& observer,
                           const TransitionPoint& updater, double eta,
                           const diffusion::Schedule& sched) {
    const Vec g_o = g_term(arch, params, observer.x_prev, observer.x_t, observer.t,
                           observer.c, sched);
    const Vec g_u = g_term(arch, params, updater.x_prev, updater.x_t, updater.t,
                           updater.c, sched);
    const Mat k = ntk_kernel(arch, params, observer.x_t, observer.t, observer.c,
                             updater.x_t, updater.t, updater.c, sched);
    return eta * quad_form(g_o, k, g_u);
}

double predicted_dlogp_dpo(const net::Arch& arch, const net::ParamVector& params,
                           const net::ParamVector& ref_params,
                           const TransitionPoint& observer,
                           const PreferencePair& pair, const LossConfig& cfg,
                           double eta, const diffusion::Schedule& sched) {
    cfg.validate();
    const double margin = losses::reward_margin(arch, pair, params, ref_params, sched);
    const double bt = cfg.beta * static_cast<double>(cfg.T);
    const double a = losses::sigmoid(bt * margin);
    const Vec g_o = g_term(arch, params, observer.x_prev, observer.x_t, observer.t,
                           observer.c, sched);
    const Vec g_w = g_term(arch, params, pair.x_prev_w, pair.x_t_w, pair.t, pair.c, sched);
    const Vec g_l = g_term(arch, params, pair.x_prev_l, pair.x_t_l, pair.t, pair.c, sched);
    const Mat k_ow = ntk_kernel(arch, params, observer.x_t, observer.t, observer.c,
                                pair.x_t_w, pair.t, pair.c, sched);
    const Mat k_ol = ntk_kernel(arch, params, observer.x_t, observer.t, observer.c,
                                pair.x_t_l, pair.t, pair.c, sched);
    return eta * bt * (1.0 - a) * (quad_form(g_o, k_ow, g_w) - quad_form(g_o, k_ol, g_l));
}

double measured_dlogp(const net::Arch& arch, const net::ParamVector& before,
                      const net::ParamVector& after, const TransitionPoint& point,
                      const diffusion::Schedule& sched) {
    const double tn = t_norm_of(point.t, sched);
    const double sigma = sched.sigma[point.t];
    const Vec mean_before =
        diffusion::posterior_mean(point.x_t, point.t, net::forward(arch, before, point.x_t, tn, point.c), sched);
    const Vec mean_after =
        diffusion::posterior_mean(point.x_t, point.t, net::forward(arch, after, point.x_t, tn, point.c), sched);
    return diffusion::transition_log_prob(point.x_prev, mean_after, sigma) -
           diffusion::transition_log_prob(point.x_prev, mean_before, sigma);
}

double gamma_advantage(const net::Arch& arch, const net::ParamVector& params,
                       const net::ParamVector& ref_params, const PreferencePair& pair,
                       const LossConfig& cfg, double eta,
                       const diffusion::Schedule& sched) {
    const auto pg = losses::pgdpo_loss(arch, params, ref_params, pair, cfg, sched);
    const auto dpo = losses::dpo_loss(arch, params, ref_params, pair, cfg, sched);
    const auto lw = losses::transition_logp_grad(arch, params, pair.chosen(), sched);
    Vec diff = pg.grad;
    kernels::axpy(-1.0, dpo.grad.data(), diff.data(), diff.size());
    return -eta * kernels::dot(lw.grad.data(), diff.data(), diff.size());
}

Partials dpo_partials(double x1, double x2, double beta) {
    if (!(x1 > 0.0) || !(x2 > 0.0))
        throw std::invalid_argument("dynamics: dpo_partials needs positive likelihoods");
    if (!(beta > 0.0))
        throw std::invalid_argument("dynamics: dpo_partials needs beta > 0");
    const double p1 = std::pow(x1, beta);
    const double p2 = std::pow(x2, beta);
    const double denom = p1 + p2;
    Partials out;
    out.d1 = -beta * p2 / (x1 * denom);
    out.d2 = beta * std::pow(x2, beta - 1.0) / denom;
    return out;
}

double strength_factor_ipo(double margin, double beta) {
    if (!(beta > 0.0))
        throw std::invalid_argument("dynamics: strength_factor_ipo needs beta > 0");
    return margin - 1.0 / (2.0 * beta);
}

int slic_gate(double log_ratio, double delta) {
    return delta - log_ratio > 0.0 ? 1 : 0;
}

}  // namespace prefdyn::dynamics
