#include "prefdyn/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "prefdyn/kernels.hpp"

namespace prefdyn::losses {

namespace {

struct TransEval {
    Vec mean;
    double sigma = 0.0;
    double var = 0.0;
    double s_coeff = 0.0;  // d(mean)/d(eps_hat)
    double logp = 0.0;
};

double t_norm_of(std::size_t t, const diffusion::Schedule& sched) {
    return static_cast<double>(t) / static_cast<double>(sched.T);
}

TransEval eval_transition(const net::Arch& arch, const net::ParamVector& params,
                          const Vec& x_prev, const Vec& x_t, std::size_t t,
                          const Vec& c, const diffusion::Schedule& sched) {
    TransEval e;
    const Vec eps_hat = net::forward(arch, params, x_t, t_norm_of(t, sched), c);
    e.mean = diffusion::posterior_mean(x_t, t, eps_hat, sched);
    e.sigma = sched.sigma[t];
    e.var = e.sigma * e.sigma;
    e.s_coeff = diffusion::posterior_mean_eps_coeff(t, sched);
    e.logp = diffusion::transition_log_prob(x_prev, e.mean, e.sigma);
    return e;
}

void check_pair(const net::Arch& arch, const PreferencePair& pair) {
    const std::size_t m = arch.output_dim;
    if (pair.x_prev_w.size() != m || pair.x_prev_l.size() != m ||
        pair.x_t_w.size() != m || pair.x_t_l.size() != m)
        throw std::invalid_argument("losses: pair dimension mismatch");
    if (pair.c.size() != arch.cond_dim())
        throw std::invalid_argument("losses: pair condition dimension mismatch");
}

Vec combine2(double cw, const Vec& gw, double cl, const Vec& gl) {
    Vec out(gw.size(), 0.0);
    kernels::axpy(cw, gw.data(), out.data(), out.size());
    kernels::axpy(cl, gl.data(), out.data(), out.size());
    return out;
}

double norm2(const Vec& v) { return std::sqrt(kernels::dot(v.data(), v.data(), v.size())); }

double normalized_margin(double r_w, double r_l, const LossConfig& cfg) {
    const double denom = (cfg.literal_denominator ? r_l : std::fabs(r_l)) + cfg.eps_stab;
    return (r_w - r_l) / denom;
}

}  // namespace

const char* family_name(Family f) {
    switch (f) {
        case Family::sft: return "SFT";
        case Family::dpo: return "DPO";
        case Family::ipo: return "IPO";
        case Family::slic: return "SLiC";
        case Family::pgdpo: return "PGDPO";
    }
    return "unknown";
}

std::optional<Family> parse_family(const std::string& name) {
    if (name == "SFT") return Family::sft;
    if (name == "DPO") return Family::dpo;
    if (name == "IPO") return Family::ipo;
    if (name == "SLiC") return Family::slic;
    if (name == "PGDPO") return Family::pgdpo;
    return std::nullopt;
}

void LossConfig::validate() const {
    if (!(beta > 0.0)) throw std::invalid_argument("loss: beta must be > 0");
    if (T < 1) throw std::invalid_argument("loss: T must be >= 1");
    if (k1 < 0.0 || k2 < 0.0) throw std::invalid_argument("loss: gains must be >= 0");
    if (!(eps_stab > 0.0)) throw std::invalid_argument("loss: eps_stab must be > 0");
    if (delta_slic < 0.0) throw std::invalid_argument("loss: delta_slic must be >= 0");
    for (const auto& f : {force_alpha, force_gamma})
        if (f && (*f < 0.0 || *f > 1.0))
            throw std::invalid_argument("loss: forced weights must lie in [0, 1]");
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double softplus(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

double implicit_reward_from_means(const Vec& x_prev, const Vec& mean_model,
                                  const Vec& mean_ref, double sigma_t) {
    return diffusion::transition_log_prob(x_prev, mean_model, sigma_t) -
           diffusion::transition_log_prob(x_prev, mean_ref, sigma_t);
}

double implicit_reward(const net::Arch& arch, const net::ParamVector& params,
                       const net::ParamVector& ref_params,
                       const Vec& x_prev, const Vec& x_t, std::size_t t,
                       const Vec& c, const diffusion::Schedule& sched) {
    const double tn = t_norm_of(t, sched);
    const Vec mean_model =
        diffusion::posterior_mean(x_t, t, net::forward(arch, params, x_t, tn, c), sched);
    const Vec mean_ref =
        diffusion::posterior_mean(x_t, t, net::forward(arch, ref_params, x_t, tn, c), sched);
    return implicit_reward_from_means(x_prev, mean_model, mean_ref, sched.sigma[t]);
}

LogpGrad transition_logp_grad(const net::Arch& arch, const net::ParamVector& params,
                              const TransitionPoint& point,
                              const diffusion::Schedule& sched) {
    const auto e = eval_transition(arch, params, point.x_prev, point.x_t, point.t,
                                   point.c, sched);
    Vec up(point.x_prev.size());
    for (std::size_t i = 0; i < up.size(); ++i)
        up[i] = (point.x_prev[i] - e.mean[i]) / e.var * e.s_coeff;
    LogpGrad out;
    out.logp = e.logp;
    out.grad = net::vjp(arch, params, point.x_t, t_norm_of(point.t, sched), point.c, up);
    return out;
}

ScalarGrad sft_loss(const net::Arch& arch, const net::ParamVector& params,
                    const Vec& x_prev, const Vec& x_t, std::size_t t,
                    const Vec& c, const diffusion::Schedule& sched) {
    const auto e = eval_transition(arch, params, x_prev, x_t, t, c, sched);
    Vec up(x_prev.size());
    for (std::size_t i = 0; i < up.size(); ++i)
        up[i] = (e.mean[i] - x_prev[i]) / e.var * e.s_coeff;
    ScalarGrad out;
    out.loss = -e.logp;
    out.grad = net::vjp(arch, params, x_t, t_norm_of(t, sched), c, up);
    return out;
}

DpoOut dpo_loss(const net::Arch& arch, const net::ParamVector& params,
                const net::ParamVector& ref_params, const PreferencePair& pair,
                const LossConfig& cfg, const diffusion::Schedule& sched) {
    cfg.validate();
    check_pair(arch, pair);
    DpoOut out;
    out.rewards.r_w = implicit_reward(arch, params, ref_params, pair.x_prev_w,
                                      pair.x_t_w, pair.t, pair.c, sched);
    out.rewards.r_l = implicit_reward(arch, params, ref_params, pair.x_prev_l,
                                      pair.x_t_l, pair.t, pair.c, sched);
    const double bt = cfg.beta * static_cast<double>(cfg.T);
    const double z = bt * (out.rewards.r_w - out.rewards.r_l);
    const double a = sigmoid(z);
    out.strength = a;
    out.loss = softplus(-z);

    // direct chain rule through the implicit rewards
    const LogpGrad gw = transition_logp_grad(arch, params, pair.chosen(), sched);
    const LogpGrad gl = transition_logp_grad(arch, params, pair.rejected(), sched);
    const double one_m_a = 1.0 - a;
    const double coef = bt * one_m_a;
    out.grad = combine2(-coef, gw.grad, coef, gl.grad);

    // SFT-difference decomposition, kept as a live cross-check
    const ScalarGrad sw = sft_loss(arch, params, pair.x_prev_w, pair.x_t_w, pair.t,
                                   pair.c, sched);
    const ScalarGrad sl = sft_loss(arch, params, pair.x_prev_l, pair.x_t_l, pair.t,
                                   pair.c, sched);
    const Vec decomp = combine2(coef, sw.grad, -coef, sl.grad);
    Vec diff = out.grad;
    kernels::axpy(-1.0, decomp.data(), diff.data(), diff.size());
    const double denom = std::max(norm2(out.grad), norm2(decomp));
    if (denom > 0.0 && norm2(diff) / denom > 1e-10)
        throw std::runtime_error("dpo_loss: gradient decomposition mismatch");
    return out;
}

double ars_alpha(double r_w, double r_l, const LossConfig& cfg) {
    if (cfg.force_alpha) return *cfg.force_alpha;
    return sigmoid(cfg.k1 * normalized_margin(r_w, r_l, cfg));
}

double ipr_gamma(double r_w, double r_l, const LossConfig& cfg) {
    if (cfg.force_gamma) return *cfg.force_gamma;
    return sigmoid(-cfg.k2 * normalized_margin(r_w, r_l, cfg));
}

PairWeights code_convention_weights(double d_w, double d_l, const LossConfig& cfg) {
    PairWeights w;
    const double ratio = (d_w - d_l) / (d_l + cfg.eps_stab);
    w.alpha = cfg.force_alpha ? *cfg.force_alpha : sigmoid(cfg.k1 * ratio);
    w.gamma = cfg.force_gamma ? *cfg.force_gamma : sigmoid(-cfg.k2 * ratio);
    return w;
}

PgdpoOut pgdpo_loss_with_weights(const net::Arch& arch, const net::ParamVector& params,
                                 const net::ParamVector& ref_params,
                                 const PreferencePair& pair, const LossConfig& cfg,
                                 const diffusion::Schedule& sched,
                                 double alpha, double gamma) {
    cfg.validate();
    check_pair(arch, pair);
    PgdpoOut out;
    out.alpha = alpha;
    out.gamma = gamma;
    out.rewards.r_w = implicit_reward(arch, params, ref_params, pair.x_prev_w,
                                      pair.x_t_w, pair.t, pair.c, sched);
    out.rewards.r_l = implicit_reward(arch, params, ref_params, pair.x_prev_l,
                                      pair.x_t_l, pair.t, pair.c, sched);
    const double bt = cfg.beta * static_cast<double>(cfg.T);
    const double u = bt * (out.rewards.r_w - alpha * out.rewards.r_l);
    const double s = sigmoid(u);
    out.loss = gamma * softplus(-u) - (1.0 - gamma) * (bt * out.rewards.r_w);

    const LogpGrad gw = transition_logp_grad(arch, params, pair.chosen(), sched);
    const LogpGrad gl = transition_logp_grad(arch, params, pair.rejected(), sched);
    const double one_m_s = 1.0 - s;
    const double cw = -(bt * (gamma * one_m_s + (1.0 - gamma)));
    const double cl = bt * ((gamma * alpha) * one_m_s);
    out.grad = combine2(cw, gw.grad, cl, gl.grad);
    return out;
}

PgdpoOut pgdpo_loss(const net::Arch& arch, const net::ParamVector& params,
                    const net::ParamVector& ref_params, const PreferencePair& pair,
                    const LossConfig& cfg, const diffusion::Schedule& sched) {
    cfg.validate();
    check_pair(arch, pair);
    const double tn = t_norm_of(pair.t, sched);
    const auto ew = eval_transition(arch, params, pair.x_prev_w, pair.x_t_w, pair.t,
                                    pair.c, sched);
    const auto el = eval_transition(arch, params, pair.x_prev_l, pair.x_t_l, pair.t,
                                    pair.c, sched);
    const Vec mean_ref_w = diffusion::posterior_mean(
        pair.x_t_w, pair.t, net::forward(arch, ref_params, pair.x_t_w, tn, pair.c), sched);
    const Vec mean_ref_l = diffusion::posterior_mean(
        pair.x_t_l, pair.t, net::forward(arch, ref_params, pair.x_t_l, tn, pair.c), sched);
    const double r_w =
        implicit_reward_from_means(pair.x_prev_w, ew.mean, mean_ref_w, ew.sigma);
    const double r_l =
        implicit_reward_from_means(pair.x_prev_l, el.mean, mean_ref_l, el.sigma);

    double alpha, gamma;
    if (cfg.code_convention) {
        const std::size_t m = arch.output_dim;
        const double d_w =
            kernels::sqdist(pair.x_prev_w.data(), ew.mean.data(), m) -
            kernels::sqdist(pair.x_prev_w.data(), mean_ref_w.data(), m);
        const double d_l =
            kernels::sqdist(pair.x_prev_l.data(), el.mean.data(), m) -
            kernels::sqdist(pair.x_prev_l.data(), mean_ref_l.data(), m);
        const PairWeights w = code_convention_weights(d_w, d_l, cfg);
        alpha = w.alpha;
        gamma = w.gamma;
    } else {
        alpha = ars_alpha(r_w, r_l, cfg);
        gamma = ipr_gamma(r_w, r_l, cfg);
    }
    return pgdpo_loss_with_weights(arch, params, ref_params, pair, cfg, sched,
                                   alpha, gamma);
}

DpoOut ipo_loss(const net::Arch& arch, const net::ParamVector& params,
                const net::ParamVector& ref_params, const PreferencePair& pair,
                const LossConfig& cfg, const diffusion::Schedule& sched) {
    cfg.validate();
    check_pair(arch, pair);
    DpoOut out;
    out.rewards.r_w = implicit_reward(arch, params, ref_params, pair.x_prev_w,
                                      pair.x_t_w, pair.t, pair.c, sched);
    out.rewards.r_l = implicit_reward(arch, params, ref_params, pair.x_prev_l,
                                      pair.x_t_l, pair.t, pair.c, sched);
    const double f = out.rewards.margin() - 1.0 / (2.0 * cfg.beta);
    out.loss = f * f;
    out.strength = f;  // signed distance to the IPO fixed point
    const LogpGrad gw = transition_logp_grad(arch, params, pair.chosen(), sched);
    const LogpGrad gl = transition_logp_grad(arch, params, pair.rejected(), sched);
    out.grad = combine2(2.0 * f, gw.grad, -(2.0 * f), gl.grad);
    return out;
}

ScalarGrad slic_loss(const net::Arch& arch, const net::ParamVector& params,
                     const net::ParamVector& ref_params, const PreferencePair& pair,
                     const Vec& x_prev_ref, const LossConfig& cfg,
                     const diffusion::Schedule& sched) {
    cfg.validate();
    check_pair(arch, pair);
    (void)ref_params;  // the hinge compares model likelihoods only
    const ScalarGrad sw = sft_loss(arch, params, pair.x_prev_w, pair.x_t_w, pair.t,
                                   pair.c, sched);
    const ScalarGrad sl = sft_loss(arch, params, pair.x_prev_l, pair.x_t_l, pair.t,
                                   pair.c, sched);
    const ScalarGrad sref = sft_loss(arch, params, x_prev_ref, pair.x_t_w, pair.t,
                                     pair.c, sched);
    const double log_ratio = -sw.loss - (-sl.loss);  // logp_w - logp_l
    const double slack = cfg.delta_slic - log_ratio;
    const bool active = slack > 0.0;
    ScalarGrad out;
    out.loss = (active ? slack : 0.0) + cfg.beta * sref.loss;
    out.grad.assign(params.size(), 0.0);
    if (active) {
        kernels::axpy(1.0, sw.grad.data(), out.grad.data(), out.grad.size());
        kernels::axpy(-1.0, sl.grad.data(), out.grad.data(), out.grad.size());
    }
    kernels::axpy(cfg.beta, sref.grad.data(), out.grad.data(), out.grad.size());
    return out;
}

double reward_margin(const net::Arch& arch, const PreferencePair& pair,
                     const net::ParamVector& params, const net::ParamVector& ref_params,
                     const diffusion::Schedule& sched) {
    check_pair(arch, pair);
    const double r_w = implicit_reward(arch, params, ref_params, pair.x_prev_w,
                                       pair.x_t_w, pair.t, pair.c, sched);
    const double r_l = implicit_reward(arch, params, ref_params, pair.x_prev_l,
                                       pair.x_t_l, pair.t, pair.c, sched);
    return r_w - r_l;
}

}  // namespace prefdyn::losses
