// Preference-optimization losses over exact Gaussian reverse transitions:
// SFT, DPO, IPO, SLiC, and PG-DPO (DPO with adaptive rejected-sample scaling
// and an implicit-preference-reward branch). Every loss returns its value and
// the analytic parameter gradient.
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "prefdyn/diffusion.hpp"
#include "prefdyn/net.hpp"
#include "prefdyn/types.hpp"

namespace prefdyn::losses {

enum class Family { sft, dpo, ipo, slic, pgdpo };

const char* family_name(Family f);
std::optional<Family> parse_family(const std::string& name);

struct LossConfig {
    double beta = 1.0;       // preference temperature; also the SLiC regularizer weight
    std::size_t T = 50;      // timestep count; beta*T scales the sigmoid argument
    double k1 = 10.0;        // adaptive rejected-scale gain
    double k2 = 10.0;        // preference-reward gate gain
    double eps_stab = 1e-6;  // stabilizer in the normalized-margin denominator
    double delta_slic = 1.0; // SLiC hinge offset
    Family family = Family::pgdpo;

    // Weight computation compatibility switches; see ars_alpha.
    bool literal_denominator = false;
    bool code_convention = false;

    // Diagnostic overrides pinning the adaptive weights.
    std::optional<double> force_alpha;
    std::optional<double> force_gamma;

    void validate() const;
};

struct TransitionPoint {
    Vec x_prev;  // transition target x_{t-1}
    Vec x_t;
    std::size_t t = 1;
    Vec c;
};

struct PreferencePair {
    Vec x_prev_w, x_prev_l;
    Vec x_t_w, x_t_l;
    std::size_t t = 1;
    Vec c;

    TransitionPoint chosen() const { return {x_prev_w, x_t_w, t, c}; }
    TransitionPoint rejected() const { return {x_prev_l, x_t_l, t, c}; }
};

struct RewardPair {
    double r_w = 0.0;
    double r_l = 0.0;
    double margin() const { return r_w - r_l; }
};

struct ScalarGrad {
    double loss = 0.0;
    Vec grad;
};

struct DpoOut {
    double loss = 0.0;
    Vec grad;
    RewardPair rewards;
    double strength = 0.0;  // a = sigmoid(beta T margin)
};

struct PgdpoOut {
    double loss = 0.0;
    Vec grad;
    RewardPair rewards;
    double alpha = 0.5;
    double gamma = 0.5;
};

// Numerically stable sigmoid and ln(1 + e^z).
double sigmoid(double z);
double softplus(double z);

// log p_theta(x_prev | x_t) - log p_ref(x_prev | x_t) with both means given
// directly; the shared normalization cancels.
double implicit_reward_from_means(const Vec& x_prev, const Vec& mean_model,
                                  const Vec& mean_ref, double sigma_t);

double implicit_reward(const net::Arch& arch, const net::ParamVector& params,
                       const net::ParamVector& ref_params,
                       const Vec& x_prev, const Vec& x_t, std::size_t t,
                       const Vec& c, const diffusion::Schedule& sched);

struct LogpGrad {
    double logp = 0.0;
    Vec grad;  // d(logp)/d(params)
};

LogpGrad transition_logp_grad(const net::Arch& arch, const net::ParamVector& params,
                              const TransitionPoint& point,
                              const diffusion::Schedule& sched);

// Negative transition log-likelihood of one (x_prev, x_t) step.
ScalarGrad sft_loss(const net::Arch& arch, const net::ParamVector& params,
                    const Vec& x_prev, const Vec& x_t, std::size_t t,
                    const Vec& c, const diffusion::Schedule& sched);

// -ln sigmoid(beta T (r_w - r_l)). The gradient is computed both by the
// direct chain rule and through the SFT-difference decomposition
// beta T (1-a) (grad_sft_w - grad_sft_l); the two must agree to 1e-10
// relative or the call throws.
DpoOut dpo_loss(const net::Arch& arch, const net::ParamVector& params,
                const net::ParamVector& ref_params, const PreferencePair& pair,
                const LossConfig& cfg, const diffusion::Schedule& sched);

// sigmoid(k1 (r_w - r_l) / (|r_l| + eps_stab)). literal_denominator uses
// r_l + eps_stab, which flips the scaling sign for negative rejected rewards.
double ars_alpha(double r_w, double r_l, const LossConfig& cfg);

// sigmoid(-k2 (r_w - r_l) / (|r_l| + eps_stab)); same denominator switch.
double ipr_gamma(double r_w, double r_l, const LossConfig& cfg);

// Weights computed the way the error-space convention does it: from raw
// squared-error differences d = |x_prev - mean|^2 - |x_prev - mean_ref|^2
// (so d = -2 sigma^2 r), with the literal d_l + eps_stab denominator.
struct PairWeights {
    double alpha = 0.5;
    double gamma = 0.5;
};
PairWeights code_convention_weights(double d_w, double d_l, const LossConfig& cfg);

// -[gamma ln sigmoid(beta T r_w - alpha beta T r_l) + (1-gamma) beta T r_w]
// with alpha, gamma treated as constants (stop-gradient).
PgdpoOut pgdpo_loss(const net::Arch& arch, const net::ParamVector& params,
                    const net::ParamVector& ref_params, const PreferencePair& pair,
                    const LossConfig& cfg, const diffusion::Schedule& sched);

// Same objective with the weights supplied by the caller.
PgdpoOut pgdpo_loss_with_weights(const net::Arch& arch, const net::ParamVector& params,
                                 const net::ParamVector& ref_params,
                                 const PreferencePair& pair, const LossConfig& cfg,
                                 const diffusion::Schedule& sched,
                                 double alpha, double gamma);

// (r_w - r_l - 1/(2 beta))^2
DpoOut ipo_loss(const net::Arch& arch, const net::ParamVector& params,
                const net::ParamVector& ref_params, const PreferencePair& pair,
                const LossConfig& cfg, const diffusion::Schedule& sched);

// max(0, delta - (logp_w - logp_l)) + beta * sft(x_prev_ref); the hinge is
// inactive at a tie (strict > 0 test) and the regularizer is evaluated at the
// chosen sample's x_t.
ScalarGrad slic_loss(const net::Arch& arch, const net::ParamVector& params,
                     const net::ParamVector& ref_params, const PreferencePair& pair,
                     const Vec& x_prev_ref, const LossConfig& cfg,
                     const diffusion::Schedule& sched);

double reward_margin(const net::Arch& arch, const PreferencePair& pair,
                     const net::ParamVector& params, const net::ParamVector& ref_params,
                     const diffusion::Schedule& sched);

}  // namespace prefdyn::losses
