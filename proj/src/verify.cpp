#include "prefdyn/verify.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

#include "prefdyn/dynamics.hpp"
#include "prefdyn/kernels.hpp"
#include "prefdyn/rng.hpp"

namespace prefdyn::verify {

namespace {

using losses::Family;
using losses::LossConfig;
using losses::PreferencePair;
using losses::TransitionPoint;

struct Fixture {
    net::Arch arch;
    diffusion::Schedule sched;
    net::ParamVector params, ref;
    PreferencePair pair;
    TransitionPoint heldout;
};

Fixture make_fixture(std::uint64_t seed, std::size_t width = 8,
                     std::size_t layers = 1, std::size_t t = 5) {
    Rng rng(seed);
    Fixture fx;
    fx.arch = net::make_arch(2, 2, width, layers);
    fx.sched = diffusion::make_ddpm_schedule(10, 1e-4, 0.05);
    fx.params = net::init_params(fx.arch, seed);
    fx.ref = net::init_params(fx.arch, seed + 101);
    fx.pair.t = t;
    fx.pair.c = rng.uniform_vec(2, -1.0, 1.0);
    fx.pair.x_prev_w = rng.gaussian_vec(2);
    fx.pair.x_t_w = rng.gaussian_vec(2);
    fx.pair.x_prev_l = rng.gaussian_vec(2);
    fx.pair.x_t_l = rng.gaussian_vec(2);
    fx.heldout = {rng.gaussian_vec(2), rng.gaussian_vec(2), t, fx.pair.c};
    return fx;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << x;
    return os.str();
}

double probe_value(const Fixture& fx, const LossConfig& cfg,
                   const net::ParamVector& theta, double a0, double g0) {
    switch (cfg.family) {
        case Family::sft:
            return losses::sft_loss(fx.arch, theta, fx.pair.x_prev_w, fx.pair.x_t_w,
                                    fx.pair.t, fx.pair.c, fx.sched)
                .loss;
        case Family::dpo:
            return losses::dpo_loss(fx.arch, theta, fx.ref, fx.pair, cfg, fx.sched).loss;
        case Family::ipo:
            return losses::ipo_loss(fx.arch, theta, fx.ref, fx.pair, cfg, fx.sched).loss;
        case Family::slic:
            return losses::slic_loss(fx.arch, theta, fx.ref, fx.pair, fx.pair.x_prev_w,
                                     cfg, fx.sched)
                .loss;
        case Family::pgdpo:
            // adaptive weights are stop-gradient, so probes hold them fixed
            return losses::pgdpo_loss_with_weights(fx.arch, theta, fx.ref, fx.pair, cfg,
                                                   fx.sched, a0, g0)
                .loss;
    }
    return 0.0;
}

Vec center_grad(const Fixture& fx, const LossConfig& cfg, double& a0, double& g0) {
    a0 = 0.5;
    g0 = 0.5;
    switch (cfg.family) {
        case Family::sft:
            return losses::sft_loss(fx.arch, fx.params, fx.pair.x_prev_w, fx.pair.x_t_w,
                                    fx.pair.t, fx.pair.c, fx.sched)
                .grad;
        case Family::dpo:
            return losses::dpo_loss(fx.arch, fx.params, fx.ref, fx.pair, cfg, fx.sched)
                .grad;
        case Family::ipo:
            return losses::ipo_loss(fx.arch, fx.params, fx.ref, fx.pair, cfg, fx.sched)
                .grad;
        case Family::slic:
            return losses::slic_loss(fx.arch, fx.params, fx.ref, fx.pair,
                                     fx.pair.x_prev_w, cfg, fx.sched)
                .grad;
        case Family::pgdpo: {
            auto out = losses::pgdpo_loss(fx.arch, fx.params, fx.ref, fx.pair, cfg,
                                          fx.sched);
            a0 = out.alpha;
            g0 = out.gamma;
            return out.grad;
        }
    }
    return {};
}

double slic_log_ratio(const Fixture& fx) {
    const auto sw = losses::sft_loss(fx.arch, fx.params, fx.pair.x_prev_w, fx.pair.x_t_w,
                                     fx.pair.t, fx.pair.c, fx.sched);
    const auto sl = losses::sft_loss(fx.arch, fx.params, fx.pair.x_prev_l, fx.pair.x_t_l,
                                     fx.pair.t, fx.pair.c, fx.sched);
    return sl.loss - sw.loss;  // logp_w - logp_l
}

CheckResult check_loss_gradients(const CheckOptions&) {
    CheckResult res{"loss_gradients", true, ""};
    const Family fams[] = {Family::sft, Family::dpo, Family::ipo, Family::slic,
                           Family::pgdpo};
    const double betas[] = {0.5, 1.0, 2.0, 3.0};
    const double h = 1e-5;
    double worst = 0.0;
    int configs = 0;
    for (const Family f : fams) {
        for (int v = 0; v < 4; ++v) {
            Fixture fx = make_fixture(1000 + 17 * configs, 8, 1, 3 + v);
            LossConfig cfg;
            cfg.family = f;
            cfg.T = fx.sched.T;
            cfg.beta = betas[v];
            if (f == Family::pgdpo) {
                if (v == 1) cfg.literal_denominator = true;
                if (v == 2) cfg.code_convention = true;
                if (v == 3) {
                    cfg.force_alpha = 0.3;
                    cfg.force_gamma = 0.7;
                }
            }
            if (f == Family::slic) {
                const double lr = slic_log_ratio(fx);
                // keep the hinge boundary far from the probe point
                cfg.delta_slic = v % 2 == 0 ? std::abs(lr) + 0.7
                                            : std::max(0.0, std::abs(lr) - 0.7);
                if (v % 2 == 1 && lr < 0.0)
                    std::swap(fx.pair.x_prev_w, fx.pair.x_prev_l),
                        std::swap(fx.pair.x_t_w, fx.pair.x_t_l);
            }
            double a0 = 0.5, g0 = 0.5;
            const Vec grad = center_grad(fx, cfg, a0, g0);
            net::ParamVector theta = fx.params;
            for (std::size_t i = 0; i < theta.size(); ++i) {
                const double save = theta[i];
                theta[i] = save + h;
                const double fp = probe_value(fx, cfg, theta, a0, g0);
                theta[i] = save - h;
                const double fm = probe_value(fx, cfg, theta, a0, g0);
                theta[i] = save;
                const double fd = (fp - fm) / (2.0 * h);
                const double err = rel_err(grad[i], fd);
                if (err > worst) worst = err;
                if (err > 1e-5) {
                    res.passed = false;
                    res.detail = std::string(losses::family_name(f)) + " config " +
                                 std::to_string(v) + " param " + std::to_string(i) +
                                 ": rel err " + fmt(err);
                    return res;
                }
            }
            ++configs;
        }
    }
    res.detail = std::to_string(configs) + " configs, worst rel err " + fmt(worst);
    return res;
}

CheckResult check_net_gradients(const CheckOptions&) {
    CheckResult res{"net_gradients", true, ""};
    struct ArchSpec {
        std::size_t d, c, w, l;
    };
    const ArchSpec specs[] = {{2, 2, 8, 1}, {2, 2, 4, 2}, {1, 1, 6, 0}, {3, 0, 5, 1}};
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t s = 0; s < 4; ++s) {
        const auto arch = net::make_arch(specs[s].d, specs[s].c, specs[s].w, specs[s].l);
        Rng rng(400 + s);
        net::ParamVector params = net::init_params(arch, 400 + s);
        const Vec x = rng.gaussian_vec(specs[s].d);
        const Vec c = rng.gaussian_vec(specs[s].c);
        const double tn = rng.uniform(0.0, 1.0);
        const Vec up = rng.gaussian_vec(specs[s].d);
        const Vec grad = net::vjp(arch, params, x, tn, c, up);
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double save = params[i];
            auto val = [&] {
                const Vec y = net::forward(arch, params, x, tn, c);
                return kernels::dot(y.data(), up.data(), y.size());
            };
            params[i] = save + h;
            const double fp = val();
            params[i] = save - h;
            const double fm = val();
            params[i] = save;
            const double err = rel_err(grad[i], (fp - fm) / (2.0 * h));
            if (err > worst) worst = err;
            if (err > 1e-5) {
                res.passed = false;
                res.detail = "arch " + std::to_string(s) + " param " +
                             std::to_string(i) + ": rel err " + fmt(err);
                return res;
            }
        }
        const Mat jac = net::jacobian(arch, params, x, tn, c);
        for (std::size_t r = 0; r < jac.rows; ++r) {
            Vec e(specs[s].d, 0.0);
            e[r] = 1.0;
            const Vec row = net::vjp(arch, params, x, tn, c, e);
            if (std::memcmp(row.data(), jac.row(r), row.size() * sizeof(double)) != 0) {
                res.passed = false;
                res.detail = "jacobian row " + std::to_string(r) +
                             " differs from basis-vector vjp (arch " +
                             std::to_string(s) + ")";
                return res;
            }
        }
    }
    res.detail = "4 archs, worst rel err " + fmt(worst);
    return res;
}

CheckResult check_dpo_decomposition(const CheckOptions&) {
    CheckResult res{"dpo_decomposition", true, ""};
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        const Fixture fx = make_fixture(2000 + 31 * k, 8, 1, 2 + k % 9);
        LossConfig cfg;
        cfg.family = Family::dpo;
        cfg.T = fx.sched.T;
        cfg.beta = 0.25 * (1 + k % 8);
        const auto dpo = losses::dpo_loss(fx.arch, fx.params, fx.ref, fx.pair, cfg,
                                          fx.sched);
        const auto sw = losses::sft_loss(fx.arch, fx.params, fx.pair.x_prev_w,
                                         fx.pair.x_t_w, fx.pair.t, fx.pair.c, fx.sched);
        const auto sl = losses::sft_loss(fx.arch, fx.params, fx.pair.x_prev_l,
                                         fx.pair.x_t_l, fx.pair.t, fx.pair.c, fx.sched);
        const double coef = cfg.beta * static_cast<double>(cfg.T) * (1.0 - dpo.strength);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < dpo.grad.size(); ++i) {
            const double d = coef * (sw.grad[i] - sl.grad[i]) - dpo.grad[i];
            num += d * d;
            den += dpo.grad[i] * dpo.grad[i];
        }
        const double err = std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
        if (err > worst) worst = err;
        if (err > 1e-10) {
            res.passed = false;
            res.detail = "config " + std::to_string(k) + ": rel err " + fmt(err);
            return res;
        }
    }
    res.detail = "20 configs, worst rel err " + fmt(worst);
    return res;
}

CheckResult check_dpo_partials_fd(const CheckOptions& opts) {
    CheckResult res{"dpo_partials_fd", true, ""};
    Rng rng(77);
    double worst_fd = 0.0, worst_ratio = 0.0;
    const auto value = [](long double x1, long double x2, long double b) {
        return -(b * std::log(x1) - std::log(std::pow(x1, b) + std::pow(x2, b)));
    };
    for (int k = 0; k < 120; ++k) {
        const double beta = rng.uniform(0.1, 4.0);
        const double lx1 = rng.uniform(-2.0, 2.0);
        const double span = std::min(3.0 / beta, 2.0);
        const double x1 = std::exp(lx1);
        const double x2 = std::exp(lx1 - rng.uniform(-span, span));
        auto p = dynamics::dpo_partials(x1, x2, beta);
        if (opts.flip_dpo_partials_sign) p.d1 = -p.d1;
        const long double h1 = 1e-6L * x1;
        const long double h2 = 1e-6L * x2;
        const double fd1 = static_cast<double>(
            (value(x1 + h1, x2, beta) - value(x1 - h1, x2, beta)) / (2.0L * h1));
        const double fd2 = static_cast<double>(
            (value(x1, x2 + h2, beta) - value(x1, x2 - h2, beta)) / (2.0L * h2));
        const double e1 = rel_err(p.d1, fd1);
        const double e2 = rel_err(p.d2, fd2);
        const double efd = std::max(e1, e2);
        const double ratio = std::abs(p.d2) / std::abs(p.d1);
        const double eratio = std::abs(ratio - x1 / x2) / (x1 / x2);
        worst_fd = std::max(worst_fd, efd);
        worst_ratio = std::max(worst_ratio, eratio);
        if (efd > 1e-8 || eratio > 1e-10) {
            res.passed = false;
            res.detail = "draw " + std::to_string(k) + " (x1=" + fmt(x1) +
                         ", x2=" + fmt(x2) + ", beta=" + fmt(beta) + "): fd err " +
                         fmt(efd) + ", ratio err " + fmt(eratio);
            return res;
        }
    }
    res.detail = "120 draws, worst fd err " + fmt(worst_fd) + ", worst ratio err " +
                 fmt(worst_ratio);
    return res;
}

CheckResult check_boundary_identities(const CheckOptions&) {
    CheckResult res{"boundary_identities", true, ""};
    const auto fail = [&](const std::string& what) {
        res.passed = false;
        res.detail = what;
        return res;
    };

    // PG-DPO at alpha = gamma = 1 is DPO exactly.
    {
        const Fixture fx = make_fixture(3000);
        LossConfig cfg;
        cfg.T = fx.sched.T;
        cfg.beta = 1.5;
        cfg.family = Family::pgdpo;
        cfg.force_alpha = 1.0;
        cfg.force_gamma = 1.0;
        const auto pg = losses::pgdpo_loss(fx.arch, fx.params, fx.ref, fx.pair, cfg,
                                           fx.sched);
        LossConfig dcfg = cfg;
        dcfg.family = Family::dpo;
        dcfg.force_alpha.reset();
        dcfg.force_gamma.reset();
        const auto dp = losses::dpo_loss(fx.arch, fx.params, fx.ref, fx.pair, dcfg,
                                         fx.sched);
        if (std::abs(pg.loss - dp.loss) > 1e-12 * std::max(1.0, std::abs(dp.loss)))
            return fail("pgdpo(1,1) loss differs from dpo: " +
                        fmt(std::abs(pg.loss - dp.loss)));
        for (std::size_t i = 0; i < pg.grad.size(); ++i)
            if (std::abs(pg.grad[i] - dp.grad[i]) > 1e-12)
                return fail("pgdpo(1,1) grad differs from dpo at param " +
                            std::to_string(i) + ": " +
                            fmt(std::abs(pg.grad[i] - dp.grad[i])));
    }

    // Both adaptive weights are exactly 1/2 at zero margin.
    {
        LossConfig cfg;
        for (const double rl : {0.0, 0.4, -0.7}) {
            if (losses::ars_alpha(rl, rl, cfg) != 0.5)
                return fail("ars_alpha at zero margin is not exactly 0.5");
            if (losses::ipr_gamma(rl, rl, cfg) != 0.5)
                return fail("ipr_gamma at zero margin is not exactly 0.5");
        }
        const auto w = losses::code_convention_weights(0.3, 0.3, cfg);
        if (w.alpha != 0.5 || w.gamma != 0.5)
            return fail("code-convention weights at zero difference are not 0.5");
    }

    // IPO is zero when the margin sits at 1/(2 beta).
    {
        Fixture fx = make_fixture(3001);
        double m0 = losses::reward_margin(fx.arch, fx.pair, fx.params, fx.ref, fx.sched);
        if (m0 < 0.0) {
            std::swap(fx.pair.x_prev_w, fx.pair.x_prev_l);
            std::swap(fx.pair.x_t_w, fx.pair.x_t_l);
            m0 = -m0;
        }
        Rng rng(3002);
        for (int tries = 0; m0 < 1e-3 && tries < 8; ++tries) {
            for (auto& p : fx.params) p += 0.05 * rng.gaussian();
            m0 = losses::reward_margin(fx.arch, fx.pair, fx.params, fx.ref, fx.sched);
            if (m0 < 0.0) {
                std::swap(fx.pair.x_prev_w, fx.pair.x_prev_l);
                std::swap(fx.pair.x_t_w, fx.pair.x_t_l);
                m0 = -m0;
            }
        }
        LossConfig cfg;
        cfg.family = Family::ipo;
        cfg.T = fx.sched.T;
        cfg.beta = 1.0 / (2.0 * m0);
        const auto out = losses::ipo_loss(fx.arch, fx.params, fx.ref, fx.pair, cfg,
                                          fx.sched);
        if (std::abs(out.loss) > 1e-12)
            return fail("ipo loss at margin 1/(2 beta) is " + fmt(out.loss));
        if (std::abs(dynamics::strength_factor_ipo(m0, cfg.beta)) > 1e-12)
            return fail("ipo strength factor at margin 1/(2 beta) is not ~0");
    }

    // SLiC collapses to the regularizer once the log-ratio clears delta.
    {
        Fixture fx = make_fixture(3003);
        double lr = slic_log_ratio(fx);
        if (lr < 0.0) {
            std::swap(fx.pair.x_prev_w, fx.pair.x_prev_l);
            std::swap(fx.pair.x_t_w, fx.pair.x_t_l);
            lr = -lr;
        }
        LossConfig cfg;
        cfg.family = Family::slic;
        cfg.T = fx.sched.T;
        cfg.beta = 0.7;
        cfg.delta_slic = 0.5 * lr;
        const auto out = losses::slic_loss(fx.arch, fx.params, fx.ref, fx.pair,
                                           fx.pair.x_prev_w, cfg, fx.sched);
        const auto sref = losses::sft_loss(fx.arch, fx.params, fx.pair.x_prev_w,
                                           fx.pair.x_t_w, fx.pair.t, fx.pair.c,
                                           fx.sched);
        if (std::abs(out.loss - cfg.beta * sref.loss) >
            1e-12 * std::max(1.0, std::abs(out.loss)))
            return fail("inactive slic hinge: loss is not beta * regularizer");
        for (std::size_t i = 0; i < out.grad.size(); ++i)
            if (std::abs(out.grad[i] - cfg.beta * sref.grad[i]) >
                1e-12 * std::max(1.0, std::abs(out.grad[i])))
                return fail("inactive slic hinge: grad differs at param " +
                            std::to_string(i));
        if (dynamics::slic_gate(0.3, 0.5) != 1 || dynamics::slic_gate(0.7, 0.5) != 0 ||
            dynamics::slic_gate(0.5, 0.5) != 0)
            return fail("slic gate is not a strict > test");
    }

    // The SFT gradient is the exact negation of the log-likelihood gradient.
    {
        const Fixture fx = make_fixture(3004);
        const auto s = losses::sft_loss(fx.arch, fx.params, fx.pair.x_prev_w,
                                        fx.pair.x_t_w, fx.pair.t, fx.pair.c, fx.sched);
        const auto lg = losses::transition_logp_grad(fx.arch, fx.params,
                                                     fx.pair.chosen(), fx.sched);
        if (s.loss != -lg.logp) return fail("sft loss is not the exact negated logp");
        for (std::size_t i = 0; i < s.grad.size(); ++i)
            if (s.grad[i] != -lg.grad[i])
                return fail("sft grad is not the exact negated logp grad at param " +
                            std::to_string(i));
    }

    res.detail = "pgdpo(1,1)=dpo, weights(0)=1/2, ipo root, slic gate, sft negation";
    return res;
}

CheckResult check_richardson(const CheckOptions&) {
    CheckResult res{"richardson_predicted_dlogp", true, ""};
    const Fixture fx = make_fixture(5000, 16, 1, 5);
    const double etas[] = {1e-2, 1e-3, 1e-4};
    double worst_spread = 0.0;
    for (const Family f : {Family::sft, Family::dpo}) {
        LossConfig cfg;
        cfg.family = f;
        cfg.T = fx.sched.T;
        cfg.beta = 0.5;
        Vec grad;
        if (f == Family::sft)
            grad = losses::sft_loss(fx.arch, fx.params, fx.pair.x_prev_w, fx.pair.x_t_w,
                                    fx.pair.t, fx.pair.c, fx.sched)
                       .grad;
        else
            grad = losses::dpo_loss(fx.arch, fx.params, fx.ref, fx.pair, cfg, fx.sched)
                       .grad;
        const TransitionPoint observers[] = {fx.pair.chosen(), fx.pair.rejected(),
                                             fx.heldout};
        const char* names[] = {"chosen", "rejected", "heldout"};
        for (int o = 0; o < 3; ++o) {
            double lo = 0.0, hi = 0.0;
            bool noise_floor = true;
            for (int e = 0; e < 3; ++e) {
                const double eta = etas[e];
                const double pred =
                    f == Family::sft
                        ? dynamics::predicted_dlogp_sft(fx.arch, fx.params, observers[o],
                                                        fx.pair.chosen(), eta, fx.sched)
                        : dynamics::predicted_dlogp_dpo(fx.arch, fx.params, fx.ref,
                                                        observers[o], fx.pair, cfg, eta,
                                                        fx.sched);
                net::ParamVector stepped = fx.params;
                kernels::axpy(-eta, grad.data(), stepped.data(), stepped.size());
                const double meas = dynamics::measured_dlogp(fx.arch, fx.params, stepped,
                                                             observers[o], fx.sched);
                const double resid = std::abs(meas - pred);
                if (resid > 1e-13 * std::max(1.0, std::abs(pred))) noise_floor = false;
                const double scaled = resid / (eta * eta);
                if (e == 0) {
                    lo = hi = scaled;
                } else {
                    lo = std::min(lo, scaled);
                    hi = std::max(hi, scaled);
                }
            }
            if (noise_floor) continue;
            const double spread = hi / std::max(lo, 1e-300);
            worst_spread = std::max(worst_spread, spread);
            if (spread > 10.0) {
                res.passed = false;
                res.detail = std::string(losses::family_name(f)) + "/" + names[o] +
                             ": residual/eta^2 spread " + fmt(spread);
                return res;
            }
        }
    }
    res.detail = "residual/eta^2 spread <= " + fmt(worst_spread) + " (bound 10)";
    return res;
}

CheckResult check_kernel_properties(const CheckOptions&) {
    CheckResult res{"kernel_properties", true, ""};
    const Fixture fx = make_fixture(6000, 8, 2, 4);
    const Mat kaa = dynamics::ntk_kernel(fx.arch, fx.params, fx.pair.x_t_w, fx.pair.t,
                                         fx.pair.c, fx.pair.x_t_w, fx.pair.t, fx.pair.c,
                                         fx.sched);
    double scale = 0.0;
    for (double v : kaa.data) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < kaa.rows; ++i)
        for (std::size_t j = 0; j < kaa.cols; ++j)
            if (std::abs(kaa.at(i, j) - kaa.at(j, i)) > 1e-14 * std::max(scale, 1.0)) {
                res.passed = false;
                res.detail = "self kernel not symmetric";
                return res;
            }
    Rng rng(6001);
    for (int k = 0; k < 8; ++k) {
        const Vec v = rng.gaussian_vec(kaa.rows);
        double q = 0.0, vv = 0.0;
        for (std::size_t i = 0; i < kaa.rows; ++i) {
            q += v[i] * kernels::dot(kaa.row(i), v.data(), kaa.cols);
            vv += v[i] * v[i];
        }
        if (q < -1e-12 * std::max(scale, 1.0) * vv) {
            res.passed = false;
            res.detail = "self kernel has a negative quadratic form: " + fmt(q);
            return res;
        }
    }
    const Mat kab = dynamics::ntk_kernel(fx.arch, fx.params, fx.pair.x_t_w, fx.pair.t,
                                         fx.pair.c, fx.pair.x_t_l, fx.pair.t, fx.pair.c,
                                         fx.sched);
    const Mat kba = dynamics::ntk_kernel(fx.arch, fx.params, fx.pair.x_t_l, fx.pair.t,
                                         fx.pair.c, fx.pair.x_t_w, fx.pair.t, fx.pair.c,
                                         fx.sched);
    for (std::size_t i = 0; i < kab.rows; ++i)
        for (std::size_t j = 0; j < kab.cols; ++j)
            if (std::abs(kab.at(i, j) - kba.at(j, i)) > 1e-14 * std::max(scale, 1.0)) {
                res.passed = false;
                res.detail = "cross kernel is not the transpose of its swap";
                return res;
            }
    res.detail = "symmetry, quadratic-form positivity, transpose pairing";
    return res;
}

CheckResult check_schedule_cumprod(const CheckOptions&) {
    CheckResult res{"schedule_cumprod", true, ""};
    double worst = 0.0;
    for (const std::size_t T : {std::size_t{1}, std::size_t{2}, std::size_t{50}}) {
        const double bmin = 1e-4, bmax = 0.02;
        const auto sched = diffusion::make_ddpm_schedule(T, bmin, bmax);
        if (sched.sigma[0] != 0.0 || sched.alpha_bar[0] != 1.0) {
            res.passed = false;
            res.detail = "t=0 padding is wrong";
            return res;
        }
        long double acc = 1.0L;
        long double prev_ab = 1.0L;
        for (std::size_t t = 1; t <= T; ++t) {
            const long double frac =
                T == 1 ? 0.0L
                       : static_cast<long double>(t - 1) / static_cast<long double>(T - 1);
            const long double beta =
                static_cast<long double>(bmin) +
                frac * (static_cast<long double>(bmax) - static_cast<long double>(bmin));
            acc *= 1.0L - beta;
            const double err =
                std::abs(static_cast<double>(acc) - sched.alpha_bar[t]) /
                static_cast<double>(acc);
            worst = std::max(worst, err);
            if (err > 1e-14) {
                res.passed = false;
                res.detail = "alpha_bar[" + std::to_string(t) + "] off by " + fmt(err);
                return res;
            }
            const long double var =
                t == 1 ? 0.0L : (1.0L - prev_ab) / (1.0L - acc) * beta;
            const double sig = static_cast<double>(std::sqrt(var));
            const double serr = std::abs(sig - sched.sigma[t]) / std::max(sig, 1e-6);
            worst = std::max(worst, serr);
            if (serr > 1e-13) {
                res.passed = false;
                res.detail = "sigma[" + std::to_string(t) + "] off by " + fmt(serr);
                return res;
            }
            if (sched.alpha_bar[t] >= static_cast<double>(prev_ab)) {
                res.passed = false;
                res.detail = "alpha_bar is not strictly decreasing";
                return res;
            }
            prev_ab = acc;
        }
        if (sched.sigma[1] != 0.0) {
            res.passed = false;
            res.detail = "sigma[1] must be exactly 0";
            return res;
        }
    }
    res.detail = "T in {1,2,50}, worst err " + fmt(worst);
    return res;
}

CheckResult check_transition_quadrature(const CheckOptions&) {
    CheckResult res{"transition_quadrature", true, ""};
    double worst = 0.0;
    for (const double sigma : {0.05, 0.3}) {
        const Vec mean = {0.7};
        const double a = mean[0] - 8.0 * sigma;
        const double b = mean[0] + 8.0 * sigma;
        const std::size_t n = 4000;  // even
        const double h = (b - a) / static_cast<double>(n);
        auto f = [&](double x) {
            const Vec xv = {x};
            return std::exp(diffusion::transition_log_prob(xv, mean, sigma));
        };
        double s = f(a) + f(b);
        for (std::size_t i = 1; i < n; ++i)
            s += (i % 2 == 1 ? 4.0 : 2.0) * f(a + h * static_cast<double>(i));
        const double integral = s * h / 3.0;
        const double err = std::abs(integral - 1.0);
        worst = std::max(worst, err);
        if (err > 1e-6) {
            res.passed = false;
            res.detail = "density mass at sigma=" + fmt(sigma) + " is off by " + fmt(err);
            return res;
        }
    }
    {
        const Vec x = {0.0};
        const double lp = diffusion::transition_log_prob(x, x, 1.0);
        if (std::abs(lp - -0.9189385332046727) > 1e-15) {
            res.passed = false;
            res.detail = "unit-normal peak log-density is off";
            return res;
        }
        const Vec x2 = {0.0, 0.0};
        const double lp2 = diffusion::transition_log_prob(x2, x2, 1.0);
        if (std::abs(lp2 - -1.8378770664093453) > 1e-15) {
            res.passed = false;
            res.detail = "2d unit-normal peak log-density is off";
            return res;
        }
    }
    res.detail = "simpson mass err " + fmt(worst) + ", peak constants exact";
    return res;
}

CheckResult check_backend_equivalence(const CheckOptions&) {
    CheckResult res{"backend_equivalence", true, ""};
    if (!kernels::backend_available(kernels::Backend::avx2)) {
        res.detail = "avx2 unavailable on this host, scalar path only";
        return res;
    }
    const kernels::Backend saved = kernels::active_backend();
    Rng rng(8000);
    double worst = 0.0;
    for (const std::size_t n : {std::size_t{1}, std::size_t{2}, std::size_t{3},
                                std::size_t{5}, std::size_t{8}, std::size_t{13},
                                std::size_t{17}, std::size_t{64}, std::size_t{257}}) {
        const Vec x = rng.gaussian_vec(n);
        const Vec y = rng.gaussian_vec(n);
        double scale = 1e-300;
        for (std::size_t i = 0; i < n; ++i) scale += std::abs(x[i] * y[i]);
        kernels::set_backend(kernels::Backend::scalar);
        const double d_s = kernels::dot(x.data(), y.data(), n);
        const double q_s = kernels::sqdist(x.data(), y.data(), n);
        Vec ax_s = y;
        kernels::axpy(0.37, x.data(), ax_s.data(), n);
        kernels::set_backend(kernels::Backend::avx2);
        const double d_v = kernels::dot(x.data(), y.data(), n);
        const double q_v = kernels::sqdist(x.data(), y.data(), n);
        Vec ax_v = y;
        kernels::axpy(0.37, x.data(), ax_v.data(), n);
        kernels::set_backend(saved);
        const double derr = std::abs(d_s - d_v) / scale;
        const double qerr = std::abs(q_s - q_v) / std::max(q_s, 1e-300);
        worst = std::max({worst, derr, qerr});
        for (std::size_t i = 0; i < n; ++i)
            if (ax_s[i] != ax_v[i]) {
                res.passed = false;
                res.detail = "axpy differs between backends at n=" + std::to_string(n);
                return res;
            }
        if (derr > 1e-12 || qerr > 1e-12) {
            res.passed = false;
            res.detail = "dot/sqdist differ between backends at n=" + std::to_string(n) +
                         ": " + fmt(std::max(derr, qerr));
            return res;
        }
        const std::size_t rows = 1 + n % 7;
        Mat w;
        w.rows = rows;
        w.cols = n;
        w.data = rng.gaussian_vec(rows * n);
        Vec mv_s(rows), mv_v(rows), mt_s(n), mt_v(n);
        const Vec u = rng.gaussian_vec(rows);
        kernels::set_backend(kernels::Backend::scalar);
        kernels::matvec(w.data.data(), x.data(), mv_s.data(), rows, n);
        kernels::matvec_t(w.data.data(), u.data(), mt_s.data(), rows, n);
        Mat r1_s = w;
        kernels::rank1_acc(r1_s.data.data(), u.data(), x.data(), rows, n);
        kernels::set_backend(kernels::Backend::avx2);
        kernels::matvec(w.data.data(), x.data(), mv_v.data(), rows, n);
        kernels::matvec_t(w.data.data(), u.data(), mt_v.data(), rows, n);
        Mat r1_v = w;
        kernels::rank1_acc(r1_v.data.data(), u.data(), x.data(), rows, n);
        kernels::set_backend(saved);
        for (std::size_t i = 0; i < rows; ++i)
            worst = std::max(worst, std::abs(mv_s[i] - mv_v[i]) /
                                        std::max(std::abs(mv_s[i]), 1e-12));
        for (std::size_t i = 0; i < n; ++i)
            worst = std::max(worst, std::abs(mt_s[i] - mt_v[i]) /
                                        std::max(std::abs(mt_s[i]), 1e-12));
        for (std::size_t i = 0; i < rows * n; ++i)
            if (r1_s.data[i] != r1_v.data[i]) {
                res.passed = false;
                res.detail = "rank1 update differs between backends at n=" +
                             std::to_string(n);
                return res;
            }
        if (worst > 1e-10) {
            res.passed = false;
            res.detail = "matvec paths differ between backends: " + fmt(worst);
            return res;
        }
    }
    res.detail = "both backends agree, worst rel diff " + fmt(worst);
    return res;
}

struct Entry {
    const char* name;
    CheckResult (*fn)(const CheckOptions&);
};

const Entry entries[] = {
    {"schedule_cumprod", check_schedule_cumprod},
    {"transition_quadrature", check_transition_quadrature},
    {"net_gradients", check_net_gradients},
    {"loss_gradients", check_loss_gradients},
    {"dpo_decomposition", check_dpo_decomposition},
    {"dpo_partials_fd", check_dpo_partials_fd},
    {"boundary_identities", check_boundary_identities},
    {"richardson_predicted_dlogp", check_richardson},
    {"kernel_properties", check_kernel_properties},
    {"backend_equivalence", check_backend_equivalence},
};

}  // namespace

const std::vector<std::string>& check_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& e : entries) v.push_back(e.name);
        return v;
    }();
    return names;
}

CheckResult run_check(const std::string& name, const CheckOptions& opts) {
    for (const auto& e : entries) {
        if (name != e.name) continue;
        try {
            return e.fn(opts);
        } catch (const std::exception& ex) {
            return {name, false, std::string("exception: ") + ex.what()};
        }
    }
    throw std::invalid_argument("unknown check '" + name + "'");
}

std::vector<CheckResult> run_all(const CheckOptions& opts) {
    std::vector<CheckResult> out;
    for (const auto& e : entries) out.push_back(run_check(e.name, opts));
    return out;
}

}  // namespace prefdyn::verify
