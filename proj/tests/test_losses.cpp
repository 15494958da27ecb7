#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "prefdyn/kernels.hpp"
#include "prefdyn/losses.hpp"
#include "prefdyn/rng.hpp"

using namespace prefdyn;
namespace L = prefdyn::losses;

namespace {

struct Setup {
    net::Arch arch;
    diffusion::Schedule sched;
    net::ParamVector params, ref;
    L::PreferencePair pair;
};

Setup make_setup(std::uint64_t seed, std::size_t t = 5) {
    Rng rng(seed);
    Setup s;
    s.arch = net::make_arch(2, 2, 8, 1);
    s.sched = diffusion::make_ddpm_schedule(10, 1e-4, 0.05);
    s.params = net::init_params(s.arch, seed);
    s.ref = net::init_params(s.arch, seed + 101);
    s.pair.t = t;
    s.pair.c = rng.uniform_vec(2, -1.0, 1.0);
    s.pair.x_prev_w = rng.gaussian_vec(2);
    s.pair.x_t_w = rng.gaussian_vec(2);
    s.pair.x_prev_l = rng.gaussian_vec(2);
    s.pair.x_t_l = rng.gaussian_vec(2);
    return s;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

L::LossConfig base_cfg(const Setup& s) {
    L::LossConfig cfg;
    cfg.T = s.sched.T;
    return cfg;
}

}  // namespace

TEST_CASE("family names parse and print") {
    using L::Family;
    for (const char* name : {"SFT", "DPO", "IPO", "SLiC", "PGDPO"}) {
        const auto f = L::parse_family(name);
        REQUIRE(f.has_value());
        CHECK(std::string(L::family_name(*f)) == name);
    }
    CHECK_FALSE(L::parse_family("dpo").has_value());
    CHECK_FALSE(L::parse_family("").has_value());
}

TEST_CASE("config validation rejects bad values") {
    L::LossConfig cfg;
    cfg.beta = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.eps_stab = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.force_alpha = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.delta_slic = -0.1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("sigmoid and softplus golden values and stability") {
    CHECK(L::sigmoid(0.0) == 0.5);
    CHECK(L::sigmoid(1.0) == doctest::Approx(0.7310585786300049).epsilon(1e-15));
    CHECK(L::sigmoid(-1.0) == doctest::Approx(0.2689414213699951).epsilon(1e-15));
    CHECK(L::softplus(0.0) == doctest::Approx(0.6931471805599453).epsilon(1e-15));
    CHECK(L::softplus(-1.0) == doctest::Approx(0.31326168751822286).epsilon(1e-15));
    CHECK(L::softplus(800.0) == 800.0);
    CHECK(L::softplus(-800.0) == 0.0);
    CHECK(L::sigmoid(-800.0) == 0.0);
    CHECK(L::sigmoid(800.0) == 1.0);
    // complementarity within rounding
    for (const double z : {0.3, -2.5, 7.0})
        CHECK(L::sigmoid(z) + L::sigmoid(-z) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("implicit reward from means is the shifted quadratic") {
    const Vec x = {0.4, -0.2};
    const Vec m1 = {0.1, 0.1};
    const Vec m2 = {-0.3, 0.5};
    const double sigma = 0.3;
    const double r = L::implicit_reward_from_means(x, m1, m2, sigma);
    const double want = (kernels::sqdist(x.data(), m2.data(), 2) -
                         kernels::sqdist(x.data(), m1.data(), 2)) /
                        (2.0 * sigma * sigma);
    CHECK(r == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("implicit reward is exactly zero against an identical reference") {
    const Setup s = make_setup(31);
    const double r = L::implicit_reward(s.arch, s.params, s.params, s.pair.x_prev_w,
                                        s.pair.x_t_w, s.pair.t, s.pair.c, s.sched);
    CHECK(r == 0.0);
}

TEST_CASE("dpo at zero margin gives ln 2 and strength one half") {
    const Setup s = make_setup(32);
    const auto cfg = [&] {
        auto c = base_cfg(s);
        c.family = L::Family::dpo;
        return c;
    }();
    const auto out = L::dpo_loss(s.arch, s.params, s.params, s.pair, cfg, s.sched);
    CHECK(out.loss == doctest::Approx(0.6931471805599453).epsilon(1e-15));
    CHECK(out.strength == 0.5);
    CHECK(out.rewards.r_w == 0.0);
    CHECK(out.rewards.r_l == 0.0);
    // gradient direction survives even at zero margin
    double norm = 0.0;
    for (const double g : out.grad) norm += g * g;
    CHECK(norm > 0.0);
}

TEST_CASE("dpo at a constructed unit argument gives softplus(-1)") {
    Setup s = make_setup(33);
    auto cfg = base_cfg(s);
    cfg.family = L::Family::dpo;
    double m0 = L::reward_margin(s.arch, s.pair, s.params, s.ref, s.sched);
    if (m0 < 0.0) {
        std::swap(s.pair.x_prev_w, s.pair.x_prev_l);
        std::swap(s.pair.x_t_w, s.pair.x_t_l);
        m0 = -m0;
    }
    REQUIRE(m0 > 1e-8);
    cfg.beta = 1.0 / (static_cast<double>(cfg.T) * m0);
    const auto out = L::dpo_loss(s.arch, s.params, s.ref, s.pair, cfg, s.sched);
    CHECK(out.loss == doctest::Approx(0.31326168751822286).epsilon(1e-12));
}

TEST_CASE("dpo gradient equals the weighted sft difference") {
    for (std::uint64_t seed : {40, 41, 42}) {
        const Setup s = make_setup(seed);
        auto cfg = base_cfg(s);
        cfg.family = L::Family::dpo;
        cfg.beta = 0.2;  // keeps the strength factor away from saturation
        const auto dpo = L::dpo_loss(s.arch, s.params, s.ref, s.pair, cfg, s.sched);
        const auto sw = L::sft_loss(s.arch, s.params, s.pair.x_prev_w, s.pair.x_t_w,
                                    s.pair.t, s.pair.c, s.sched);
        const auto sl = L::sft_loss(s.arch, s.params, s.pair.x_prev_l, s.pair.x_t_l,
                                    s.pair.t, s.pair.c, s.sched);
        const double coef =
            cfg.beta * static_cast<double>(cfg.T) * (1.0 - dpo.strength);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < dpo.grad.size(); ++i) {
            const double d = coef * (sw.grad[i] - sl.grad[i]) - dpo.grad[i];
            num += d * d;
            den += dpo.grad[i] * dpo.grad[i];
        }
        REQUIRE(den > 0.0);
        CHECK(std::sqrt(num) < 1e-10 * std::sqrt(den));
    }
}

TEST_CASE("sft loss is the exact negated transition log density") {
    const Setup s = make_setup(50);
    const auto sft = L::sft_loss(s.arch, s.params, s.pair.x_prev_w, s.pair.x_t_w,
                                 s.pair.t, s.pair.c, s.sched);
    const auto lg = L::transition_logp_grad(s.arch, s.params, s.pair.chosen(), s.sched);
    CHECK(sft.loss == -lg.logp);
    for (std::size_t i = 0; i < sft.grad.size(); ++i) CHECK(sft.grad[i] == -lg.grad[i]);
}

TEST_CASE("adaptive weights sit at one half for zero margin and move with the gains") {
    L::LossConfig cfg;
    CHECK(L::ars_alpha(0.0, 0.0, cfg) == 0.5);
    CHECK(L::ipr_gamma(0.0, 0.0, cfg) == 0.5);
    CHECK(L::ars_alpha(-0.4, -0.4, cfg) == 0.5);
    // positive margin raises alpha and lowers gamma
    CHECK(L::ars_alpha(0.5, 0.2, cfg) > 0.5);
    CHECK(L::ipr_gamma(0.5, 0.2, cfg) < 0.5);
    CHECK(L::ars_alpha(0.1, 0.2, cfg) < 0.5);
    CHECK(L::ipr_gamma(0.1, 0.2, cfg) > 0.5);
    // a larger gain sharpens both
    L::LossConfig hot = cfg;
    hot.k1 = 30.0;
    hot.k2 = 30.0;
    CHECK(L::ars_alpha(0.5, 0.2, hot) > L::ars_alpha(0.5, 0.2, cfg));
    CHECK(L::ipr_gamma(0.5, 0.2, hot) < L::ipr_gamma(0.5, 0.2, cfg));
    // equal gains make the two weights complementary
    CHECK(L::ars_alpha(0.5, 0.2, cfg) + L::ipr_gamma(0.5, 0.2, cfg) ==
          doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("literal denominator flips the scaling for negative rejected rewards") {
    L::LossConfig abs_cfg;
    L::LossConfig lit_cfg;
    lit_cfg.literal_denominator = true;
    // r_l < 0: |r_l| + eps > 0 but r_l + eps < 0
    const double a_abs = L::ars_alpha(-0.2, -0.5, abs_cfg);
    const double a_lit = L::ars_alpha(-0.2, -0.5, lit_cfg);
    CHECK(a_abs > 0.5);  // positive margin, positive denominator
    CHECK(a_lit < 0.5);  // same margin, negative denominator
    // r_l > 0: both forms agree
    CHECK(L::ars_alpha(0.5, 0.2, abs_cfg) ==
          doctest::Approx(L::ars_alpha(0.5, 0.2, lit_cfg)).epsilon(1e-15));
}

TEST_CASE("code-convention weights use raw squared-error differences") {
    L::LossConfig cfg;
    const auto w = L::code_convention_weights(0.3, 0.3, cfg);
    CHECK(w.alpha == 0.5);
    CHECK(w.gamma == 0.5);
    // d_w < d_l means the model fits the chosen sample better; the ratio is
    // negative so alpha drops below 1/2 and gamma rises above it
    const auto w2 = L::code_convention_weights(0.1, 0.5, cfg);
    CHECK(w2.alpha < 0.5);
    CHECK(w2.gamma > 0.5);
    const double ratio = (0.1 - 0.5) / (0.5 + cfg.eps_stab);
    CHECK(w2.alpha == doctest::Approx(L::sigmoid(cfg.k1 * ratio)).epsilon(1e-15));
    CHECK(w2.gamma == doctest::Approx(L::sigmoid(-cfg.k2 * ratio)).epsilon(1e-15));
}

TEST_CASE("pgdpo with forced unit weights is bitwise dpo") {
    const Setup s = make_setup(60);
    auto cfg = base_cfg(s);
    cfg.family = L::Family::pgdpo;
    cfg.beta = 1.7;
    cfg.force_alpha = 1.0;
    cfg.force_gamma = 1.0;
    const auto pg = L::pgdpo_loss(s.arch, s.params, s.ref, s.pair, cfg, s.sched);
    auto dcfg = cfg;
    dcfg.family = L::Family::dpo;
    const auto dp = L::dpo_loss(s.arch, s.params, s.ref, s.pair, dcfg, s.sched);
    CHECK(pg.loss == dp.loss);
    REQUIRE(pg.grad.size() == dp.grad.size());
    for (std::size_t i = 0; i < pg.grad.size(); ++i) CHECK(pg.grad[i] == dp.grad[i]);
    CHECK(pg.alpha == 1.0);
    CHECK(pg.gamma == 1.0);
}

TEST_CASE("pgdpo reports the weights it used") {
    const Setup s = make_setup(61);
    auto cfg = base_cfg(s);
    cfg.family = L::Family::pgdpo;
    cfg.force_alpha = 0.3;
    cfg.force_gamma = 0.7;
    const auto out = L::pgdpo_loss(s.arch, s.params, s.ref, s.pair, cfg, s.sched);
    CHECK(out.alpha == 0.3);
    CHECK(out.gamma == 0.7);
    // at gamma = 0 the loss is the pure reward branch
    auto cfg0 = cfg;
    cfg0.force_alpha = 0.5;
    cfg0.force_gamma = 0.0;
    const auto out0 = L::pgdpo_loss(s.arch, s.params, s.ref, s.pair, cfg0, s.sched);
    const double bt = cfg.beta * static_cast<double>(cfg.T);
    CHECK(out0.loss == doctest::Approx(-bt * out0.rewards.r_w).epsilon(1e-13));
}

TEST_CASE("pgdpo at an identical reference starts from balanced weights") {
    const Setup s = make_setup(62);
    auto cfg = base_cfg(s);
    cfg.family = L::Family::pgdpo;
    const auto out = L::pgdpo_loss(s.arch, s.params, s.params, s.pair, cfg, s.sched);
    CHECK(out.alpha == 0.5);
    CHECK(out.gamma == 0.5);
    CHECK(out.rewards.r_w == 0.0);
    CHECK(out.rewards.r_l == 0.0);
}

TEST_CASE("ipo loss is the squared distance to the target margin") {
    const Setup s = make_setup(63);
    auto cfg = base_cfg(s);
    cfg.family = L::Family::ipo;
    cfg.beta = 2.0;
    const auto out = L::ipo_loss(s.arch, s.params, s.ref, s.pair, cfg, s.sched);
    const double f = out.rewards.margin() - 1.0 / (2.0 * cfg.beta);
    CHECK(out.loss == doctest::Approx(f * f).epsilon(1e-14));
    CHECK(out.strength == doctest::Approx(f).epsilon(1e-14));
}

TEST_CASE("slic hinge activates strictly below delta") {
    Setup s = make_setup(64);
    auto cfg = base_cfg(s);
    cfg.family = L::Family::slic;
    cfg.beta = 0.6;
    const auto sw = L::sft_loss(s.arch, s.params, s.pair.x_prev_w, s.pair.x_t_w,
                                s.pair.t, s.pair.c, s.sched);
    const auto sl = L::sft_loss(s.arch, s.params, s.pair.x_prev_l, s.pair.x_t_l,
                                s.pair.t, s.pair.c, s.sched);
    double lr = sl.loss - sw.loss;
    if (lr < 0.0) {
        std::swap(s.pair.x_prev_w, s.pair.x_prev_l);
        std::swap(s.pair.x_t_w, s.pair.x_t_l);
        lr = -lr;
    }
    const auto sref = L::sft_loss(s.arch, s.params, s.pair.x_prev_w, s.pair.x_t_w,
                                  s.pair.t, s.pair.c, s.sched);

    // hinge active: delta above the log ratio
    cfg.delta_slic = lr + 0.4;
    const auto active = L::slic_loss(s.arch, s.params, s.ref, s.pair, s.pair.x_prev_w,
                                     cfg, s.sched);
    CHECK(active.loss ==
          doctest::Approx(cfg.delta_slic - lr + cfg.beta * sref.loss).epsilon(1e-12));

    // hinge inactive: delta below the log ratio, only the regularizer remains
    cfg.delta_slic = lr * 0.5;
    const auto idle = L::slic_loss(s.arch, s.params, s.ref, s.pair, s.pair.x_prev_w,
                                   cfg, s.sched);
    CHECK(idle.loss == doctest::Approx(cfg.beta * sref.loss).epsilon(1e-13));
    for (std::size_t i = 0; i < idle.grad.size(); ++i)
        CHECK(idle.grad[i] ==
              doctest::Approx(cfg.beta * sref.grad[i]).epsilon(1e-12));
}

TEST_CASE("every family gradient passes a finite-difference probe") {
    const double h = 1e-5;
    int probed = 0;
    for (const L::Family f : {L::Family::sft, L::Family::dpo, L::Family::ipo,
                              L::Family::slic, L::Family::pgdpo}) {
        const Setup s = make_setup(70 + static_cast<int>(f));
        auto cfg = base_cfg(s);
        cfg.family = f;
        cfg.beta = 1.3;
        if (f == L::Family::slic) {
            const auto sw = L::sft_loss(s.arch, s.params, s.pair.x_prev_w, s.pair.x_t_w,
                                        s.pair.t, s.pair.c, s.sched);
            const auto sl = L::sft_loss(s.arch, s.params, s.pair.x_prev_l, s.pair.x_t_l,
                                        s.pair.t, s.pair.c, s.sched);
            cfg.delta_slic = std::abs(sl.loss - sw.loss) + 0.5;
        }
        double a0 = 0.5, g0 = 0.5;
        Vec grad;
        switch (f) {
            case L::Family::sft:
                grad = L::sft_loss(s.arch, s.params, s.pair.x_prev_w, s.pair.x_t_w,
                                   s.pair.t, s.pair.c, s.sched)
                           .grad;
                break;
            case L::Family::dpo:
                grad = L::dpo_loss(s.arch, s.params, s.ref, s.pair, cfg, s.sched).grad;
                break;
            case L::Family::ipo:
                grad = L::ipo_loss(s.arch, s.params, s.ref, s.pair, cfg, s.sched).grad;
                break;
            case L::Family::slic:
                grad = L::slic_loss(s.arch, s.params, s.ref, s.pair, s.pair.x_prev_w,
                                    cfg, s.sched)
                           .grad;
                break;
            case L::Family::pgdpo: {
                const auto out =
                    L::pgdpo_loss(s.arch, s.params, s.ref, s.pair, cfg, s.sched);
                grad = out.grad;
                a0 = out.alpha;
                g0 = out.gamma;
                break;
            }
        }
        auto value = [&](const net::ParamVector& theta) {
            switch (f) {
                case L::Family::sft:
                    return L::sft_loss(s.arch, theta, s.pair.x_prev_w, s.pair.x_t_w,
                                       s.pair.t, s.pair.c, s.sched)
                        .loss;
                case L::Family::dpo:
                    return L::dpo_loss(s.arch, theta, s.ref, s.pair, cfg, s.sched).loss;
                case L::Family::ipo:
                    return L::ipo_loss(s.arch, theta, s.ref, s.pair, cfg, s.sched).loss;
                case L::Family::slic:
                    return L::slic_loss(s.arch, theta, s.ref, s.pair, s.pair.x_prev_w,
                                        cfg, s.sched)
                        .loss;
                case L::Family::pgdpo:
                    // the adaptive weights carry no gradient, so the probe
                    // holds them at their center values
                    return L::pgdpo_loss_with_weights(s.arch, theta, s.ref, s.pair, cfg,
                                                      s.sched, a0, g0)
                        .loss;
            }
            return 0.0;
        };
        net::ParamVector theta = s.params;
        for (std::size_t i = 0; i < theta.size(); i += 3) {
            const double save = theta[i];
            theta[i] = save + h;
            const double fp = value(theta);
            theta[i] = save - h;
            const double fm = value(theta);
            theta[i] = save;
            CHECK(rel_err(grad[i], (fp - fm) / (2.0 * h)) < 1e-5);
            ++probed;
        }
    }
    CHECK(probed > 100);
}

TEST_CASE("reward margin matches the implicit rewards") {
    const Setup s = make_setup(80);
    const double m = L::reward_margin(s.arch, s.pair, s.params, s.ref, s.sched);
    const double rw = L::implicit_reward(s.arch, s.params, s.ref, s.pair.x_prev_w,
                                         s.pair.x_t_w, s.pair.t, s.pair.c, s.sched);
    const double rl = L::implicit_reward(s.arch, s.params, s.ref, s.pair.x_prev_l,
                                         s.pair.x_t_l, s.pair.t, s.pair.c, s.sched);
    CHECK(m == doctest::Approx(rw - rl).epsilon(1e-14));
}
