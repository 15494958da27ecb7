#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "prefdyn/experiments.hpp"
#include "prefdyn/kernels.hpp"

using namespace prefdyn;
namespace E = prefdyn::experiments;

namespace {

E::RunConfig small_run() {
    E::RunConfig cfg;
    cfg.data.n_pairs = 16;
    cfg.data.candidates_per_condition = 3;
    cfg.data.seed = 5;
    cfg.sched_T = 10;
    cfg.sched_beta_max = 0.05;
    cfg.loss.T = 10;
    cfg.hidden_width = 8;
    cfg.hidden_layers = 1;
    cfg.steps = 40;
    cfg.pretrain_steps = 50;
    cfg.eval_every = 20;
    cfg.eval_set_size = 8;
    cfg.seed = 7;
    return cfg;
}

double dist(const Vec& a, const Vec& b) {
    return std::sqrt(kernels::sqdist(a.data(), b.data(), a.size()));
}

}  // namespace

TEST_CASE("mode and axis names round trip") {
    CHECK(std::string(E::data_mode_name(E::DataMode::best_of_k)) == "best_of_k");
    CHECK(std::string(E::data_mode_name(E::DataMode::near_duplicate)) == "near_duplicate");
    CHECK(E::parse_data_mode("best_of_k") == E::DataMode::best_of_k);
    CHECK_FALSE(E::parse_data_mode("worst_of_k").has_value());
    CHECK(std::string(E::sweep_axis_name(E::SweepAxis::k1)) == "K1");
    CHECK(std::string(E::sweep_axis_name(E::SweepAxis::k2)) == "K2");
    CHECK(std::string(E::sweep_axis_name(E::SweepAxis::beta)) == "beta");
    CHECK(E::parse_sweep_axis("beta") == E::SweepAxis::beta);
    CHECK_FALSE(E::parse_sweep_axis("gamma").has_value());
}

TEST_CASE("pair generation is seed deterministic") {
    E::DataConfig cfg;
    cfg.n_pairs = 12;
    cfg.seed = 3;
    const auto a = E::gen_pairs(cfg);
    const auto b = E::gen_pairs(cfg);
    REQUIRE(a.size() == 12);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].x0_w == b[i].x0_w);
        CHECK(a[i].x0_l == b[i].x0_l);
        CHECK(a[i].c == b[i].c);
    }
    cfg.seed = 4;
    const auto c = E::gen_pairs(cfg);
    CHECK(a[0].x0_w != c[0].x0_w);
}

TEST_CASE("best-of-k chosen samples score at least the rejected ones") {
    E::DataConfig cfg;
    cfg.n_pairs = 64;
    cfg.seed = 11;
    // center(c) cycles the condition, so matching dims make it c itself
    REQUIRE(cfg.data_dim == cfg.condition_dim);
    for (const auto& p : E::gen_pairs(cfg)) {
        const double dw = kernels::sqdist(p.x0_w.data(), p.c.data(), p.c.size());
        const double dl = kernels::sqdist(p.x0_l.data(), p.c.data(), p.c.size());
        CHECK(dw <= dl);
    }
}

TEST_CASE("near duplicates at zero offset coincide bitwise") {
    E::DataConfig cfg;
    cfg.mode = E::DataMode::near_duplicate;
    cfg.duplicate_eps = 0.0;
    cfg.n_pairs = 8;
    cfg.seed = 13;
    for (const auto& p : E::gen_pairs(cfg)) CHECK(p.x0_w == p.x0_l);
}

TEST_CASE("the duplicate offset scales linearly with its epsilon") {
    E::DataConfig cfg;
    cfg.mode = E::DataMode::near_duplicate;
    cfg.n_pairs = 6;
    cfg.seed = 17;
    cfg.duplicate_eps = 0.05;
    const auto a = E::gen_pairs(cfg);
    cfg.duplicate_eps = 0.1;
    const auto b = E::gen_pairs(cfg);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].x0_w == b[i].x0_w);  // same draws, only the offset differs
        for (std::size_t j = 0; j < a[i].x0_w.size(); ++j) {
            const double da = a[i].x0_l[j] - a[i].x0_w[j];
            const double db = b[i].x0_l[j] - b[i].x0_w[j];
            CHECK(db == doctest::Approx(2.0 * da).epsilon(1e-12));
        }
    }
}

TEST_CASE("config validation rejects inconsistent runs") {
    E::DataConfig d;
    d.n_pairs = 0;
    CHECK_THROWS_AS(d.validate(), std::invalid_argument);
    d = {};
    d.duplicate_eps = -0.1;
    CHECK_THROWS_AS(d.validate(), std::invalid_argument);

    E::RunConfig r = small_run();
    CHECK_NOTHROW(r.validate());
    r.sched_T = 1;
    r.loss.T = 1;
    CHECK_THROWS_AS(r.validate(), std::invalid_argument);
    r = small_run();
    r.loss.T = 50;  // out of sync with sched_T
    CHECK_THROWS_AS(r.validate(), std::invalid_argument);
    r = small_run();
    r.eval_every = 7;  // does not divide steps
    CHECK_THROWS_AS(r.validate(), std::invalid_argument);
    r = small_run();
    r.eta = 0.0;
    CHECK_THROWS_AS(r.validate(), std::invalid_argument);
}

TEST_CASE("pretraining is deterministic and reports its probe error") {
    const auto cfg = small_run();
    const auto a = E::pretrain_reference(cfg);
    const auto b = E::pretrain_reference(cfg);
    CHECK(a.params == b.params);
    CHECK(a.mse_start == b.mse_start);
    CHECK(std::isfinite(a.mse_end));
    CHECK(a.mse_start > 0.0);
    CHECK(a.params.size() == cfg.arch().param_count());
}

TEST_CASE("a short training run records the expected evaluation grid") {
    auto cfg = small_run();
    cfg.loss.family = losses::Family::pgdpo;
    const auto res = E::train(cfg);
    CHECK_FALSE(res.aborted);
    CHECK(res.completed_steps == cfg.steps);
    REQUIRE(res.records.size() == cfg.steps / cfg.eval_every + 1);
    CHECK(res.records[0].step == 0);
    CHECK(res.records[1].step == 20);
    CHECK(res.records[2].step == 40);

    // before any update the policy equals the reference exactly
    CHECK(res.records[0].margin == 0.0);
    CHECK(res.records[0].alpha == 0.5);
    CHECK(res.records[0].gamma == 0.5);

    for (const auto& rec : res.records) {
        CHECK(std::isfinite(rec.chosen_logp));
        CHECK(std::isfinite(rec.rejected_logp));
        CHECK(std::isfinite(rec.grad_norm));
    }
    CHECK(res.final_param_dist > 0.0);
    CHECK(res.final_param_dist ==
          doctest::Approx(dist(res.final_params, res.ref_params)).epsilon(1e-12));
    CHECK(res.frac_gamma_positive >= 0.0);
    CHECK(res.frac_gamma_positive <= 1.0);
    CHECK(res.trace.empty());  // tracing was off
}

TEST_CASE("training twice from one config is bit identical") {
    auto cfg = small_run();
    cfg.loss.family = losses::Family::dpo;
    const auto a = E::train(cfg);
    const auto b = E::train(cfg);
    CHECK(a.final_params == b.final_params);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].chosen_logp == b.records[i].chosen_logp);
        CHECK(a.records[i].margin == b.records[i].margin);
        CHECK(a.records[i].grad_norm == b.records[i].grad_norm);
    }
}

TEST_CASE("tracing captures one row per completed step") {
    auto cfg = small_run();
    cfg.record_trace = true;
    cfg.loss.family = losses::Family::pgdpo;
    const auto res = E::train(cfg);
    REQUIRE(res.trace.size() == cfg.steps);
    CHECK(res.trace[0].step == 1);
    CHECK(res.trace.back().step == cfg.steps);
    double mean_alpha = 0.0;
    for (const auto& row : res.trace) mean_alpha += row.alpha;
    mean_alpha /= static_cast<double>(res.trace.size());
    CHECK(res.mean_realized_alpha == doctest::Approx(mean_alpha).epsilon(1e-12));
}

TEST_CASE("a divergent step size aborts cleanly") {
    auto cfg = small_run();
    cfg.eta = 1e8;
    cfg.loss.family = losses::Family::sft;
    const auto res = E::train(cfg);
    CHECK(res.aborted);
    CHECK_FALSE(res.abort_reason.empty());
    CHECK(res.completed_steps < cfg.steps);
}

TEST_CASE("margin scans produce finite rows and track the probe step") {
    auto cfg = small_run();
    const auto pre = E::pretrain_reference(cfg);
    const auto rows = E::margin_scan(cfg, pre.params, pre.params, 8);
    REQUIRE(rows.size() == 8);
    for (const auto& r : rows) {
        CHECK(std::isfinite(r.margin));
        CHECK(std::isfinite(r.grad_norm));
        CHECK(std::isfinite(r.similarity_factor));
        CHECK(std::isfinite(r.pred_dlogp_w));
        CHECK(std::isfinite(r.meas_dlogp_w));
        // identical policy and reference mean zero margin everywhere
        CHECK(r.margin == 0.0);
    }
}

TEST_CASE("the geometry-fixed scan sweeps margins up and gradient norms down") {
    auto cfg = small_run();
    const auto pre = E::pretrain_reference(cfg);
    const auto rows = E::margin_scan_scaled(cfg, pre.params, pre.params, 12);
    REQUIRE(rows.size() == 12);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        CHECK(rows[i].margin > rows[i - 1].margin);
        CHECK(rows[i].grad_norm < rows[i - 1].grad_norm);
    }
    for (const auto& r : rows) CHECK(std::isfinite(r.similarity_factor));
}

TEST_CASE("a sweep is the same as training each value directly") {
    auto base = small_run();
    base.loss.family = losses::Family::pgdpo;
    const std::vector<double> values = {2.0, 20.0};
    const auto entries = E::sweep(base, E::SweepAxis::k1, values);
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].value == 2.0);
    CHECK(entries[1].value == 20.0);
    auto solo = base;
    solo.loss.k1 = 20.0;
    const auto direct = E::train(solo);
    CHECK(entries[1].result.final_params == direct.final_params);
    CHECK(entries[1].result.mean_realized_alpha == direct.mean_realized_alpha);
}
