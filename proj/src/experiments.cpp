#include "prefdyn/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "prefdyn/kernels.hpp"
#include "prefdyn/rng.hpp"

namespace prefdyn::experiments {

namespace {

using losses::LossConfig;
using losses::PreferencePair;
using losses::TransitionPoint;

double norm2(const Vec& v) { return std::sqrt(kernels::dot(v.data(), v.data(), v.size())); }

bool finite(double x) { return std::isfinite(x); }

std::vector<std::size_t> eligible_ts(const diffusion::Schedule& sched) {
    std::vector<std::size_t> ts;
    for (std::size_t t = 1; t <= sched.T; ++t)
        if (sched.sigma[t] > 0.0) ts.push_back(t);
    return ts;
}

// Condition vectors live in condition_dim while samples live in data_dim; the
// scoring center cycles the condition coordinates to fill data space.
Vec center_of(const Vec& c, std::size_t data_dim) {
    Vec center(data_dim);
    for (std::size_t i = 0; i < data_dim; ++i) center[i] = c[i % c.size()];
    return center;
}

PairSample sample_pair(Rng& rng, const DataConfig& cfg) {
    PairSample ps;
    ps.c = rng.uniform_vec(cfg.condition_dim, -1.0, 1.0);
    const Vec center = center_of(ps.c, cfg.data_dim);
    std::size_t best = 0, worst = 0;
    double best_score = 0.0, worst_score = 0.0;
    std::vector<Vec> cands(cfg.candidates_per_condition);
    for (std::size_t j = 0; j < cands.size(); ++j) {
        cands[j] = rng.gaussian_vec(cfg.data_dim);
        for (std::size_t i = 0; i < cfg.data_dim; ++i) cands[j][i] += center[i];
        const double score =
            -kernels::sqdist(cands[j].data(), center.data(), cfg.data_dim);
        if (j == 0 || score > best_score) {
            best = j;
            best_score = score;
        }
        if (j == 0 || score < worst_score) {
            worst = j;
            worst_score = score;
        }
    }
    ps.x0_w = cands[best];
    if (cfg.mode == DataMode::near_duplicate) {
        ps.x0_l = ps.x0_w;
        const Vec noise = rng.gaussian_vec(cfg.data_dim);
        for (std::size_t i = 0; i < cfg.data_dim; ++i)
            ps.x0_l[i] += cfg.duplicate_eps * noise[i];
    } else {
        ps.x0_l = cands[worst];
    }
    return ps;
}

Vec latent_at(const Vec& x0, std::size_t t, const Vec& eps,
              const diffusion::Schedule& sched) {
    return t == 0 ? x0 : diffusion::q_sample(x0, t, eps, sched);
}

// One forward-noise draw builds all four latents of the pair.
PreferencePair build_pair(const PairSample& ps, std::size_t t, const Vec& eps,
                          const diffusion::Schedule& sched) {
    PreferencePair pair;
    pair.t = t;
    pair.c = ps.c;
    pair.x_t_w = latent_at(ps.x0_w, t, eps, sched);
    pair.x_t_l = latent_at(ps.x0_l, t, eps, sched);
    pair.x_prev_w = latent_at(ps.x0_w, t - 1, eps, sched);
    pair.x_prev_l = latent_at(ps.x0_l, t - 1, eps, sched);
    return pair;
}

double transition_logp(const net::Arch& arch, const net::ParamVector& params,
                       const TransitionPoint& point, const diffusion::Schedule& sched) {
    const double tn = static_cast<double>(point.t) / static_cast<double>(sched.T);
    const Vec mean = diffusion::posterior_mean(
        point.x_t, point.t, net::forward(arch, params, point.x_t, tn, point.c), sched);
    return diffusion::transition_log_prob(point.x_prev, mean, sched.sigma[point.t]);
}

struct FamilyEval {
    double loss = 0.0;
    Vec grad;
    double r_w = 0.0, r_l = 0.0;
    double alpha = 0.5, gamma = 0.5;
};

FamilyEval eval_family(const net::Arch& arch, const net::ParamVector& params,
                       const net::ParamVector& ref_params, const PreferencePair& pair,
                       const LossConfig& cfg, const diffusion::Schedule& sched) {
    FamilyEval fe;
    switch (cfg.family) {
        case losses::Family::sft: {
            const auto out = losses::sft_loss(arch, params, pair.x_prev_w, pair.x_t_w,
                                              pair.t, pair.c, sched);
            fe.loss = out.loss;
            fe.grad = out.grad;
            break;
        }
        case losses::Family::dpo: {
            auto out = losses::dpo_loss(arch, params, ref_params, pair, cfg, sched);
            fe.loss = out.loss;
            fe.grad = std::move(out.grad);
            fe.r_w = out.rewards.r_w;
            fe.r_l = out.rewards.r_l;
            break;
        }
        case losses::Family::ipo: {
            auto out = losses::ipo_loss(arch, params, ref_params, pair, cfg, sched);
            fe.loss = out.loss;
            fe.grad = std::move(out.grad);
            fe.r_w = out.rewards.r_w;
            fe.r_l = out.rewards.r_l;
            break;
        }
        case losses::Family::slic: {
            const auto out = losses::slic_loss(arch, params, ref_params, pair,
                                               pair.x_prev_w, cfg, sched);
            fe.loss = out.loss;
            fe.grad = out.grad;
            break;
        }
        case losses::Family::pgdpo: {
            auto out = losses::pgdpo_loss(arch, params, ref_params, pair, cfg, sched);
            fe.loss = out.loss;
            fe.grad = std::move(out.grad);
            fe.r_w = out.rewards.r_w;
            fe.r_l = out.rewards.r_l;
            fe.alpha = out.alpha;
            fe.gamma = out.gamma;
            return fe;
        }
    }
    if (cfg.family == losses::Family::sft || cfg.family == losses::Family::slic) {
        fe.r_w = losses::implicit_reward(arch, params, ref_params, pair.x_prev_w,
                                         pair.x_t_w, pair.t, pair.c, sched);
        fe.r_l = losses::implicit_reward(arch, params, ref_params, pair.x_prev_l,
                                         pair.x_t_l, pair.t, pair.c, sched);
    }
    fe.alpha = losses::ars_alpha(fe.r_w, fe.r_l, cfg);
    fe.gamma = losses::ipr_gamma(fe.r_w, fe.r_l, cfg);
    return fe;
}

struct PretrainOutcome {
    PretrainResult result;
    bool ok = true;
    std::string reason;
};

PretrainOutcome pretrain_impl(const RunConfig& cfg,
                              const std::vector<PairSample>& pairs) {
    const net::Arch arch = cfg.arch();
    const diffusion::Schedule sched = cfg.schedule();
    PretrainOutcome out;
    out.result.params = net::init_params(arch, cfg.seed);

    struct Clean {
        const Vec* x0;
        const Vec* c;
    };
    std::vector<Clean> pool;
    pool.reserve(2 * pairs.size());
    for (const auto& p : pairs) {
        pool.push_back({&p.x0_w, &p.c});
        pool.push_back({&p.x0_l, &p.c});
    }

    Rng rng(cfg.seed + 1);
    struct Probe {
        std::size_t idx;
        std::size_t t;
        Vec eps;
    };
    const std::size_t n_probes = 128;
    std::vector<Probe> probes;
    probes.reserve(n_probes);
    for (std::size_t i = 0; i < n_probes; ++i)
        probes.push_back({rng.below(pool.size()),
                          1 + static_cast<std::size_t>(rng.below(sched.T)),
                          rng.gaussian_vec(cfg.data.data_dim)});

    const auto probe_mse = [&](const net::ParamVector& theta) {
        double total = 0.0;
        for (const auto& pr : probes) {
            const auto& cl = pool[pr.idx];
            const Vec x_t = diffusion::q_sample(*cl.x0, pr.t, pr.eps, sched);
            const double tn = static_cast<double>(pr.t) / static_cast<double>(sched.T);
            const Vec eps_hat = net::forward(arch, theta, x_t, tn, *cl.c);
            total += kernels::sqdist(eps_hat.data(), pr.eps.data(), eps_hat.size());
        }
        return total / static_cast<double>(probes.size());
    };

    out.result.mse_start = probe_mse(out.result.params);
    for (std::size_t step = 0; step < cfg.pretrain_steps; ++step) {
        const auto& cl = pool[rng.below(pool.size())];
        const std::size_t t = 1 + static_cast<std::size_t>(rng.below(sched.T));
        const Vec eps = rng.gaussian_vec(cfg.data.data_dim);
        const Vec x_t = diffusion::q_sample(*cl.x0, t, eps, sched);
        const double tn = static_cast<double>(t) / static_cast<double>(sched.T);
        const Vec eps_hat = net::forward(arch, out.result.params, x_t, tn, *cl.c);
        Vec up(eps_hat.size());
        double loss = 0.0;
        for (std::size_t i = 0; i < up.size(); ++i) {
            const double d = eps_hat[i] - eps[i];
            up[i] = 2.0 * d;
            loss += d * d;
        }
        if (!finite(loss)) {
            out.ok = false;
            out.reason = "pretrain: non-finite loss at step " + std::to_string(step);
            return out;
        }
        const Vec grad = net::vjp(arch, out.result.params, x_t, tn, *cl.c, up);
        kernels::axpy(-cfg.pretrain_eta, grad.data(), out.result.params.data(),
                      grad.size());
    }
    out.result.mse_end = probe_mse(out.result.params);
    if (!finite(out.result.mse_end)) {
        out.ok = false;
        out.reason = "pretrain: non-finite probe error after training";
    }
    return out;
}

}  // namespace

const char* data_mode_name(DataMode m) {
    return m == DataMode::best_of_k ? "best_of_k" : "near_duplicate";
}

std::optional<DataMode> parse_data_mode(const std::string& name) {
    if (name == "best_of_k") return DataMode::best_of_k;
    if (name == "near_duplicate") return DataMode::near_duplicate;
    return std::nullopt;
}

void DataConfig::validate() const {
    if (n_pairs < 1) throw std::invalid_argument("data: n_pairs must be >= 1");
    if (candidates_per_condition < 1)
        throw std::invalid_argument("data: candidates_per_condition must be >= 1");
    if (duplicate_eps < 0.0)
        throw std::invalid_argument("data: duplicate_eps must be >= 0");
    if (condition_dim < 1 || data_dim < 1)
        throw std::invalid_argument("data: dimensions must be >= 1");
}

std::vector<PairSample> gen_pairs(const DataConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    std::vector<PairSample> pairs;
    pairs.reserve(cfg.n_pairs);
    for (std::size_t i = 0; i < cfg.n_pairs; ++i) pairs.push_back(sample_pair(rng, cfg));
    return pairs;
}

void RunConfig::validate() const {
    loss.validate();
    data.validate();
    if (sched_T < 2)
        throw std::invalid_argument("run: sched_T must be >= 2 (t=1 has sigma 0)");
    if (loss.T != sched_T)
        throw std::invalid_argument("run: loss.T must equal sched_T after resolution");
    if (!(eta > 0.0) || !(pretrain_eta > 0.0))
        throw std::invalid_argument("run: learning rates must be > 0");
    if (steps < 1) throw std::invalid_argument("run: steps must be >= 1");
    if (eval_every < 1 || steps % eval_every != 0)
        throw std::invalid_argument("run: eval_every must divide steps");
    if (eval_set_size < 1)
        throw std::invalid_argument("run: eval_set_size must be >= 1");
    arch().validate();
}

net::Arch RunConfig::arch() const {
    return net::make_arch(data.data_dim, data.condition_dim, hidden_width, hidden_layers);
}

diffusion::Schedule RunConfig::schedule() const {
    return diffusion::make_ddpm_schedule(sched_T, sched_beta_min, sched_beta_max);
}

PretrainResult pretrain_reference(const RunConfig& cfg) {
    cfg.validate();
    const auto pairs = gen_pairs(cfg.data);
    auto out = pretrain_impl(cfg, pairs);
    if (!out.ok) throw std::runtime_error(out.reason);
    return std::move(out.result);
}

RunResult train(const RunConfig& cfg) {
    cfg.validate();
    const net::Arch arch = cfg.arch();
    const diffusion::Schedule sched = cfg.schedule();
    const auto pairs = gen_pairs(cfg.data);
    const auto ts = eligible_ts(sched);

    RunResult res;
    {
        auto pre = pretrain_impl(cfg, pairs);
        res.pretrain_mse_start = pre.result.mse_start;
        res.pretrain_mse_end = pre.result.mse_end;
        if (!pre.ok) {
            res.aborted = true;
            res.abort_reason = pre.reason;
            res.ref_params = std::move(pre.result.params);
            res.final_params = res.ref_params;
            return res;
        }
        res.ref_params = std::move(pre.result.params);
    }
    net::ParamVector theta = res.ref_params;

    // Frozen evaluation set: (pair, timestep, shared noise) triples.
    std::vector<PreferencePair> eval_pairs;
    {
        Rng rng(cfg.seed + 3);
        eval_pairs.reserve(cfg.eval_set_size);
        for (std::size_t i = 0; i < cfg.eval_set_size; ++i) {
            const auto& ps = pairs[rng.below(pairs.size())];
            const std::size_t t = ts[rng.below(ts.size())];
            eval_pairs.push_back(build_pair(ps, t, rng.gaussian_vec(cfg.data.data_dim), sched));
        }
    }

    double last_gamma_adv = 0.0;
    std::size_t gamma_pos = 0;
    double alpha_sum = 0.0, gamma_sum = 0.0;
    const bool is_pgdpo = cfg.loss.family == losses::Family::pgdpo;

    const auto record_eval = [&](std::size_t step) {
        EvalRecord rec;
        rec.step = step;
        double lw = 0.0, ll = 0.0, margin = 0.0, alpha = 0.0, gamma = 0.0;
        for (const auto& ep : eval_pairs) {
            lw += transition_logp(arch, theta, ep.chosen(), sched);
            ll += transition_logp(arch, theta, ep.rejected(), sched);
            const double r_w = losses::implicit_reward(arch, theta, res.ref_params,
                                                       ep.x_prev_w, ep.x_t_w, ep.t,
                                                       ep.c, sched);
            const double r_l = losses::implicit_reward(arch, theta, res.ref_params,
                                                       ep.x_prev_l, ep.x_t_l, ep.t,
                                                       ep.c, sched);
            margin += r_w - r_l;
            alpha += losses::ars_alpha(r_w, r_l, cfg.loss);
            gamma += losses::ipr_gamma(r_w, r_l, cfg.loss);
        }
        const double n = static_cast<double>(eval_pairs.size());
        rec.chosen_logp = lw / n;
        rec.rejected_logp = ll / n;
        rec.margin = margin / n;
        rec.alpha = alpha / n;
        rec.gamma = gamma / n;
        rec.grad_norm =
            norm2(eval_family(arch, theta, res.ref_params, eval_pairs[0], cfg.loss, sched).grad);
        rec.gamma_advantage = last_gamma_adv;
        rec.frac_gamma_positive =
            res.completed_steps == 0
                ? 0.0
                : static_cast<double>(gamma_pos) / static_cast<double>(res.completed_steps);
        res.records.push_back(rec);
    };

    record_eval(0);

    Rng rng(cfg.seed + 2);
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        const auto& ps = pairs[rng.below(pairs.size())];
        const std::size_t t = ts[rng.below(ts.size())];
        const PreferencePair pair =
            build_pair(ps, t, rng.gaussian_vec(cfg.data.data_dim), sched);

        const FamilyEval fe =
            eval_family(arch, theta, res.ref_params, pair, cfg.loss, sched);
        const double gn = norm2(fe.grad);
        if (!finite(fe.loss) || !finite(gn)) {
            res.aborted = true;
            res.abort_reason = "train: non-finite loss or gradient at step " +
                               std::to_string(step);
            break;
        }
        if (is_pgdpo) {
            last_gamma_adv = dynamics::gamma_advantage(arch, theta, res.ref_params,
                                                       pair, cfg.loss, cfg.eta, sched);
            if (last_gamma_adv > 0.0) ++gamma_pos;
        }
        alpha_sum += fe.alpha;
        gamma_sum += fe.gamma;
        kernels::axpy(-cfg.eta, fe.grad.data(), theta.data(), theta.size());
        res.completed_steps = step;
        if (cfg.record_trace)
            res.trace.push_back({step, fe.r_w - fe.r_l, fe.alpha, fe.gamma, last_gamma_adv});
        if (step % cfg.eval_every == 0) record_eval(step);
    }

    res.final_params = theta;
    if (res.completed_steps > 0) {
        const double n = static_cast<double>(res.completed_steps);
        res.mean_realized_alpha = alpha_sum / n;
        res.mean_realized_gamma = gamma_sum / n;
        res.frac_gamma_positive = static_cast<double>(gamma_pos) / n;
    }
    Vec diff = theta;
    kernels::axpy(-1.0, res.ref_params.data(), diff.data(), diff.size());
    res.final_param_dist = norm2(diff);
    return res;
}

std::vector<ScanRow> margin_scan(const RunConfig& cfg, const net::ParamVector& params,
                                 const net::ParamVector& ref_params,
                                 std::size_t n_points) {
    cfg.validate();
    const net::Arch arch = cfg.arch();
    const diffusion::Schedule sched = cfg.schedule();
    const auto ts = eligible_ts(sched);
    Rng rng(cfg.seed + 4);
    std::vector<ScanRow> rows;
    rows.reserve(n_points);
    for (std::size_t j = 0; j < n_points; ++j) {
        DataConfig probe_cfg = cfg.data;
        probe_cfg.mode = j % 2 == 0 ? DataMode::best_of_k : DataMode::near_duplicate;
        const PairSample ps = sample_pair(rng, probe_cfg);
        const std::size_t t = ts[rng.below(ts.size())];
        const PreferencePair pair =
            build_pair(ps, t, rng.gaussian_vec(cfg.data.data_dim), sched);

        const auto dpo = losses::dpo_loss(arch, params, ref_params, pair, cfg.loss, sched);
        ScanRow row;
        row.margin = dpo.rewards.margin();
        row.grad_norm = norm2(dpo.grad);
        net::ParamVector stepped = params;
        kernels::axpy(-cfg.eta, dpo.grad.data(), stepped.data(), stepped.size());
        row.meas_dlogp_w = dynamics::measured_dlogp(arch, params, stepped, pair.chosen(), sched);
        row.meas_dlogp_l = dynamics::measured_dlogp(arch, params, stepped, pair.rejected(), sched);
        row.similarity_factor = row.meas_dlogp_w - row.meas_dlogp_l;
        row.pred_dlogp_w = dynamics::predicted_dlogp_dpo(arch, params, ref_params,
                                                         pair.chosen(), pair, cfg.loss,
                                                         cfg.eta, sched);
        row.pred_dlogp_l = dynamics::predicted_dlogp_dpo(arch, params, ref_params,
                                                         pair.rejected(), pair, cfg.loss,
                                                         cfg.eta, sched);
        rows.push_back(row);
    }
    return rows;
}

std::vector<ScanRow> margin_scan_scaled(const RunConfig& cfg,
                                        const net::ParamVector& params,
                                        const net::ParamVector& ref_params,
                                        std::size_t n_points) {
    cfg.validate();
    if (n_points < 2)
        throw std::invalid_argument("margin_scan_scaled: need at least 2 points");
    const net::Arch arch = cfg.arch();
    const diffusion::Schedule sched = cfg.schedule();
    const auto ts = eligible_ts(sched);
    Rng rng(cfg.seed + 5);
    DataConfig probe_cfg = cfg.data;
    probe_cfg.mode = DataMode::best_of_k;
    const PairSample ps = sample_pair(rng, probe_cfg);
    const std::size_t t = ts[ts.size() / 2];
    const PreferencePair pair =
        build_pair(ps, t, rng.gaussian_vec(cfg.data.data_dim), sched);

    const auto gw = losses::transition_logp_grad(arch, params, pair.chosen(), sched);
    const auto gl = losses::transition_logp_grad(arch, params, pair.rejected(), sched);
    Vec dir = gw.grad;  // d(margin)/d(theta)
    kernels::axpy(-1.0, gl.grad.data(), dir.data(), dir.size());
    const double dir_norm = norm2(dir);

    const Vec g_w = dynamics::g_term(arch, params, pair.x_prev_w, pair.x_t_w, pair.t,
                                     pair.c, sched);
    const Vec g_l = dynamics::g_term(arch, params, pair.x_prev_l, pair.x_t_l, pair.t,
                                     pair.c, sched);
    const Mat k_ww = dynamics::ntk_kernel(arch, params, pair.x_t_w, pair.t, pair.c,
                                          pair.x_t_w, pair.t, pair.c, sched);
    const Mat k_wl = dynamics::ntk_kernel(arch, params, pair.x_t_w, pair.t, pair.c,
                                          pair.x_t_l, pair.t, pair.c, sched);
    const Mat k_ll = dynamics::ntk_kernel(arch, params, pair.x_t_l, pair.t, pair.c,
                                          pair.x_t_l, pair.t, pair.c, sched);
    auto quad = [](const Vec& a, const Mat& k, const Vec& b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < k.rows; ++i)
            acc += a[i] * kernels::dot(k.row(i), b.data(), k.cols);
        return acc;
    };
    // g_l^T K(l,w) g_w equals g_w^T K(w,l) g_l, so one cross term serves both.
    const double cross = quad(g_w, k_wl, g_l);
    const double bracket_w = quad(g_w, k_ww, g_w) - cross;
    const double bracket_l = cross - quad(g_l, k_ll, g_l);

    const double bt = cfg.loss.beta * static_cast<double>(cfg.loss.T);
    std::vector<ScanRow> rows;
    rows.reserve(n_points);
    const double z_lo = -4.0, z_hi = 8.0;
    for (std::size_t j = 0; j < n_points; ++j) {
        const double z = z_lo + (z_hi - z_lo) * static_cast<double>(j) /
                                    static_cast<double>(n_points - 1);
        const double coef = bt * (1.0 - losses::sigmoid(z));
        ScanRow row;
        row.margin = z / bt;
        row.grad_norm = coef * dir_norm;
        row.pred_dlogp_w = cfg.eta * coef * bracket_w;
        row.pred_dlogp_l = cfg.eta * coef * bracket_l;
        net::ParamVector stepped = params;
        kernels::axpy(cfg.eta * coef, dir.data(), stepped.data(), stepped.size());
        row.meas_dlogp_w = dynamics::measured_dlogp(arch, params, stepped, pair.chosen(), sched);
        row.meas_dlogp_l = dynamics::measured_dlogp(arch, params, stepped, pair.rejected(), sched);
        row.similarity_factor = row.meas_dlogp_w - row.meas_dlogp_l;
        rows.push_back(row);
    }
    return rows;
}

const char* sweep_axis_name(SweepAxis a) {
    switch (a) {
        case SweepAxis::k1: return "K1";
        case SweepAxis::k2: return "K2";
        case SweepAxis::beta: return "beta";
    }
    return "unknown";
}

std::optional<SweepAxis> parse_sweep_axis(const std::string& name) {
    if (name == "K1") return SweepAxis::k1;
    if (name == "K2") return SweepAxis::k2;
    if (name == "beta") return SweepAxis::beta;
    return std::nullopt;
}

namespace {

std::size_t sweep_thread_cap() {
    if (const char* env = std::getenv("PREFDYN_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<std::size_t>(std::min(v, 64L));
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

}  // namespace

std::vector<SweepEntry> sweep(const RunConfig& base, SweepAxis axis,
                              const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("sweep: no values given");
    std::vector<SweepEntry> entries(values.size());
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(values.size());
    const std::size_t n_threads = std::min(sweep_thread_cap(), values.size());
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= values.size()) return;
            try {
                RunConfig rc = base;
                switch (axis) {
                    case SweepAxis::k1: rc.loss.k1 = values[i]; break;
                    case SweepAxis::k2: rc.loss.k2 = values[i]; break;
                    case SweepAxis::beta: rc.loss.beta = values[i]; break;
                }
                entries[i].value = values[i];
                entries[i].result = train(rc);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);
    return entries;
}

}  // namespace prefdyn::experiments
