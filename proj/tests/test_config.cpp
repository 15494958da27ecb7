#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "prefdyn/config.hpp"

using namespace prefdyn;
namespace C = prefdyn::config;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path, std::ios::binary);
    out << text;
    out.close();
    return path.string();
}

}  // namespace

TEST_CASE("defaults survive a json round trip byte for byte") {
    const C::Config cfg;
    const std::string once = C::to_json(cfg);
    const C::Config back = C::parse_json(once);
    CHECK(C::to_json(back) == once);
    CHECK(back.run.loss.T == back.run.sched_T);
}

TEST_CASE("every dotted key lands on its field") {
    C::Config cfg;
    C::apply_kv(cfg, "data.seed", "9");
    C::apply_kv(cfg, "data.n_pairs", "17");
    C::apply_kv(cfg, "data.candidates", "6");
    C::apply_kv(cfg, "data.mode", "near_duplicate");
    C::apply_kv(cfg, "data.duplicate_eps", "0.125");
    C::apply_kv(cfg, "data.condition_dim", "3");
    C::apply_kv(cfg, "data.data_dim", "4");
    C::apply_kv(cfg, "sched.T", "20");
    C::apply_kv(cfg, "sched.beta_min", "0.001");
    C::apply_kv(cfg, "sched.beta_max", "0.03");
    C::apply_kv(cfg, "net.hidden_width", "16");
    C::apply_kv(cfg, "net.hidden_layers", "3");
    C::apply_kv(cfg, "loss.family", "SLiC");
    C::apply_kv(cfg, "loss.beta", "0.7");
    C::apply_kv(cfg, "loss.K1", "3.5");
    C::apply_kv(cfg, "loss.K2", "4.5");
    C::apply_kv(cfg, "loss.eps_stab", "1e-5");
    C::apply_kv(cfg, "loss.delta_slic", "0.8");
    C::apply_kv(cfg, "loss.literal_denominator", "true");
    C::apply_kv(cfg, "loss.code_convention", "1");
    C::apply_kv(cfg, "loss.force_alpha", "0.25");
    C::apply_kv(cfg, "loss.force_gamma", "none");
    C::apply_kv(cfg, "run.eta", "0.002");
    C::apply_kv(cfg, "run.pretrain_eta", "0.01");
    C::apply_kv(cfg, "run.steps", "40");
    C::apply_kv(cfg, "run.pretrain_steps", "50");
    C::apply_kv(cfg, "run.eval_every", "20");
    C::apply_kv(cfg, "run.eval_set_size", "8");
    C::apply_kv(cfg, "run.seed", "123");
    C::apply_kv(cfg, "diagnose.n_points", "25");

    CHECK(cfg.run.data.seed == 9);
    CHECK(cfg.run.data.n_pairs == 17);
    CHECK(cfg.run.data.candidates_per_condition == 6);
    CHECK(cfg.run.data.mode == experiments::DataMode::near_duplicate);
    CHECK(cfg.run.data.duplicate_eps == 0.125);
    CHECK(cfg.run.data.condition_dim == 3);
    CHECK(cfg.run.data.data_dim == 4);
    CHECK(cfg.run.sched_T == 20);
    CHECK(cfg.run.loss.T == 20);  // mirrored
    CHECK(cfg.run.sched_beta_min == 0.001);
    CHECK(cfg.run.sched_beta_max == 0.03);
    CHECK(cfg.run.hidden_width == 16);
    CHECK(cfg.run.hidden_layers == 3);
    CHECK(cfg.run.loss.family == losses::Family::slic);
    CHECK(cfg.run.loss.beta == 0.7);
    CHECK(cfg.run.loss.k1 == 3.5);
    CHECK(cfg.run.loss.k2 == 4.5);
    CHECK(cfg.run.loss.eps_stab == 1e-5);
    CHECK(cfg.run.loss.delta_slic == 0.8);
    CHECK(cfg.run.loss.literal_denominator);
    CHECK(cfg.run.loss.code_convention);
    REQUIRE(cfg.run.loss.force_alpha.has_value());
    CHECK(*cfg.run.loss.force_alpha == 0.25);
    CHECK_FALSE(cfg.run.loss.force_gamma.has_value());
    CHECK(cfg.run.eta == 0.002);
    CHECK(cfg.run.pretrain_eta == 0.01);
    CHECK(cfg.run.steps == 40);
    CHECK(cfg.run.pretrain_steps == 50);
    CHECK(cfg.run.eval_every == 20);
    CHECK(cfg.run.eval_set_size == 8);
    CHECK(cfg.run.seed == 123);
    CHECK(cfg.diagnose_n_points == 25);
}

TEST_CASE("unknown keys are rejected by name") {
    C::Config cfg;
    try {
        C::apply_kv(cfg, "run.etaa", "0.1");
        FAIL("expected ConfigError");
    } catch (const C::ConfigError& e) {
        CHECK(std::string(e.what()).find("run.etaa") != std::string::npos);
    }
}

TEST_CASE("the mirrored timestep count cannot be set directly") {
    C::Config cfg;
    try {
        C::apply_kv(cfg, "loss.T", "10");
        FAIL("expected ConfigError");
    } catch (const C::ConfigError& e) {
        CHECK(std::string(e.what()).find("sched.T") != std::string::npos);
    }
}

TEST_CASE("bad values name the offending key") {
    C::Config cfg;
    CHECK_THROWS_AS(C::apply_kv(cfg, "data.n_pairs", "many"), C::ConfigError);
    CHECK_THROWS_AS(C::apply_kv(cfg, "loss.beta", "fast"), C::ConfigError);
    CHECK_THROWS_AS(C::apply_kv(cfg, "loss.family", "RLHF"), C::ConfigError);
    CHECK_THROWS_AS(C::apply_kv(cfg, "data.mode", "worst_of_k"), C::ConfigError);
    CHECK_THROWS_AS(C::apply_kv(cfg, "loss.literal_denominator", "maybe"), C::ConfigError);
}

TEST_CASE("text form handles comments quotes and spacing") {
    const std::string text =
        "# a comment line\n"
        "\n"
        "run.steps = 40   # trailing comment\n"
        "  run.eval_every=20\n"
        "loss.family = \"IPO\"\n"
        "data.mode = best_of_k\n";
    const C::Config cfg = C::parse_text(text);
    CHECK(cfg.run.steps == 40);
    CHECK(cfg.run.eval_every == 20);
    CHECK(cfg.run.loss.family == losses::Family::ipo);
    CHECK(cfg.run.data.mode == experiments::DataMode::best_of_k);
}

TEST_CASE("text lines need a key and an equals sign") {
    CHECK_THROWS_AS(C::parse_text("run.steps 40\n"), C::ConfigError);
    CHECK_THROWS_AS(C::parse_text("= 40\n"), C::ConfigError);
}

TEST_CASE("json accepts typed values and null overrides") {
    const std::string text = R"({
        "run.steps": 60,
        "run.eta": 0.005,
        "loss.literal_denominator": true,
        "loss.force_alpha": 0.5,
        "loss.force_gamma": null,
        "loss.family": "DPO"
    })";
    const C::Config cfg = C::parse_json(text);
    CHECK(cfg.run.steps == 60);
    CHECK(cfg.run.eta == 0.005);
    CHECK(cfg.run.loss.literal_denominator);
    REQUIRE(cfg.run.loss.force_alpha.has_value());
    CHECK(*cfg.run.loss.force_alpha == 0.5);
    CHECK_FALSE(cfg.run.loss.force_gamma.has_value());
    CHECK(cfg.run.loss.family == losses::Family::dpo);
}

TEST_CASE("json rejects non-object and nested payloads") {
    CHECK_THROWS_AS(C::parse_json("[1, 2]"), C::ConfigError);
    CHECK_THROWS_AS(C::parse_json("{\"run\": {\"steps\": 4}}"), C::ConfigError);
    CHECK_THROWS_AS(C::parse_json("{\"run.steps\": 4"), C::ConfigError);
}

TEST_CASE("a materially edited config round trips") {
    C::Config cfg;
    C::apply_kv(cfg, "loss.family", "PGDPO");
    C::apply_kv(cfg, "loss.force_alpha", "0.3");
    C::apply_kv(cfg, "sched.T", "12");
    C::apply_kv(cfg, "run.eta", "0.00125");
    const std::string once = C::to_json(cfg);
    CHECK(C::to_json(C::parse_json(once)) == once);
}

TEST_CASE("load dispatches on the leading brace") {
    const std::string text_path = write_temp(
        "prefdyn_cfg_text.cfg", "run.steps = 30\nrun.eval_every = 10\n");
    const std::string json_path = write_temp(
        "prefdyn_cfg_json.json", "{\"run.steps\": 30, \"run.eval_every\": 10}\n");
    const C::Config a = C::load(text_path);
    const C::Config b = C::load(json_path);
    CHECK(C::to_json(a) == C::to_json(b));
    CHECK(a.run.steps == 30);
    std::remove(text_path.c_str());
    std::remove(json_path.c_str());
    CHECK_THROWS_AS(C::load("/nonexistent/prefdyn.cfg"), C::ConfigError);
}
