#include "prefdyn/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace prefdyn::config {

namespace {

using json = nlohmann::json;

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* want) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value +
                      "' as " + want);
}

double parse_f64(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (end != value.c_str() + value.size() || value.empty())
        bad_value(key, value, "a number");
    return v;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (end != value.c_str() + value.size() || value.empty() ||
        value.find('-') != std::string::npos)
        bad_value(key, value, "a non-negative integer");
    return static_cast<std::size_t>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    bad_value(key, value, "a boolean");
}

std::optional<double> parse_opt_f64(const std::string& key, const std::string& value) {
    if (value == "none" || value == "null") return std::nullopt;
    return parse_f64(key, value);
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
        return s.substr(1, s.size() - 2);
    return s;
}

}  // namespace

void apply_kv(Config& cfg, const std::string& key, const std::string& value) {
    auto& run = cfg.run;
    auto& loss = run.loss;
    auto& data = run.data;
    if (key == "data.seed") {
        data.seed = parse_count(key, value);
    } else if (key == "data.n_pairs") {
        data.n_pairs = parse_count(key, value);
    } else if (key == "data.candidates") {
        data.candidates_per_condition = parse_count(key, value);
    } else if (key == "data.mode") {
        const auto m = experiments::parse_data_mode(value);
        if (!m) bad_value(key, value, "'best_of_k' or 'near_duplicate'");
        data.mode = *m;
    } else if (key == "data.duplicate_eps") {
        data.duplicate_eps = parse_f64(key, value);
    } else if (key == "data.condition_dim") {
        data.condition_dim = parse_count(key, value);
    } else if (key == "data.data_dim") {
        data.data_dim = parse_count(key, value);
    } else if (key == "sched.T") {
        run.sched_T = parse_count(key, value);
        loss.T = run.sched_T;
    } else if (key == "sched.beta_min") {
        run.sched_beta_min = parse_f64(key, value);
    } else if (key == "sched.beta_max") {
        run.sched_beta_max = parse_f64(key, value);
    } else if (key == "net.hidden_width") {
        run.hidden_width = parse_count(key, value);
    } else if (key == "net.hidden_layers") {
        run.hidden_layers = parse_count(key, value);
    } else if (key == "loss.family") {
        const auto f = losses::parse_family(value);
        if (!f) bad_value(key, value, "one of SFT, DPO, IPO, SLiC, PGDPO");
        loss.family = *f;
    } else if (key == "loss.beta") {
        loss.beta = parse_f64(key, value);
    } else if (key == "loss.K1") {
        loss.k1 = parse_f64(key, value);
    } else if (key == "loss.K2") {
        loss.k2 = parse_f64(key, value);
    } else if (key == "loss.eps_stab") {
        loss.eps_stab = parse_f64(key, value);
    } else if (key == "loss.delta_slic") {
        loss.delta_slic = parse_f64(key, value);
    } else if (key == "loss.literal_denominator") {
        loss.literal_denominator = parse_bool(key, value);
    } else if (key == "loss.code_convention") {
        loss.code_convention = parse_bool(key, value);
    } else if (key == "loss.force_alpha") {
        loss.force_alpha = parse_opt_f64(key, value);
    } else if (key == "loss.force_gamma") {
        loss.force_gamma = parse_opt_f64(key, value);
    } else if (key == "run.eta") {
        run.eta = parse_f64(key, value);
    } else if (key == "run.pretrain_eta") {
        run.pretrain_eta = parse_f64(key, value);
    } else if (key == "run.steps") {
        run.steps = parse_count(key, value);
    } else if (key == "run.pretrain_steps") {
        run.pretrain_steps = parse_count(key, value);
    } else if (key == "run.eval_every") {
        run.eval_every = parse_count(key, value);
    } else if (key == "run.eval_set_size") {
        run.eval_set_size = parse_count(key, value);
    } else if (key == "run.seed") {
        run.seed = parse_count(key, value);
    } else if (key == "diagnose.n_points") {
        cfg.diagnose_n_points = parse_count(key, value);
    } else if (key == "loss.T") {
        throw ConfigError("unknown config key 'loss.T' (set sched.T instead)");
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

Config parse_text(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = unquote(trim(line.substr(eq + 1)));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        apply_kv(cfg, key, value);
    }
    return cfg;
}

Config parse_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config JSON: expected a flat object");
    Config cfg;
    for (const auto& [key, val] : j.items()) {
        std::string value;
        if (val.is_string())
            value = val.get<std::string>();
        else if (val.is_boolean())
            value = val.get<bool>() ? "true" : "false";
        else if (val.is_null())
            value = "none";
        else if (val.is_number())
            value = val.dump();  // shortest round-trip form
        else
            throw ConfigError("config key '" + key + "': unsupported JSON value type");
        apply_kv(cfg, key, value);
    }
    return cfg;
}

Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const std::size_t first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') return parse_json(text);
    return parse_text(text);
}

std::string to_json(const Config& cfg) {
    const auto& run = cfg.run;
    const auto& loss = run.loss;
    const auto& data = run.data;
    json j;
    j["data.seed"] = data.seed;
    j["data.n_pairs"] = data.n_pairs;
    j["data.candidates"] = data.candidates_per_condition;
    j["data.mode"] = experiments::data_mode_name(data.mode);
    j["data.duplicate_eps"] = data.duplicate_eps;
    j["data.condition_dim"] = data.condition_dim;
    j["data.data_dim"] = data.data_dim;
    j["sched.T"] = run.sched_T;
    j["sched.beta_min"] = run.sched_beta_min;
    j["sched.beta_max"] = run.sched_beta_max;
    j["net.hidden_width"] = run.hidden_width;
    j["net.hidden_layers"] = run.hidden_layers;
    j["loss.family"] = losses::family_name(loss.family);
    j["loss.beta"] = loss.beta;
    j["loss.K1"] = loss.k1;
    j["loss.K2"] = loss.k2;
    j["loss.eps_stab"] = loss.eps_stab;
    j["loss.delta_slic"] = loss.delta_slic;
    j["loss.literal_denominator"] = loss.literal_denominator;
    j["loss.code_convention"] = loss.code_convention;
    if (loss.force_alpha)
        j["loss.force_alpha"] = *loss.force_alpha;
    else
        j["loss.force_alpha"] = nullptr;
    if (loss.force_gamma)
        j["loss.force_gamma"] = *loss.force_gamma;
    else
        j["loss.force_gamma"] = nullptr;
    j["run.eta"] = run.eta;
    j["run.pretrain_eta"] = run.pretrain_eta;
    j["run.steps"] = run.steps;
    j["run.pretrain_steps"] = run.pretrain_steps;
    j["run.eval_every"] = run.eval_every;
    j["run.eval_set_size"] = run.eval_set_size;
    j["run.seed"] = run.seed;
    j["diagnose.n_points"] = cfg.diagnose_n_points;
    return j.dump(2) + "\n";
}

}  // namespace prefdyn::config
