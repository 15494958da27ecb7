// Flat key=value / JSON configuration for the experiment drivers. Unknown
// keys are rejected by name; loss.T always mirrors sched.T.
#pragma once

#include <stdexcept>
#include <string>

#include "prefdyn/experiments.hpp"

namespace prefdyn::config {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Config {
    experiments::RunConfig run;
    std::size_t diagnose_n_points = 50;
};

// Sets one dotted key; throws ConfigError naming the key when it is unknown
// or the value does not parse.
void apply_kv(Config& cfg, const std::string& key, const std::string& value);

// "key = value" lines with # comments; values may be double-quoted.
Config parse_text(const std::string& text);

// Flat JSON object with the same keys; null clears the force_* overrides.
Config parse_json(const std::string& text);

// Reads a file and dispatches on a leading '{'.
Config load(const std::string& path);

// All keys, sorted, numbers at full precision; parse_json(to_json(c)) == c.
std::string to_json(const Config& cfg);

}  // namespace prefdyn::config
