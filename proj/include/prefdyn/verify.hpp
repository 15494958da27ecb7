// Named self-checks with independent oracles: finite differences, long
// double recomputation, quadrature, and algebraic identities. The CLI's
// verify subcommand runs them all; the options exist so tests can prove a
// check actually detects the defect it guards against.
#pragma once

#include <string>
#include <vector>

namespace prefdyn::verify {

struct CheckOptions {
    // Negates the analytic preferred-likelihood partial before comparison;
    // dpo_partials_fd must fail when this is set.
    bool flip_dpo_partials_sign = false;
};

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;  // worst-case error or the first failure
};

const std::vector<std::string>& check_names();

// Throws std::invalid_argument for an unknown name.
CheckResult run_check(const std::string& name, const CheckOptions& opts = {});

std::vector<CheckResult> run_all(const CheckOptions& opts = {});

}  // namespace prefdyn::verify
