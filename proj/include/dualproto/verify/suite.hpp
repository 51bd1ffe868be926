// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0
//
// The property suite behind `dualproto verify` and the acceptance test.

#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dualproto/config.hpp"

namespace dualproto::verify {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
    /// Wall-clock budget in seconds; exceeding it fails the check.
    double budget = 0.0;
};

struct SuiteOptions {
    bool include_directional = true;
    std::size_t directional_seeds = 5;
    /// 0: all hardware threads.
    std::size_t workers = 0;
};

/// The desk profile with environment overrides ignored.
RunConfig desk_config();

CheckResult gradient_suite();
CheckResult fisher_oracle();
CheckResult fusion_oracle();
CheckResult averaging_oracle();
CheckResult partition_suite();
CheckResult equivalence_checks(std::size_t workers);
CheckResult determinism_check(std::size_t workers);
CheckResult directional_reproduction(std::size_t seeds, std::size_t workers);
CheckResult codec_suite();
CheckResult weighted_objective_check();

/// Runs every check, printing one "PASS"/"FAIL" line per check as it completes.
std::vector<CheckResult> run_suite(const SuiteOptions& options, std::ostream& out);
bool all_passed(std::span<const CheckResult> results);
std::string format_line(const CheckResult& r);

}  // namespace dualproto::verify
