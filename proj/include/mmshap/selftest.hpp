#pragma once

#include <string>
#include <vector>

namespace mmshap {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Quick synthetic-oracle property suite: closed forms, efficiency, dummy,
/// symmetry and collapse detection. Needs no external oracle.
std::vector<CheckResult> run_selftest();

}  // namespace mmshap
